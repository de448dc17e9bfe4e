"""Conversational passage retrieval: passage-query generation, BM25
retrieval with first-instance fusion, weighted multi-model embedding
reranking, and TREC-style evaluation."""

from .clients import (
    ChatMessage,
    ChatRequest,
    ClientConfig,
    Embedding,
    MockChatClient,
    MockEmbedClient,
    cosine,
    mock_embed,
)
from .corpus import ChunkParams, Passage, SourceDocument, chunk_document, load_passages, split_sentences
from .evaluation import average_precision, evaluate_run, ndcg_at_k, p_at_k, parse_qrels, parse_run, recall_at_k
from .index import Bm25Params, InvertedIndex, ScoredDoc, build_index, load_index, save_index, search, tokenize
from .pipeline import RunConfig, build_clients, run_topics, run_turn
from .pqgen import PassageQuery, PromptTemplate, load_template, render_prompt
from .ptkb import PtkbJudgment, PtkbSelection, classify_ptkb, select_relevant
from .ranking import CandidateSet, RerankConfig, fused_retrieve, normalize_weights, rerank

__version__ = "0.1.0"

__all__ = [
    "Bm25Params",
    "CandidateSet",
    "ChatMessage",
    "ChatRequest",
    "ChunkParams",
    "ClientConfig",
    "Embedding",
    "InvertedIndex",
    "MockChatClient",
    "MockEmbedClient",
    "Passage",
    "PassageQuery",
    "PromptTemplate",
    "PtkbJudgment",
    "PtkbSelection",
    "RerankConfig",
    "RunConfig",
    "ScoredDoc",
    "SourceDocument",
    "average_precision",
    "build_clients",
    "build_index",
    "chunk_document",
    "classify_ptkb",
    "cosine",
    "evaluate_run",
    "fused_retrieve",
    "load_index",
    "load_passages",
    "load_template",
    "mock_embed",
    "ndcg_at_k",
    "normalize_weights",
    "p_at_k",
    "parse_qrels",
    "parse_run",
    "recall_at_k",
    "render_prompt",
    "rerank",
    "run_topics",
    "run_turn",
    "save_index",
    "search",
    "select_relevant",
    "split_sentences",
    "tokenize",
]
