"""Candidate fusion and weighted multi-model cosine reranking.

Per-query BM25 lists are merged keeping only the first instance of each
passage; the merged candidates are then re-scored as the model-averaged,
weight-combined cosine similarity to every passage query.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

from .clients import ClientError, EmbedClient, Embedding, cosine
from .index import InvertedIndex, ScoredDoc, search
from .pqgen import PassageQuery
from .ptkb import PtkbSelection

logger = logging.getLogger(__name__)

EMBED_BATCH_SIZE = 64


@dataclass(frozen=True)
class CandidateSet:
    ids: tuple[str, ...]
    provenance: dict[str, int]  # passage id -> index of the query that found it first


@dataclass(frozen=True)
class RerankConfig:
    per_query_k: int = 5000
    final_k: int = 1000
    embedders: tuple[str, ...] = ("mock:256",)

    def __post_init__(self) -> None:
        if self.final_k < 1:
            raise ValueError("final_k must be >= 1")
        if not self.embedders:
            raise ValueError("at least one embedder is required")


def first_instance_merge(id_lists: Sequence[Sequence[str]]) -> CandidateSet:
    """Merge per-query id lists, keeping each id's first occurrence only."""
    ids: list[str] = []
    provenance: dict[str, int] = {}
    for query_index, id_list in enumerate(id_lists):
        for doc_id in id_list:
            if doc_id not in provenance:
                provenance[doc_id] = query_index
                ids.append(doc_id)
    return CandidateSet(ids=tuple(ids), provenance=provenance)


def fused_retrieve(index: InvertedIndex, pqs: Sequence[PassageQuery], per_query_k: int = 5000) -> CandidateSet:
    """Run BM25 per query and merge, saving only each passage's first instance."""
    if not pqs:
        raise ValueError("at least one passage query is required")
    return first_instance_merge(
        [[hit.doc_id for hit in search(index, pq.text, per_query_k)] for pq in pqs]
    )


def normalize_weights(weights: Sequence[float]) -> list[float]:
    """Scale weights to sum to 1; an all-zero vector becomes uniform."""
    if not weights:
        raise ValueError("weights must be a non-empty list")
    if any(w < 0 for w in weights):
        raise ValueError("weights must be >= 0")
    total = sum(weights)
    if total == 0.0:
        return [1.0 / len(weights)] * len(weights)
    return [w / total for w in weights]


def weighted_rerank_adapter(selection: PtkbSelection, pqs: Sequence[PassageQuery]) -> list[float]:
    """Raw weights per paper rule (combined/short/long get 1, per-statement
    queries their relevance score), normalized to sum to 1."""
    raw: list[float] = []
    for pq in pqs:
        if pq.kind == "per_ptkb":
            raw.append(selection.score_of(pq.source_ptkb_id))
        else:
            raw.append(1.0)
    return normalize_weights(raw)


def _embed_filtered(
    embedder: EmbedClient, ids: Sequence[str], texts: Mapping[str, str]
) -> dict[str, Embedding]:
    """Embed candidate texts in batches; failures drop passages, not the turn."""
    vectors: dict[str, Embedding] = {}
    batch: list[str] = []

    def flush() -> None:
        if not batch:
            return
        try:
            embeddings = embedder.embed([texts[doc_id] for doc_id in batch])
        except ClientError:
            for doc_id in batch:
                try:
                    vectors[doc_id] = embedder.embed([texts[doc_id]])[0]
                except ClientError as exc:
                    logger.warning("dropping passage %s: embedding failed (%s)", doc_id, exc)
        else:
            vectors.update(zip(batch, embeddings))
        batch.clear()

    for doc_id in ids:
        if doc_id not in texts:
            logger.warning("dropping passage %s: no text available", doc_id)
            continue
        batch.append(doc_id)
        if len(batch) >= EMBED_BATCH_SIZE:
            flush()
    flush()
    return vectors


def rerank(
    candidates: CandidateSet,
    pqs: Sequence[PassageQuery],
    embedders: Sequence[EmbedClient],
    passage_texts: Mapping[str, str],
    config: RerankConfig = RerankConfig(),
    weights: Sequence[float] | None = None,
) -> list[ScoredDoc]:
    """Score candidates as (1/M) * sum over models of the weighted cosine to
    each query, then return the top ``final_k`` (ties broken by id)."""
    if not embedders:
        raise ValueError("at least one embedder is required")
    if not pqs:
        raise ValueError("at least one passage query is required")
    if not candidates.ids:
        return []
    normalized = normalize_weights(list(weights) if weights is not None else [pq.weight for pq in pqs])
    if len(normalized) != len(pqs):
        raise ValueError("one weight per passage query is required")

    totals: dict[str, float] = {doc_id: 0.0 for doc_id in candidates.ids}
    dropped: set[str] = set()
    for embedder in embedders:
        query_vectors = embedder.embed([pq.text for pq in pqs])
        doc_vectors = _embed_filtered(embedder, candidates.ids, passage_texts)
        for doc_id in candidates.ids:
            vector = doc_vectors.get(doc_id)
            if vector is None:
                dropped.add(doc_id)
                continue
            totals[doc_id] += sum(
                weight * cosine(vector, query_vector)
                for weight, query_vector in zip(normalized, query_vectors)
            )
    model_count = len(embedders)
    ranked = sorted(
        ((totals[doc_id] / model_count, doc_id) for doc_id in candidates.ids if doc_id not in dropped),
        key=lambda pair: (-pair[0], pair[1]),
    )
    return [ScoredDoc(doc_id=doc_id, score=score) for score, doc_id in ranked[: config.final_k]]
