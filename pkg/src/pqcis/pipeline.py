"""Turn and run orchestration: history, statement scoring, passage-query
generation, retrieval, reranking, and response generation, plus the TREC
run / predictions / responses writers."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .clients import (
    ChatClient,
    ClientConfig,
    ClientError,
    EmbedClient,
    HttpChatClient,
    HttpEmbedClient,
    MockChatClient,
    MockEmbedClient,
    load_mock_script,
    system_request,
)
from .conversation import ConversationState, Topic, Turn, advance, render_history
from .index import InvertedIndex, ScoredDoc
from .pqgen import (
    PassageQuery,
    clarify_utterance,
    gen_long_pq,
    gen_short_pq,
    gen_weighted_pqs,
    load_template,
    ptkb_statements_string,
    render_prompt,
)
from .ptkb import PtkbSelection, classify_ptkb, cot_context, select_relevant
from .ranking import RerankConfig, fused_retrieve, rerank, weighted_rerank_adapter

logger = logging.getLogger(__name__)

VARIANTS = ("weighted_rerank", "short_long")
FALLBACK_RESPONSE = "I could not find relevant information for this request."
RESPONSE_PASSAGES = 3
LLM_ENDPOINT_ENV = "PQCIS_LLM_ENDPOINT"
EMBED_ENDPOINT_ENV = "PQCIS_EMBED_ENDPOINT"

# Positional fallback dims for mock embedders configured by name only.
_MOCK_DIMS = (256, 384, 512, 640)


class PipelineConfigError(ValueError):
    """Invalid run configuration."""


class TurnError(RuntimeError):
    """A turn aborted; carries the pipeline step that failed."""

    def __init__(self, step: str, cause: Exception) -> None:
        super().__init__(f"turn aborted at step {step!r}: {cause}")
        self.step = step
        self.cause = cause


@dataclass(frozen=True)
class RunConfig:
    variant: str
    run_tag: str
    cot_enabled: bool = False
    long_style_menu: bool = True
    ptkb_threshold: float = 0.5
    mock_mode: bool = False
    rerank: RerankConfig = field(default_factory=RerankConfig)
    llm: Optional[ClientConfig] = None
    embedding_clients: Mapping[str, ClientConfig] = field(default_factory=dict)
    templates_dir: Optional[Path] = None
    qid_template: str = "{topic}_{turn}"

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise PipelineConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not self.run_tag or any(ch.isspace() for ch in self.run_tag):
            raise PipelineConfigError("run_tag must be non-empty and contain no whitespace")
        if "{topic}" not in self.qid_template or "{turn}" not in self.qid_template:
            raise PipelineConfigError("qid_template needs both {topic} and {turn} placeholders")


def _client_config_from_dict(raw: Mapping, path_hint: str) -> ClientConfig:
    try:
        return ClientConfig(
            endpoint=raw["endpoint"],
            model_name=raw["model_name"],
            timeout=float(raw.get("timeout", 30.0)),
            max_attempts=int(raw.get("max_attempts", 3)),
            max_in_flight=int(raw.get("max_in_flight", 4)),
            backoff=float(raw.get("backoff", 0.5)),
        )
    except KeyError as exc:
        raise PipelineConfigError(f"{path_hint}: missing client field {exc.args[0]!r}") from exc


def load_run_config(path: str | Path) -> RunConfig:
    """Load a run configuration file (UTF-8 JSON mirroring RunConfig)."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    rerank_raw = raw.get("rerank", {})
    rerank_config = RerankConfig(
        per_query_k=int(rerank_raw.get("per_query_k", 5000)),
        final_k=int(rerank_raw.get("final_k", 1000)),
        embedders=tuple(rerank_raw.get("embedders", ("mock:256",))),
    )
    llm = _client_config_from_dict(raw["llm"], "llm") if "llm" in raw else None
    embedding_clients = {
        name: _client_config_from_dict(cfg, f"embedding_clients.{name}")
        for name, cfg in raw.get("embedding_clients", {}).items()
    }
    templates_dir = Path(raw["templates_dir"]) if "templates_dir" in raw else None
    return RunConfig(
        variant=raw["variant"],
        run_tag=raw["run_tag"],
        cot_enabled=bool(raw.get("cot_enabled", False)),
        long_style_menu=bool(raw.get("long_style_menu", True)),
        ptkb_threshold=float(raw.get("ptkb_threshold", 0.5)),
        mock_mode=bool(raw.get("mock_mode", False)),
        rerank=rerank_config,
        llm=llm,
        embedding_clients=embedding_clients,
        templates_dir=templates_dir,
        qid_template=str(raw.get("qid_template", "{topic}_{turn}")),
    )


@dataclass
class ClientBundle:
    llm: ChatClient
    embedders: list[EmbedClient]


def _mock_dim_for(name: str, position: int) -> int:
    if ":" in name:
        tail = name.rsplit(":", 1)[1]
        if tail.isdigit():
            return int(tail)
    return _MOCK_DIMS[position % len(_MOCK_DIMS)]


def build_clients(config: RunConfig, script_path: str | Path | None = None) -> ClientBundle:
    """Construct the chat and embedding clients a run needs.

    Mock mode wires scripted/hashed clients and touches no network; live
    mode builds HTTP clients, honoring the endpoint override env vars.
    """
    if config.mock_mode:
        script = load_mock_script(script_path) if script_path else {}
        llm: ChatClient = MockChatClient(script)
        embedders: list[EmbedClient] = [
            MockEmbedClient(dim=_mock_dim_for(name, i)) for i, name in enumerate(config.rerank.embedders)
        ]
        return ClientBundle(llm=llm, embedders=embedders)
    if config.llm is None:
        raise PipelineConfigError("live runs need an llm client config (or use mock_mode)")
    llm_config = config.llm
    if os.environ.get(LLM_ENDPOINT_ENV):
        llm_config = ClientConfig(
            endpoint=os.environ[LLM_ENDPOINT_ENV],
            model_name=llm_config.model_name,
            timeout=llm_config.timeout,
            max_attempts=llm_config.max_attempts,
            max_in_flight=llm_config.max_in_flight,
            backoff=llm_config.backoff,
        )
    embedders = []
    for name in config.rerank.embedders:
        if name not in config.embedding_clients:
            raise PipelineConfigError(f"no embedding client configured for {name!r}")
        embed_config = config.embedding_clients[name]
        if os.environ.get(EMBED_ENDPOINT_ENV):
            embed_config = ClientConfig(
                endpoint=os.environ[EMBED_ENDPOINT_ENV],
                model_name=embed_config.model_name,
                timeout=embed_config.timeout,
                max_attempts=embed_config.max_attempts,
                max_in_flight=embed_config.max_in_flight,
                backoff=embed_config.backoff,
            )
        embedders.append(HttpEmbedClient(embed_config))
    return ClientBundle(llm=HttpChatClient(llm_config), embedders=embedders)


@dataclass(frozen=True)
class TurnOutput:
    qid: str
    ranked: list[ScoredDoc]
    response: str
    ptkb: PtkbSelection
    pqs: list[PassageQuery]


def qid_for(topic: Topic, turn: Turn, template: str = "{topic}_{turn}") -> str:
    return template.format(topic=topic.number, turn=turn.turn_id)


def generate_response(
    llm: ChatClient,
    question: str,
    history_text: str,
    top_passages: Sequence[tuple[str, str]],
    selection: PtkbSelection,
    ptkb: Mapping[str, str],
    templates_dir: str | Path | None = None,
) -> str:
    """Answer from the top-ranked passages only; without any, return the
    fixed fallback text and skip the model call entirely."""
    if not top_passages:
        return FALLBACK_RESPONSE
    passages_text = "\n".join(f"[{i}] {text}" for i, (_doc_id, text) in enumerate(top_passages, start=1))
    prompt = render_prompt(
        load_template("response", templates_dir),
        {
            "ptkb_statements_string": ptkb_statements_string(ptkb, list(selection.relevant_ids)),
            "passages": passages_text,
            "conversation_history": history_text,
            "question": question,
        },
    )
    return llm.chat(system_request(prompt)).strip()


def _catch_up_history(
    state: ConversationState, topic: Topic, llm: ChatClient, templates_dir: Path | None
) -> None:
    """Append any completed turns (utterance + summarized response) not yet
    in the history. Ground-truth responses win over generated ones."""
    while state.turn_index < state.cursor:
        finished = topic.turns[state.turn_index]
        text = finished.response if finished.response else (state.last_generated or FALLBACK_RESPONSE)
        advance(state, finished.utterance, text, llm, templates_dir)


def run_turn(
    state: ConversationState,
    turn: Turn,
    topic: Topic,
    clients: ClientBundle,
    index: InvertedIndex,
    passage_texts: Mapping[str, str],
    config: RunConfig,
) -> TurnOutput:
    """Execute one full turn; leaves the state ready for the next turn."""
    position = state.cursor
    if position >= len(topic.turns) or topic.turns[position] != turn:
        raise ValueError("conversation state is not current for this turn")
    step = "history"
    try:
        _catch_up_history(state, topic, clients.llm, config.templates_dir)
        history_text = render_history(state)

        step = "ptkb_classification"
        extra_context = ""
        if config.cot_enabled and config.variant == "short_long":
            step = "cot_context"
            extra_context = cot_context(
                clients.llm, history_text, turn.utterance, topic.ptkb, config.templates_dir
            )
            step = "ptkb_classification"
        judgments = classify_ptkb(
            clients.llm, history_text, turn.utterance, topic.ptkb, extra_context, config.templates_dir
        )
        selection = select_relevant(judgments, config.ptkb_threshold)

        step = "passage_queries"
        if config.variant == "weighted_rerank":
            clarified = clarify_utterance(clients.llm, history_text, turn.utterance, config.templates_dir)
            pqs = gen_weighted_pqs(clients.llm, clarified, selection, topic.ptkb, config.templates_dir)
            question = clarified
        else:
            pq_history = f"{history_text}\nUser: {turn.utterance}" if history_text else f"User: {turn.utterance}"
            pqs = [
                gen_short_pq(clients.llm, pq_history, selection, topic.ptkb, config.templates_dir),
                gen_long_pq(
                    clients.llm,
                    pq_history,
                    selection,
                    topic.ptkb,
                    style_menu=config.long_style_menu,
                    templates_dir=config.templates_dir,
                ),
            ]
            question = turn.utterance
        logger.info("%s: generated %d passage queries", qid_for(topic, turn, config.qid_template), len(pqs))
        for pq in pqs:
            logger.debug("%s PQ (%s, w=%.3f): %s", qid_for(topic, turn, config.qid_template), pq.kind, pq.weight, pq.text[:120])

        step = "retrieval"
        candidates = fused_retrieve(index, pqs, config.rerank.per_query_k)

        step = "rerank"
        weights = weighted_rerank_adapter(selection, pqs)
        ranked = rerank(candidates, pqs, clients.embedders, passage_texts, config.rerank, weights=weights)

        step = "response"
        top = [(doc.doc_id, passage_texts[doc.doc_id]) for doc in ranked[:RESPONSE_PASSAGES]]
        response = generate_response(
            clients.llm, question, history_text, top, selection, topic.ptkb, config.templates_dir
        )
    except ClientError as exc:
        raise TurnError(step, exc) from exc
    state.cursor += 1
    state.last_generated = response
    return TurnOutput(
        qid=qid_for(topic, turn, config.qid_template), ranked=ranked, response=response, ptkb=selection, pqs=pqs
    )


@dataclass(frozen=True)
class RunSummary:
    turns_total: int
    turns_failed: list[tuple[str, str]]  # (qid, diagnostic)

    @property
    def partial(self) -> bool:
        return bool(self.turns_failed)


def run_topics(
    topics: Sequence[Topic],
    clients: ClientBundle,
    index: InvertedIndex,
    passage_texts: Mapping[str, str],
    config: RunConfig,
    run_path: str | Path,
    ptkb_path: str | Path,
    responses_path: str | Path,
) -> RunSummary:
    """Run every topic sequentially and write the three output files.

    A failed turn is recorded and skipped; the run continues so one broken
    turn cannot sink a whole evaluation batch.
    """
    failures: list[tuple[str, str]] = []
    turns_total = 0
    with (
        open(run_path, "w", encoding="utf-8", newline="\n") as run_fh,
        open(ptkb_path, "w", encoding="utf-8", newline="\n") as ptkb_fh,
        open(responses_path, "w", encoding="utf-8", newline="\n") as responses_fh,
    ):
        for topic in topics:
            state = ConversationState(topic=topic)
            for turn in topic.turns:
                turns_total += 1
                qid = qid_for(topic, turn, config.qid_template)
                try:
                    output = run_turn(state, turn, topic, clients, index, passage_texts, config)
                except TurnError as exc:
                    logger.error("%s: %s", qid, exc)
                    failures.append((qid, str(exc)))
                    state.cursor += 1
                    state.last_generated = None
                    continue
                for rank, doc in enumerate(output.ranked, start=1):
                    run_fh.write(f"{qid} Q0 {doc.doc_id} {rank} {doc.score:.6f} {config.run_tag}\n")
                relevant = [
                    {"id": j.statement_id, "score": j.score}
                    for j in output.ptkb.judgments
                    if j.statement_id in output.ptkb.relevant_ids
                ]
                ptkb_fh.write(json.dumps({"qid": qid, "relevant": relevant}, ensure_ascii=False) + "\n")
                responses_fh.write(json.dumps({"qid": qid, "response": output.response}, ensure_ascii=False) + "\n")
    return RunSummary(turns_total=turns_total, turns_failed=failures)


def load_docstore(path: str | Path) -> dict[str, str]:
    """Load the passage-id -> text map the reranker and responder need."""
    from .corpus import load_passages

    return {passage.id: passage.text for passage in load_passages(path)}
