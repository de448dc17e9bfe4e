"""Prompt templates and passage-query generation for both run variants.

A passage query (PQ) is an LLM-written passage styled like the documents
expected to contain the answer; it drives both BM25 retrieval and the
embedding rerank. Templates are plain-text files with {placeholder}
substitution, shipped under the package data directory and overridable.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Mapping, Optional

from .clients import ChatClient, EmptyGenerationError, system_request
from .corpus import split_sentences

if TYPE_CHECKING:
    from .ptkb import PtkbSelection

logger = logging.getLogger(__name__)

PQ_KINDS = ("combined", "per_ptkb", "short", "long")

KNOWN_PLACEHOLDERS = frozenset(
    {
        "ptkb_statements_string",
        "conversation_history",
        "current_utterance",
        "clarified_query",
        "ptkb_statement",
        "response_text",
        "passages",
        "question",
    }
)

MAX_PER_PTKB_QUERIES = 3
SHORT_PQ_SENTENCES = 5
LONG_PQ_SENTENCES = 10

_PLACEHOLDER = re.compile(r"\{([a-z][a-z0-9_]*)\}")


class TemplateError(ValueError):
    """Bad template text or a rendering with missing variables."""


class EmptyPassageQueryError(RuntimeError):
    """The model produced an empty passage query."""


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    text: str

    def placeholders(self) -> set[str]:
        return set(_PLACEHOLDER.findall(self.text))


@dataclass(frozen=True)
class PassageQuery:
    text: str
    weight: float
    kind: str
    source_ptkb_id: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("passage query text must be non-empty")
        if self.kind not in PQ_KINDS:
            raise ValueError(f"unknown passage query kind {self.kind!r}")
        if not (math.isfinite(self.weight) and self.weight >= 0):
            raise ValueError("weight must be finite and >= 0")
        if (self.kind == "per_ptkb") != (self.source_ptkb_id is not None):
            raise ValueError("source_ptkb_id is set exactly for per_ptkb queries")


def default_templates_dir() -> Path:
    return Path(str(resources.files("pqcis") / "data" / "templates"))


def make_template(name: str, text: str) -> PromptTemplate:
    """Validate and wrap template text; unknown placeholders are rejected."""
    unknown = set(_PLACEHOLDER.findall(text)) - KNOWN_PLACEHOLDERS
    if unknown:
        raise TemplateError(f"unknown placeholder in template {name!r}: {', '.join(sorted(unknown))}")
    return PromptTemplate(name=name, text=text)


def load_template(name: str, directory: str | Path | None = None) -> PromptTemplate:
    """Load ``<directory>/<name>.txt`` (packaged templates by default)."""
    root = Path(directory) if directory is not None else default_templates_dir()
    path = root / f"{name}.txt"
    if not path.is_file():
        raise TemplateError(f"no such template: {path}")
    return make_template(name, path.read_text(encoding="utf-8"))


def render_prompt(template: PromptTemplate, variables: Mapping[str, str]) -> str:
    """Substitute placeholders exactly; every placeholder must be bound."""

    def _sub(match: re.Match[str]) -> str:
        key = match.group(1)
        if key not in KNOWN_PLACEHOLDERS:
            raise TemplateError(f"unknown placeholder in template {template.name!r}: {key}")
        if key not in variables:
            raise TemplateError(f"unbound placeholder: {key}")
        return variables[key]

    return _PLACEHOLDER.sub(_sub, template.text)


def ptkb_statements_string(ptkb: Mapping[str, str], ids: Optional[list[str]] = None) -> str:
    """Format statements as id-numbered lines, e.g. ``1. I practice yoga daily.``"""
    chosen = ids if ids is not None else list(ptkb)
    return "\n".join(f"{sid}. {ptkb[sid]}" for sid in chosen if sid in ptkb)


def _strip_label(text: str, labels: tuple[str, ...]) -> str:
    stripped = text.strip()
    for label in labels:
        if stripped.startswith(label):
            return stripped[len(label) :].strip()
    return stripped


def _warn_on_sentence_drift(kind: str, text: str, expected: int) -> None:
    actual = len(split_sentences(text))
    if abs(actual - expected) > 2:
        logger.warning("%s passage query has %d sentences, expected about %d", kind, actual, expected)


def clarify_utterance(
    llm: ChatClient,
    history_text: str,
    utterance: str,
    templates_dir: str | Path | None = None,
) -> str:
    """Rewrite the utterance as a standalone query; falls back to the raw one."""
    prompt = render_prompt(
        load_template("clarify", templates_dir),
        {"conversation_history": history_text, "current_utterance": utterance},
    )
    try:
        raw = llm.chat(system_request(prompt))
    except EmptyGenerationError:
        return utterance
    clarified = _strip_label(raw, ("Assistant:", "User:", "Query:", "Clarified query:"))
    return clarified if clarified else utterance


def gen_weighted_pqs(
    llm: ChatClient,
    clarified: str,
    selection: PtkbSelection,
    ptkb: Mapping[str, str],
    templates_dir: str | Path | None = None,
) -> list[PassageQuery]:
    """Weighted-rerank variant: one combined PQ (weight 1) plus up to three
    per-statement PQs weighted by their relevance scores."""
    if not clarified:
        raise ValueError("clarified utterance must be non-empty")
    relevant_ids = selection.relevant_ids
    combined_prompt = render_prompt(
        load_template("weighted_combined_pq", templates_dir),
        {
            "ptkb_statements_string": ptkb_statements_string(ptkb, relevant_ids),
            "clarified_query": clarified,
        },
    )
    combined_text = llm.chat(system_request(combined_prompt)).strip()
    if not combined_text:
        raise EmptyPassageQueryError("empty passage query")
    _warn_on_sentence_drift("combined", combined_text, LONG_PQ_SENTENCES)
    queries = [PassageQuery(text=combined_text, weight=1.0, kind="combined")]

    scores = {j.statement_id: j.score for j in selection.judgments}
    per_statement_template = load_template("weighted_ptkb_pq", templates_dir)
    for statement_id in relevant_ids[:MAX_PER_PTKB_QUERIES]:
        prompt = render_prompt(
            per_statement_template,
            {"ptkb_statement": f"{statement_id}. {ptkb[statement_id]}", "clarified_query": clarified},
        )
        text = llm.chat(system_request(prompt)).strip()
        if not text:
            raise EmptyPassageQueryError("empty passage query")
        _warn_on_sentence_drift("per_ptkb", text, LONG_PQ_SENTENCES)
        queries.append(
            PassageQuery(text=text, weight=scores[statement_id], kind="per_ptkb", source_ptkb_id=statement_id)
        )
    return queries


def gen_short_pq(
    llm: ChatClient,
    history_text: str,
    selection: PtkbSelection,
    ptkb: Mapping[str, str],
    templates_dir: str | Path | None = None,
) -> PassageQuery:
    """Short-and-long variant: the 5-sentence conversational passage query."""
    prompt = render_prompt(
        load_template("short_pq", templates_dir),
        {
            "ptkb_statements_string": ptkb_statements_string(ptkb, selection.relevant_ids),
            "conversation_history": history_text,
        },
    )
    text = _strip_label(llm.chat(system_request(prompt)), ("Assistant:",))
    if not text:
        raise EmptyPassageQueryError("empty passage query")
    _warn_on_sentence_drift("short", text, SHORT_PQ_SENTENCES)
    return PassageQuery(text=text, weight=1.0, kind="short")


def gen_long_pq(
    llm: ChatClient,
    history_text: str,
    selection: PtkbSelection,
    ptkb: Mapping[str, str],
    style_menu: bool = True,
    templates_dir: str | Path | None = None,
) -> PassageQuery:
    """Short-and-long variant: the 10-sentence article-style passage query.

    With ``style_menu`` the model self-selects among encyclopedia article,
    blog post, and government website styles; without it, a generic
    article-style instruction is used instead.
    """
    template_name = "long_pq_styled" if style_menu else "long_pq_generic"
    prompt = render_prompt(
        load_template(template_name, templates_dir),
        {
            "ptkb_statements_string": ptkb_statements_string(ptkb, selection.relevant_ids),
            "conversation_history": history_text,
        },
    )
    text = _strip_label(llm.chat(system_request(prompt)), ("Passage:",))
    if not text:
        raise EmptyPassageQueryError("empty passage query")
    _warn_on_sentence_drift("long", text, LONG_PQ_SENTENCES)
    return PassageQuery(text=text, weight=1.0, kind="long")
