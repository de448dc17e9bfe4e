"""Relevance scoring of personal knowledge statements for the current turn.

The model is asked to score every statement on a 0-1 scale and answer with
a JSON object; parsing is defensive because models wrap JSON in prose.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

from .clients import ChatClient, system_request
from .pqgen import load_template, ptkb_statements_string, render_prompt

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5
PARSE_ATTEMPTS = 2  # one retry on unparseable model output, then empty


@dataclass(frozen=True)
class PtkbJudgment:
    statement_id: str
    score: float


@dataclass(frozen=True)
class PtkbSelection:
    judgments: tuple[PtkbJudgment, ...]
    relevant_ids: tuple[str, ...]
    threshold: float

    def score_of(self, statement_id: str) -> float:
        for judgment in self.judgments:
            if judgment.statement_id == statement_id:
                return judgment.score
        raise KeyError(statement_id)


def empty_selection(threshold: float = DEFAULT_THRESHOLD) -> PtkbSelection:
    return PtkbSelection(judgments=(), relevant_ids=(), threshold=threshold)


def extract_json_object(text: str) -> Optional[dict]:
    """Parse the first balanced {...} region of the text, if any.

    Quoted strings (with escapes) are honored while balancing braces, so
    prose-wrapped JSON such as 'Sure! {"2": 1.3}' parses correctly.
    """
    start = text.find("{")
    if start == -1:
        return None
    depth = 0
    in_string = False
    escaped = False
    for pos in range(start, len(text)):
        char = text[pos]
        if in_string:
            if escaped:
                escaped = False
            elif char == "\\":
                escaped = True
            elif char == '"':
                in_string = False
            continue
        if char == '"':
            in_string = True
        elif char == "{":
            depth += 1
        elif char == "}":
            depth -= 1
            if depth == 0:
                try:
                    parsed = json.loads(text[start : pos + 1])
                except json.JSONDecodeError:
                    return None
                return parsed if isinstance(parsed, dict) else None
    return None


def _judgments_from_object(obj: dict, ptkb: Mapping[str, str]) -> list[PtkbJudgment]:
    judgments: list[PtkbJudgment] = []
    for key, value in obj.items():
        statement_id = str(key)
        if statement_id not in ptkb:
            continue
        if isinstance(value, bool):
            score = 1.0 if value else 0.0
        elif isinstance(value, (int, float)):
            score = float(value)
        elif isinstance(value, str):
            try:
                score = float(value)
            except ValueError:
                continue
        else:
            continue
        if not math.isfinite(score):
            continue
        judgments.append(PtkbJudgment(statement_id=statement_id, score=min(1.0, max(0.0, score))))
    return judgments


def _sort_key(statement_id: str) -> tuple[int, int, str]:
    if statement_id.isdigit():
        return (0, int(statement_id), statement_id)
    return (1, 0, statement_id)


def classify_ptkb(
    llm: ChatClient,
    history_text: str,
    utterance: str,
    ptkb: Mapping[str, str],
    extra_context: str = "",
    templates_dir: str | Path | None = None,
) -> list[PtkbJudgment]:
    """Score every statement for relevance to the current utterance.

    Parsing failures are not fatal: after one retry the turn proceeds with
    an empty judgment list, degrading to an unpersonalized turn. Transport
    errors from the client still propagate.
    """
    if not ptkb:
        raise ValueError("ptkb must be non-empty")
    prompt = render_prompt(
        load_template("ptkb_classify", templates_dir),
        {
            "ptkb_statements_string": ptkb_statements_string(ptkb),
            "conversation_history": history_text,
            "current_utterance": utterance,
        },
    )
    if extra_context:
        prompt = f"{prompt}\n\nAdditional context from a prior analysis:\n{extra_context}"
    for _ in range(PARSE_ATTEMPTS):
        raw = llm.chat(system_request(prompt))
        parsed = extract_json_object(raw)
        if parsed is not None:
            return _judgments_from_object(parsed, ptkb)
    logger.warning("statement classification output unparseable twice; continuing without statements")
    return []


def select_relevant(judgments: list[PtkbJudgment], threshold: float = DEFAULT_THRESHOLD) -> PtkbSelection:
    """Order judgments by score (ties by id) and keep ids scoring >= threshold."""
    ordered = tuple(sorted(judgments, key=lambda j: (-j.score, _sort_key(j.statement_id))))
    relevant = tuple(j.statement_id for j in ordered if j.score >= threshold)
    return PtkbSelection(judgments=ordered, relevant_ids=relevant, threshold=threshold)


def cot_context(
    llm: ChatClient,
    history_text: str,
    utterance: str,
    ptkb: Mapping[str, str],
    templates_dir: str | Path | None = None,
) -> str:
    """Free-text pre-analysis of what else might matter for this turn."""
    prompt = render_prompt(
        load_template("cot_context", templates_dir),
        {
            "ptkb_statements_string": ptkb_statements_string(ptkb),
            "conversation_history": history_text,
            "current_utterance": utterance,
        },
    )
    return llm.chat(system_request(prompt)).strip()
