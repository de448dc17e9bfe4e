"""Topic files and per-conversation state (utterances + summarized history)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .clients import ChatClient, system_request
from .pqgen import load_template, render_prompt

SUMMARIZE_THRESHOLD = 150  # responses shorter than this are kept verbatim


class TopicSchemaError(ValueError):
    """Topic file violates the expected JSON schema; message carries a JSON path."""


@dataclass(frozen=True)
class Turn:
    turn_id: str
    utterance: str
    response: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.utterance:
            raise ValueError("utterance must be non-empty")


@dataclass(frozen=True)
class Topic:
    number: str
    title: str
    ptkb: dict[str, str]
    turns: list[Turn]


@dataclass
class ConversationState:
    """Mutable per-topic state; owned by a single pipeline worker."""

    topic: Topic
    history: list[tuple[str, str]] = field(default_factory=list)
    turn_index: int = 0  # exchanges recorded in history
    cursor: int = 0  # next turn position to process
    last_generated: Optional[str] = None


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise TopicSchemaError(f"{path}: {message}")


def load_topics(path: str | Path) -> list[Topic]:
    """Load topics JSON: {"topics": [{number, title, ptkb, turns}, ...]}.

    PTKB key order and turn order are preserved as written in the file.
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    _require(isinstance(raw, dict) and "topics" in raw, "$", 'missing "topics" key')
    entries = raw["topics"]
    _require(isinstance(entries, list), "topics", "must be an array")
    _require(len(entries) > 0, "topics", "no topics")
    topics: list[Topic] = []
    numbers: set[str] = set()
    for i, entry in enumerate(entries):
        base = f"topics[{i}]"
        _require(isinstance(entry, dict), base, "must be an object")
        number = entry.get("number")
        _require(isinstance(number, str) and bool(number), f"{base}.number", "missing or empty")
        _require(number not in numbers, f"{base}.number", f'duplicate topic number "{number}"')
        numbers.add(number)
        title = entry.get("title", "")
        _require(isinstance(title, str), f"{base}.title", "must be a string")
        ptkb = entry.get("ptkb", {})
        _require(isinstance(ptkb, dict), f"{base}.ptkb", "must be an object")
        for key, value in ptkb.items():
            _require(isinstance(value, str) and bool(value), f"{base}.ptkb.{key}", "must be a non-empty string")
        raw_turns = entry.get("turns")
        _require(isinstance(raw_turns, list) and len(raw_turns) > 0, f"{base}.turns", "must be a non-empty array")
        turns: list[Turn] = []
        turn_ids: set[str] = set()
        for j, raw_turn in enumerate(raw_turns):
            tbase = f"{base}.turns[{j}]"
            _require(isinstance(raw_turn, dict), tbase, "must be an object")
            turn_id = raw_turn.get("turn_id")
            _require(isinstance(turn_id, str) and bool(turn_id), f"{tbase}.turn_id", "missing or empty")
            _require(turn_id not in turn_ids, f"{tbase}.turn_id", f'duplicate turn id "{turn_id}"')
            turn_ids.add(turn_id)
            utterance = raw_turn.get("utterance")
            _require(isinstance(utterance, str) and bool(utterance), f"{tbase}.utterance", "missing or empty")
            response = raw_turn.get("response")
            _require(response is None or isinstance(response, str), f"{tbase}.response", "must be a string")
            turns.append(Turn(turn_id=turn_id, utterance=utterance, response=response))
        topics.append(Topic(number=number, title=title, ptkb=dict(ptkb), turns=turns))
    return topics


def summarize_response(llm: ChatClient, response: str, templates_dir: str | Path | None = None) -> str:
    """Summarize a response via the LLM; short ones pass through verbatim."""
    if len(response) < SUMMARIZE_THRESHOLD:
        return response
    prompt = render_prompt(load_template("summarize", templates_dir), {"response_text": response})
    return llm.chat(system_request(prompt))


def advance(
    state: ConversationState,
    utterance: str,
    assistant_text: str,
    llm: Optional[ChatClient] = None,
    templates_dir: str | Path | None = None,
) -> ConversationState:
    """Record one completed exchange: the user utterance, then the
    (possibly summarized) assistant text. Returns the same state object."""
    if len(state.history) % 2 != 0:
        raise ValueError("history alternation violated: expected an even history")
    if not utterance:
        raise ValueError("utterance must be non-empty")
    summary = summarize_response(llm, assistant_text, templates_dir) if llm is not None else assistant_text
    state.history.append(("user", utterance))
    state.history.append(("assistant", summary))
    state.turn_index += 1
    return state


def render_history(state: ConversationState) -> str:
    """Render history as "User: ..." / "Assistant: ..." lines, LF-joined."""
    labels = {"user": "User", "assistant": "Assistant"}
    return "\n".join(f"{labels[speaker]}: {text}" for speaker, text in state.history)
