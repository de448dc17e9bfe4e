"""Turn raw documents into overlapping sentence-window passages.

The collection format is JSONL with one ``{"id": ..., "contents": ...}``
object per line, both for raw documents and for the emitted passages.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator


class CollectionError(ValueError):
    """Malformed document or passage collection."""


@dataclass(frozen=True)
class SourceDocument:
    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("document id must be non-empty")


@dataclass(frozen=True)
class Passage:
    id: str
    text: str
    sentence_count: int

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("passage id must be non-empty")
        if not self.text:
            raise ValueError("passage text must be non-empty")
        if self.sentence_count < 1:
            raise ValueError("sentence_count must be >= 1")


@dataclass(frozen=True)
class ChunkParams:
    window: int = 10
    stride: int = 5
    max_chars: int = 10_000

    def __post_init__(self) -> None:
        if not 1 <= self.stride <= self.window:
            raise ValueError(f"require 1 <= stride <= window, got stride={self.stride} window={self.window}")
        if self.max_chars < 1:
            raise ValueError("max_chars must be >= 1")


# A sentence ends at '.', '?' or '!' followed by whitespace (or end of text).
# A trailing fragment without a terminator counts as its own sentence.
_SENTENCE_BOUNDARY = re.compile(r"(?<=[.!?])\s+")


def split_sentences(text: str) -> list[str]:
    """Split text into sentences; deterministic, dependency-free rule."""
    stripped = text.strip()
    if not stripped:
        return []
    return [part for part in _SENTENCE_BOUNDARY.split(stripped) if part]


def chunk_document(doc: SourceDocument, params: ChunkParams = ChunkParams()) -> list[Passage]:
    """Cut a document into sliding sentence windows.

    The text is first truncated to ``max_chars`` characters, then windows of
    ``window`` sentences are emitted at offsets 0, stride, 2*stride, ...
    Emission stops with the first window that includes the final sentence,
    so the last window may hold fewer than ``window`` sentences. Passage ids
    are ``"<doc.id>:<k>"`` with k the 0-based window index.
    """
    sentences = split_sentences(doc.text[: params.max_chars])
    if not sentences:
        return []
    n = len(sentences)
    passages: list[Passage] = []
    k = 0
    while True:
        start = k * params.stride
        window = sentences[start : start + params.window]
        passages.append(Passage(id=f"{doc.id}:{k}", text=" ".join(window), sentence_count=len(window)))
        if start + params.window >= n:
            break
        k += 1
    return passages


def _parse_jsonl_record(line: str, lineno: int) -> tuple[str, str]:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CollectionError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(record, dict):
        raise CollectionError(f"line {lineno}: expected a JSON object")
    if "id" not in record:
        raise CollectionError(f"line {lineno}: missing id")
    if "contents" not in record:
        raise CollectionError(f"line {lineno}: missing contents")
    doc_id, contents = record["id"], record["contents"]
    if not isinstance(doc_id, str) or not doc_id:
        raise CollectionError(f"line {lineno}: id must be a non-empty string")
    if not isinstance(contents, str):
        raise CollectionError(f"line {lineno}: contents must be a string")
    return doc_id, contents


def load_documents(path: str | Path) -> Iterator[SourceDocument]:
    """Stream raw documents from a JSONL file; text may be empty."""
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                raise CollectionError(f"line {lineno}: blank line")
            doc_id, contents = _parse_jsonl_record(line, lineno)
            if doc_id in seen:
                raise CollectionError(f'line {lineno}: duplicate document id "{doc_id}"')
            seen.add(doc_id)
            yield SourceDocument(id=doc_id, text=contents)


def load_passages(path: str | Path) -> Iterator[Passage]:
    """Stream passages from a JSONL collection, preserving file order.

    Raises CollectionError with a 1-based line number on malformed lines and
    on duplicate passage ids.
    """
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                raise CollectionError(f"line {lineno}: blank line")
            passage_id, contents = _parse_jsonl_record(line, lineno)
            if not contents:
                raise CollectionError(f"line {lineno}: empty contents")
            if passage_id in seen:
                raise CollectionError(f'line {lineno}: duplicate passage id "{passage_id}"')
            seen.add(passage_id)
            yield Passage(id=passage_id, text=contents, sentence_count=max(1, len(split_sentences(contents))))


def write_passages(path: str | Path, passages: Iterable[Passage]) -> int:
    """Write passages as JSONL ({"id", "contents"}, UTF-8, LF). Returns the count."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for passage in passages:
            fh.write(json.dumps({"id": passage.id, "contents": passage.text}, ensure_ascii=False))
            fh.write("\n")
            count += 1
    return count
