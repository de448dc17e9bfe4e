"""BM25 inverted index with exact top-k search and a versioned on-disk format."""

from __future__ import annotations

import math
import re
import struct
from bisect import bisect_left
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Passage

MAGIC = b"PQCIS-IDX"
FORMAT_VERSION = 1
INDEX_FILENAME = "index.pqcis"


class DuplicateDocumentError(ValueError):
    """A passage id occurred more than once while building the index."""


class IndexFormatError(ValueError):
    """Missing, corrupt, or incompatible on-disk index."""


# Tokens are maximal runs of alphanumeric code points, lowercased.
_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0 <= self.b <= 1:
            raise ValueError("b must be in [0, 1]")


@dataclass(frozen=True)
class ScoredDoc:
    doc_id: str
    score: float


class InvertedIndex:
    """Immutable term -> postings map plus the stats BM25 needs.

    Postings lists hold (doc ordinal, term frequency) pairs sorted by
    ordinal. Built once via :func:`build_index`; safe for concurrent reads.
    """

    def __init__(
        self,
        postings: dict[str, list[tuple[int, int]]],
        doc_ids: list[str],
        doc_lengths: list[int],
        avgdl: float,
        params: Bm25Params,
    ) -> None:
        self.postings = postings
        self.doc_ids = doc_ids
        self.doc_lengths = doc_lengths
        self.avgdl = avgdl
        self.params = params

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)


def build_index(passages: Iterable[Passage], params: Bm25Params = Bm25Params()) -> InvertedIndex:
    """Build the inverted index over a passage stream.

    Raises DuplicateDocumentError if a passage id repeats. An empty stream
    yields a valid index with zero documents.
    """
    postings: dict[str, list[tuple[int, int]]] = {}
    doc_ids: list[str] = []
    doc_lengths: list[int] = []
    seen: set[str] = set()
    for passage in passages:
        if passage.id in seen:
            raise DuplicateDocumentError(f'duplicate passage id "{passage.id}"')
        seen.add(passage.id)
        ordinal = len(doc_ids)
        doc_ids.append(passage.id)
        tokens = tokenize(passage.text)
        doc_lengths.append(len(tokens))
        counts: dict[str, int] = {}
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
        for term, tf in counts.items():
            postings.setdefault(term, []).append((ordinal, tf))
    n = len(doc_ids)
    avgdl = sum(doc_lengths) / n if n else 0.0
    return InvertedIndex(postings, doc_ids, doc_lengths, avgdl, params)


def _idf(n: int, df: int) -> float:
    # ln(1 + (N - df + 0.5)/(df + 0.5)): strictly positive for df <= N.
    return math.log(1.0 + (n - df + 0.5) / (df + 0.5))


def _tf_part(tf: int, dl: int, avgdl: float, params: Bm25Params) -> float:
    norm = dl / avgdl if avgdl > 0 else 0.0
    return tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm))


def bm25_score(index: InvertedIndex, query_terms: Sequence[str], ordinal: int) -> float:
    """Score one document against a term list; repeated terms count per occurrence."""
    if not 0 <= ordinal < index.doc_count:
        raise IndexError(f"doc ordinal {ordinal} out of range")
    n = index.doc_count
    dl = index.doc_lengths[ordinal]
    score = 0.0
    for term in query_terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        pos = bisect_left(plist, (ordinal, 0))
        if pos == len(plist) or plist[pos][0] != ordinal:
            continue
        tf = plist[pos][1]
        score += _idf(n, len(plist)) * _tf_part(tf, dl, index.avgdl, index.params)
    return score


def search(index: InvertedIndex, query_text: str, k: int) -> list[ScoredDoc]:
    """Return the top-k passages by BM25 score.

    Only documents with score > 0 are returned; ties are broken by passage
    id ascending so results are deterministic across platforms.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0 or index.doc_count == 0:
        return []
    terms = tokenize(query_text)
    n = index.doc_count
    scores: dict[int, float] = {}
    for term in terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = _idf(n, len(plist))
        for ordinal, tf in plist:
            part = idf * _tf_part(tf, index.doc_lengths[ordinal], index.avgdl, index.params)
            scores[ordinal] = scores.get(ordinal, 0.0) + part
    ranked = sorted(
        ((score, index.doc_ids[ordinal]) for ordinal, score in scores.items() if score > 0.0),
        key=lambda pair: (-pair[0], pair[1]),
    )
    return [ScoredDoc(doc_id=doc_id, score=score) for score, doc_id in ranked[:k]]


def _pack_str(value: str) -> bytes:
    raw = value.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise IndexFormatError("corrupt index file: truncated")
        chunk = self.data[self.pos : self.pos + count]
        self.pos += count
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def string(self) -> str:
        length = self.u32()
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IndexFormatError("corrupt index file: bad string encoding") from exc


def save_index(index: InvertedIndex, path: str | Path) -> Path:
    """Persist the index as a single versioned file inside ``path``."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    target = directory / INDEX_FILENAME
    parts: list[bytes] = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    parts.append(struct.pack("<dd", index.params.k1, index.params.b))
    parts.append(struct.pack("<I", index.doc_count))
    parts.append(struct.pack("<d", index.avgdl))
    for doc_id, dl in zip(index.doc_ids, index.doc_lengths):
        parts.append(_pack_str(doc_id))
        parts.append(struct.pack("<I", dl))
    terms = sorted(index.postings)
    parts.append(struct.pack("<I", len(terms)))
    for term in terms:
        plist = index.postings[term]
        parts.append(_pack_str(term))
        parts.append(struct.pack("<I", len(plist)))
        for ordinal, tf in plist:
            parts.append(struct.pack("<II", ordinal, tf))
    target.write_bytes(b"".join(parts))
    return target


def load_index(path: str | Path) -> InvertedIndex:
    """Load an index saved by :func:`save_index`; round-trips bit-for-bit."""
    target = Path(path) / INDEX_FILENAME
    if not target.is_file():
        raise IndexFormatError(f"missing index: no {INDEX_FILENAME} under {path}")
    reader = _Reader(target.read_bytes())
    if reader.take(len(MAGIC)) != MAGIC:
        raise IndexFormatError(f"not a passage index: bad magic header in {target}")
    version = reader.u32()
    if version != FORMAT_VERSION:
        raise IndexFormatError(f"unsupported index version: found {version}, expected {FORMAT_VERSION}")
    k1, b = struct.unpack("<dd", reader.take(16))
    doc_count = reader.u32()
    avgdl = reader.f64()
    doc_ids: list[str] = []
    doc_lengths: list[int] = []
    for _ in range(doc_count):
        doc_ids.append(reader.string())
        doc_lengths.append(reader.u32())
    postings: dict[str, list[tuple[int, int]]] = {}
    for _ in range(reader.u32()):
        term = reader.string()
        plist: list[tuple[int, int]] = []
        for _ in range(reader.u32()):
            ordinal, tf = struct.unpack("<II", reader.take(8))
            if ordinal >= doc_count:
                raise IndexFormatError(f"corrupt index file: ordinal {ordinal} out of range")
            plist.append((ordinal, tf))
        postings[term] = plist
    return InvertedIndex(postings, doc_ids, doc_lengths, avgdl, Bm25Params(k1=k1, b=b))
