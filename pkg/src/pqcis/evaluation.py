"""Run/qrels parsing and rank metrics: nDCG@k, P@k, Recall@k, AP, set P/R/F1.

Parsing is strict by design: every violation is reported with its line
number and the rule it breaks, so malformed runs fail fast instead of
silently skewing the metrics.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

MAX_RUN_DEPTH = 1000
CSV_COLUMNS = ("ndcg@3", "ndcg@5", "p@20", "recall@20", "ap")


class RunFormatError(ValueError):
    """A run file violated the six-column TREC format or its ordering rules."""


class QrelsFormatError(ValueError):
    """A qrels file line is malformed."""


@dataclass(frozen=True)
class MetricReport:
    per_turn: dict[str, dict[str, float]]
    means: dict[str, float]


def parse_run(path: str | Path) -> dict[str, list[tuple[str, float]]]:
    """Parse a TREC run file into qid -> ordered (docid, score) lists.

    Enforces: exactly 6 columns, literal Q0, ranks contiguous from 1 per
    qid, scores non-increasing per qid, no duplicate (qid, docid), and at
    most 1000 entries per qid.
    """
    runs: dict[str, list[tuple[str, float]]] = {}
    next_rank: dict[str, int] = {}
    last_score: dict[str, float] = {}
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                raise RunFormatError(f"line {lineno}: blank line")
            parts = line.split()
            if len(parts) != 6:
                raise RunFormatError(f"line {lineno}: expected 6 columns, found {len(parts)}")
            qid, q0, docid, rank_text, score_text, _tag = parts
            if q0 != "Q0":
                raise RunFormatError(f"line {lineno}: second column must be Q0, found {q0!r}")
            try:
                rank = int(rank_text)
            except ValueError:
                raise RunFormatError(f"line {lineno}: rank is not an integer: {rank_text!r}") from None
            try:
                score = float(score_text)
            except ValueError:
                raise RunFormatError(f"line {lineno}: score is not a number: {score_text!r}") from None
            if not math.isfinite(score):
                raise RunFormatError(f"line {lineno}: score must be finite")
            expected = next_rank.get(qid, 1)
            if rank != expected:
                raise RunFormatError(
                    f"line {lineno}: non-contiguous rank for query {qid}: expected {expected}, found {rank}"
                )
            if rank > MAX_RUN_DEPTH:
                raise RunFormatError(f"line {lineno}: more than {MAX_RUN_DEPTH} entries for query {qid}")
            if (qid, docid) in seen:
                raise RunFormatError(f"line {lineno}: duplicate document {docid} for query {qid}")
            if qid in last_score and score > last_score[qid]:
                raise RunFormatError(f"line {lineno}: non-monotone scores for query {qid}")
            seen.add((qid, docid))
            next_rank[qid] = rank + 1
            last_score[qid] = score
            runs.setdefault(qid, []).append((docid, score))
    return runs


def parse_qrels(path: str | Path) -> dict[str, dict[str, int]]:
    """Parse qrels ("<qid> 0 <docid> <grade>") into qid -> docid -> grade."""
    qrels: dict[str, dict[str, int]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise QrelsFormatError(f"line {lineno}: expected 4 columns, found {len(parts)}")
            qid, _iteration, docid, grade_text = parts
            try:
                grade = int(grade_text)
            except ValueError:
                raise QrelsFormatError(f"line {lineno}: grade is not an integer: {grade_text!r}") from None
            if grade < 0:
                raise QrelsFormatError(f"line {lineno}: grade must be >= 0")
            if docid in qrels.get(qid, {}):
                raise QrelsFormatError(f"line {lineno}: duplicate judgment for ({qid}, {docid})")
            qrels.setdefault(qid, {})[docid] = grade
    return qrels


def _gain(grade: int) -> float:
    return float(2**grade - 1)


def ndcg_at_k(ranking: Sequence[str], qrels_for_qid: Mapping[str, int], k: int) -> float:
    """Graded nDCG with 2^rel - 1 gains and log2(rank + 1) discounts."""
    if k < 1:
        raise ValueError("k must be >= 1")
    dcg = sum(
        _gain(qrels_for_qid.get(docid, 0)) / math.log2(position + 1)
        for position, docid in enumerate(ranking[:k], start=1)
    )
    ideal_grades = sorted(qrels_for_qid.values(), reverse=True)[:k]
    idcg = sum(_gain(grade) / math.log2(position + 1) for position, grade in enumerate(ideal_grades, start=1))
    return dcg / idcg if idcg > 0 else 0.0


def p_at_k(ranking: Sequence[str], qrels_for_qid: Mapping[str, int], k: int) -> float:
    """Binary precision at k; missing slots count as non-relevant."""
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = sum(1 for docid in ranking[:k] if qrels_for_qid.get(docid, 0) >= 1)
    return hits / k


def recall_at_k(ranking: Sequence[str], qrels_for_qid: Mapping[str, int], k: int) -> float:
    """Binary recall at k; zero judged-relevant documents yield 0."""
    if k < 1:
        raise ValueError("k must be >= 1")
    total_relevant = sum(1 for grade in qrels_for_qid.values() if grade >= 1)
    if total_relevant == 0:
        return 0.0
    hits = sum(1 for docid in ranking[:k] if qrels_for_qid.get(docid, 0) >= 1)
    return hits / total_relevant


def average_precision(ranking: Sequence[str], qrels_for_qid: Mapping[str, int]) -> float:
    """Mean of precision at each relevant hit, over all judged-relevant docs."""
    relevant = {docid for docid, grade in qrels_for_qid.items() if grade >= 1}
    if not relevant:
        return 0.0
    hits = 0
    accumulated = 0.0
    for position, docid in enumerate(ranking, start=1):
        if docid in relevant:
            hits += 1
            accumulated += hits / position
    return accumulated / len(relevant)


def ptkb_prf(predicted: Iterable[str], gold: Iterable[str]) -> tuple[float, float, float]:
    """Set precision/recall/F1; empty prediction with empty gold is (1, 1, 1)."""
    predicted_set = set(predicted)
    gold_set = set(gold)
    if not predicted_set and not gold_set:
        return (1.0, 1.0, 1.0)
    overlap = len(predicted_set & gold_set)
    precision = overlap / len(predicted_set) if predicted_set else 0.0
    recall = overlap / len(gold_set) if gold_set else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return (precision, recall, f1)


def evaluate_run(
    run: Mapping[str, list[tuple[str, float]]],
    qrels: Mapping[str, Mapping[str, int]],
    ks: Sequence[int] = (3, 5, 20),
) -> MetricReport:
    """Compute per-turn and mean metrics over every qid present in the qrels.

    Turns missing from the run score zero, so incomplete runs are penalized
    rather than silently skipped.
    """
    if not qrels:
        raise ValueError("qrels must contain at least one query")
    per_turn: dict[str, dict[str, float]] = {}
    for qid in sorted(qrels):
        ranking = [docid for docid, _score in run.get(qid, [])]
        judged = qrels[qid]
        row: dict[str, float] = {}
        for k in ks:
            row[f"ndcg@{k}"] = ndcg_at_k(ranking, judged, k)
            row[f"p@{k}"] = p_at_k(ranking, judged, k)
            row[f"recall@{k}"] = recall_at_k(ranking, judged, k)
        row["ap"] = average_precision(ranking, judged)
        per_turn[qid] = row
    metric_names = next(iter(per_turn.values())).keys()
    means = {name: sum(row[name] for row in per_turn.values()) / len(per_turn) for name in metric_names}
    return MetricReport(per_turn=per_turn, means=means)


def report_to_json(report: MetricReport, path: str | Path) -> None:
    payload = {"per_turn": report.per_turn, "means": report.means}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def per_turn_csv(report: MetricReport, path: str | Path) -> None:
    """Write the per-turn breakdown CSV plus a final means row."""
    for qid, row in report.per_turn.items():
        for column in CSV_COLUMNS:
            if column not in row:
                raise ValueError(f"per-turn report for {qid} lacks {column}; evaluate with ks covering 3, 5, 20")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["qid", *CSV_COLUMNS])
        for qid in sorted(report.per_turn):
            row = report.per_turn[qid]
            writer.writerow([qid, *(f"{row[column]:.4f}" for column in CSV_COLUMNS)])
        writer.writerow(["mean", *(f"{report.means[column]:.4f}" for column in CSV_COLUMNS)])


def load_ptkb_predictions(path: str | Path) -> dict[str, list[str]]:
    """Read per-turn predicted statement ids from the predictions JSONL."""
    predictions: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
            qid = record.get("qid")
            relevant = record.get("relevant")
            if not isinstance(qid, str) or not isinstance(relevant, list):
                raise ValueError(f'line {lineno}: expected {{"qid", "relevant"}}')
            predictions[qid] = [str(item["id"]) for item in relevant]
    return predictions


def evaluate_ptkb(
    predictions: Mapping[str, list[str]], gold: Mapping[str, list[str]]
) -> MetricReport:
    """Set P/R/F1 per turn against gold statement ids, plus means."""
    if not gold:
        raise ValueError("gold must contain at least one query")
    per_turn: dict[str, dict[str, float]] = {}
    for qid in sorted(gold):
        precision, recall, f1 = ptkb_prf(predictions.get(qid, []), gold[qid])
        per_turn[qid] = {"precision": precision, "recall": recall, "f1": f1}
    means = {
        name: sum(row[name] for row in per_turn.values()) / len(per_turn)
        for name in ("precision", "recall", "f1")
    }
    return MetricReport(per_turn=per_turn, means=means)
