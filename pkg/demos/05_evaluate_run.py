#!/usr/bin/env python3
"""Score a run against graded judgments: nDCG@k, P@k, Recall@k, mAP.

Generates a mock run over the toy collection, evaluates it against the
bundled qrels, writes the JSON report and the per-turn CSV breakdown, and
scores the statement predictions against the gold sets.
"""

import json
import tempfile
from dataclasses import replace
from pathlib import Path

from pqcis import fixtures
from pqcis.evaluation import (
    evaluate_ptkb,
    evaluate_run,
    load_ptkb_predictions,
    parse_qrels,
    parse_run,
    per_turn_csv,
    report_to_json,
)
from pqcis.index import build_index
from pqcis.pipeline import build_clients, load_run_config, run_topics

out = Path(tempfile.mkdtemp(prefix="pqcis-eval-"))
passages = fixtures.load_toy_passages()
index = build_index(iter(passages))
config = replace(load_run_config(fixtures.run_config_path("short_long_3")), mock_mode=True)
clients = build_clients(config, fixtures.mock_script_path("short_long"))
run_topics(
    fixtures.load_toy_topics(), clients, index, {p.id: p.text for p in passages}, config,
    out / "run.txt", out / "ptkb.jsonl", out / "responses.jsonl",
)

print("=== passage ranking metrics ===")
run = parse_run(out / "run.txt")
qrels = parse_qrels(fixtures.toy_qrels_path())
report = evaluate_run(run, qrels, ks=(3, 5, 20))
for qid, row in report.per_turn.items():
    print(f"  {qid}: ndcg@3={row['ndcg@3']:.4f}  ndcg@5={row['ndcg@5']:.4f}  ap={row['ap']:.4f}")
print("means:", {name: round(value, 4) for name, value in sorted(report.means.items())})

report_to_json(report, out / "report.json")
per_turn_csv(report, out / "turns.csv")
print(f"\nwrote {out / 'report.json'} and {out / 'turns.csv'}")
print("CSV head:")
for line in (out / "turns.csv").read_text().splitlines()[:3]:
    print(" ", line)

print("\n=== statement classification metrics ===")
with open(fixtures.toy_gold_ptkb_path(), encoding="utf-8") as fh:
    gold = {qid: [str(s) for s in ids] for qid, ids in json.load(fh).items()}
ptkb_report = evaluate_ptkb(load_ptkb_predictions(out / "ptkb.jsonl"), gold)
for qid, row in ptkb_report.per_turn.items():
    print(f"  {qid}: P={row['precision']:.2f} R={row['recall']:.2f} F1={row['f1']:.2f}")
print("means:", {name: round(value, 4) for name, value in sorted(ptkb_report.means.items())})
