"""Command-line interface: chunk, index, run, eval, and eval-ptkb subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import ChunkParams, chunk_document, load_documents, load_passages, write_passages
from .evaluation import (
    evaluate_ptkb,
    evaluate_run,
    load_ptkb_predictions,
    parse_qrels,
    parse_run,
    per_turn_csv,
    report_to_json,
)
from .index import Bm25Params, build_index, load_index, save_index
from .pipeline import RunConfig, build_clients, load_docstore, load_run_config, run_topics
from .ranking import RerankConfig
from .conversation import load_topics

DOCSTORE_FILENAME = "docstore.jsonl"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 3


def _cmd_chunk(args: argparse.Namespace) -> int:
    params = ChunkParams(window=args.window, stride=args.stride, max_chars=args.max_chars)
    total = 0

    def passages():
        nonlocal total
        for doc in load_documents(args.input):
            for passage in chunk_document(doc, params):
                total += 1
                yield passage

    write_passages(args.output, passages())
    print(f"wrote {total} passages to {args.output}")
    return EXIT_OK


def _cmd_index(args: argparse.Namespace) -> int:
    params = Bm25Params(k1=args.k1, b=args.b)
    index = build_index(load_passages(args.passages), params)
    save_index(index, args.out)
    # The run command needs passage texts for reranking and response
    # generation, so a docstore copy lives next to the index file.
    write_passages(Path(args.out) / DOCSTORE_FILENAME, load_passages(args.passages))
    print(f"indexed {index.doc_count} passages into {args.out}")
    return EXIT_OK


def _variant_from_cli(name: str) -> str:
    return {"weighted": "weighted_rerank", "short-long": "short_long"}[name]


def _cmd_run(args: argparse.Namespace) -> int:
    if args.config:
        config = load_run_config(args.config)
        overrides = {}
        if args.variant:
            overrides["variant"] = _variant_from_cli(args.variant)
        if args.tag:
            overrides["run_tag"] = args.tag
        if args.cot:
            overrides["cot_enabled"] = True
        if args.mock:
            overrides["mock_mode"] = True
        if overrides:
            from dataclasses import replace

            config = replace(config, **overrides)
    else:
        if not args.variant or not args.tag:
            print("error: --variant and --tag are required without --config", file=sys.stderr)
            return EXIT_ERROR
        config = RunConfig(
            variant=_variant_from_cli(args.variant),
            run_tag=args.tag,
            cot_enabled=args.cot,
            mock_mode=args.mock,
            rerank=RerankConfig(),
        )
    topics = load_topics(args.topics)
    index = load_index(args.index)
    passage_texts = load_docstore(Path(args.index) / DOCSTORE_FILENAME)
    clients = build_clients(config, args.script)
    summary = run_topics(
        topics,
        clients,
        index,
        passage_texts,
        config,
        run_path=args.out,
        ptkb_path=args.ptkb_out,
        responses_path=args.responses_out,
    )
    print(f"completed {summary.turns_total - len(summary.turns_failed)}/{summary.turns_total} turns")
    for qid, diagnostic in summary.turns_failed:
        print(f"  failed {qid}: {diagnostic}", file=sys.stderr)
    return EXIT_PARTIAL if summary.partial else EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    ks = sorted({int(part) for part in args.k.split(",") if part.strip()})
    if not ks:
        print("error: --k must list at least one cutoff", file=sys.stderr)
        return EXIT_ERROR
    if args.per_turn_csv:
        ks = sorted(set(ks) | {3, 5, 20})
    run = parse_run(args.run)
    qrels = parse_qrels(args.qrels)
    report = evaluate_run(run, qrels, ks)
    report_to_json(report, args.out)
    if args.per_turn_csv:
        per_turn_csv(report, args.per_turn_csv)
    for name in sorted(report.means):
        print(f"{name}: {report.means[name]:.4f}")
    return EXIT_OK


def _cmd_eval_ptkb(args: argparse.Namespace) -> int:
    predictions = load_ptkb_predictions(args.pred)
    with open(args.gold, encoding="utf-8") as fh:
        gold = {qid: [str(v) for v in ids] for qid, ids in json.load(fh).items()}
    report = evaluate_ptkb(predictions, gold)
    print(json.dumps({"per_turn": report.per_turn, "means": report.means}, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pqcis", description="Conversational passage retrieval pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    chunk = sub.add_parser("chunk", help="split raw documents into passage windows")
    chunk.add_argument("--input", required=True, help="raw documents JSONL")
    chunk.add_argument("--output", required=True, help="passages JSONL to write")
    chunk.add_argument("--window", type=int, default=10)
    chunk.add_argument("--stride", type=int, default=5)
    chunk.add_argument("--max-chars", type=int, default=10_000, dest="max_chars")
    chunk.set_defaults(func=_cmd_chunk)

    index = sub.add_parser("index", help="build the BM25 index over a passage collection")
    index.add_argument("--passages", required=True)
    index.add_argument("--out", required=True, help="index directory to create")
    index.add_argument("--k1", type=float, default=0.9)
    index.add_argument("--b", type=float, default=0.4)
    index.set_defaults(func=_cmd_index)

    run = sub.add_parser("run", help="run the conversational retrieval pipeline")
    run.add_argument("--topics", required=True)
    run.add_argument("--index", required=True, help="index directory")
    run.add_argument("--variant", choices=("weighted", "short-long"))
    run.add_argument("--cot", action="store_true", help="enable the pre-classification reasoning step")
    run.add_argument("--mock", action="store_true", help="use offline mock clients")
    run.add_argument("--script", help="mock script JSON (with --mock)")
    run.add_argument("--tag", help="run tag for the TREC output")
    run.add_argument("--out", required=True, help="TREC run file to write")
    run.add_argument("--ptkb-out", required=True, dest="ptkb_out")
    run.add_argument("--responses-out", required=True, dest="responses_out")
    run.add_argument("--config", help="run config JSON")
    run.set_defaults(func=_cmd_run)

    ev = sub.add_parser("eval", help="score a run against qrels")
    ev.add_argument("--run", required=True)
    ev.add_argument("--qrels", required=True)
    ev.add_argument("--k", default="3,5,20", help="comma-separated cutoffs")
    ev.add_argument("--out", required=True, help="JSON report path")
    ev.add_argument("--per-turn-csv", dest="per_turn_csv", help="optional per-turn CSV path")
    ev.set_defaults(func=_cmd_eval)

    evp = sub.add_parser("eval-ptkb", help="score statement predictions against gold sets")
    evp.add_argument("--pred", required=True, help="predictions JSONL")
    evp.add_argument("--gold", required=True, help="gold JSON: {qid: [ids]}")
    evp.set_defaults(func=_cmd_eval_ptkb)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a clean one-line error for CLI users
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
