"""Shipped test data: prompt templates, the 200-passage toy collection with
planted answers, mock scripts, run configs, and an integrity checker that
re-verifies all of it (including planted-passage token-overlap dominance)."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .clients import DEFAULT_SCENARIO_MARKERS, MockScript, load_mock_script
from .conversation import Topic, TopicSchemaError, load_topics
from .corpus import CollectionError, Passage, load_passages
from .evaluation import QrelsFormatError, parse_qrels
from .index import tokenize
from .pqgen import TemplateError, load_template

TOY_PASSAGE_COUNT = 200
MIN_PLANTED_OVERLAP = 5

# sha256 of whitespace-normalized template/sample text; pins the verbatim
# fixtures against accidental edits.
REFERENCE_HASHES = {
    "templates/short_pq.txt": "de9635ae02ecee412c29035085a418217dfe8c817636d8c6415572784fbc8e07",
    "templates/long_pq_styled.txt": "3ff698b01fce1e20c99460b9b083f9183638ed346e831f00e2d196cb9944a585",
    "samples/sample_short_pq.txt": "e69ac48c90bfd93a1d95bf7fe6841dd9dac7c92f50c4ee2e97f82c22518e31bc",
    "samples/sample_long_pq.txt": "eb1e48578a793034912a1df01685d86d199f7b15dbcbeccf714fc6636349726f",
}

TEMPLATE_NAMES = (
    "short_pq",
    "long_pq_styled",
    "long_pq_generic",
    "summarize",
    "ptkb_classify",
    "cot_context",
    "clarify",
    "weighted_combined_pq",
    "weighted_ptkb_pq",
    "response",
)

# template -> the scenario marker its system prompt must carry for the mock.
TEMPLATE_MARKERS = {
    "short_pq": "InfoRetCo",
    "long_pq_styled": "Passage Generation Robot",
    "long_pq_generic": "Passage Generation Robot",
    "summarize": "concise summarization assistant",
    "ptkb_classify": "personalization analyst",
    "cot_context": "reasoning assistant inside a retrieval system",
    "clarify": "query clarification assistant",
    "weighted_combined_pq": "Passage Writing Robot",
    "weighted_ptkb_pq": "Personalized Passage Robot",
    "response": "helpful conversational assistant",
}

CONFIG_NAMES = ("wghtdrerank_1", "wghtdrerank_2", "short_long_2", "short_long_3")


def data_dir() -> Path:
    return Path(str(resources.files("pqcis") / "data"))


def templates_dir() -> Path:
    return data_dir() / "templates"


def toy_passages_path() -> Path:
    return data_dir() / "toy" / "passages.jsonl"


def toy_topics_path() -> Path:
    return data_dir() / "toy" / "topics.json"


def toy_qrels_path() -> Path:
    return data_dir() / "toy" / "qrels.txt"


def toy_gold_ptkb_path() -> Path:
    return data_dir() / "toy" / "gold_ptkb.json"


def mock_script_path(variant: str) -> Path:
    return data_dir() / "mocks" / f"{variant}.json"


def run_config_path(name: str) -> Path:
    return data_dir() / "configs" / f"{name}.json"


def load_toy_passages() -> list[Passage]:
    return list(load_passages(toy_passages_path()))


def load_toy_topics() -> list[Topic]:
    return load_topics(toy_topics_path())


def planted_map() -> dict[str, str]:
    """qid -> id of the passage planted as that turn's answer."""
    with open(data_dir() / "toy" / "planted.json", encoding="utf-8") as fh:
        return json.load(fh)


def normalized_hash(text: str) -> str:
    """sha256 of the text with all whitespace runs collapsed to single spaces."""
    normalized = re.sub(r"\s+", " ", text).strip()
    return hashlib.sha256(normalized.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class IntegrityReport:
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def _strip_prefix(text: str, prefix: str) -> str:
    stripped = text.strip()
    return stripped[len(prefix):].strip() if stripped.startswith(prefix) else stripped


def _check_dominance(
    violations: list[str],
    label: str,
    pq_text: str,
    planted_id: str,
    passages: list[Passage],
) -> None:
    pq_tokens = set(tokenize(pq_text))
    by_id = {p.id: p for p in passages}
    planted = by_id.get(planted_id)
    if planted is None:
        violations.append(f"{label}: planted passage {planted_id!r} not in the toy collection")
        return
    planted_overlap = len(set(tokenize(planted.text)) & pq_tokens)
    if planted_overlap < MIN_PLANTED_OVERLAP:
        violations.append(f"{label}: planted passage shares only {planted_overlap} tokens with the scripted query")
    for passage in passages:
        if passage.id == planted_id:
            continue
        overlap = len(set(tokenize(passage.text)) & pq_tokens)
        if overlap >= planted_overlap:
            violations.append(
                f"{label}: passage {passage.id} overlap {overlap} >= planted overlap {planted_overlap}"
            )


def verify_fixture_integrity() -> IntegrityReport:
    """Re-check every shipped fixture; returns the list of violations (empty = good)."""
    violations: list[str] = []

    templates = {}
    for name in TEMPLATE_NAMES:
        try:
            templates[name] = load_template(name)
        except TemplateError as exc:
            violations.append(f"template {name}: {exc}")
    for name, marker in TEMPLATE_MARKERS.items():
        if name in templates and marker not in templates[name].text:
            violations.append(f"template {name}: missing scenario marker {marker!r}")
    known_scenarios = {scenario for _marker, scenario in DEFAULT_SCENARIO_MARKERS}

    for rel_path, expected in REFERENCE_HASHES.items():
        path = data_dir() / rel_path
        if not path.is_file():
            violations.append(f"{rel_path}: missing")
            continue
        actual = normalized_hash(path.read_text(encoding="utf-8"))
        if actual != expected:
            violations.append(f"{rel_path}: hash {actual} != committed reference {expected}")

    for sample in ("sample_short_pq.txt", "sample_long_pq.txt"):
        path = data_dir() / "samples" / sample
        if path.is_file() and not path.read_text(encoding="utf-8").strip():
            violations.append(f"samples/{sample}: empty")

    passages: list[Passage] = []
    try:
        passages = load_toy_passages()
    except (CollectionError, OSError) as exc:
        violations.append(f"toy/passages.jsonl: {exc}")
    if passages and len(passages) != TOY_PASSAGE_COUNT:
        violations.append(f"toy/passages.jsonl: expected {TOY_PASSAGE_COUNT} passages, found {len(passages)}")

    topics: list[Topic] = []
    try:
        topics = load_toy_topics()
    except (TopicSchemaError, OSError) as exc:
        violations.append(f"toy/topics.json: {exc}")

    qrels: dict[str, dict[str, int]] = {}
    try:
        qrels = parse_qrels(toy_qrels_path())
    except (QrelsFormatError, OSError) as exc:
        violations.append(f"toy/qrels.txt: {exc}")

    qids = [f"{topic.number}_{turn.turn_id}" for topic in topics for turn in topic.turns]
    for qid in qids:
        judged = qrels.get(qid, {})
        if not any(grade >= 2 for grade in judged.values()):
            violations.append(f"toy/qrels.txt: turn {qid} has no passage with grade >= 2")

    scripts: dict[str, MockScript] = {}
    for variant in ("short_long", "weighted"):
        try:
            scripts[variant] = load_mock_script(mock_script_path(variant))
        except (ValueError, OSError) as exc:
            violations.append(f"mocks/{variant}.json: {exc}")
            continue
        for key in scripts[variant].responses:
            scenario = key.split(":", 1)[0]
            if scenario not in known_scenarios:
                violations.append(f"mocks/{variant}.json: unknown scenario in key {key!r}")

    planted = planted_map()
    if passages and qids:
        for i, qid in enumerate(qids):
            if qid not in planted:
                violations.append(f"toy/planted.json: missing entry for turn {qid}")
                continue
            planted_id = planted[qid]
            if qrels.get(qid, {}).get(planted_id, 0) < 2:
                violations.append(f"toy/qrels.txt: planted passage {planted_id} not graded >= 2 for {qid}")
            if "short_long" in scripts:
                long_raw = scripts["short_long"].responses.get(f"long_pq:{i}", "")
                _check_dominance(
                    violations, f"{qid}/long_pq", _strip_prefix(long_raw, "Passage:"), planted_id, passages
                )
            if "weighted" in scripts:
                combined_raw = scripts["weighted"].responses.get(f"combined_pq:{i}", "")
                _check_dominance(violations, f"{qid}/combined_pq", combined_raw, planted_id, passages)

    for name in CONFIG_NAMES:
        path = run_config_path(name)
        if not path.is_file():
            violations.append(f"configs/{name}.json: missing")

    return IntegrityReport(violations=violations)
