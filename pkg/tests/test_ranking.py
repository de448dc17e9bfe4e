import itertools
import logging
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import fold_first_instance
from pqcis.clients import ClientError, Embedding, MockEmbedClient, cosine, mock_embed
from pqcis.corpus import Passage
from pqcis.index import build_index
from pqcis.pqgen import PassageQuery
from pqcis.ptkb import PtkbJudgment, select_relevant
from pqcis.ranking import (
    CandidateSet,
    RerankConfig,
    first_instance_merge,
    fused_retrieve,
    normalize_weights,
    rerank,
    weighted_rerank_adapter,
)


def pq(text, weight=1.0, kind="long", source=None):
    return PassageQuery(text=text, weight=weight, kind=kind, source_ptkb_id=source)


class StubEmbedder:
    """Maps exact texts to fixed vectors; anything else is an error."""

    def __init__(self, table):
        self.table = {text: np.asarray(vec, dtype=np.float64) for text, vec in table.items()}

    def embed(self, texts):
        return [Embedding(self.table[t]) for t in texts]


class TestFirstInstanceMerge:
    def test_basic_example(self):
        merged = first_instance_merge([["a", "b", "c"], ["b", "d", "a"]])
        assert list(merged.ids) == ["a", "b", "c", "d"]
        assert merged.provenance == {"a": 0, "b": 0, "c": 0, "d": 1}

    def test_single_list_verbatim(self):
        merged = first_instance_merge([["x", "y"]])
        assert list(merged.ids) == ["x", "y"]

    def test_empty_contribution(self):
        merged = first_instance_merge([[], ["a"], []])
        assert list(merged.ids) == ["a"]
        assert merged.provenance["a"] == 1

    def test_exhaustive_small_lists_match_fold(self):
        universe = ["a", "b", "c"]
        all_lists = [
            list(perm)
            for size in range(len(universe) + 1)
            for perm in itertools.permutations(universe, size)
        ]
        for first, second in itertools.product(all_lists, repeat=2):
            merged = first_instance_merge([first, second])
            assert list(merged.ids) == fold_first_instance([first, second])
            assert len(set(merged.ids)) == len(merged.ids)
            assert len(merged.ids) <= len(first) + len(second)

    @given(st.lists(st.lists(st.sampled_from("abcdefgh"), max_size=6), min_size=1, max_size=4))
    def test_random_lists_match_fold(self, id_lists):
        merged = first_instance_merge(id_lists)
        assert list(merged.ids) == fold_first_instance([list(lst) for lst in id_lists])


class TestFusedRetrieve:
    def test_first_instance_over_real_index(self):
        passages = [
            Passage(id="a", text="egypt trains", sentence_count=1),
            Passage(id="b", text="egypt flights", sentence_count=1),
            Passage(id="c", text="yoga mats", sentence_count=1),
        ]
        index = build_index(passages)
        candidates = fused_retrieve(index, [pq("egypt trains"), pq("yoga egypt")], per_query_k=10)
        assert set(candidates.ids) == {"a", "b", "c"}
        assert candidates.provenance["c"] == 1
        # first PQ found a and b before the second PQ ran
        assert candidates.provenance["a"] == 0
        assert candidates.provenance["b"] == 0

    def test_zero_hit_query_contributes_nothing(self):
        index = build_index([Passage(id="a", text="apple", sentence_count=1)])
        candidates = fused_retrieve(index, [pq("zzz"), pq("apple")], per_query_k=10)
        assert list(candidates.ids) == ["a"]

    def test_requires_at_least_one_query(self):
        index = build_index([])
        with pytest.raises(ValueError):
            fused_retrieve(index, [], per_query_k=10)


class TestNormalizeWeights:
    def test_equal_weights(self):
        assert normalize_weights([2, 2]) == [0.5, 0.5]

    def test_all_zero_becomes_uniform(self):
        assert normalize_weights([0, 0]) == [0.5, 0.5]

    def test_proportional(self):
        assert normalize_weights([1, 3]) == [0.25, 0.75]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            normalize_weights([])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            normalize_weights([1, -1])

    @given(st.lists(st.floats(min_value=0, max_value=100, allow_nan=False), min_size=1, max_size=8))
    def test_sums_to_one(self, weights):
        assert abs(sum(normalize_weights(weights)) - 1.0) <= 1e-9


class TestWeightedRerankAdapter:
    def test_combined_plus_scores(self):
        selection = select_relevant([PtkbJudgment("1", 0.9), PtkbJudgment("2", 0.6)], 0.5)
        pqs = [
            pq("c", kind="combined"),
            pq("p1", weight=0.9, kind="per_ptkb", source="1"),
            pq("p2", weight=0.6, kind="per_ptkb", source="2"),
        ]
        weights = weighted_rerank_adapter(selection, pqs)
        assert weights == pytest.approx([0.4, 0.36, 0.24], abs=1e-9)

    def test_combined_only(self):
        selection = select_relevant([], 0.5)
        assert weighted_rerank_adapter(selection, [pq("c", kind="combined")]) == [1.0]

    def test_short_long_equal_weights(self):
        selection = select_relevant([], 0.5)
        pqs = [pq("s", kind="short"), pq("l", kind="long")]
        assert weighted_rerank_adapter(selection, pqs) == [0.5, 0.5]


WORKED_TABLE = {
    "q1": [1, 0, 0, 0],
    "q2": [0, 1, 0, 0],
    "A": [0.8, 0.0, 0.6, 0.0],
    "B": [0.0, 0.8, 0.0, 0.6],
}


def worked_setup():
    candidates = CandidateSet(ids=("A", "B"), provenance={"A": 0, "B": 0})
    pqs = [pq("q1", weight=1.0), pq("q2", weight=3.0)]
    texts = {"A": "A", "B": "B"}
    return candidates, pqs, texts


class TestRerank:
    def test_worked_example_weights_1_3(self):
        candidates, pqs, texts = worked_setup()
        ranked = rerank(candidates, pqs, [StubEmbedder(WORKED_TABLE)], texts, RerankConfig(final_k=10))
        assert [d.doc_id for d in ranked] == ["B", "A"]
        assert ranked[0].score == pytest.approx(0.60, abs=1e-9)
        assert ranked[1].score == pytest.approx(0.20, abs=1e-9)

    def test_scaling_weights_by_ten_is_invariant(self):
        candidates, pqs, texts = worked_setup()
        scaled = [pq("q1", weight=10.0), pq("q2", weight=30.0)]
        base = rerank(candidates, pqs, [StubEmbedder(WORKED_TABLE)], texts, RerankConfig(final_k=10))
        times10 = rerank(candidates, scaled, [StubEmbedder(WORKED_TABLE)], texts, RerankConfig(final_k=10))
        assert [d.doc_id for d in base] == [d.doc_id for d in times10]
        assert [d.score for d in base] == [d.score for d in times10]

    def test_two_identical_embedders_equal_single(self):
        candidates, pqs, texts = worked_setup()
        one = rerank(candidates, pqs, [StubEmbedder(WORKED_TABLE)], texts, RerankConfig(final_k=10))
        two = rerank(
            candidates, pqs, [StubEmbedder(WORKED_TABLE), StubEmbedder(WORKED_TABLE)], texts,
            RerankConfig(final_k=10),
        )
        assert [(d.doc_id, d.score) for d in one] == [(d.doc_id, d.score) for d in two]

    def test_single_query_single_model_equals_pure_cosine_order(self):
        rng = random.Random(5)
        texts = {f"d{i}": f"word{i} " * (i + 1) + "shared token text" for i in range(12)}
        candidates = CandidateSet(ids=tuple(texts), provenance={k: 0 for k in texts})
        query = pq("shared token text plus more words")
        embedder = MockEmbedClient(dim=128)
        ranked = rerank(candidates, [query], [embedder], texts, RerankConfig(final_k=20))
        qv = mock_embed(query.text, 128)
        expected = sorted(
            ((cosine(mock_embed(texts[d], 128), qv), d) for d in texts), key=lambda p: (-p[0], p[1])
        )
        assert [d.doc_id for d in ranked] == [d for _, d in expected]

    def test_embedding_work_is_bounded(self):
        texts = {f"d{i}": f"text {i}" for i in range(150)}
        candidates = CandidateSet(ids=tuple(texts), provenance={k: 0 for k in texts})
        pqs = [pq("query one"), pq("query two")]
        embedders = [MockEmbedClient(dim=64), MockEmbedClient(dim=32)]
        rerank(candidates, pqs, embedders, texts, RerankConfig(final_k=10))
        for embedder in embedders:
            assert embedder.texts_embedded == len(texts) + len(pqs)

    def test_embedding_failure_drops_passage_not_turn(self, caplog):
        class Flaky:
            def __init__(self):
                self.dim = 16

            def embed(self, texts):
                if any("poison" in t for t in texts):
                    raise ClientError("refused")
                return [mock_embed(t, self.dim) for t in texts]

        texts = {"good1": "alpha beta", "bad": "poison text", "good2": "alpha gamma"}
        candidates = CandidateSet(ids=("good1", "bad", "good2"), provenance={k: 0 for k in texts})
        with caplog.at_level(logging.WARNING, logger="pqcis.ranking"):
            ranked = rerank(candidates, [pq("alpha")], [Flaky()], texts, RerankConfig(final_k=10))
        assert {d.doc_id for d in ranked} == {"good1", "good2"}
        assert any("dropping passage bad" in r.message for r in caplog.records)

    def test_missing_text_drops_passage(self, caplog):
        candidates = CandidateSet(ids=("known", "ghost"), provenance={"known": 0, "ghost": 0})
        with caplog.at_level(logging.WARNING, logger="pqcis.ranking"):
            ranked = rerank(candidates, [pq("alpha")], [MockEmbedClient(16)], {"known": "alpha"}, RerankConfig())
        assert [d.doc_id for d in ranked] == ["known"]

    def test_output_invariants(self):
        rng = random.Random(13)
        texts = {f"d{i:02d}": " ".join(rng.choices("red green blue egypt".split(), k=5)) for i in range(30)}
        candidates = CandidateSet(ids=tuple(texts), provenance={k: 0 for k in texts})
        pqs = [pq("egypt red"), pq("green blue", weight=2.0)]
        ranked = rerank(candidates, pqs, [MockEmbedClient(64)], texts, RerankConfig(final_k=7))
        ids = [d.doc_id for d in ranked]
        assert len(ids) == len(set(ids)) <= 7
        assert set(ids) <= set(candidates.ids)
        assert all(a.score >= b.score for a, b in zip(ranked, ranked[1:]))

    def test_empty_candidates(self):
        ranked = rerank(CandidateSet(ids=(), provenance={}), [pq("q")], [MockEmbedClient(16)], {}, RerankConfig())
        assert ranked == []
