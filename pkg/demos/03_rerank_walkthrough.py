#!/usr/bin/env python3
"""The fusion and reranking math, worked on a corpus small enough to read.

Per-query BM25 candidate lists merge keeping first instances only; raw
query weights are normalized to sum to 1; each candidate's final score is
the model-averaged, weight-combined cosine to every query.
"""

from pqcis.clients import MockEmbedClient, cosine, mock_embed
from pqcis.corpus import Passage
from pqcis.index import build_index
from pqcis.pqgen import PassageQuery
from pqcis.ranking import RerankConfig, fused_retrieve, normalize_weights, rerank

PASSAGES = [
    Passage(id="climate", text="Egypt winter weather is mild and dry for sightseeing", sentence_count=1),
    Passage(id="sites", text="Cairo pyramids and museums reward winter visitors", sentence_count=1),
    Passage(id="chess", text="Chess openings reward study and pattern recognition", sentence_count=1),
    Passage(id="bread", text="Sourdough bread needs a lively starter and patience", sentence_count=1),
]
TEXTS = {p.id: p.text for p in PASSAGES}

pqs = [
    PassageQuery(text="egypt winter weather mild sightseeing", weight=1.0, kind="combined"),
    PassageQuery(text="cairo pyramids winter museums", weight=3.0, kind="per_ptkb", source_ptkb_id="1"),
]

print("=== weight normalization ===")
raw = [pq.weight for pq in pqs]
print(f"raw weights {raw} -> normalized {normalize_weights(raw)}")
print(f"x10 scaling changes nothing: {normalize_weights([w * 10 for w in raw])}")

print("\n=== first-instance fusion ===")
index = build_index(iter(PASSAGES))
candidates = fused_retrieve(index, pqs, per_query_k=10)
for doc_id in candidates.ids:
    print(f"  {doc_id}  (first retrieved by query #{candidates.provenance[doc_id]})")

print("\n=== weighted multi-model cosine rerank ===")
embedders = [MockEmbedClient(dim=256), MockEmbedClient(dim=384)]
ranked = rerank(candidates, pqs, embedders, TEXTS, RerankConfig(final_k=10))
for doc in ranked:
    print(f"  {doc.doc_id:8s} score={doc.score:.4f}")

print("\n=== the same number, computed by hand for the top passage ===")
weights = normalize_weights(raw)
doc_id = ranked[0].doc_id
total = 0.0
for embedder in embedders:
    doc_vec = mock_embed(TEXTS[doc_id], embedder.dim)
    for weight, pq in zip(weights, pqs):
        total += weight * cosine(doc_vec, mock_embed(pq.text, embedder.dim))
print(f"  (1/{len(embedders)}) * sum of weighted cosines = {total / len(embedders):.4f}")
