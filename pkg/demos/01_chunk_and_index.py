#!/usr/bin/env python3
"""Chunk raw documents into passage windows and search them with BM25.

Shows the collection-building path end to end: sentence segmentation, the
10-sentence window with 5-sentence stride, index construction, and top-k
search with deterministic tie-breaking.
"""

from pqcis.corpus import ChunkParams, SourceDocument, chunk_document
from pqcis.index import build_index, search

DOCS = [
    SourceDocument(
        id="winters",
        text=(
            "Egypt's winters are mild and dry. Days are warm enough for sightseeing. "
            "Nights cool off quickly in the desert. Most travelers visit between November and February. "
            "Summer temperatures regularly pass 38 degrees. The coast stays more moderate than the interior. "
            "Spring brings sandstorms some years. Autumn is calm and quiet. "
            "Hotel prices peak in the winter high season. Booking ahead is wise. "
            "River cruises run all year. The winter light is famously good for photography."
        ),
    ),
    SourceDocument(
        id="sourdough",
        text=(
            "A sourdough starter needs regular feeding. Flour and water are its only ingredients. "
            "A warm kitchen speeds fermentation. The dough doubles when the starter is strong."
        ),
    ),
]

print("=== chunking ===")
params = ChunkParams(window=10, stride=5, max_chars=10_000)
passages = [p for doc in DOCS for p in chunk_document(doc, params)]
for p in passages:
    print(f"{p.id}: {p.sentence_count} sentences | {p.text[:60]}...")

# The 12-sentence document yields two overlapping windows (1-10 and 6-12);
# the 4-sentence one yields a single short passage.

print("\n=== indexing and searching ===")
index = build_index(iter(passages))
print(f"indexed {index.doc_count} passages, avgdl={index.avgdl:.1f}")

for query in ("winter egypt sightseeing", "sourdough starter", "nothing matches this"):
    hits = search(index, query, k=3)
    print(f"\nquery: {query!r}")
    if not hits:
        print("  (no passages share any term with the query)")
    for hit in hits:
        print(f"  {hit.doc_id}  bm25={hit.score:.4f}")
