#!/usr/bin/env python3
"""Generate passage queries and score personal statements, fully offline.

The scripted mock chat client stands in for the language model, so the
demo shows the exact prompts-and-parsing machinery of a real turn: the
statement scores come back as (possibly messy) JSON, a threshold picks the
relevant subset, and the two variants build their queries from it.
"""

from pqcis.clients import MockChatClient
from pqcis.pqgen import gen_long_pq, gen_short_pq, gen_weighted_pqs
from pqcis.ptkb import classify_ptkb, select_relevant

# The scripted texts below are deliberately shorter than the 10 sentences
# the prompts ask for, so expect the length-guardrail warnings to fire.

PTKB = {
    "1": "I have previously traveled around Europe and loved it.",
    "2": "I prefer mild weather when I travel.",
    "3": "I am a vegetarian.",
}
HISTORY = "User: I'm thinking about traveling to Egypt. What is the best time of year to visit?"

script = MockChatClient(
    {
        # note the chatty wrapper around the JSON: parsing copes with it
        "ptkb_classify": 'Sure, here are the scores: {"1": 0.7, "2": 0.95, "3": 0.1}',
        "short_pq": "Assistant: Egypt in winter is mild and welcoming. Days are warm. "
        "Nights are cool. Sites are uncrowded. It is the season to go.",
        "long_pq": "Passage: Egypt's winter runs from November to February. Temperatures stay mild. "
        "Sightseeing is comfortable. Summers are extremely hot. Coastal resorts stay moderate. "
        "The Nile valley is drier. Crowds grow in spring. Autumn stays calm. "
        "Rain is rare all year. Winter remains the best season.",
        "clarify": "What is the best time of year to visit Egypt for pleasant weather?",
        "combined_pq": "Winter is the most comfortable season to visit Egypt, with mild days for sightseeing.",
        "ptkb_pq": "Travelers who prefer mild weather should visit Egypt between November and February.",
    }
)

print("=== statement relevance scoring ===")
judgments = classify_ptkb(script, "", "What is the best time of year to visit?", PTKB)
for judgment in judgments:
    print(f"  statement {judgment.statement_id}: score {judgment.score}")
selection = select_relevant(judgments, threshold=0.5)
print(f"relevant at threshold 0.5: {list(selection.relevant_ids)}")

print("\n=== short-and-long variant: exactly two queries ===")
short = gen_short_pq(script, HISTORY, selection, PTKB)
long = gen_long_pq(script, HISTORY, selection, PTKB, style_menu=True)
for pq in (short, long):
    print(f"  [{pq.kind}] weight={pq.weight} | {pq.text[:70]}...")

print("\n=== weighted variant: combined query plus one per relevant statement ===")
from pqcis.pqgen import clarify_utterance

clarified = clarify_utterance(script, "", "What is the best time of year to visit there?")
print(f"clarified utterance: {clarified!r}")
weighted = gen_weighted_pqs(script, clarified, selection, PTKB)
for pq in weighted:
    source = f" (statement {pq.source_ptkb_id})" if pq.source_ptkb_id else ""
    print(f"  [{pq.kind}] weight={pq.weight}{source} | {pq.text[:70]}...")
