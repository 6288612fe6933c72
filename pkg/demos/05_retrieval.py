"""Source-labeled retrieval over rulebook pages.

Builds a tiny two-source chunk store with the deterministic hash
embedder, queries it with per-label confidence thresholds, and sweeps a
threshold grid over the committed labeled pair set.
"""

import json
from pathlib import Path

import numpy as np

from repjudge import (
    HashEmbedder,
    LabeledPair,
    ingest,
    retrieve,
    sweep_threshold,
)

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

PAGES = [
    ("Air squat: hips must descend below the top of the knees; reps finish "
     "standing tall with hips and knees extended.", 1, "federation", 3),
    ("Double under: the rope passes under the feet twice for each jump; "
     "singles do not count.", 1, "federation", 7),
    ("Deadlift: the bar starts on the ground; finish with hips and knees "
     "locked out and shoulders behind the bar.", 1, "federation", 9),
    ("Club schedule: classes run Monday through Saturday with open gym on "
     "Sunday afternoons.", 0, "club", 2),
    ("Deadlift setup tips: keep the bar over mid-foot and brace before the "
     "pull.", 0, "club", 5),
]


def main():
    embedder = HashEmbedder()
    store = ingest(PAGES, embedder)
    print(f"ingested {len(store)} pages into a dim-{store.dimension} store\n")

    query_text = "squat depth: hips below the top of the knees"
    query = embedder.embed([query_text])[0]
    print(f"query: {query_text!r}")
    for label, name in ((1, "federation (cutoff 0.4)"), (0, "club (cutoff 0.6)")):
        hits = retrieve(query, store, label=label, k=3)
        print(f"  {name}:")
        if not hits:
            print("    no chunk passed the confidence threshold")
        for chunk, score in hits:
            print(f"    {score:.3f}  page {chunk.page_index}: {chunk.text[:60]}...")
    print("  (with the cutoff overridden to 0, the weak matches reappear)")
    for chunk, score in retrieve(query, store, label=0, k=2, threshold=0.0):
        print(f"    {score:.3f}  page {chunk.page_index}: {chunk.text[:60]}...")

    print("\n== threshold sweep over the committed 40-pair set ==")
    payload = json.loads((FIXTURES / "retrieval_pairs.json").read_text())
    pairs = [
        LabeledPair(
            query_embedding=np.array(p["query"]),
            chunk_embedding=np.array(p["chunk"]),
            relevant=p["relevant"],
        )
        for p in payload["pairs"]
    ]
    result = sweep_threshold(pairs, payload["grid"])
    print(f"{'t':>5} {'precision':>10} {'recall':>7} {'F1':>6}")
    for point in result.points[::2]:
        marker = "  <- best" if point.threshold == result.best_threshold else ""
        print(f"{point.threshold:>5.2f} {point.precision:>10.2f} "
              f"{point.recall:>7.2f} {point.f1:>6.2f}{marker}")
    print(f"\nargmax-F1 threshold: {result.best_threshold} (F1 {result.best_f1:.3f})")


if __name__ == "__main__":
    main()
