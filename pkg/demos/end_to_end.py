#!/usr/bin/env python3
"""Full pipeline walk-through on a small synthetic corpus.

Builds a JSONL corpus, then drives the CLI stages prepare -> resolve ->
metrics -> report in a temp directory, entirely offline (the knowledge-graph
cache is pre-seeded with the fragments the corpus needs).
"""

import json
import tempfile
from pathlib import Path

from ircmap.cli import main as ircmap
from ircmap.wikidata import CacheEntry, CacheStatus, CacheStore

PAPERS = [
    # An international collaboration spanning three countries.
    ("p1", 2012, ["Dept. of CS, McGill University, Montreal, Canada",
                  "Victoria University of Wellington, New Zealand",
                  "MIT, Cambridge, MA"]),
    # Domestic paper: two US institutions.
    ("p2", 2012, ["Stanford University, Stanford, CA, USA",
                  "Georgia Institute of Technology, Atlanta, Georgia"]),
    # Needs the knowledge graph: institution names only.
    ("p3", 2013, ["McGill University", "ETH Zurich"]),
    # Dirty data: null-likes and garbage survive as unmeasurable.
    ("p4", 2013, ["NA", "#TAB#", "zz mystery place"]),
    # Single-author record, removed during preparation.
    ("p5", 2014, ["University of Oxford, Oxford, UK"]),
]


def main():
    workdir = Path(tempfile.mkdtemp(prefix="ircmap-demo-"))
    corpus = workdir / "corpus.jsonl"
    with open(corpus, "w", encoding="utf-8") as handle:
        for paper_id, year, affiliations in PAPERS:
            handle.write(json.dumps({
                "paper_id": paper_id,
                "title": f"Paper {paper_id}",
                "year": year,
                "fos": ["computer science"],
                "authors": [{"affiliation": a} for a in affiliations],
            }) + "\n")

    cache_path = workdir / "wikidata_cache.jsonl"
    store = CacheStore(cache_path)
    at = "2024-01-01T00:00:00+00:00"
    store.put(CacheEntry("mcgill university", ("Canada",), CacheStatus.HIT, at))
    store.put(CacheEntry("eth zurich", ("Switzerland",), CacheStatus.HIT, at))
    store.put(CacheEntry("zz mystery place", (), CacheStatus.EMPTY, at))

    prepared = workdir / "prepared"
    resolved = workdir / "resolved"
    stats = workdir / "stats"
    assert ircmap(["prepare", "--input", str(corpus), "--output", str(prepared)]) == 0
    assert ircmap(["resolve", "--input", str(prepared / "prepared.jsonl"),
                   "--output", str(resolved), "--cache", str(cache_path), "--offline"]) == 0
    assert ircmap(["metrics", "--input", str(resolved / "enriched.jsonl"),
                   "--records", str(prepared / "prepared.jsonl"),
                   "--output", str(stats)]) == 0

    print(f"\nartifacts under {workdir}\n")
    for directory in (prepared, resolved, stats):
        ircmap(["report", "--input", str(directory)])


if __name__ == "__main__":
    main()
