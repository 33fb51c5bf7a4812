"""International-collaboration statistics over resolved mentions.

A paper's country set is the set of distinct resolved countries across its
mentions (multiplicity is ignored: collaboration is about distinct
countries).  A paper is international with two or more countries, domestic
with exactly one, and unmeasurable with none; unmeasurable papers are kept
out of the ratio's denominator rather than counted as domestic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional

from ircmap.ingest import BibRecord
from ircmap.resolver import Resolution

__all__ = [
    "ConsistencyError",
    "IrcStats",
    "PaperCountrySet",
    "YearStats",
    "collapse_to_papers",
    "compute_irc",
]


class ConsistencyError(Exception):
    """Resolutions and records disagree about which mentions exist."""


@dataclass(frozen=True)
class PaperCountrySet:
    paper_id: str
    year: Optional[int]
    countries: frozenset[str]
    unresolved_mentions: int


def collapse_to_papers(
    resolutions: Iterable[Resolution],
    records: Iterable[BibRecord],
) -> list[PaperCountrySet]:
    """Group mention resolutions into one country set per paper.

    ``unresolved_mentions`` counts the paper's null-like and unidentified
    mentions.  A resolution naming a paper that is not in ``records`` is a
    fatal consistency error.
    """
    by_paper: dict[str, tuple[set[str], int]] = {}
    order: list[BibRecord] = []
    for record in records:
        if record.paper_id in by_paper:
            raise ConsistencyError(f"duplicate paper id {record.paper_id!r} in records")
        order.append(record)
        by_paper[record.paper_id] = (set(), 0)
    for resolution in resolutions:
        if resolution.paper_id not in by_paper:
            raise ConsistencyError(
                f"resolution references unknown paper {resolution.paper_id!r}"
            )
        countries, unresolved = by_paper[resolution.paper_id]
        if resolution.iso2 is not None:
            countries.add(resolution.iso2)
        else:
            unresolved += 1
        by_paper[resolution.paper_id] = (countries, unresolved)
    return [
        PaperCountrySet(
            paper_id=record.paper_id,
            year=record.year,
            countries=frozenset(by_paper[record.paper_id][0]),
            unresolved_mentions=by_paper[record.paper_id][1],
        )
        for record in order
    ]


@dataclass
class YearStats:
    total: int = 0
    international: int = 0
    domestic: int = 0
    unmeasurable: int = 0

    @property
    def irc_ratio(self) -> Optional[float]:
        measurable = self.international + self.domestic
        return self.international / measurable if measurable else None

    def add(self, n_countries: int) -> None:
        self.total += 1
        if n_countries >= 2:
            self.international += 1
        elif n_countries == 1:
            self.domestic += 1
        else:
            self.unmeasurable += 1


@dataclass
class IrcStats:
    """Corpus-level collaboration measures.

    ``pair_counts`` maps each unordered country pair (stored sorted) to the
    number of papers where both appear; a paper with k countries contributes
    k*(k-1)/2 pairs, each once.
    """

    total_papers: int = 0
    international: int = 0
    domestic: int = 0
    unmeasurable: int = 0
    per_year: dict = field(default_factory=dict)  # year (int or None) -> YearStats
    pair_counts: dict = field(default_factory=dict)  # (iso2, iso2) sorted -> int

    @property
    def irc_ratio(self) -> Optional[float]:
        measurable = self.international + self.domestic
        return self.international / measurable if measurable else None

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "total_papers": self.total_papers,
            "international": self.international,
            "domestic": self.domestic,
            "unmeasurable": self.unmeasurable,
            "irc_ratio": self.irc_ratio,
            "per_year": {
                ("unknown" if year is None else str(year)): {
                    "total": ys.total,
                    "international": ys.international,
                    "domestic": ys.domestic,
                    "unmeasurable": ys.unmeasurable,
                    "irc_ratio": ys.irc_ratio,
                }
                for year, ys in sorted(
                    self.per_year.items(), key=lambda kv: (kv[0] is None, kv[0] or 0)
                )
            },
            "pair_counts": {
                f"{a}-{b}": count
                for (a, b), count in sorted(self.pair_counts.items())
            },
        }


def compute_irc(papers: Iterable[PaperCountrySet]) -> IrcStats:
    """Fold paper country sets into corpus statistics.

    Pure and associative: computing on partitions and merging counters gives
    the same result as one sequential pass.
    """
    stats = IrcStats()
    for paper in papers:
        n = len(paper.countries)
        stats.total_papers += 1
        if n >= 2:
            stats.international += 1
        elif n == 1:
            stats.domestic += 1
        else:
            stats.unmeasurable += 1
        year_stats = stats.per_year.setdefault(paper.year, YearStats())
        year_stats.add(n)
        for pair in combinations(sorted(paper.countries), 2):
            stats.pair_counts[pair] = stats.pair_counts.get(pair, 0) + 1
    return stats
