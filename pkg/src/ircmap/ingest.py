"""Parse source records into the canonical model and normalize affiliation strings.

Three input formats are supported:

* ``mag-tsv``  -- headerless, tab-separated, one row per (paper, author):
  ``paper_id, author_index, org, title, year, fos`` where ``fos`` is
  ``|``-separated.  Rows belonging to one paper must be contiguous.
* ``csv``      -- header row with at least ``paper_id, author_index,
  affiliation``; optional ``title, year, fos, doi``.  Also one row per
  (paper, author), grouped by contiguous ``paper_id``.
* ``jsonl``    -- one record object per line:
  ``{"paper_id", "title", "year", "fos": [...],
  "authors": [{"affiliation": ...}, ...]}`` with optional ``"doi"``.

Malformed rows are skipped and counted, never fatal; an unreadable stream or
unknown format is fatal.
"""

from __future__ import annotations

import io
import json
import re
import unicodedata
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import IO, Iterator, Union

__all__ = [
    "AffiliationMention",
    "BibRecord",
    "Format",
    "IngestError",
    "NormalizedAffiliation",
    "ParseReport",
    "RecordReader",
    "Source",
    "normalize_affiliation",
    "parse_records",
    "token_key",
]


class IngestError(Exception):
    """Unreadable input or unknown format."""


class Source(str, Enum):
    ACM = "ACM"
    MAG = "MAG"
    GENERIC = "GENERIC"


class Format(str, Enum):
    MAG_TSV = "mag-tsv"
    GENERIC_CSV = "csv"
    GENERIC_JSONL = "jsonl"


#: Raw values treated as "no affiliation given" (compared case-insensitively
#: against the trimmed raw string).  Fixed, not configurable, so category
#: counts stay comparable across runs.
NULL_SYNONYMS = frozenset({"na", "n/a", "null", "none", "-"})

YEAR_MIN = 1800
YEAR_MAX = 2100

# Everything that is not a word character, whitespace, or comma becomes a
# space; underscores count as punctuation too.
_PUNCT_RE = re.compile(r"[^\w\s,]|_")
_TAB_TOKEN_RE = re.compile(r"#tab#")


@dataclass(frozen=True)
class NormalizedAffiliation:
    """Cleaned form of one raw affiliation string.

    ``cleaned`` keeps commas (they mark field boundaries used for both
    token-window matching and Wikidata fragment extraction); ``tokens`` is the
    comma-free word sequence and ``segments`` the comma-separated pieces.
    """

    cleaned: str
    tokens: tuple[str, ...]
    segments: tuple[str, ...]
    null_like: bool


def normalize_affiliation(raw: str) -> NormalizedAffiliation:
    """Normalize a raw affiliation string.

    Applies, in order: Unicode compatibility normalization, case folding,
    removal of the literal ``#TAB#`` token, replacement of punctuation other
    than commas with spaces, whitespace collapse, and trimming.  Empty
    comma segments are dropped.  A raw value that is one of the null
    synonyms (``NA``, ``N/A``, ``NULL``, ``NONE``, ``-``) cleans to the
    empty string, so ``null_like`` is equivalent to ``cleaned == ""``.

    Idempotent: normalizing an already-cleaned string returns it unchanged.
    """
    if raw.strip().casefold() in NULL_SYNONYMS:
        return NormalizedAffiliation("", (), (), True)
    text = unicodedata.normalize("NFKC", raw)
    text = text.casefold()
    text = _TAB_TOKEN_RE.sub(" ", text)
    text = _PUNCT_RE.sub(" ", text)
    segments = tuple(" ".join(part.split()) for part in text.split(","))
    segments = tuple(s for s in segments if s)
    cleaned = ", ".join(segments)
    tokens = tuple(tok for seg in segments for tok in seg.split())
    return NormalizedAffiliation(cleaned, tokens, segments, cleaned == "")


def token_key(text: str) -> str:
    """Comma-free normalized form of ``text``, used as a lookup key."""
    return " ".join(normalize_affiliation(text).tokens)


@dataclass(frozen=True)
class AffiliationMention:
    """One (paper, author) raw affiliation string; the unit of resolution.

    ``raw`` is preserved byte-for-byte for audit.
    """

    paper_id: str
    author_index: int
    raw: str


@dataclass
class BibRecord:
    """One publication with its authors' affiliation mentions."""

    paper_id: str
    source: Source = Source.GENERIC
    title: str = ""
    year: int | None = None
    fos_terms: frozenset[str] = frozenset()
    mentions: tuple[AffiliationMention, ...] = ()
    doi: str | None = None


@dataclass
class ParseReport:
    rows_read: int = 0
    records_yielded: int = 0
    rows_skipped: int = 0


def _parse_year(value: object) -> int | None:
    try:
        year = int(str(value).strip())
    except (TypeError, ValueError):
        return None
    return year if YEAR_MIN <= year <= YEAR_MAX else None


def _parse_fos(terms: object) -> frozenset[str]:
    if terms is None:
        return frozenset()
    if isinstance(terms, str):
        parts = terms.split("|")
    else:
        parts = list(terms)
    out = set()
    for term in parts:
        key = token_key(str(term))
        if key:
            out.add(key)
    return frozenset(out)


class RecordReader:
    """Iterable of :class:`BibRecord` with a :class:`ParseReport`.

    The report's counters are final only once the stream is exhausted.
    """

    def __init__(self, rows: Iterator[BibRecord], report: ParseReport):
        self._rows = rows
        self.report = report

    def __iter__(self) -> Iterator[BibRecord]:
        return self._rows


def parse_records(
    source: Union[str, Path, IO[str], IO[bytes]],
    fmt: Format | str,
) -> RecordReader:
    """Stream records from ``source`` in the given format.

    Yields records in input order.  Rows that violate the format's schema
    (missing paper id, unparsable author index, wrong column count, bad JSON)
    are skipped and counted in the report.
    """
    try:
        fmt = Format(fmt)
    except ValueError as exc:
        raise IngestError(f"unknown format: {fmt!r}") from exc
    report = ParseReport()
    try:
        stream = _open_text(source)
    except OSError as exc:
        raise IngestError(f"cannot read input: {exc}") from exc
    if fmt is Format.GENERIC_JSONL:
        rows = _iter_jsonl(stream, report)
    elif fmt is Format.MAG_TSV:
        rows = _iter_rowwise(stream, report, _mag_row, Source.MAG)
    elif fmt is Format.GENERIC_CSV:
        rows = _iter_csv(stream, report)
    else:  # pragma: no cover - Format() already rejects unknown names
        raise IngestError(f"unknown format: {fmt}")
    return RecordReader(rows, report)


def _open_text(source: Union[str, Path, IO[str], IO[bytes]]) -> IO[str]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", errors="replace", newline="")
    if isinstance(source, io.TextIOBase):
        return source
    data = getattr(source, "read", None)
    if data is None:
        raise IngestError(f"not a readable stream: {source!r}")
    if isinstance(source, (io.RawIOBase, io.BufferedIOBase)):
        return io.TextIOWrapper(source, encoding="utf-8", errors="replace", newline="")
    return source  # duck-typed text stream


def _iter_jsonl(stream: IO[str], report: ParseReport) -> Iterator[BibRecord]:
    for line in stream:
        if not line.strip():
            continue
        report.rows_read += 1
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            report.rows_skipped += 1
            continue
        if not isinstance(obj, dict):
            report.rows_skipped += 1
            continue
        paper_id = str(obj.get("paper_id") or "").strip()
        if not paper_id:
            report.rows_skipped += 1
            continue
        authors = obj.get("authors") or []
        if not isinstance(authors, list):
            report.rows_skipped += 1
            continue
        mentions = tuple(
            AffiliationMention(paper_id, i, str((a or {}).get("affiliation", "")))
            for i, a in enumerate(authors)
        )
        doi = obj.get("doi")
        yield BibRecord(
            paper_id=paper_id,
            source=Source.GENERIC,
            title=str(obj.get("title") or ""),
            year=_parse_year(obj.get("year")) if obj.get("year") is not None else None,
            fos_terms=_parse_fos(obj.get("fos")),
            mentions=mentions,
            doi=str(doi) if doi else None,
        )
        report.records_yielded += 1


#: One mention-level row: (paper_id, author_index, affiliation, title, year, fos, doi)
_Row = tuple[str, int, str, str, "int | None", frozenset, "str | None"]


def _mag_row(fields: list[str]) -> _Row | None:
    if len(fields) != 6:
        return None
    paper_id = fields[0].strip()
    if not paper_id:
        return None
    try:
        author_index = int(fields[1])
    except ValueError:
        return None
    if author_index < 0:
        return None
    return (
        paper_id,
        author_index,
        fields[2],
        fields[3],
        _parse_year(fields[4]) if fields[4].strip() else None,
        _parse_fos(fields[5]),
        None,
    )


def _iter_rowwise(
    stream: IO[str],
    report: ParseReport,
    row_parser,
    source: Source,
) -> Iterator[BibRecord]:
    """Group contiguous mention-level rows by paper id."""
    current: list[_Row] = []

    def flush() -> BibRecord | None:
        if not current:
            return None
        first = current[0]
        seen: set[int] = set()
        mentions = []
        for row in current:
            if row[1] in seen:
                report.rows_skipped += 1
                continue
            seen.add(row[1])
            mentions.append(AffiliationMention(first[0], row[1], row[2]))
        record = BibRecord(
            paper_id=first[0],
            source=source,
            title=first[3],
            year=first[4],
            fos_terms=first[5],
            mentions=tuple(mentions),
            doi=first[6],
        )
        current.clear()
        report.records_yielded += 1
        return record

    for line in stream:
        line = line.rstrip("\n").rstrip("\r")
        if not line:
            continue
        report.rows_read += 1
        row = row_parser(line.split("\t"))
        if row is None:
            report.rows_skipped += 1
            continue
        if current and row[0] != current[0][0]:
            record = flush()
            if record is not None:
                yield record
        current.append(row)
    record = flush()
    if record is not None:
        yield record


def _iter_csv(stream: IO[str], report: ParseReport) -> Iterator[BibRecord]:
    import csv

    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise IngestError("csv input has no header row")
    required = {"paper_id", "author_index", "affiliation"}
    missing = required - set(reader.fieldnames)
    if missing:
        raise IngestError(f"csv header missing columns: {sorted(missing)}")

    def csv_row(record: dict) -> _Row | None:
        paper_id = (record.get("paper_id") or "").strip()
        if not paper_id:
            return None
        try:
            author_index = int(record.get("author_index") or "")
        except ValueError:
            return None
        if author_index < 0:
            return None
        year_raw = (record.get("year") or "").strip()
        doi = (record.get("doi") or "").strip() or None
        return (
            paper_id,
            author_index,
            record.get("affiliation") or "",
            record.get("title") or "",
            _parse_year(year_raw) if year_raw else None,
            _parse_fos(record.get("fos") or ""),
            doi,
        )

    current: list[_Row] = []

    def flush() -> BibRecord | None:
        if not current:
            return None
        first = current[0]
        seen: set[int] = set()
        mentions = []
        for row in current:
            if row[1] in seen:
                report.rows_skipped += 1
                continue
            seen.add(row[1])
            mentions.append(AffiliationMention(first[0], row[1], row[2]))
        record = BibRecord(
            paper_id=first[0],
            source=Source.GENERIC,
            title=first[3],
            year=first[4],
            fos_terms=first[5],
            mentions=tuple(mentions),
            doi=first[6],
        )
        current.clear()
        report.records_yielded += 1
        return record

    for record in reader:
        report.rows_read += 1
        row = csv_row(record)
        if row is None:
            report.rows_skipped += 1
            continue
        if current and row[0] != current[0][0]:
            out = flush()
            if out is not None:
                yield out
        current.append(row)
    out = flush()
    if out is not None:
        yield out
