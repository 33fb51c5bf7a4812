"""Command-line pipeline: prepare -> resolve -> metrics, plus report rendering.

The stages are separate subcommands so the expensive knowledge-graph stage
can be resumed from its cache independently of the cheap ones.  Nothing in
the pipeline samples or depends on wall-clock state, so reruns are
bit-stable, and every run writes a ``manifest.json`` (configuration echo,
input digests, output counts) that makes a run reproducible exactly.

Exit code 0 means every requested artifact was fully written; on failure,
partial outputs are removed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from ircmap import __version__
from ircmap.gazetteer import build_gazetteer, default_data_dir
from ircmap.ingest import Format, IngestError, parse_records
from ircmap.metrics import collapse_to_papers, compute_irc
from ircmap.prep import DedupIndex, PrepStats, compute_fos_filter, dedup_overlap, filter_by_fos, filter_coauthored
from ircmap.reports import write_breakdown, write_irc_stats, write_prep_report
from ircmap.resolver import Category, Resolution, resolve_corpus
from ircmap.wikidata import (
    CACHE_DIR_ENV_VAR,
    DEFAULT_ENDPOINT,
    ENDPOINT_ENV_VAR,
    CacheStore,
    LabelMap,
    Mode,
    WikidataClient,
)

log = logging.getLogger("ircmap")

ENRICHED_FIELDS = ["paper_id", "author_index", "raw", "category", "iso2", "evidence", "ambiguous"]


class CliError(Exception):
    """Fatal, user-facing condition; message printed to stderr, exit 1."""


@dataclass
class RunConfig:
    subcommand: str
    input: str
    format: str = Format.GENERIC_JSONL.value
    output: str = ""
    gazetteer: Optional[str] = None
    extended_parts: bool = False
    cache: Optional[str] = None
    endpoint: str = DEFAULT_ENDPOINT
    offline: bool = False
    rate_limit: float = 2.0
    jobs: int = 1
    top_k_fos: Optional[int] = None
    overlap: Optional[str] = None
    overlap_format: str = Format.GENERIC_JSONL.value
    dedup_against: Optional[str] = None
    dedup_format: str = Format.GENERIC_JSONL.value
    records: Optional[str] = None
    records_format: str = Format.GENERIC_JSONL.value
    emit_csv: bool = False


def default_cache_path() -> Path:
    env_dir = os.environ.get(CACHE_DIR_ENV_VAR)
    if env_dir:
        return Path(env_dir) / "wikidata_cache.jsonl"
    return Path.home() / ".cache" / "ircmap" / "wikidata_cache.jsonl"


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


class OutputSet:
    """Tracks written artifacts so failures can clean up partial output."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.paths: list[Path] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def track(self, *paths: Path) -> None:
        self.paths.extend(paths)

    def discard_all(self) -> None:
        for path in self.paths:
            try:
                path.unlink(missing_ok=True)
            except OSError:
                pass

    def write_manifest(self, config: RunConfig, inputs: list[Path], counts: dict) -> Path:
        manifest = {
            "tool": "ircmap",
            "version": __version__,
            "subcommand": config.subcommand,
            "config": asdict(config),
            "inputs": {str(p): _sha256(p) for p in inputs},
            "outputs": sorted(p.name for p in self.paths),
            "counts": counts,
        }
        path = self.out_dir / "manifest.json"
        path.write_text(
            json.dumps(manifest, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        self.track(path)
        return path


def _require_input(path_str: str) -> Path:
    path = Path(path_str)
    if not path.is_file():
        raise CliError(f"input file not found: {path}")
    return path


def _records_list(path: Path, fmt: str) -> list:
    reader = parse_records(path, Format(fmt))
    records = list(reader)
    if reader.report.rows_skipped:
        log.warning("%s: skipped %d malformed rows", path, reader.report.rows_skipped)
    return records


def cmd_prepare(config: RunConfig) -> int:
    in_path = _require_input(config.input)
    out = OutputSet(Path(config.output))
    try:
        records = _records_list(in_path, config.format)
        if not records:
            raise CliError(f"no records parsed from {in_path}")
        stats = PrepStats()
        for record in records:
            stats.observe_input(record)

        stream = iter(records)
        if config.top_k_fos:
            if config.overlap:
                overlap_records = _records_list(_require_input(config.overlap), config.overlap_format)
            else:
                overlap_records = records
            fos_filter = compute_fos_filter(overlap_records, config.top_k_fos)
            stats.fos_coverage = fos_filter.coverage
            stats.fos_terms = tuple(sorted(fos_filter.terms))
            stream = filter_by_fos(stream, fos_filter, stats)
        if config.dedup_against:
            secondary = _records_list(_require_input(config.dedup_against), config.dedup_format)
            stream = dedup_overlap(stream, DedupIndex.from_records(secondary), stats)
        stream = filter_coauthored(stream, stats)

        corpus_path = out.out_dir / "prepared.jsonl"
        out.track(corpus_path)
        with open(corpus_path, "w", encoding="utf-8") as handle:
            for record in stream:
                stats.output_records += 1
                handle.write(
                    json.dumps(
                        {
                            "paper_id": record.paper_id,
                            "title": record.title,
                            "year": record.year,
                            "fos": sorted(record.fos_terms),
                            "doi": record.doi,
                            "authors": [{"affiliation": m.raw} for m in record.mentions],
                        },
                        ensure_ascii=False,
                        sort_keys=True,
                    )
                    + "\n"
                )
        out.track(*write_prep_report(out.out_dir, stats))
        inputs = [in_path]
        if config.overlap:
            inputs.append(Path(config.overlap))
        if config.dedup_against:
            inputs.append(Path(config.dedup_against))
        out.write_manifest(
            config,
            inputs,
            {
                "total_works": stats.total_works,
                "prepared": stats.output_records,
                "fos_dropped": stats.fos_dropped,
                "dedup_dropped": stats.dedup_dropped,
                "single_author_dropped": stats.single_author_dropped,
                "no_author_data": stats.no_author_data,
            },
        )
    except Exception:
        out.discard_all()
        raise
    print(f"prepared {stats.output_records} of {stats.total_works} records -> {out.out_dir}")
    return 0


def _build_client(config: RunConfig, gazetteer) -> WikidataClient:
    cache_path = Path(config.cache) if config.cache else default_cache_path()
    if config.offline and not cache_path.is_file():
        raise CliError(f"offline mode requires an existing cache file: {cache_path}")
    cache = CacheStore(cache_path)
    data_dir = Path(config.gazetteer) if config.gazetteer else default_data_dir()
    label_map = LabelMap.from_gazetteer(gazetteer, data_dir / "wikidata_labels.tsv")
    return WikidataClient(
        cache=cache,
        label_map=label_map,
        endpoint=config.endpoint,
        mode=Mode.OFFLINE if config.offline else Mode.ONLINE,
        rate_limit=config.rate_limit,
    )


def cmd_resolve(config: RunConfig) -> int:
    in_path = _require_input(config.input)
    out = OutputSet(Path(config.output))
    try:
        data_dir = Path(config.gazetteer) if config.gazetteer else default_data_dir()
        gazetteer = build_gazetteer(data_dir, include_extension=config.extended_parts)
        client = _build_client(config, gazetteer)

        reader = parse_records(in_path, Format(config.format))
        raw_by_mention: dict[tuple[str, int], str] = {}

        def records_with_raw_capture():
            for record in reader:
                for mention in record.mentions:
                    raw_by_mention[(mention.paper_id, mention.author_index)] = mention.raw
                yield record

        run = resolve_corpus(records_with_raw_capture(), gazetteer, client, jobs=config.jobs)
        enriched_path = out.out_dir / "enriched.jsonl"
        out.track(enriched_path)
        csv_handle = None
        csv_writer = None
        if config.emit_csv:
            import csv as _csv

            csv_path = out.out_dir / "enriched.csv"
            out.track(csv_path)
            csv_handle = open(csv_path, "w", encoding="utf-8", newline="")
            csv_writer = _csv.writer(csv_handle)
            csv_writer.writerow(ENRICHED_FIELDS)
        try:
            with open(enriched_path, "w", encoding="utf-8") as handle:
                for resolution in run:
                    raw = raw_by_mention.pop((resolution.paper_id, resolution.author_index), "")
                    obj = {
                        "paper_id": resolution.paper_id,
                        "author_index": resolution.author_index,
                        "raw": raw,
                        "category": resolution.category.value,
                        "iso2": resolution.iso2,
                        "evidence": resolution.evidence,
                        "ambiguous": resolution.ambiguous,
                    }
                    handle.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")
                    if csv_writer is not None:
                        csv_writer.writerow([obj[field] for field in ENRICHED_FIELDS])
        finally:
            if csv_handle is not None:
                csv_handle.close()
        out.track(*write_breakdown(out.out_dir, run.breakdown))
        out.write_manifest(
            config,
            [in_path],
            {
                "mentions": run.breakdown.total,
                **{c.value: run.breakdown.counts[c] for c in Category},
            },
        )
    except Exception:
        out.discard_all()
        raise
    print(f"resolved {run.breakdown.total} mentions -> {out.out_dir}")
    return 0


def _read_enriched(path: Path) -> list[Resolution]:
    resolutions = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                resolutions.append(
                    Resolution(
                        paper_id=obj["paper_id"],
                        author_index=int(obj["author_index"]),
                        category=Category(obj["category"]),
                        iso2=obj.get("iso2"),
                        evidence=obj.get("evidence", ""),
                        ambiguous=bool(obj.get("ambiguous", False)),
                    )
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise CliError(f"{path}:{lineno}: bad enriched row: {exc}") from exc
    return resolutions


def cmd_metrics(config: RunConfig) -> int:
    enriched_path = _require_input(config.input)
    out = OutputSet(Path(config.output))
    try:
        resolutions = _read_enriched(enriched_path)
        if config.records:
            records = _records_list(_require_input(config.records), config.records_format)
        else:
            # Without the source corpus, paper identity and order come from
            # the enriched file itself; years are unknown.
            from ircmap.ingest import BibRecord

            seen: dict[str, None] = {}
            for resolution in resolutions:
                seen.setdefault(resolution.paper_id, None)
            records = [BibRecord(paper_id=pid) for pid in seen]
        papers = collapse_to_papers(resolutions, records)
        stats = compute_irc(papers)
        out.track(*write_irc_stats(out.out_dir, stats))
        inputs = [enriched_path] + ([Path(config.records)] if config.records else [])
        out.write_manifest(
            config,
            inputs,
            {
                "papers": stats.total_papers,
                "international": stats.international,
                "domestic": stats.domestic,
                "unmeasurable": stats.unmeasurable,
            },
        )
    except Exception:
        out.discard_all()
        raise
    print(f"computed collaboration stats for {stats.total_papers} papers -> {out.out_dir}")
    return 0


def cmd_report(config: RunConfig) -> int:
    directory = Path(config.input)
    if not directory.is_dir():
        raise CliError(f"not a directory: {directory}")
    found = False
    for name in ("prep_report.txt", "breakdown.txt", "irc_stats.txt"):
        path = directory / name
        if path.is_file():
            found = True
            print(f"== {name}")
            print(path.read_text(encoding="utf-8"))
    if not found:
        raise CliError(f"no report artifacts found under {directory}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ircmap",
        description="Enrich bibliographic records with countries and measure "
        "international research collaboration.",
    )
    parser.add_argument("--version", action="version", version=f"ircmap {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    formats = [f.value for f in Format]

    prepare = sub.add_parser("prepare", help="filter a corpus: FOS, dedup, co-authored only")
    prepare.add_argument("--input", required=True)
    prepare.add_argument("--format", choices=formats, default=Format.GENERIC_JSONL.value)
    prepare.add_argument("--output", required=True, help="output directory")
    prepare.add_argument("--top-k-fos", type=int, default=None, metavar="K",
                         help="apply a top-K field-of-study filter")
    prepare.add_argument("--overlap", default=None,
                         help="corpus whose FOS frequencies define the filter (default: the input)")
    prepare.add_argument("--overlap-format", choices=formats, default=Format.GENERIC_JSONL.value)
    prepare.add_argument("--dedup-against", default=None,
                         help="drop records already present in this corpus")
    prepare.add_argument("--dedup-format", choices=formats, default=Format.GENERIC_JSONL.value)

    resolve_p = sub.add_parser("resolve", help="resolve mention countries and write enrichment")
    resolve_p.add_argument("--input", required=True)
    resolve_p.add_argument("--format", choices=formats, default=Format.GENERIC_JSONL.value)
    resolve_p.add_argument("--output", required=True, help="output directory")
    resolve_p.add_argument("--gazetteer", default=None, help="directory of gazetteer tables")
    resolve_p.add_argument("--extended-parts", action="store_true",
                           help="also load Canadian provinces and Australian states")
    resolve_p.add_argument("--cache", default=None, help="knowledge-graph cache file (JSON lines)")
    resolve_p.add_argument("--endpoint", default=None, help="SPARQL endpoint URL")
    resolve_p.add_argument("--offline", action="store_true",
                           help="answer only from the cache; no network")
    resolve_p.add_argument("--rate-limit", type=float, default=2.0, metavar="RPS",
                           help="max endpoint requests per second (default 2)")
    resolve_p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                           help="worker threads (output is identical for any value)")
    resolve_p.add_argument("--emit-csv", action="store_true",
                           help="also write enriched.csv next to enriched.jsonl")

    metrics_p = sub.add_parser("metrics", help="compute collaboration statistics")
    metrics_p.add_argument("--input", required=True, help="enriched.jsonl from resolve")
    metrics_p.add_argument("--records", default=None,
                           help="source corpus (for paper years); recommended")
    metrics_p.add_argument("--records-format", choices=formats, default=Format.GENERIC_JSONL.value)
    metrics_p.add_argument("--output", required=True, help="output directory")

    report_p = sub.add_parser("report", help="print the plain-text reports in a directory")
    report_p.add_argument("--input", required=True, help="output directory of a previous run")

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    endpoint = getattr(args, "endpoint", None) or os.environ.get(ENDPOINT_ENV_VAR) or DEFAULT_ENDPOINT
    return RunConfig(
        subcommand=args.subcommand,
        input=args.input,
        format=getattr(args, "format", Format.GENERIC_JSONL.value),
        output=getattr(args, "output", ""),
        gazetteer=getattr(args, "gazetteer", None),
        extended_parts=getattr(args, "extended_parts", False),
        cache=getattr(args, "cache", None),
        endpoint=endpoint,
        offline=getattr(args, "offline", False),
        rate_limit=getattr(args, "rate_limit", 2.0),
        jobs=max(1, getattr(args, "jobs", 1) or 1),
        top_k_fos=getattr(args, "top_k_fos", None),
        overlap=getattr(args, "overlap", None),
        overlap_format=getattr(args, "overlap_format", Format.GENERIC_JSONL.value),
        dedup_against=getattr(args, "dedup_against", None),
        dedup_format=getattr(args, "dedup_format", Format.GENERIC_JSONL.value),
        records=getattr(args, "records", None),
        records_format=getattr(args, "records_format", Format.GENERIC_JSONL.value),
        emit_csv=getattr(args, "emit_csv", False),
    )


COMMANDS = {
    "prepare": cmd_prepare,
    "resolve": cmd_resolve,
    "metrics": cmd_metrics,
    "report": cmd_report,
}


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    config = _config_from_args(args)
    try:
        return COMMANDS[args.subcommand](config)
    except (CliError, IngestError) as exc:
        print(f"ircmap: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # unexpected: still fail cleanly with a message
        log.exception("unhandled failure")
        print(f"ircmap: internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
