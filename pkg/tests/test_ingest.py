from __future__ import annotations

import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ircmap.ingest import (
    NULL_SYNONYMS,
    Format,
    IngestError,
    Source,
    normalize_affiliation,
    parse_records,
    token_key,
)


class TestNormalizeAffiliation:
    def test_na_is_null_like(self):
        assert normalize_affiliation("NA").null_like is True

    @pytest.mark.parametrize("raw", ["N/A", "null", "NONE", "-", "", "   ", "#TAB#"])
    def test_null_like_synonyms_and_empties(self, raw):
        n = normalize_affiliation(raw)
        assert n.null_like is True
        assert n.cleaned == ""
        assert n.tokens == ()

    def test_tab_dirt_and_punctuation(self):
        n = normalize_affiliation("Dept. of CS, McGill University#TAB#")
        assert n.cleaned == "dept of cs, mcgill university"
        assert n.null_like is False
        assert n.segments == ("dept of cs", "mcgill university")
        assert n.tokens == ("dept", "of", "cs", "mcgill", "university")

    def test_tab_token_removed_not_split(self):
        # The literal token disappears entirely; no stray "tab" word remains.
        n = normalize_affiliation("University#TAB#")
        assert n.tokens == ("university",)

    def test_case_folding_and_unicode(self):
        assert normalize_affiliation("McGILL").cleaned == "mcgill"
        assert normalize_affiliation("Universität Zürich").tokens == ("universität", "zürich")
        # Decomposed accents compose back to one token.
        assert normalize_affiliation("Réunion").tokens == ("réunion",)

    def test_commas_preserved_empty_segments_dropped(self):
        n = normalize_affiliation("a ,, b,, ,c")
        assert n.cleaned == "a, b, c"

    @given(st.text(max_size=80))
    @settings(max_examples=300, deadline=None)
    def test_idempotent(self, raw):
        once = normalize_affiliation(raw)
        twice = normalize_affiliation(once.cleaned)
        assert twice.cleaned == once.cleaned
        assert twice.tokens == once.tokens
        assert twice.segments == once.segments

    @given(st.text(max_size=80))
    @settings(max_examples=300, deadline=None)
    def test_null_like_iff_nothing_survives(self, raw):
        n = normalize_affiliation(raw)
        assert n.null_like == (n.cleaned == "")
        if raw.strip().casefold() not in NULL_SYNONYMS:
            survives = any(ch.isalnum() for ch in normalize_affiliation(raw.replace(",", " ")).cleaned)
            assert n.null_like != survives

    def test_token_key_strips_commas(self):
        assert token_key("Wellington, New Zealand") == "wellington new zealand"


class TestParseRecords:
    def test_jsonl_roundtrip(self):
        rows = [
            {"paper_id": "p1", "title": "T1", "year": 1999, "fos": ["AI"],
             "authors": [{"affiliation": "A"}, {"affiliation": "B"}]},
            {"paper_id": "p2", "title": "T2", "year": 2001, "fos": [], "authors": []},
            {"paper_id": "p3", "title": "T3", "year": 2010, "fos": ["ML"],
             "authors": [{"affiliation": "C"}]},
        ]
        stream = io.StringIO("".join(json.dumps(r) + "\n" for r in rows))
        reader = parse_records(stream, Format.GENERIC_JSONL)
        records = list(reader)
        assert [r.paper_id for r in records] == ["p1", "p2", "p3"]
        assert reader.report.records_yielded == 3
        assert reader.report.rows_skipped == 0
        assert records[0].mentions[1].raw == "B"
        assert records[0].fos_terms == frozenset({"ai"})
        assert records[1].mentions == ()

    def test_missing_paper_id_skipped(self):
        stream = io.StringIO('{"title": "no id", "authors": []}\n{"paper_id": "p1", "authors": []}\n')
        reader = parse_records(stream, Format.GENERIC_JSONL)
        assert [r.paper_id for r in reader] == ["p1"]
        assert reader.report.rows_skipped == 1

    def test_bad_json_skipped(self):
        stream = io.StringIO('{"paper_id": "p1", "authors": []}\nnot json at all\n')
        reader = parse_records(stream, Format.GENERIC_JSONL)
        assert len(list(reader)) == 1
        assert reader.report.rows_skipped == 1

    def test_mag_tsv_mention_raw_preserved(self):
        line = "42\t0\tMcGill University\tSome Paper\t2016\tcomputer science|databases\n"
        reader = parse_records(io.StringIO(line), Format.MAG_TSV)
        (record,) = list(reader)
        assert record.source is Source.MAG
        assert record.mentions[0].raw == "McGill University"
        assert record.year == 2016
        assert record.fos_terms == frozenset({"computer science", "databases"})

    def test_mag_tsv_groups_contiguous_rows(self):
        text = (
            "1\t0\tOrg A\tPaper 1\t2000\tai\n"
            "1\t1\tOrg B\tPaper 1\t2000\tai\n"
            "2\t0\tOrg C\tPaper 2\t2001\tml\n"
        )
        reader = parse_records(io.StringIO(text), Format.MAG_TSV)
        records = list(reader)
        assert [r.paper_id for r in records] == ["1", "2"]
        assert [m.raw for m in records[0].mentions] == ["Org A", "Org B"]
        assert [m.author_index for m in records[0].mentions] == [0, 1]

    def test_mag_tsv_bad_rows_counted(self):
        text = (
            "1\t0\tOrg A\tPaper 1\t2000\tai\n"
            "short\trow\n"
            "1\tnot-an-int\tOrg B\tPaper 1\t2000\tai\n"
        )
        reader = parse_records(io.StringIO(text), Format.MAG_TSV)
        records = list(reader)
        assert len(records) == 1
        assert len(records[0].mentions) == 1
        assert reader.report.rows_skipped == 2

    def test_year_out_of_range_flagged_invalid(self):
        stream = io.StringIO('{"paper_id": "p", "year": 1492, "authors": []}\n')
        (record,) = list(parse_records(stream, Format.GENERIC_JSONL))
        assert record.year is None

    def test_csv_with_optional_columns(self):
        text = (
            "paper_id,author_index,affiliation,title,year,fos,doi\n"
            'p1,0,"Dept, McGill University",Paper One,2015,ai|ml,10.1000/X\n'
            "p1,1,ETH Zurich,Paper One,2015,ai|ml,10.1000/X\n"
        )
        reader = parse_records(io.StringIO(text), Format.GENERIC_CSV)
        (record,) = list(reader)
        assert record.doi == "10.1000/X"
        assert [m.raw for m in record.mentions] == ["Dept, McGill University", "ETH Zurich"]

    def test_csv_missing_required_header_fatal(self):
        with pytest.raises(IngestError):
            list(parse_records(io.StringIO("paper_id,affiliation\np,x\n"), Format.GENERIC_CSV))

    def test_unknown_format_fatal(self):
        with pytest.raises(IngestError):
            parse_records(io.StringIO(""), "parquet")

    def test_unreadable_input_fatal(self, tmp_path):
        with pytest.raises(IngestError):
            parse_records(tmp_path / "missing.jsonl", Format.GENERIC_JSONL)

    def test_byte_stream_accepted(self):
        data = b'{"paper_id": "p1", "authors": [{"affiliation": "Caf\xc3\xa9 Lab"}]}\n'
        reader = parse_records(io.BytesIO(data), Format.GENERIC_JSONL)
        (record,) = list(reader)
        assert record.mentions[0].raw == "Café Lab"

    def test_order_preserved_no_fabricated_mentions(self):
        rows = [
            {"paper_id": f"p{i}", "authors": [{"affiliation": f"A{i}-{j}"} for j in range(i % 3)]}
            for i in range(20)
        ]
        stream = io.StringIO("".join(json.dumps(r) + "\n" for r in rows))
        records = list(parse_records(stream, Format.GENERIC_JSONL))
        assert [r.paper_id for r in records] == [f"p{i}" for i in range(20)]
        total_in = sum(i % 3 for i in range(20))
        assert sum(len(r.mentions) for r in records) == total_in
