from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone

import pytest

from ircmap.wikidata import (
    CacheEntry,
    CacheStatus,
    CacheStore,
    LabelMap,
    Mode,
    RateLimiter,
    ReplayTransport,
    TransportError,
    TransportResponse,
    WikidataClient,
    build_sparql_query,
    label_to_iso2,
)

from support import (
    QUERY_TEMPLATE_FILE,
    REPLAY_DIR,
    FailingTransport,
    FakeClock,
    ScriptedTransport,
)


def _ws(text: str) -> str:
    return " ".join(text.split())


class TestBuildSparqlQuery:
    def test_mcgill_matches_golden_template(self):
        query = build_sparql_query("McGill University")
        golden = QUERY_TEMPLATE_FILE.read_text(encoding="utf-8")
        expected = golden.replace("[AFFILIATION]", "McGill_University")
        assert _ws(query.text) == _ws(expected)
        assert query.url_title == "McGill_University"

    def test_contains_select_and_subject_iri_once(self):
        query = build_sparql_query("McGill University")
        assert query.text.count("SELECT ?countryLabel WHERE") == 1
        iri = "https://en.wikipedia.org/wiki/McGill_University"
        assert query.text.count(iri) == 1

    def test_single_token_unchanged(self):
        assert build_sparql_query("MIT").url_title == "MIT"

    def test_reserved_characters_percent_encoded(self):
        query = build_sparql_query("AT&T Labs")
        assert query.url_title == "AT%26T_Labs"
        assert "<https://en.wikipedia.org/wiki/AT%26T_Labs>" in query.text

    def test_casing_preserved(self):
        assert build_sparql_query("University of oxford").url_title == "University_of_oxford"

    def test_whitespace_runs_collapse(self):
        assert build_sparql_query("  McGill   University ").url_title == "McGill_University"

    def test_empty_fragment_rejected(self):
        with pytest.raises(ValueError):
            build_sparql_query("   ")


class TestCacheStore:
    def _entry(self, key="k", status=CacheStatus.HIT, countries=("Canada",), at=None, detail=""):
        return CacheEntry(
            key=key,
            countries=countries if status is CacheStatus.HIT else (),
            status=status,
            retrieved_at=(at or datetime.now(timezone.utc)).isoformat(),
            detail=detail,
        )

    def test_round_trip_is_lossless(self):
        entry = self._entry(detail="note")
        assert CacheEntry.from_json(entry.to_json()) == entry

    def test_put_then_get_through_file(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        store = CacheStore(path)
        entry = self._entry()
        store.put(entry)
        reloaded = CacheStore(path)
        assert reloaded.get("k") == entry

    def test_last_entry_per_key_wins(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        store = CacheStore(path)
        store.put(self._entry(countries=("Canada",)))
        store.put(self._entry(countries=("France",)))
        assert CacheStore(path).get("k").countries == ("France",)

    def test_error_entries_expire(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        old = datetime.now(timezone.utc) - timedelta(hours=25)
        store = CacheStore(path)
        store.put(self._entry(status=CacheStatus.ERROR, at=old, detail="http 500"))
        assert store.get("k") is None
        fresh = self._entry(status=CacheStatus.ERROR, detail="http 500")
        store.put(fresh)
        assert store.get("k") == fresh

    def test_hit_entries_do_not_expire(self, tmp_path):
        old = datetime.now(timezone.utc) - timedelta(days=400)
        store = CacheStore(tmp_path / "cache.jsonl")
        store.put(self._entry(at=old))
        assert store.get("k") is not None

    def test_invariant_enforced(self):
        with pytest.raises(ValueError):
            CacheEntry("k", (), CacheStatus.HIT, "2024-01-01T00:00:00+00:00")
        with pytest.raises(ValueError):
            CacheEntry("k", ("Canada",), CacheStatus.EMPTY, "2024-01-01T00:00:00+00:00")

    def test_bad_cache_lines_skipped(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        path.write_text('not json\n' + self._entry().to_json() + "\n", encoding="utf-8")
        assert CacheStore(path).get("k") is not None


class TestLabelMap:
    def test_canada_maps(self, label_map):
        assert label_to_iso2("Canada", label_map) == "CA"

    def test_q30_label_maps_to_us(self, label_map, data_dir):
        # The shipped extras table is the authority for this label.
        lines = (data_dir / "wikidata_labels.tsv").read_text(encoding="utf-8").splitlines()
        assert any(line.startswith("United States of America\tUS") for line in lines)
        assert label_to_iso2("United States of America", label_map) == "US"

    def test_unmapped_label_reported_not_dropped(self, gazetteer, data_dir):
        label_map = LabelMap.from_gazetteer(gazetteer, data_dir / "wikidata_labels.tsv")
        assert label_to_iso2("Narnia", label_map) is None
        assert "Narnia" in label_map.unmapped

    def test_unknown_iso_code_in_extras_rejected(self, gazetteer, tmp_path):
        bad = tmp_path / "labels.tsv"
        bad.write_text("Narnia\tZZ\n", encoding="utf-8")
        with pytest.raises(ValueError, match="ZZ"):
            LabelMap.from_gazetteer(gazetteer, bad)


class TestQueryCountry:
    def test_replay_hit_for_mcgill(self, make_replay_client):
        client, transport = make_replay_client()
        entry = client.query_country("McGill University")
        assert entry.status is CacheStatus.HIT
        assert entry.countries == ("Canada",)
        assert transport.calls == 1

    def test_empty_result(self, make_replay_client):
        client, _ = make_replay_client()
        entry = client.query_country("Unknown Institute of Advanced Phrenology")
        assert entry.status is CacheStatus.EMPTY
        assert entry.countries == ()

    def test_second_call_is_cache_hit_with_zero_network(self, make_replay_client):
        client, transport = make_replay_client()
        first = client.query_country("McGill University")
        second = client.query_country("McGill University")
        assert second == first
        assert transport.calls == 1

    def test_case_variants_share_cache_key(self, make_replay_client):
        client, transport = make_replay_client()
        client.query_country("McGill University")
        entry = client.query_country("MCGILL UNIVERSITY")
        assert entry.countries == ("Canada",)
        assert transport.calls == 1

    def test_offline_miss_not_cached_and_no_network(self, label_map):
        transport = FailingTransport()
        client = WikidataClient(
            cache=CacheStore(), label_map=label_map, mode=Mode.OFFLINE, transport=transport
        )
        entry = client.query_country("McGill University")
        assert entry.status is CacheStatus.ERROR
        assert entry.detail == "offline-miss"
        assert transport.calls == 0
        assert client.cache.get(entry.key) is None

    def test_offline_cache_hit_needs_no_network(self, label_map, make_replay_client, tmp_path):
        path = tmp_path / "cache.jsonl"
        warm, _ = make_replay_client(cache=CacheStore(path))
        warm.query_country("McGill University")
        transport = FailingTransport()
        client = WikidataClient(
            cache=CacheStore(path), label_map=label_map, mode=Mode.OFFLINE, transport=transport
        )
        entry = client.query_country("McGill University")
        assert entry.status is CacheStatus.HIT
        assert transport.calls == 0

    def test_retry_then_success(self, label_map):
        ok_body = json.dumps(
            {"results": {"bindings": [{"countryLabel": {"value": "Canada"}}]}}
        )
        transport = ScriptedTransport(
            [TransportResponse(500, "boom"), TransportResponse(429, "slow"), TransportResponse(200, ok_body)]
        )
        clock = FakeClock()
        client = WikidataClient(
            cache=CacheStore(), label_map=label_map, transport=transport,
            rate_limit=0.0, max_attempts=5, backoff_base=1.0,
            clock=clock.clock, sleep=clock.sleep,
        )
        entry = client.query_country("McGill University")
        assert entry.status is CacheStatus.HIT
        assert transport.calls == 3
        assert clock.sleeps == [1.0, 2.0]  # exponential backoff between attempts

    def test_persistent_server_error_cached_with_detail(self, label_map):
        transport = ScriptedTransport([TransportResponse(500, "x")] * 5)
        clock = FakeClock()
        client = WikidataClient(
            cache=CacheStore(), label_map=label_map, transport=transport,
            rate_limit=0.0, max_attempts=5, clock=clock.clock, sleep=clock.sleep,
        )
        entry = client.query_country("McGill University")
        assert entry.status is CacheStatus.ERROR
        assert entry.detail == "http 500"
        assert transport.calls == 5
        assert client.cache.get(entry.key) is not None

    def test_client_error_not_retried(self, label_map):
        transport = ScriptedTransport([TransportResponse(404, "nope")])
        client = WikidataClient(
            cache=CacheStore(), label_map=label_map, transport=transport,
            rate_limit=0.0, sleep=lambda s: None,
        )
        entry = client.query_country("McGill University")
        assert entry.status is CacheStatus.ERROR
        assert transport.calls == 1

    def test_malformed_body_not_cached(self, label_map):
        transport = ScriptedTransport([TransportResponse(200, "<html>oops</html>")])
        client = WikidataClient(
            cache=CacheStore(), label_map=label_map, transport=transport,
            rate_limit=0.0, sleep=lambda s: None,
        )
        entry = client.query_country("McGill University")
        assert entry.status is CacheStatus.ERROR
        assert "malformed" in entry.detail
        assert client.cache.get(entry.key) is None

    def test_replay_transport_rejects_unknown_title(self):
        transport = ReplayTransport(REPLAY_DIR)
        query = build_sparql_query("Nowhere Institute Zzz")
        with pytest.raises(TransportError):
            transport.get("http://endpoint", {"query": query.text}, {})

    def test_duplicate_labels_deduplicated(self, label_map):
        body = json.dumps(
            {"results": {"bindings": [
                {"countryLabel": {"value": "Canada"}},
                {"countryLabel": {"value": "Canada"}},
            ]}}
        )
        transport = ScriptedTransport([TransportResponse(200, body)])
        client = WikidataClient(
            cache=CacheStore(), label_map=label_map, transport=transport, rate_limit=0.0
        )
        assert client.query_country("Twin Binding U").countries == ("Canada",)


class TestRateLimiter:
    def test_observed_rate_never_exceeds_ceiling(self):
        clock = FakeClock()
        limiter = RateLimiter(2.0, clock=clock.clock, sleep=clock.sleep)
        stamps = []
        for _ in range(10):
            limiter.acquire()
            stamps.append(clock.now)
        gaps = [b - a for a, b in zip(stamps, stamps[1:])]
        assert all(gap >= 0.5 - 1e-9 for gap in gaps)

    def test_disabled_limiter_never_sleeps(self):
        clock = FakeClock()
        limiter = RateLimiter(0.0, clock=clock.clock, sleep=clock.sleep)
        for _ in range(100):
            limiter.acquire()
        assert clock.sleeps == []

    def test_client_requests_respect_rate(self, label_map):
        body = json.dumps({"results": {"bindings": []}})
        transport = ScriptedTransport([TransportResponse(200, body)] * 6)
        clock = FakeClock()
        client = WikidataClient(
            cache=CacheStore(), label_map=label_map, transport=transport,
            rate_limit=4.0, clock=clock.clock, sleep=clock.sleep,
        )
        for i in range(6):
            client.query_country(f"Fragment Number {i}")
        assert transport.calls == 6
        # Six requests at 4/s need at least 1.25 simulated seconds.
        assert clock.now >= 5 * 0.25 - 1e-9
