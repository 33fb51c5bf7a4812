"""SPARQL lookup of an institution's country through its Wikipedia article.

The query asks, for the English Wikipedia article named after the remaining
affiliation text, which Wikidata item the article is about and which country
(P17) that item belongs to, returning English country labels via the label
service.  The ``wikibase:`` and ``bd:`` prefixes are left undeclared on
purpose: the public Wikidata endpoint predefines them, and the template is
kept verbatim.

The client is shared state: one rate limiter, coalesced in-flight lookups for
identical fragments, and an append-only JSON-lines cache (last entry per key
wins on load) that makes offline replay possible.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Optional
from urllib.parse import quote

from ircmap.ingest import token_key

__all__ = [
    "CacheEntry",
    "CacheStatus",
    "CacheStore",
    "DEFAULT_ENDPOINT",
    "LabelMap",
    "Mode",
    "QUERY_TEMPLATE",
    "RateLimiter",
    "ReplayTransport",
    "RequestsTransport",
    "SparqlQuery",
    "TransportError",
    "TransportResponse",
    "WikidataClient",
    "build_sparql_query",
    "label_to_iso2",
]

logger = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://query.wikidata.org/sparql"
ENDPOINT_ENV_VAR = "IRC_SPARQL_ENDPOINT"
CACHE_DIR_ENV_VAR = "IRC_CACHE_DIR"
USER_AGENT_ENV_VAR = "IRC_USER_AGENT"

ERROR_TTL = timedelta(hours=24)

QUERY_TEMPLATE = """\
PREFIX schema: <http://schema.org/>
PREFIX wdt:
<http://www.wikidata.org/prop/direct/>
SELECT ?countryLabel WHERE
{<https://en.wikipedia.org/wiki/[AFFILIATION]>
schema:about ?datalink. ?datalink wdt:P17
?country.SERVICE wikibase:label
{bd:serviceParam wikibase:language "en".}}"""

_SUBJECT_IRI_RE = re.compile(r"<https://en\.wikipedia\.org/wiki/([^>]+)>")


class Mode(str, Enum):
    ONLINE = "online"
    OFFLINE = "offline"


class TransportError(Exception):
    """Network-level failure while talking to the endpoint."""


@dataclass(frozen=True)
class TransportResponse:
    status_code: int
    text: str


@dataclass(frozen=True)
class SparqlQuery:
    text: str
    fragment: str
    url_title: str


def build_sparql_query(fragment: str) -> SparqlQuery:
    """Fill the query template for one affiliation fragment.

    The Wikipedia title keeps the fragment's original casing (titles are
    case-sensitive after the first character); runs of whitespace become a
    single underscore and reserved characters are percent-encoded.
    """
    fragment = fragment.strip()
    if not fragment:
        raise ValueError("empty affiliation fragment")
    url_title = quote("_".join(fragment.split()), safe="")
    text = QUERY_TEMPLATE.replace("[AFFILIATION]", url_title)
    return SparqlQuery(text=text, fragment=fragment, url_title=url_title)


class CacheStatus(str, Enum):
    HIT = "hit"
    EMPTY = "empty"
    ERROR = "error"


@dataclass(frozen=True)
class CacheEntry:
    """One cached lookup: the countries found for a normalized fragment."""

    key: str
    countries: tuple[str, ...]
    status: CacheStatus
    retrieved_at: str  # ISO-8601, UTC
    detail: str = ""

    def __post_init__(self):
        if self.status is CacheStatus.HIT and not self.countries:
            raise ValueError("hit entries need at least one country")
        if self.status is not CacheStatus.HIT and self.countries:
            raise ValueError(f"{self.status.value} entries must not carry countries")

    def to_json(self) -> str:
        return json.dumps(
            {
                "key": self.key,
                "countries": list(self.countries),
                "status": self.status.value,
                "retrieved_at": self.retrieved_at,
                "detail": self.detail,
            },
            ensure_ascii=False,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "CacheEntry":
        obj = json.loads(line)
        return cls(
            key=obj["key"],
            countries=tuple(obj.get("countries") or ()),
            status=CacheStatus(obj["status"]),
            retrieved_at=obj["retrieved_at"],
            detail=obj.get("detail", ""),
        )


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


class CacheStore:
    """Append-only JSON-lines cache; error entries expire after 24 hours."""

    def __init__(self, path: Optional[Path | str] = None, now: Callable[[], datetime] = _utc_now):
        self.path = Path(path) if path is not None else None
        self._now = now
        self._entries: dict[str, CacheEntry] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.is_file():
            self._load()

    def _load(self) -> None:
        with open(self.path, "r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = CacheEntry.from_json(line)
                except (json.JSONDecodeError, KeyError, ValueError) as exc:
                    logger.warning("%s:%d: skipping bad cache line (%s)", self.path, lineno, exc)
                    continue
                self._entries[entry.key] = entry

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> Optional[CacheEntry]:
        with self._lock:
            entry = self._entries.get(key)
        if entry is None:
            return None
        if entry.status is CacheStatus.ERROR and self._expired(entry):
            return None
        return entry

    def _expired(self, entry: CacheEntry) -> bool:
        try:
            retrieved = datetime.fromisoformat(entry.retrieved_at)
        except ValueError:
            return True
        if retrieved.tzinfo is None:
            retrieved = retrieved.replace(tzinfo=timezone.utc)
        return self._now() - retrieved > ERROR_TTL

    def put(self, entry: CacheEntry) -> None:
        with self._lock:
            self._entries[entry.key] = entry
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as handle:
                    handle.write(entry.to_json() + "\n")


class LabelMap:
    """English country label -> ISO code, exact match after normalization.

    Labels the map cannot place are collected in ``unmapped`` and logged, so
    nothing is dropped silently.
    """

    def __init__(self, mapping: dict[str, str]):
        self._by_key = {token_key(label): iso2 for label, iso2 in mapping.items()}
        self._by_key.pop("", None)
        self.unmapped: set[str] = set()

    def __len__(self) -> int:
        return len(self._by_key)

    def get(self, label: str) -> Optional[str]:
        iso2 = self._by_key.get(token_key(label))
        if iso2 is None:
            self.unmapped.add(label)
        return iso2

    @classmethod
    def from_gazetteer(cls, gazetteer, extra_labels_path: Optional[Path | str] = None) -> "LabelMap":
        """Canonical country names plus the shipped extra-labels table."""
        mapping = {entry.canonical_name: iso2 for iso2, entry in gazetteer.countries.items()}
        if extra_labels_path is not None:
            path = Path(extra_labels_path)
            for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                fields = line.split("\t")
                if len(fields) != 2:
                    raise ValueError(f"{path}:{lineno}: expected label<TAB>iso2")
                label, iso2 = fields[0].strip(), fields[1].strip().upper()
                if iso2 not in gazetteer.countries:
                    raise ValueError(f"{path}:{lineno}: unknown country code {iso2!r}")
                mapping[label] = iso2
        return cls(mapping)


def label_to_iso2(label: str, label_map: LabelMap) -> Optional[str]:
    """ISO code for a country label; None (and a report) when unmapped."""
    return label_map.get(label)


class RateLimiter:
    """Token-spacing limiter: at most ``rate_per_sec`` acquisitions per second."""

    def __init__(
        self,
        rate_per_sec: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._interval = 1.0 / rate_per_sec if rate_per_sec > 0 else 0.0
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_free = 0.0

    def acquire(self) -> None:
        if self._interval <= 0:
            return
        with self._lock:
            now = self._clock()
            start = max(now, self._next_free)
            self._next_free = start + self._interval
            delay = start - now
        if delay > 0:
            self._sleep(delay)


class RequestsTransport:
    """HTTP GET against a live SPARQL endpoint."""

    def __init__(self, timeout: float = 30.0):
        self.timeout = timeout

    def get(self, url: str, params: dict, headers: dict) -> TransportResponse:
        import requests

        try:
            response = requests.get(url, params=params, headers=headers, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        return TransportResponse(response.status_code, response.text)


class ReplayTransport:
    """Serve recorded responses from a directory keyed by Wikipedia title.

    A request whose query names ``<https://en.wikipedia.org/wiki/T>`` is
    answered from ``<directory>/T.json``; a missing recording is a transport
    error.  Used by the test suite so it never touches the network.
    """

    def __init__(self, directory: Path | str):
        self.directory = Path(directory)

    def get(self, url: str, params: dict, headers: dict) -> TransportResponse:
        query = params.get("query", "")
        match = _SUBJECT_IRI_RE.search(query)
        if match is None:
            raise TransportError("request carries no article IRI")
        title = match.group(1)
        path = self.directory / f"{title}.json"
        if not path.is_file():
            raise TransportError(f"no recorded response for {title!r}")
        return TransportResponse(200, path.read_text(encoding="utf-8"))


def _parse_country_labels(body: str) -> tuple[str, ...]:
    """Ordered, de-duplicated ?countryLabel bindings from a SPARQL JSON body."""
    data = json.loads(body)
    bindings = data["results"]["bindings"]
    labels = []
    for binding in bindings:
        value = binding.get("countryLabel", {}).get("value")
        if value and value not in labels:
            labels.append(value)
    return tuple(labels)


def default_user_agent() -> str:
    agent = os.environ.get(USER_AGENT_ENV_VAR)
    if agent:
        return agent
    from ircmap import __version__

    return f"ircmap/{__version__} (affiliation-to-country enrichment; set {USER_AGENT_ENV_VAR})"


class WikidataClient:
    """Rate-limited, cached country lookups for affiliation fragments.

    Offline mode answers from the cache only and performs no network
    operations at all.  Concurrent lookups of the same normalized fragment
    are coalesced into a single request.
    """

    def __init__(
        self,
        cache: CacheStore,
        label_map: Optional[LabelMap] = None,
        endpoint: str = DEFAULT_ENDPOINT,
        mode: Mode | str = Mode.ONLINE,
        transport=None,
        rate_limit: float = 2.0,
        user_agent: Optional[str] = None,
        max_attempts: int = 5,
        backoff_base: float = 1.0,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.cache = cache
        self.label_map = label_map if label_map is not None else LabelMap({})
        self.endpoint = endpoint
        self.mode = Mode(mode)
        self.transport = transport if transport is not None else RequestsTransport()
        self.rate_limiter = RateLimiter(rate_limit, clock=clock, sleep=sleep)
        self.headers = {
            "User-Agent": user_agent or default_user_agent(),
            "Accept": "application/sparql-results+json",
        }
        self.max_attempts = max(1, max_attempts)
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._now = _utc_now
        self._key_locks: dict[str, threading.Lock] = {}
        self._master_lock = threading.Lock()

    def _lock_for(self, key: str) -> threading.Lock:
        with self._master_lock:
            lock = self._key_locks.get(key)
            if lock is None:
                lock = self._key_locks[key] = threading.Lock()
            return lock

    def query_country(self, fragment: str) -> CacheEntry:
        """Country labels for one fragment, from cache or the endpoint.

        Cache hits cost no network I/O.  In offline mode a miss returns an
        (uncached) ``offline-miss`` error entry.  HTTP 429/5xx responses are
        retried with exponential backoff and, like other HTTP failures, end
        up cached with a short TTL; malformed bodies are not cached.
        """
        key = token_key(fragment)
        if not key:
            raise ValueError("empty affiliation fragment")
        entry = self.cache.get(key)
        if entry is not None:
            return entry
        if self.mode is Mode.OFFLINE:
            return CacheEntry(key, (), CacheStatus.ERROR, self._now().isoformat(), "offline-miss")
        with self._lock_for(key):
            entry = self.cache.get(key)
            if entry is not None:
                return entry
            entry, cacheable = self._fetch(key, fragment)
            if cacheable:
                self.cache.put(entry)
            return entry

    def _fetch(self, key: str, fragment: str) -> tuple[CacheEntry, bool]:
        query = build_sparql_query(fragment)
        last_error = ""
        for attempt in range(1, self.max_attempts + 1):
            if attempt > 1:
                self._sleep(self.backoff_base * 2 ** (attempt - 2))
            self.rate_limiter.acquire()
            try:
                response = self.transport.get(
                    self.endpoint, params={"query": query.text}, headers=self.headers
                )
            except TransportError as exc:
                last_error = f"transport error: {exc}"
                continue
            if response.status_code == 200:
                try:
                    labels = _parse_country_labels(response.text)
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    return (
                        CacheEntry(
                            key, (), CacheStatus.ERROR, self._now().isoformat(),
                            f"malformed response: {exc}",
                        ),
                        False,
                    )
                status = CacheStatus.HIT if labels else CacheStatus.EMPTY
                return (CacheEntry(key, labels, status, self._now().isoformat()), True)
            last_error = f"http {response.status_code}"
            if response.status_code != 429 and response.status_code < 500:
                break
        return (
            CacheEntry(key, (), CacheStatus.ERROR, self._now().isoformat(), last_error),
            True,
        )
