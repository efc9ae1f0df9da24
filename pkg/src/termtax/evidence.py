"""Web-evidence pruning of candidate terms.

Each candidate's surface phrase is sent, quoted, to a search provider; exact
matches of the phrase in result titles and snippets are counted and the
candidate is kept when the count reaches the threshold. Providers are
pluggable. Lookups go through an append-only JSON-lines cache first, so a
warm cache replays a run without touching the network.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

from .ngrams import Key, NGramCandidate

log = logging.getLogger(__name__)

API_KEY_ENV = "TERMTAX_SEARCH_API_KEY"

OCCURRENCES = "occurrences"
RESULTS_CONTAINING = "results"


class ProviderError(RuntimeError):
    """A search provider could not answer a query."""


class FixtureError(ValueError):
    pass


@dataclass(frozen=True)
class SearchResult:
    title: str
    snippet: str
    url: str = ""

    def to_dict(self) -> dict:
        return {"title": self.title, "snippet": self.snippet, "url": self.url}


@dataclass(frozen=True)
class SearchResponse:
    results: tuple[SearchResult, ...]
    queried_at: str


@dataclass(frozen=True)
class EvidenceRecord:
    ngram: Key
    query: str
    match_count: int
    queried_at: str
    provider_id: str
    resolved: bool = True
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "ngram": " ".join(self.ngram),
            "query": self.query,
            "match_count": self.match_count,
            "queried_at": self.queried_at,
            "provider_id": self.provider_id,
            "resolved": self.resolved,
            "error": self.error,
        }


class SearchProvider(Protocol):
    provider_id: str

    def search(self, query: str) -> SearchResponse: ...


def build_query(candidate: NGramCandidate) -> str:
    """Quoted exact-phrase query; elided articles are glued back (``d'ouvrage``)."""
    return '"' + re.sub(r"(['’]) ", r"\1", candidate.phrase) + '"'


def _phrase_regex(phrase: str) -> re.Pattern:
    words = phrase.split()
    if not words:
        raise ValueError("phrase must be non-empty")
    body = r"\s+".join(re.escape(w) for w in words)
    return re.compile(rf"(?<!\w){body}(?!\w)", re.IGNORECASE)


def count_exact_matches(phrase: str, results: Iterable[SearchResult], mode: str = OCCURRENCES) -> int:
    """Whole-word, case-insensitive matches of ``phrase`` in titles and snippets.

    ``mode="occurrences"`` sums every occurrence; ``mode="results"`` counts
    results containing the phrase at least once.
    """
    rx = _phrase_regex(phrase)
    total = 0
    for r in results:
        hits = len(rx.findall(r.title)) + len(rx.findall(r.snippet))
        if mode == OCCURRENCES:
            total += hits
        elif mode == RESULTS_CONTAINING:
            total += hits > 0
        else:
            raise ValueError(f"unknown match mode {mode!r}")
    return total


def _parse_results(items: Sequence[dict], where: str) -> tuple[SearchResult, ...]:
    out = []
    for item in items:
        if not isinstance(item, dict) or "title" not in item or "snippet" not in item:
            raise FixtureError(f"{where}: result needs 'title' and 'snippet'")
        out.append(SearchResult(str(item["title"]), str(item["snippet"]), str(item.get("url", ""))))
    return tuple(out)


# --- cache ------------------------------------------------------------------

class EvidenceCache:
    """Append-only JSON-lines cache keyed by ``(provider_id, query)``.

    The first entry for a key wins; later duplicates in the file are ignored.
    """

    def __init__(self, path: str | Path | None = None, ttl_seconds: float | None = None):
        self.path = Path(path) if path else None
        self.ttl_seconds = ttl_seconds
        self._entries: dict[tuple[str, str], dict] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            for lineno, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                    key = (entry["provider_id"], entry["query"])
                    _parse_results(entry["results"], f"{self.path}:{lineno}")
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise FixtureError(f"{self.path}:{lineno}: bad cache entry ({exc})") from exc
                self._entries.setdefault(key, entry)

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, provider_id: str, query: str) -> SearchResponse | None:
        entry = self._entries.get((provider_id, query))
        if entry is None:
            return None
        if self.ttl_seconds is not None:
            try:
                stamp = datetime.fromisoformat(entry["queried_at"])
                if (datetime.now(timezone.utc) - stamp).total_seconds() > self.ttl_seconds:
                    return None
            except (ValueError, TypeError):
                return None
        return SearchResponse(_parse_results(entry["results"], "cache"), entry["queried_at"])

    def put(self, provider_id: str, query: str, response: SearchResponse, match_count: int) -> None:
        with self._lock:
            if (provider_id, query) in self._entries and self.ttl_seconds is None:
                return
            entry = {
                "query": query,
                "provider_id": provider_id,
                "match_count": match_count,
                "results": [r.to_dict() for r in response.results],
                "queried_at": response.queried_at,
            }
            self._entries[(provider_id, query)] = entry
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")


# --- providers --------------------------------------------------------------

class FixtureProvider:
    """Canned results per query, read from a cache-schema JSON-lines file."""

    def __init__(self, path: str | Path, provider_id: str | None = None):
        self.path = Path(path)
        self._data: dict[str, SearchResponse] = {}
        ids = set()
        try:
            lines = self.path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise FixtureError(f"cannot read fixture {self.path}: {exc}") from exc
        for lineno, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                query = entry["query"]
                results = _parse_results(entry["results"], f"{self.path}:{lineno}")
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FixtureError(f"{self.path}:{lineno}: malformed fixture entry ({exc})") from exc
            ids.add(entry.get("provider_id", "fixture"))
            self._data.setdefault(query, SearchResponse(results, str(entry.get("queried_at", ""))))
        self.provider_id = provider_id or (ids.pop() if len(ids) == 1 else "fixture")

    def search(self, query: str) -> SearchResponse:
        return self._data.get(query, SearchResponse((), ""))


def fixture_provider(path: str | Path) -> FixtureProvider:
    return FixtureProvider(path)


class CacheOnlyProvider:
    """Offline stand-in: every query that reaches it is a miss."""

    def __init__(self, provider_id: str):
        self.provider_id = provider_id

    def search(self, query: str) -> SearchResponse:
        raise ProviderError(f"offline and not cached: {query}")


class RateLimiter:
    """Spaces successive ``acquire`` calls at least ``1/rate`` seconds apart."""

    def __init__(self, rate: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.interval = 1.0 / rate
        self._clock = clock
        self._sleep = sleep
        self._next = None
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            if self._next is not None and now < self._next:
                self._sleep(self._next - now)
                now = self._next
            self._next = now + self.interval


class HttpProvider:
    """Generic JSON search endpoint.

    Sends ``GET endpoint?q=<query>&page=<i>`` and expects either a list of
    ``{title, snippet, url}`` objects or ``{"results": [...]}``. Adapters for
    specific commercial APIs can subclass and override :meth:`parse`.
    """

    def __init__(self, endpoint: str, rate_limit: float = 1.0, retries: int = 2,
                 pages: int = 1, api_key: str | None = None, timeout: float = 10.0,
                 provider_id: str | None = None, session=None, limiter: RateLimiter | None = None,
                 backoff: float = 0.5):
        import requests

        self.endpoint = endpoint
        self.retries = retries
        self.pages = pages
        self.timeout = timeout
        self.backoff = backoff
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.provider_id = provider_id or f"http:{endpoint}"
        self.session = session or requests.Session()
        self.limiter = limiter or RateLimiter(rate_limit)
        self.calls = 0

    def parse(self, payload) -> tuple[SearchResult, ...]:
        items = payload.get("results") if isinstance(payload, dict) else payload
        if not isinstance(items, list):
            raise ProviderError("response has no result list")
        try:
            return _parse_results(items, self.endpoint)
        except FixtureError as exc:
            raise ProviderError(str(exc)) from exc

    def _fetch(self, query: str, page: int) -> tuple[SearchResult, ...]:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            self.limiter.acquire()
            self.calls += 1
            try:
                resp = self.session.get(self.endpoint, params={"q": query, "page": page},
                                        headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                return self.parse(resp.json())
            except Exception as exc:  # network, HTTP status, JSON decode
                last = exc
                log.warning("query %r page %d attempt %d failed: %s", query, page, attempt + 1, exc)
                if attempt < self.retries and self.backoff:
                    time.sleep(self.backoff * (2 ** attempt))
        raise ProviderError(f"{query}: {last}")

    def search(self, query: str) -> SearchResponse:
        results: list[SearchResult] = []
        for page in range(self.pages):
            results.extend(self._fetch(query, page))
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        return SearchResponse(tuple(results), stamp)


def http_provider(endpoint: str, rate_limit: float = 1.0, retries: int = 2, **kwargs) -> HttpProvider:
    return HttpProvider(endpoint, rate_limit=rate_limit, retries=retries, **kwargs)


# --- pruning ----------------------------------------------------------------

@dataclass
class PruneResult:
    kept: list[NGramCandidate] = field(default_factory=list)
    dropped: list[NGramCandidate] = field(default_factory=list)
    unresolved: list[NGramCandidate] = field(default_factory=list)
    records: list[EvidenceRecord] = field(default_factory=list)
    network_calls: int = 0

    def __iter__(self):
        # allows ``kept, records = prune_by_evidence(...)``
        return iter((self.kept, self.records))


def prune_by_evidence(
    candidates: Sequence[NGramCandidate],
    provider: SearchProvider,
    threshold: int = 10,
    cache: EvidenceCache | None = None,
    mode: str = OCCURRENCES,
    max_in_flight: int = 4,
) -> PruneResult:
    """Keep candidates with ``match_count >= threshold``.

    Provider failures leave the candidate UNRESOLVED (excluded from ``kept``)
    rather than aborting the run. Output order follows input order.
    """
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    queries = [build_query(c) for c in candidates]
    responses: dict[str, SearchResponse] = {}
    errors: dict[str, str] = {}
    pending = []
    for q in dict.fromkeys(queries):
        hit = cache.get(provider.provider_id, q) if cache is not None else None
        if hit is not None:
            responses[q] = hit
        else:
            pending.append(q)

    def fetch(q: str):
        try:
            return q, provider.search(q), None
        except ProviderError as exc:
            return q, None, str(exc)

    if pending:
        with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
            fetched = list(pool.map(fetch, pending))
        for q, resp, err in fetched:
            if resp is None:
                errors[q] = err
            else:
                responses[q] = resp

    result = PruneResult(network_calls=len(pending))
    for cand, q in zip(candidates, queries):
        if q in errors:
            result.unresolved.append(cand)
            result.records.append(EvidenceRecord(cand.lemmas, q, 0, "", provider.provider_id,
                                                 resolved=False, error=errors[q]))
            continue
        resp = responses[q]
        count = count_exact_matches(q.strip('"'), resp.results, mode)
        result.records.append(EvidenceRecord(cand.lemmas, q, count, resp.queried_at, provider.provider_id))
        (result.kept if count >= threshold else result.dropped).append(cand)

    if cache is not None:
        for q in pending:
            if q in responses:
                resp = responses[q]
                cache.put(provider.provider_id, q, resp, count_exact_matches(q.strip('"'), resp.results, mode))
    return result


def kept_by_threshold(records: Iterable[EvidenceRecord], thresholds: Iterable[int]) -> dict[int, int]:
    """Kept-set size at each threshold, computed from one set of records."""
    counts = [r.match_count for r in records if r.resolved]
    return {t: sum(c >= t for c in counts) for t in thresholds}
