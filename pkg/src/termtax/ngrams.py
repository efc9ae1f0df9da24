"""1-, 2- and 3-gram counting over tagged documents.

Counting is keyed on lowercased lemma sequences. Windows never span a
sentence boundary or a NORM marker. Per-key tag sequences and surface forms
are tallied alongside so that shard counts merge exactly.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .ingest import Tag, TaggedDocument, TaggedToken

Key = tuple[str, ...]
Pattern = tuple[Tag, ...]

VALID_N = frozenset({1, 2, 3})


class EmptyCorpusError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class NGramCandidate:
    lemmas: Key
    pos_pattern: Pattern
    frequency: int
    surface: Key = ()

    def __post_init__(self) -> None:
        if not 1 <= len(self.lemmas) <= 3 or len(self.pos_pattern) != len(self.lemmas):
            raise ValueError(f"bad candidate shape: {self.lemmas} / {self.pos_pattern}")
        if self.frequency < 1:
            raise ValueError("frequency must be >= 1")

    @property
    def n(self) -> int:
        return len(self.lemmas)

    @property
    def text(self) -> str:
        return " ".join(self.lemmas)

    @property
    def phrase(self) -> str:
        """Surface form joined by single spaces (falls back to lemmas)."""
        return " ".join(self.surface or self.lemmas)


@dataclass
class CorpusStats:
    total_words: int
    freq: dict[Key, int]
    patterns: dict[Key, Counter] = field(default_factory=dict)
    surfaces: dict[Key, Counter] = field(default_factory=dict)
    n_values: frozenset[int] = VALID_N

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CorpusStats):
            return NotImplemented
        return (self.total_words == other.total_words and self.freq == other.freq
                and self.patterns == other.patterns and self.surfaces == other.surfaces
                and self.n_values == other.n_values)

    def frequency(self, key: Key) -> int:
        return self.freq.get(key, 0)

    def majority_pattern(self, key: Key) -> Pattern:
        return _majority(self.patterns[key], lambda pat: tuple(t.value for t in pat))

    def majority_surface(self, key: Key) -> Key:
        counts = self.surfaces.get(key)
        return _majority(counts, lambda s: s) if counts else key


def _majority(counts: Counter, tiekey) -> tuple:
    return min(counts.items(), key=lambda kv: (-kv[1], tiekey(kv[0])))[0]


def _check_n(n_values: Iterable[int]) -> frozenset[int]:
    ns = frozenset(n_values)
    if not ns or not ns <= VALID_N:
        raise ValueError(f"n_values must be a non-empty subset of {{1,2,3}}, got {sorted(ns)}")
    return ns


def _lemma_key(tok: TaggedToken) -> str:
    lemma = tok.lemma
    if lemma == "<unknown>":
        lemma = tok.surface
    return lemma.lower()


def segments(doc: TaggedDocument) -> Iterator[list[TaggedToken]]:
    """Maximal runs of non-marker tokens."""
    run: list[TaggedToken] = []
    for tok in doc.tokens:
        if tok.is_marker:
            if run:
                yield run
            run = []
        else:
            run.append(tok)
    if run:
        yield run


def _count(docs: Sequence[TaggedDocument], n_values: frozenset[int]) -> CorpusStats:
    total = 0
    freq: Counter = Counter()
    patterns: dict[Key, Counter] = {}
    surfaces: dict[Key, Counter] = {}
    for doc in docs:
        for seg in segments(doc):
            total += len(seg)
            lemmas = [_lemma_key(t) for t in seg]
            tags = [t.pos for t in seg]
            forms = [t.surface.lower() for t in seg]
            for n in n_values:
                for i in range(len(seg) - n + 1):
                    key = tuple(lemmas[i:i + n])
                    freq[key] += 1
                    patterns.setdefault(key, Counter())[tuple(tags[i:i + n])] += 1
                    surfaces.setdefault(key, Counter())[tuple(forms[i:i + n])] += 1
    return CorpusStats(total, dict(freq), patterns, surfaces, n_values)


def corpus_stats(docs: Sequence[TaggedDocument], n_values: Iterable[int] = VALID_N) -> CorpusStats:
    """Un-thresholded n-gram counts plus the corpus size in (non-marker) words."""
    stats = _count(docs, _check_n(n_values))
    if stats.total_words == 0:
        raise EmptyCorpusError("empty corpus")
    return stats


def merge_stats(a: CorpusStats, b: CorpusStats) -> CorpusStats:
    if a.n_values != b.n_values:
        raise ValueError(f"cannot merge stats over different n values: {sorted(a.n_values)} vs {sorted(b.n_values)}")
    freq = Counter(a.freq)
    freq.update(b.freq)
    patterns = {k: Counter(v) for k, v in a.patterns.items()}
    for k, v in b.patterns.items():
        patterns.setdefault(k, Counter()).update(v)
    surfaces = {k: Counter(v) for k, v in a.surfaces.items()}
    for k, v in b.surfaces.items():
        surfaces.setdefault(k, Counter()).update(v)
    return CorpusStats(a.total_words + b.total_words, dict(freq), patterns, surfaces, a.n_values)


def empty_stats(n_values: Iterable[int] = VALID_N) -> CorpusStats:
    return CorpusStats(0, {}, {}, {}, _check_n(n_values))


def corpus_stats_parallel(
    docs: Sequence[TaggedDocument],
    n_values: Iterable[int] = VALID_N,
    shards: int = 4,
    workers: int | None = None,
) -> CorpusStats:
    """Shard-parallel counting; shards are merged in shard order."""
    ns = _check_n(n_values)
    chunks = [list(docs[i::shards]) for i in range(shards)]
    if workers == 1:
        parts = [_count(c, ns) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_count, chunks, [ns] * shards))
    result = empty_stats(ns)
    for part in parts:
        result = merge_stats(result, part)
    if result.total_words == 0:
        raise EmptyCorpusError("empty corpus")
    return result


def candidates_from_stats(stats: CorpusStats, min_frequency: int = 2) -> list[NGramCandidate]:
    if min_frequency < 1:
        raise ValueError("min_frequency must be >= 1")
    out = [
        NGramCandidate(key, stats.majority_pattern(key), count, stats.majority_surface(key))
        for key, count in stats.freq.items()
        if count >= min_frequency
    ]
    out.sort(key=lambda c: (c.n, c.lemmas))
    return out


def extract_ngrams(
    docs: Sequence[TaggedDocument],
    n_values: Iterable[int] = VALID_N,
    min_frequency: int = 2,
) -> list[NGramCandidate]:
    """Candidates with frequency >= ``min_frequency``, sorted by (n, lemmas).

    The tag pattern is the majority over occurrences, ties going to the
    lexicographically smallest tag-name sequence.
    """
    return candidates_from_stats(_count(docs, _check_n(n_values)), min_frequency)


# --- persistence -----------------------------------------------------------

def _data_lines(path: str | Path) -> Iterator[tuple[int, str]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if line and not line.startswith("#"):
                yield lineno, line


def format_stats(stats: CorpusStats) -> str:
    lines = [f"total_words\t{stats.total_words}"]
    for key in sorted(stats.freq, key=lambda k: (len(k), k)):
        pat = " ".join(t.value for t in stats.majority_pattern(key)) if key in stats.patterns else ""
        lines.append(f"{len(key)}\t{' '.join(key)}\t{pat}\t{stats.freq[key]}")
    return "\n".join(lines) + "\n"


def read_stats(path: str | Path) -> CorpusStats:
    """Load a stats TSV (``n, lemmas, pos, frequency`` rows after a ``total_words`` header)."""
    total = None
    freq: dict[Key, int] = {}
    patterns: dict[Key, Counter] = {}
    ns: set[int] = set()
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if total is None:
            if len(parts) != 2 or parts[0] != "total_words":
                raise ValueError(f"{path}:{lineno}: expected 'total_words<TAB>N' header")
            total = int(parts[1])
            continue
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
        n, lemmas, pos, count = int(parts[0]), tuple(parts[1].split(" ")), parts[2], int(parts[3])
        if len(lemmas) != n:
            raise ValueError(f"{path}:{lineno}: n={n} but {len(lemmas)} lemmas")
        freq[lemmas] = count
        ns.add(n)
        if pos:
            patterns[lemmas] = Counter({tuple(Tag(t) for t in pos.split(" ")): count})
    if total is None or total <= 0:
        raise EmptyCorpusError(f"{path}: missing or non-positive total_words")
    return CorpusStats(total, freq, patterns, {}, frozenset(ns) or VALID_N)


CANDIDATE_HEADER = "n\tlemmas\tsurface\tpos\tfrequency"


def format_candidate(c: NGramCandidate) -> str:
    return (f"{c.n}\t{' '.join(c.lemmas)}\t{c.phrase}\t"
            f"{'-'.join(t.value for t in c.pos_pattern)}\t{c.frequency}")


def read_candidates(path: str | Path) -> list[NGramCandidate]:
    out = []
    for lineno, line in _data_lines(path):
        if line == CANDIDATE_HEADER:
            continue
        parts = line.split("\t")
        if len(parts) < 5:
            raise ValueError(f"{path}:{lineno}: expected at least 5 tab-separated fields")
        out.append(NGramCandidate(
            lemmas=tuple(parts[1].split(" ")),
            pos_pattern=tuple(Tag(t) for t in parts[3].split("-")),
            frequency=int(parts[4]),
            surface=tuple(parts[2].split(" ")),
        ))
    return out
