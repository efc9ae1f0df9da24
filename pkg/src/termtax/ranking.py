"""Corpus-comparison ranking of candidate terms by Z-score."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .ngrams import CorpusStats, Key, NGramCandidate

DEFAULT_SMOOTHING = 0.5


class ZScoreDomainError(ArithmeticError):
    pass


class Measure(str, Enum):
    ZSCORE = "zscore"


@dataclass(frozen=True)
class RankedTerm:
    ngram: Key
    a0: int
    b0: int
    a1: int
    b1: int
    z: float
    candidate: NGramCandidate | None = None


def zscore(a0: float, b0: float, a1: float, b1: float, smoothing: float = 0.0,
           ngram: str | None = None) -> float:
    """Two-proportion Z statistic of a term's rate in a specific vs a generic corpus.

    ``a0``/``b0`` are the term count and word total of the specific corpus,
    ``a1``/``b1`` those of the generic one. When both counts are zero and
    ``smoothing > 0``, both are incremented by ``smoothing`` first.
    """
    if b0 <= 0 or b1 <= 0:
        raise ZScoreDomainError(f"corpus sizes must be positive (b0={b0}, b1={b1})")
    if a0 == 0 and a1 == 0 and smoothing > 0:
        a0, a1 = a0 + smoothing, a1 + smoothing
    p1 = a0 / b0
    p2 = a1 / b1
    p = (a0 + a1) / (b0 + b1)
    var = p * (1.0 - p) * (1.0 / b0 + 1.0 / b1)
    if not var > 0:
        raise ZScoreDomainError(f"zero variance (p={p}) for {ngram or (a0, b0, a1, b1)}")
    return (p1 - p2) / math.sqrt(var)


def rank_terms(
    candidates: Iterable[NGramCandidate],
    specific: CorpusStats,
    generic: CorpusStats,
    smoothing: float = DEFAULT_SMOOTHING,
) -> list[RankedTerm]:
    """Score candidates against the generic corpus, highest Z first.

    ``a0`` is the candidate's specific-corpus frequency. A candidate absent
    from the generic corpus gets ``a1 = smoothing`` (add-k) for scoring; the
    reported ``a1`` stays 0. Ties: larger ``a0`` first, then the ngram.
    """
    b0, b1 = specific.total_words, generic.total_words
    ranked = []
    for c in candidates:
        a0 = specific.frequency(c.lemmas) or c.frequency
        a1 = generic.frequency(c.lemmas)
        eff_a1 = a1 if a1 > 0 else smoothing
        z = zscore(a0, b0, eff_a1, b1, smoothing, ngram=c.text)
        ranked.append(RankedTerm(c.lemmas, a0, b0, a1, b1, z, c))
    ranked.sort(key=lambda r: (-r.z, -r.a0, r.ngram))
    return ranked


RANKED_HEADER = "rank\tngram\ta0\ta1\tz"


def format_ranked(ranked: Iterable[RankedTerm]) -> str:
    lines = [RANKED_HEADER]
    for i, r in enumerate(ranked, 1):
        lines.append(f"{i}\t{' '.join(r.ngram)}\t{r.a0}\t{r.a1}\t{r.z:.6f}")
    return "\n".join(lines) + "\n"
