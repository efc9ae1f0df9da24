import math

import mpmath
import pytest
from hypothesis import assume, given, strategies as st

from termtax.ingest import Tag
from termtax.ngrams import CorpusStats, NGramCandidate
from termtax.ranking import RANKED_HEADER, Measure, ZScoreDomainError, format_ranked, rank_terms, zscore


def mp_z(a0, b0, a1, b1):
    with mpmath.workdps(40):
        a0, b0, a1, b1 = map(mpmath.mpf, (a0, b0, a1, b1))
        p = (a0 + a1) / (b0 + b1)
        return float((a0 / b0 - a1 / b1) / mpmath.sqrt(p * (1 - p) * (1 / b0 + 1 / b1)))


class TestZScore:
    def test_equal_rates_give_zero(self):
        assert zscore(5, 100, 50, 1000) == 0.0

    def test_reference_value(self):
        # value frozen from a 40-digit evaluation
        assert zscore(10, 1000, 1, 100000) == pytest.approx(30.122623708878803, rel=1e-12)
        assert zscore(10, 1000, 1, 100000) == pytest.approx(mp_z(10, 1000, 1, 100000), rel=1e-12)

    def test_sign_follows_rate_difference(self):
        assert zscore(0, 1000, 100, 1000) == pytest.approx(-10.259783520851541, rel=1e-12)

    def test_smoothing_when_both_absent(self):
        assert zscore(0, 100, 0, 1000, smoothing=0.5) == pytest.approx(mp_z(0.5, 100, 0.5, 1000), rel=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ZScoreDomainError, match="mur"):
            zscore(0, 100, 0, 100, ngram="mur")
        with pytest.raises(ZScoreDomainError):
            zscore(1, 0, 1, 10)
        with pytest.raises(ZScoreDomainError):
            zscore(100, 100, 10, 10)  # p = 1

    def test_measure_enum(self):
        assert [m.value for m in Measure] == ["zscore"]


counts = st.integers(1, 10**6)


@given(counts, counts, counts)
def test_antisymmetry_at_equal_sizes(a0, a1, extra):
    b = max(a0, a1) + extra
    assert zscore(a0, b, a1, b) == pytest.approx(-zscore(a1, b, a0, b), rel=1e-9, abs=1e-9)


@given(st.integers(0, 10**5), st.integers(0, 10**5), st.integers(1, 10**4), st.integers(1, 10**4))
def test_monotone_in_counts(a0, a1, e0, e1):
    b0, b1 = a0 + e0 + 1, a1 + e1 + 1
    assume(a0 + a1 > 0)
    z = zscore(a0, b0, a1, b1)
    assert zscore(a0 + 1, b0, a1, b1) > z
    assert zscore(a0, b0, a1 + 1, b1) < z


@given(st.integers(1, 1000), st.integers(1, 1000), st.integers(1, 1000), st.integers(1, 1000), st.integers(2, 50))
def test_scaling_preserves_sign(a0, e0, a1, e1, k):
    b0, b1 = a0 + e0, a1 + e1
    z = zscore(a0, b0, a1, b1)
    zk = zscore(a0 * k, b0 * k, a1 * k, b1 * k)
    assert math.copysign(1, z) == math.copysign(1, zk) or abs(z) < 1e-12


def _cand(text, freq):
    words = tuple(text.split())
    return NGramCandidate(words, (Tag.NOUN,) * len(words), freq, words)


def _stats(total, freq):
    return CorpusStats(total, {tuple(k.split()): v for k, v in freq.items()})


def test_five_candidate_ordering():
    specific = _stats(10_000, {"mur": 40, "dalle": 40, "béton": 25, "maison": 60, "porte": 10})
    generic = _stats(1_000_000, {"dalle": 100, "béton": 30, "maison": 9000, "porte": 500})
    cands = [_cand(t, specific.freq[(t,)]) for t in ("porte", "maison", "béton", "dalle", "mur")]
    ranked = rank_terms(cands, specific, generic, smoothing=0.5)
    expected = {
        "mur": mp_z(40, 10_000, 0.5, 1_000_000), "dalle": mp_z(40, 10_000, 100, 1_000_000),
        "béton": mp_z(25, 10_000, 30, 1_000_000), "maison": mp_z(60, 10_000, 9000, 1_000_000),
        "porte": mp_z(10, 10_000, 500, 1_000_000),
    }
    assert [r.ngram[0] for r in ranked] == sorted(expected, key=lambda k: -expected[k])
    for r in ranked:
        assert r.z == pytest.approx(expected[r.ngram[0]], rel=1e-9)
    assert ranked[0].a1 == 0  # reported raw, smoothing only inside the score


def test_absent_from_generic_ranks_above_present():
    specific = _stats(1000, {"a": 5, "b": 5})
    generic = _stats(10_000, {"b": 3})
    ranked = rank_terms([_cand("b", 5), _cand("a", 5)], specific, generic)
    assert [r.ngram for r in ranked] == [("a",), ("b",)]


def test_ties_broken_by_ngram():
    specific = _stats(1000, {"zinc": 5, "acier": 5})
    generic = _stats(10_000, {"zinc": 2, "acier": 2})
    ranked = rank_terms([_cand("zinc", 5), _cand("acier", 5)], specific, generic)
    assert [r.ngram for r in ranked] == [("acier",), ("zinc",)]


def test_output_is_permutation_and_formatted():
    specific = _stats(1000, {"a": 5, "b": 7})
    generic = _stats(10_000, {"a": 1})
    cands = [_cand("a", 5), _cand("b", 7)]
    ranked = rank_terms(cands, specific, generic)
    assert sorted(r.candidate for r in ranked) == sorted(cands)
    lines = format_ranked(ranked).splitlines()
    assert lines[0] == RANKED_HEADER
    assert lines[1].startswith("1\tb\t7\t0\t")
