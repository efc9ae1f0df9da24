from functools import reduce

import pytest
from hypothesis import given, settings, strategies as st

from termtax.config import load_config
from termtax.ingest import BOUNDARY, NORM_TOKEN, Tag, TaggedDocument, TaggedToken
from termtax.ngrams import (CANDIDATE_HEADER, EmptyCorpusError, NGramCandidate, corpus_stats,
                            corpus_stats_parallel, empty_stats, extract_ngrams, format_candidate,
                            format_stats, merge_stats, read_candidates, read_stats, segments)
from termtax.pipeline import load_corpus


def doc(*words, pos=Tag.NOUN, doc_id="d"):
    toks = []
    for w in words:
        if w == "|":
            toks.append(BOUNDARY)
        elif w == "#":
            toks.append(NORM_TOKEN)
        else:
            toks.append(TaggedToken(w, w.lower(), pos))
    return TaggedDocument(doc_id, tuple(toks))


def as_dict(cands):
    return {c.lemmas: c.frequency for c in cands}


class TestExtract:
    def test_sliding_window_and_threshold(self):
        assert as_dict(extract_ngrams([doc("a", "b", "a", "b")], {2}, 2)) == {("a", "b"): 2}

    def test_no_window_crosses_boundary(self):
        assert extract_ngrams([doc("a", "|", "b")], {2}, 1) == []

    def test_no_window_crosses_norm_marker(self):
        assert extract_ngrams([doc("a", "#", "b")], {2}, 1) == []

    def test_unigram_repeats(self):
        assert as_dict(extract_ngrams([doc("mur", "mur", "mur")], {1}, 2)) == {("mur",): 3}

    def test_empty_docs_give_empty_result(self):
        assert extract_ngrams([], {1, 2, 3}) == []

    def test_counts_over_lemmas_with_majority_surface(self):
        d = TaggedDocument("d", (TaggedToken("murs", "mur", Tag.NOUN), TaggedToken("Mur", "mur", Tag.NOUN),
                                 TaggedToken("mur", "mur", Tag.NOUN)))
        (c,) = extract_ngrams([d], {1}, 2)
        assert c.frequency == 3 and c.surface == ("mur",)

    def test_majority_pattern_with_lexicographic_tie_break(self):
        d = TaggedDocument("d", (TaggedToken("ferme", "ferme", Tag.VERB), BOUNDARY,
                                 TaggedToken("ferme", "ferme", Tag.NOUN)))
        (c,) = extract_ngrams([d], {1}, 2)
        assert c.pos_pattern == (Tag.NOUN,)  # "NOUN" < "VERB"

    def test_invalid_n(self):
        with pytest.raises(ValueError):
            extract_ngrams([doc("a")], {4})


class TestCorpusStats:
    def test_small(self):
        s = corpus_stats([doc("a", "b")], {1, 2})
        assert s.total_words == 2
        assert s.freq == {("a",): 1, ("b",): 1, ("a", "b"): 1}

    def test_markers_not_counted_as_words(self):
        assert corpus_stats([doc("a", "|", "b", "#")], {1}).total_words == 2

    def test_empty_corpus_is_an_error(self):
        with pytest.raises(EmptyCorpusError, match="empty corpus"):
            corpus_stats([], {1})
        with pytest.raises(EmptyCorpusError):
            corpus_stats([doc("|")], {1})

    def test_segments_split_on_markers(self):
        assert [[t.lemma for t in s] for s in segments(doc("a", "b", "|", "c", "#", "d"))] == [["a", "b"], ["c"], ["d"]]


words = st.sampled_from(["a", "b", "c", "|"])
docs_strategy = st.lists(st.lists(words, max_size=12).map(lambda ws: doc(*ws)), min_size=1, max_size=5)


def _stats_or_none(docs, n):
    try:
        return corpus_stats(docs, n)
    except EmptyCorpusError:
        return None


@settings(max_examples=150, deadline=None)
@given(docs_strategy)
def test_window_count_identity(docs):
    s = _stats_or_none(docs, {1, 2, 3})
    if s is None:
        return
    for n in (1, 2, 3):
        expected = sum(max(0, len(seg) - n + 1) for d in docs for seg in segments(d))
        assert sum(f for k, f in s.freq.items() if len(k) == n) == expected
    assert all(s.total_words >= f for f in s.freq.values())


@settings(max_examples=100, deadline=None)
@given(docs_strategy, docs_strategy, docs_strategy)
def test_merge_is_commutative_associative_with_identity(d1, d2, d3):
    parts = [_stats_or_none(d, {1, 2}) for d in (d1, d2, d3)]
    if any(p is None for p in parts):
        return
    a, b, c = parts
    assert merge_stats(a, b) == merge_stats(b, a)
    assert merge_stats(merge_stats(a, b), c) == merge_stats(a, merge_stats(b, c))
    assert merge_stats(a, empty_stats({1, 2})) == a
    assert merge_stats(merge_stats(a, b), c) == corpus_stats(d1 + d2 + d3, {1, 2})


@settings(max_examples=100, deadline=None)
@given(docs_strategy, st.integers(1, 4))
def test_min_frequency_respected(docs, k):
    assert all(c.frequency >= k for c in extract_ngrams(docs, {1, 2, 3}, k))


def test_merge_requires_same_n_values():
    with pytest.raises(ValueError):
        merge_stats(corpus_stats([doc("a")], {1}), corpus_stats([doc("a")], {1, 2}))


def test_parallel_shards_equal_single_pass(pipeline_dir):
    docs = load_corpus(load_config(pipeline_dir / "config.yaml"))
    single = corpus_stats(docs, {1, 2, 3})
    assert corpus_stats_parallel(docs, {1, 2, 3}, shards=4, workers=2) == single
    # oracle: serial count of the concatenation, shard by shard
    shards = [docs[i::4] for i in range(4)]
    assert reduce(merge_stats, (corpus_stats(s, {1, 2, 3}) for s in shards if s)) == single


def test_extraction_is_deterministic():
    docs = [doc("a", "b", "a", "b", "c"), doc("c", "a", "b")]
    assert extract_ngrams(docs, {1, 2, 3}, 1) == extract_ngrams(list(docs), {1, 2, 3}, 1)


def test_stats_tsv_round_trip_and_sorted(tmp_path):
    s = corpus_stats([doc("b", "a", "b", "a")], {1, 2})
    text = format_stats(s)
    lines = text.splitlines()
    assert lines[0] == "total_words\t4"
    assert lines[1:] == ["1\ta\tNOUN\t2", "1\tb\tNOUN\t2", "2\ta b\tNOUN NOUN\t1", "2\tb a\tNOUN NOUN\t2"]
    p = tmp_path / "s.tsv"
    p.write_text(text, encoding="utf-8")
    back = read_stats(p)
    assert back.total_words == 4 and back.freq == s.freq
    assert format_stats(back) == text


def test_candidate_file_round_trip(tmp_path):
    c = NGramCandidate(("carte", "de", "crédit"), (Tag.NOUN, Tag.PREP, Tag.NOUN), 3, ("cartes", "de", "crédit"))
    p = tmp_path / "c.tsv"
    p.write_text("# provenance\n" + CANDIDATE_HEADER + "\n" + format_candidate(c) + "\n", encoding="utf-8")
    assert read_candidates(p) == [c]


def test_candidate_invariants():
    with pytest.raises(ValueError):
        NGramCandidate(("a", "b"), (Tag.NOUN,), 1)
    with pytest.raises(ValueError):
        NGramCandidate(("a",), (Tag.NOUN,), 0)


def test_corpus_fixture_counts_match_plain_text_scan(pipeline_dir):
    """Independent oracle: count the phrase in the raw fixture text."""
    text = "".join(p.read_text("utf-8").lower() for p in sorted((pipeline_dir / "corpus").glob("*.txt")))
    got = as_dict(extract_ngrams(load_corpus(load_config(pipeline_dir / "config.yaml")), {3}, 2))
    assert got[("carte", "de", "crédit")] == text.count("carte de crédit") == 2
    assert got[("mur", "de", "clôture")] == text.count("mur de clôture") == 5
    assert got[("créditer", "sa", "carte")] == text.count("créditer sa carte") == 2
