import gzip
import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from termtax.embeddings import (Composition, EmbeddingStore, VectorFileError, compose, feature_length,
                                load_vectors, pair_features, term_vector, vocabulary_for)

VECS = "3 2\nmur 1 2\nporteur 3 4\ndalle -1 0.5\n"


@pytest.fixture
def vec_file(tmp_path):
    p = tmp_path / "v.vec"
    p.write_text(VECS, encoding="utf-8")
    return p


class TestLoad:
    def test_all_words(self, vec_file):
        store = load_vectors(vec_file)
        assert len(store) == 3 and store.dim == 2
        np.testing.assert_array_equal(store.get("dalle"), [-1, 0.5])

    def test_filter(self, vec_file):
        assert load_vectors(vec_file, {"mur", "dalle"}).words == ("mur", "dalle")

    def test_short_line_reports_line_number(self, tmp_path):
        p = tmp_path / "v.vec"
        p.write_text("mur 1 2\nporteur 3\n", encoding="utf-8")
        with pytest.raises(VectorFileError, match=":2:"):
            load_vectors(p)

    def test_header_dimension_enforced(self, tmp_path):
        p = tmp_path / "v.vec"
        p.write_text("1 3\nmur 1 2\n", encoding="utf-8")
        with pytest.raises(VectorFileError, match=":2:"):
            load_vectors(p)

    def test_duplicate_keeps_first_and_warns(self, tmp_path, caplog):
        p = tmp_path / "v.vec"
        p.write_text("mur 1 2\nmur 9 9\n", encoding="utf-8")
        with caplog.at_level(logging.WARNING):
            store = load_vectors(p)
        np.testing.assert_array_equal(store.get("mur"), [1, 2])
        assert "duplicate" in caplog.text

    def test_gzip(self, tmp_path):
        p = tmp_path / "v.vec.gz"
        with gzip.open(p, "wt", encoding="utf-8") as fh:
            fh.write(VECS)
        assert len(load_vectors(p)) == 3

    def test_store_is_read_only(self, vec_file):
        store = load_vectors(vec_file)
        with pytest.raises(ValueError):
            store.get("mur")[0] = 5

    def test_fingerprint_tracks_content(self, vec_file):
        a = load_vectors(vec_file)
        assert a.fingerprint == load_vectors(vec_file).fingerprint
        assert a.fingerprint != load_vectors(vec_file, {"mur"}).fingerprint


class TestTermVector:
    def test_lookup(self, vec_file):
        np.testing.assert_array_equal(term_vector(load_vectors(vec_file), "mur"), [1, 2])

    def test_multiword_mean_skips_prepositions(self, vec_file):
        store = load_vectors(vec_file)
        np.testing.assert_allclose(term_vector(store, "mur porteur"), [2, 3])
        np.testing.assert_allclose(term_vector(store, "mur de dalle"), [0, 1.25])
        np.testing.assert_allclose(term_vector(store, "porteur mur"), term_vector(store, "mur porteur"))

    def test_missing(self, vec_file):
        store = load_vectors(vec_file)
        assert term_vector(store, "qzx") is None
        assert term_vector(store, "de la") is None

    def test_empty_term(self, vec_file):
        with pytest.raises(ValueError):
            term_vector(load_vectors(vec_file), " ")


class TestCompose:
    def test_definitions(self):
        x, y = np.array([1.0, 2.0]), np.array([3.0, 5.0])
        assert compose(x, y, "concat").tolist() == [1, 2, 3, 5]
        assert compose(x, y, "diff").tolist() == [2, 3]
        assert compose(x, y, "sum").tolist() == [4, 7]
        assert compose(x, y, "product").tolist() == [3, 10]

    def test_identity_and_absorbing(self):
        x = np.array([1.5, -2.0])
        assert not compose(x, x, Composition.DIFF).any()
        assert not compose(np.zeros(2), x, Composition.PRODUCT).any()

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            compose(np.zeros(2), np.zeros(3), "sum")


vec = arrays(np.float64, 4, elements=st.floats(-100, 100))


@given(vec, vec)
def test_symmetries(x, y):
    np.testing.assert_array_equal(compose(x, y, "sum"), compose(y, x, "sum"))
    np.testing.assert_array_equal(compose(x, y, "product"), compose(y, x, "product"))
    np.testing.assert_array_equal(compose(x, y, "diff"), -compose(y, x, "diff"))
    if not np.array_equal(x, y):
        assert not np.array_equal(compose(x, y, "concat"), compose(y, x, "concat"))
    for c in Composition:
        assert len(compose(x, y, c)) == feature_length(4, c)


def test_pair_features_and_vocab(vec_file):
    store = load_vectors(vec_file)
    pf = pair_features(store, "mur", "dalle", "concat")
    assert pf.features.tolist() == [1, 2, -1, 0.5] and pf.composition is Composition.CONCAT
    assert pair_features(store, "mur", "qzx", "diff") is None
    assert vocabulary_for(["Mur porteur"]) == {"Mur porteur", "Mur", "mur", "porteur"}


def test_store_validates_shape():
    with pytest.raises(ValueError):
        EmbeddingStore(["a"], np.zeros((2, 3)))
