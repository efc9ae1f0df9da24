import logging

import pytest

from termtax.datasets import (DatasetError, DatasetFormat, Label, TermPair, format_pairs_csv, generate_negatives,
                              kfold_split, load_exclusions, load_pairs)

POS, NEG = Label.POSITIVE, Label.NEGATIVE


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadPairs:
    def test_bless_one_field_row(self, tmp_path):
        p = write(tmp_path, "b.txt", "cat-hyper-animal\n")
        assert load_pairs(p, "bless") == [TermPair("cat", "animal", POS, "b")]

    def test_bless_published_layout(self, tmp_path):
        p = write(tmp_path, "b.txt", "alligator-n\tamphibian_reptile\thyper\tanimal-n\n"
                                     "alligator-n\tamphibian_reptile\tcoord\tcrocodile-n\n"
                                     "alligator-n\tamphibian_reptile\tmero\tmouth-n\n"
                                     "alligator-n\tamphibian_reptile\trandom-n\tcomputer-n\n")
        assert load_pairs(p, DatasetFormat.BLESS, "bless") == [
            TermPair("alligator", "animal", POS, "bless"), TermPair("alligator", "crocodile", NEG, "bless"),
            TermPair("alligator", "mouth", NEG, "bless")]

    def test_evalution_keeps_only_isa(self, tmp_path):
        p = write(tmp_path, "e.txt", "car\tIsA\tvehicle\ncar\tSynonym\tautomobile\nhot\tAntonym\tcold\n")
        assert load_pairs(p, "evalution") == [TermPair("car", "vehicle", POS, "e")]

    def test_identical_terms_rejected_with_row(self, tmp_path):
        p = write(tmp_path, "v.csv", "x,y,label\nmur,mur,1\n")
        with pytest.raises(DatasetError, match="row 2"):
            load_pairs(p, "vocagen_csv")

    def test_malformed_rows(self, tmp_path):
        with pytest.raises(DatasetError, match="row 1"):
            load_pairs(write(tmp_path, "b.txt", "just one field\n"), "bless")
        with pytest.raises(DatasetError, match="row 2"):
            load_pairs(write(tmp_path, "v.csv", "x,y,label\nmur,cloison,maybe\n"), "vocagen_csv")
        with pytest.raises(DatasetError, match="header"):
            load_pairs(write(tmp_path, "w.csv", "a,b,c\n"), "vocagen_csv")

    def test_duplicates_deduped_with_warning(self, tmp_path, caplog):
        p = write(tmp_path, "v.csv", "x,y,label\nmur,ouvrage,1\nmur,ouvrage,1\n")
        with caplog.at_level(logging.WARNING):
            assert len(load_pairs(p, "vocagen_csv")) == 1
        assert "duplicate" in caplog.text

    def test_exclusion_list(self, tmp_path):
        p = write(tmp_path, "v.csv", "x,y,label\nroue,voiture,1\nchat,animal,1\n")
        excl = load_exclusions(write(tmp_path, "x.txt", "# part-of rows\nroue\tvoiture\n"))
        assert [q.x for q in load_pairs(p, "vocagen_csv", exclude=excl)] == ["chat"]

    def test_csv_round_trip(self, tmp_path):
        pairs = [TermPair("chat", "animal", POS, "v"), TermPair("chat", "outil", NEG, "v")]
        p = write(tmp_path, "v.csv", format_pairs_csv(pairs))
        assert load_pairs(p, "vocagen_csv", "v") == pairs


class TestNegatives:
    POS_SET = [TermPair("kitchen", "room", POS), TermPair("shark", "fish", POS)]

    def test_small_example(self):
        negs = generate_negatives(self.POS_SET, seed=3)
        assert len(negs) == 2
        assert all(n.label is NEG and n.y in {"room", "fish"} for n in negs)
        assert not {n.key for n in negs} & {p.key for p in self.POS_SET}

    def test_seeded(self):
        assert generate_negatives(self.POS_SET, 5) == generate_negatives(list(reversed(self.POS_SET)), 5)

    def test_balance_on_larger_set(self):
        positives = [TermPair(f"h{i}", f"H{i % 7}", POS) for i in range(60)]
        negs = generate_negatives(positives, 1)
        assert len(negs) == 60 and len({n.key for n in negs}) == 60

    def test_too_small_vocabulary_reports_achievable(self):
        with pytest.raises(DatasetError, match="0 of 1"):
            generate_negatives([TermPair("chat", "animal", POS)], 1)

    def test_no_positives(self):
        with pytest.raises(DatasetError):
            generate_negatives([], 1)


def _pairs(n_pos, n_neg):
    return ([TermPair(f"p{i:03d}", "y", POS) for i in range(n_pos)]
            + [TermPair(f"n{i:03d}", "y", NEG) for i in range(n_neg)])


class TestKFold:
    def test_even_split(self):
        plan = kfold_split(_pairs(5, 5), 5, 0)
        assert [len(f) for f in plan.folds(_pairs(5, 5))] == [2] * 5

    def test_uneven_split(self):
        pairs = _pairs(6, 5)
        assert sorted(len(f) for f in kfold_split(pairs, 5, 0).folds(pairs)) == [2, 2, 2, 2, 3]

    def test_stratified_balanced(self):
        pairs = _pairs(50, 50)
        for fold in kfold_split(pairs, 5, 42).folds(pairs):
            assert sum(p.label is POS for p in fold) == 10 and len(fold) == 20

    def test_order_independent_and_seeded(self):
        pairs = _pairs(13, 9)
        a = kfold_split(pairs, 4, 7)
        assert a.assignments == kfold_split(list(reversed(pairs)), 4, 7).assignments
        assert a.fingerprint == kfold_split(pairs, 4, 7).fingerprint
        assert a.fingerprint != kfold_split(pairs, 4, 8).fingerprint

    def test_errors(self):
        with pytest.raises(DatasetError):
            kfold_split(_pairs(2, 1), 5, 0)
        with pytest.raises(DatasetError):
            kfold_split(_pairs(2, 2), 1, 0)


def test_pair_invariant():
    with pytest.raises(DatasetError):
        TermPair("a", "a", POS)
