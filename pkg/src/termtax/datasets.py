"""Hypernym pair datasets: loading, negative couples and k-fold plans."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)


class DatasetError(ValueError):
    pass


class Label(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"

    @property
    def as_int(self) -> int:
        return 1 if self is Label.POSITIVE else 0


class DatasetFormat(str, Enum):
    BLESS = "bless"
    EVALUTION = "evalution"
    VOCAGEN_CSV = "vocagen_csv"


@dataclass(frozen=True, order=True)
class TermPair:
    x: str
    y: str
    label: Label
    source: str = ""

    def __post_init__(self) -> None:
        if self.x == self.y:
            raise DatasetError(f"pair with identical terms: {self.x!r}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.x, self.y)


_BLESS_POS = {"hyper"}
_BLESS_NEG = {"coord", "mero", "attri", "event"}
_BLESS_ONE_FIELD = re.compile(r"^(.+?)-(hyper|coord|mero|attri|event|random-[njv])-(.+)$")
_POS_SUFFIX = re.compile(r"-[njv]$")

_EVAL_POS = {"isa", "is-a", "hypernym", "hyper", "hypernymy"}
_EVAL_OTHER = {"synonym", "antonym", "partof", "madeof", "hasa", "meronym", "mero",
               "hasproperty", "memberof", "entails", "synonymy", "antonymy", "meronymy"}

_TRUE = {"1", "positive", "pos", "true", "hyper", "hypernym", "yes"}
_FALSE = {"0", "negative", "neg", "false", "no"}


def _strip_pos(word: str) -> str:
    return _POS_SUFFIX.sub("", word.strip())


def _bless_rows(text: str, source: str):
    for rowno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) == 4:
            x, _, rel, y = parts
        elif len(parts) == 3:
            x, rel, y = parts
        elif len(parts) == 1 and (m := _BLESS_ONE_FIELD.match(line.strip())):
            x, rel, y = m.groups()
        else:
            raise DatasetError(f"{source}: row {rowno}: unrecognised BLESS layout: {line!r}")
        rel = rel.strip().lower()
        if rel in _BLESS_POS:
            label = Label.POSITIVE
        elif rel in _BLESS_NEG:
            label = Label.NEGATIVE
        elif rel.startswith("random"):
            continue
        else:
            raise DatasetError(f"{source}: row {rowno}: unknown BLESS relation {rel!r}")
        yield rowno, _strip_pos(x), _strip_pos(y), label


def _evalution_rows(text: str, source: str):
    for rowno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("\t")]
        if len(parts) == 3:
            x, rel, y = parts
        elif len(parts) == 4:
            x, y, _, rel = parts
        else:
            raise DatasetError(f"{source}: row {rowno}: expected 3 or 4 tab-separated fields")
        rel = rel.lower()
        if rel in _EVAL_POS:
            yield rowno, x, y, Label.POSITIVE
        elif rel not in _EVAL_OTHER:
            raise DatasetError(f"{source}: row {rowno}: unknown EVALution relation {rel!r}")


def _vocagen_rows(text: str, source: str):
    body = "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))
    reader = csv.reader(io.StringIO(body))
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header[:3]] != ["x", "y", "label"]:
        raise DatasetError(f"{source}: missing 'x,y,label' header")
    for rowno, row in enumerate(reader, 2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) < 3:
            raise DatasetError(f"{source}: row {rowno}: expected 3 fields")
        x, y, lab = (c.strip() for c in row[:3])
        if lab.lower() in _TRUE:
            label = Label.POSITIVE
        elif lab.lower() in _FALSE:
            label = Label.NEGATIVE
        else:
            raise DatasetError(f"{source}: row {rowno}: bad label {lab!r}")
        yield rowno, x, y, label


_READERS = {
    DatasetFormat.BLESS: _bless_rows,
    DatasetFormat.EVALUTION: _evalution_rows,
    DatasetFormat.VOCAGEN_CSV: _vocagen_rows,
}


def load_pairs(
    path: str | Path,
    fmt: DatasetFormat | str,
    source: str | None = None,
    exclude: Iterable[tuple[str, str]] = (),
) -> list[TermPair]:
    """Read a pair dataset; only is-a rows become positives.

    BLESS co-hyponym, meronym, attribute and event rows become negatives;
    other EVALution relations are dropped. Duplicates keep their first row.
    ``exclude`` removes listed ``(x, y)`` pairs.
    """
    path = Path(path)
    fmt = DatasetFormat(fmt)
    source = source or path.stem
    text = path.read_text(encoding="utf-8")
    excluded = set(exclude)
    seen: dict[tuple[str, str], TermPair] = {}
    for rowno, x, y, label in _READERS[fmt](text, str(path)):
        if not x or not y:
            raise DatasetError(f"{path}: row {rowno}: empty term")
        if x == y:
            raise DatasetError(f"{path}: row {rowno}: x and y are identical ({x!r})")
        if (x, y) in excluded:
            continue
        if (x, y) in seen:
            log.warning("%s: row %d: duplicate pair (%s, %s) ignored", path, rowno, x, y)
            continue
        seen[(x, y)] = TermPair(x, y, label, source)
    return sorted(seen.values())


def load_exclusions(path: str | Path) -> set[tuple[str, str]]:
    out = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        parts = re.split(r"[\t,]", line)
        if len(parts) < 2:
            raise DatasetError(f"{path}: bad exclusion line {line!r}")
        out.add((parts[0].strip(), parts[1].strip()))
    return out


def format_pairs_csv(pairs: Iterable[TermPair]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "label"])
    for p in sorted(pairs, key=lambda p: (p.x, p.y)):
        w.writerow([p.x, p.y, p.label.value])
    return buf.getvalue()


def generate_negatives(positives: Iterable[TermPair], seed: int, source: str | None = None) -> list[TermPair]:
    """Synthesize as many negative couples as there are positives.

    Every hypernym of the positive set receives ``n = |P| // |H|`` random
    words it never appeared with (the remainder going to the hypernyms with
    most positives). Words come from the positive pairs' vocabulary.
    """
    positives = [p for p in positives if p.label is Label.POSITIVE]
    if not positives:
        raise DatasetError("no positive pairs to derive negatives from")
    pos = sorted({p.key for p in positives})
    src = source if source is not None else positives[0].source
    vocab = sorted({t for pair in pos for t in pair})
    seen_with: dict[str, set[str]] = {}
    for x, y in pos:
        seen_with.setdefault(y, set()).add(x)
    per_h = Counter(y for _, y in pos)
    order = sorted(per_h, key=lambda h: (-per_h[h], h))

    target = len(pos)
    base, rem = divmod(target, len(order))
    quota = {h: base + (i < rem) for i, h in enumerate(order)}
    capacity = {h: len(vocab) - 1 - len(seen_with[h]) for h in order}
    achievable = sum(capacity.values())
    if achievable < target:
        raise DatasetError(f"vocabulary too small for balance: can make {achievable} of {target} negatives")
    overflow = 0
    for h in order:
        if quota[h] > capacity[h]:
            overflow += quota[h] - capacity[h]
            quota[h] = capacity[h]
    while overflow:
        for h in order:
            if overflow and quota[h] < capacity[h]:
                quota[h] += 1
                overflow -= 1

    rng = np.random.default_rng(seed)
    out = []
    for h in sorted(order):
        if not quota[h]:
            continue
        banned = seen_with[h] | {h}
        pool = [w for w in vocab if w not in banned]
        picks = rng.choice(len(pool), size=quota[h], replace=False)
        out.extend(TermPair(pool[i], h, Label.NEGATIVE, src) for i in sorted(picks))
    return sorted(out)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    assignments: dict[tuple[str, str], int]

    def fold_of(self, pair: TermPair) -> int:
        return self.assignments[pair.key]

    def folds(self, pairs: Sequence[TermPair]) -> list[list[TermPair]]:
        out: list[list[TermPair]] = [[] for _ in range(self.k)]
        for p in pairs:
            out[self.assignments[p.key]].append(p)
        return out

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256(f"{self.k}:{self.seed}".encode())
        for (x, y), f in sorted(self.assignments.items()):
            h.update(f"{x}\t{y}\t{f}\n".encode("utf-8"))
        return h.hexdigest()[:16]


def kfold_split(pairs: Sequence[TermPair], k: int, seed: int) -> FoldPlan:
    """Stratified k-fold assignment: per-label seeded shuffle, then round-robin.

    Pairs are sorted first so that file order never affects the split.
    """
    if k < 2:
        raise DatasetError("k must be >= 2")
    if k > len(pairs):
        raise DatasetError(f"k={k} exceeds the number of pairs ({len(pairs)})")
    rng = np.random.default_rng(seed)
    ordered = sorted(pairs, key=lambda p: (p.x, p.y))
    assignments: dict[tuple[str, str], int] = {}
    i = 0
    for label in (Label.POSITIVE, Label.NEGATIVE):
        group = [p for p in ordered if p.label is label]
        for j in rng.permutation(len(group)):
            assignments[group[j].key] = i % k
            i += 1
    if len(assignments) != len(pairs):
        raise DatasetError("duplicate (x, y) pairs in dataset")
    return FoldPlan(k, seed, assignments)
