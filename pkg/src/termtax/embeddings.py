"""Pretrained word vectors (fastText ``.vec`` text format) and pair composition."""

from __future__ import annotations

import gzip
import hashlib
import io
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

log = logging.getLogger(__name__)

# Skipped when averaging the words of a multiword term.
STOP_PREPOSITIONS = frozenset({
    "de", "du", "des", "d'", "à", "au", "aux", "en", "pour", "sur", "sous", "par",
    "avec", "dans", "le", "la", "les", "l'", "un", "une",
    "of", "the", "a", "an", "for", "in", "on", "with", "to",
})


class VectorFileError(ValueError):
    pass


class Composition(str, Enum):
    CONCAT = "concat"
    DIFF = "diff"
    SUM = "sum"
    PRODUCT = "product"


class EmbeddingStore:
    """Immutable word -> vector map of uniform dimension."""

    def __init__(self, words: list[str], matrix: np.ndarray):
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise ValueError("matrix must have one row per word")
        self.words = tuple(words)
        self._index = {w: i for i, w in enumerate(words)}
        self._matrix = np.ascontiguousarray(matrix, dtype=np.float64)
        self._matrix.setflags(write=False)
        h = hashlib.sha256()
        for w in self.words:
            h.update(w.encode("utf-8") + b"\0")
        h.update(self._matrix.tobytes())
        self.fingerprint = h.hexdigest()[:16]

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def get(self, word: str) -> np.ndarray | None:
        i = self._index.get(word)
        if i is None:
            i = self._index.get(word.lower())
        return None if i is None else self._matrix[i]


def _open_text(path: Path) -> io.TextIOBase:
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


def load_vectors(path: str | Path, vocab_filter: Iterable[str] | None = None) -> EmbeddingStore:
    """Read a ``word v1 ... vd`` file with optional ``count dim`` header.

    Only words in ``vocab_filter`` (when given) are kept. Duplicate words keep
    their first vector.
    """
    path = Path(path)
    keep = set(vocab_filter) if vocab_filter is not None else None
    words: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    dim = None
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if not parts or parts == [""]:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                dim = int(parts[1])
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise VectorFileError(f"{path}:{lineno}: no vector values")
            if len(values) != dim:
                raise VectorFileError(f"{path}:{lineno}: expected {dim} values, got {len(values)}")
            if keep is not None and word not in keep:
                continue
            if word in seen:
                log.warning("%s:%d: duplicate word %r ignored", path, lineno, word)
                continue
            try:
                vec = np.array(values, dtype=np.float64)
            except ValueError as exc:
                raise VectorFileError(f"{path}:{lineno}: {exc}") from exc
            if not np.all(np.isfinite(vec)):
                raise VectorFileError(f"{path}:{lineno}: non-finite value")
            seen.add(word)
            words.append(word)
            rows.append(vec)
    matrix = np.vstack(rows) if rows else np.zeros((0, dim or 0))
    return EmbeddingStore(words, matrix)


def term_words(term: str) -> list[str]:
    return term.replace("_", " ").split()


def vocabulary_for(terms: Iterable[str]) -> set[str]:
    """Default vocab filter: the terms, their constituents and lowercased forms."""
    vocab = set()
    for t in terms:
        vocab.add(t)
        for w in term_words(t):
            vocab.update((w, w.lower()))
    return vocab


def term_vector(store: EmbeddingStore, term: str) -> np.ndarray | None:
    """Vector for a possibly multiword term, or ``None`` when missing.

    Multiword terms average their in-vocabulary words, skipping
    stop-prepositions.
    """
    if not term.strip():
        raise ValueError("term must be non-empty")
    direct = store.get(term)
    if direct is not None:
        return direct
    words = term_words(term)
    if len(words) == 1:
        return None
    vecs = [v for w in words if w.lower() not in STOP_PREPOSITIONS
            and (v := store.get(w)) is not None]
    if not vecs:
        return None
    return np.mean(np.vstack(vecs), axis=0)


def compose(x: np.ndarray, y: np.ndarray, method: Composition | str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"vector length mismatch: {x.shape} vs {y.shape}")
    method = Composition(method)
    if method is Composition.CONCAT:
        return np.concatenate([x, y])
    if method is Composition.DIFF:
        return y - x
    if method is Composition.SUM:
        return y + x
    return y * x


def feature_length(dim: int, method: Composition | str) -> int:
    return 2 * dim if Composition(method) is Composition.CONCAT else dim


@dataclass(frozen=True)
class PairFeatures:
    x_term: str
    y_term: str
    features: np.ndarray
    composition: Composition


def pair_features(store: EmbeddingStore, x_term: str, y_term: str,
                  method: Composition | str) -> PairFeatures | None:
    """Composed features for ``(x, y)``; ``None`` if either term is missing."""
    x = term_vector(store, x_term)
    y = term_vector(store, y_term)
    if x is None or y is None:
        return None
    method = Composition(method)
    return PairFeatures(x_term, y_term, compose(x, y, method), method)
