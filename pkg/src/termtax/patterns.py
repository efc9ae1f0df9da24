"""POS-pattern filtering of n-gram candidates."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .ingest import Tag
from .ngrams import NGramCandidate, Pattern

# Rows of the knowledge-model pattern distribution (agriculture model).
_DEFAULT = (
    "NOUN", "VERB", "ADJ",
    "NOUN-NOUN", "ADJ-NOUN", "PREP-NOUN", "VERB-NOUN",
    "NOUN-NOUN-NOUN", "PREP-NOUN-NOUN", "NOUN-PREP-NOUN", "VERB-NOUN-NOUN",
)


@dataclass(frozen=True)
class PatternSet:
    patterns: frozenset[Pattern]

    def __post_init__(self) -> None:
        if not self.patterns:
            raise ValueError("pattern set is empty")
        for p in self.patterns:
            if not 1 <= len(p) <= 3:
                raise ValueError(f"pattern length must be 1..3: {p}")

    def __contains__(self, pattern: object) -> bool:
        return pattern in self.patterns

    def __len__(self) -> int:
        return len(self.patterns)

    def by_n(self) -> dict[int, list[Pattern]]:
        out: dict[int, list[Pattern]] = {}
        for p in sorted(self.patterns, key=lambda p: (len(p), [t.value for t in p])):
            out.setdefault(len(p), []).append(p)
        return out


def parse_pattern(text: str) -> Pattern:
    return tuple(Tag(t.strip()) for t in text.strip().split("-"))


def patterns_from_strings(lines: Iterable[str]) -> PatternSet:
    return PatternSet(frozenset(parse_pattern(x) for x in lines if x.strip() and not x.startswith("#")))


def default_patterns() -> PatternSet:
    return patterns_from_strings(_DEFAULT)


def load_patterns(path: str | Path) -> PatternSet:
    """One hyphen-separated pattern per line, e.g. ``NOUN-PREP-NOUN``."""
    with open(path, encoding="utf-8") as fh:
        return patterns_from_strings(fh)


def format_patterns(ps: PatternSet) -> str:
    lines = ["-".join(t.value for t in p) for group in ps.by_n().values() for p in group]
    return "\n".join(lines) + "\n"


def filter_by_patterns(candidates: Iterable[NGramCandidate], patterns: PatternSet) -> list[NGramCandidate]:
    return [c for c in candidates if c.pos_pattern in patterns]
