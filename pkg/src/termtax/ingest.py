"""Text normalization, tokenization and POS tagging.

Two routes produce a :class:`TaggedDocument`:

* plain text -> :func:`normalize_text` -> :func:`tokenize` -> :func:`tag_tokens`
  (lexicon lookup, the fallback when no external tagger output exists);
* tagger output in TSV form -> :func:`ingest_tagged` -> :func:`clean_tagged`.

Sentence ends and normalized entities are kept as reserved marker tokens so
that the n-gram miner never builds a window across them.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

SENT_MARKER = "⟨SENT⟩"
NORM_MARKER = "⟨NORM⟩"
MARKERS = frozenset({SENT_MARKER, NORM_MARKER})


class IngestError(ValueError):
    """Raised for unreadable, empty or malformed input documents."""


class Tag(str, Enum):
    NOUN = "NOUN"
    VERB = "VERB"
    ADJ = "ADJ"
    PREP = "PREP"
    DET = "DET"
    PRON = "PRON"
    ADV = "ADV"
    NUM = "NUM"
    PUNCT = "PUNCT"
    SENT = "SENT"
    OTHER = "OTHER"


DEFAULT_REMOVAL_CHARS = ("/", "(", ")", "[", "]", "{", "}", ";", ":", "*", "#")

# "un"/"une" double as articles, so they are not in the default list.
DEFAULT_NUMBER_WORDS = (
    "deux", "trois", "quatre", "cinq", "six", "sept", "huit", "neuf", "dix",
    "onze", "douze", "treize", "quatorze", "quinze", "seize", "vingt",
    "trente", "quarante", "cinquante", "soixante", "cent", "cents", "mille",
)

DEFAULT_DATE_PATTERNS = (
    r"\b\d{1,2}[/.-]\d{1,2}[/.-]\d{2,4}\b",
    r"\b\d{1,2}(?:er)?\s+(?:janvier|f[ée]vrier|mars|avril|mai|juin|juillet|"
    r"ao[uû]t|septembre|octobre|novembre|d[ée]cembre)\s+\d{4}\b",
)

# Common tagger tag names (TreeTagger French, Penn, UD) mapped to the closed set.
DEFAULT_TAG_MAP = {
    "NOM": "NOUN", "NAM": "NOUN", "NN": "NOUN", "NNS": "NOUN", "NNP": "NOUN",
    "PROPN": "NOUN",
    "ADJ": "ADJ", "JJ": "ADJ",
    "PRP": "PREP", "PRP:det": "PREP", "ADP": "PREP", "IN": "PREP",
    "DET:ART": "DET", "DET:POS": "DET", "DT": "DET",
    "PRO": "PRON", "PRO:PER": "PRON", "PRO:REL": "PRON", "PRO:DEM": "PRON",
    "ADV": "ADV", "RB": "ADV",
    "NUM": "NUM", "CD": "NUM",
    "PUN": "PUNCT", "PUN:cit": "PUNCT", "PONCT": "PUNCT", "PUNCT": "PUNCT",
    "SENT": "SENT",
}

_NUMERIC_RE = re.compile(r"^[+-]?\d+(?:[.,]\d+)*%?$")
_SPLIT_PUNCT = (",", "«", "»", '"', "!", "?")
_SENTENCE_FINAL = (".", "!", "?")


@dataclass(frozen=True)
class RawDocument:
    id: str
    text: str


@dataclass(frozen=True)
class TaggedToken:
    surface: str
    lemma: str
    pos: Tag
    is_boundary: bool = False

    def __post_init__(self) -> None:
        if (self.pos is Tag.SENT) != self.is_boundary:
            raise ValueError(f"pos=SENT must coincide with is_boundary: {self!r}")
        if not self.is_boundary and not self.lemma:
            raise ValueError(f"empty lemma on non-boundary token {self.surface!r}")

    @property
    def is_marker(self) -> bool:
        return self.is_boundary or self.surface == NORM_MARKER


BOUNDARY = TaggedToken(SENT_MARKER, "", Tag.SENT, True)
NORM_TOKEN = TaggedToken(NORM_MARKER, NORM_MARKER, Tag.OTHER)


@dataclass(frozen=True)
class TaggedDocument:
    id: str
    tokens: tuple[TaggedToken, ...]


@dataclass(frozen=True)
class NormalizationConfig:
    removal_chars: tuple[str, ...] = DEFAULT_REMOVAL_CHARS
    number_words: tuple[str, ...] = DEFAULT_NUMBER_WORDS
    entities: tuple[str, ...] = ()
    date_patterns: tuple[str, ...] = DEFAULT_DATE_PATTERNS
    split_punct: tuple[str, ...] = _SPLIT_PUNCT
    sentence_final: tuple[str, ...] = _SENTENCE_FINAL
    tag_map: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_TAG_MAP))

    @classmethod
    def from_dict(cls, data: Mapping | None) -> "NormalizationConfig":
        data = dict(data or {})
        kwargs = {}
        for name in ("removal_chars", "number_words", "entities", "date_patterns",
                     "split_punct", "sentence_final"):
            if name in data:
                kwargs[name] = tuple(data.pop(name))
        if "tag_map" in data:
            tag_map = dict(DEFAULT_TAG_MAP)
            tag_map.update(data.pop("tag_map"))
            kwargs["tag_map"] = tag_map
        if data:
            raise ValueError(f"unknown normalization keys: {sorted(data)}")
        return cls(**kwargs)

    def map_tag(self, raw: str) -> Tag:
        name = self.tag_map.get(raw, raw)
        try:
            return Tag(name)
        except ValueError:
            return Tag.OTHER


def _is_number(token: str, rules: NormalizationConfig) -> bool:
    return bool(_NUMERIC_RE.match(token)) or token.lower() in rules.number_words


def normalize_text(raw: RawDocument, rules: NormalizationConfig | None = None) -> str:
    """Clean one document's text into a space-joined token stream.

    Removal-set characters and numbers disappear, sentence-final punctuation
    becomes the boundary marker, configured entities and dates become the
    NORM marker. No stop words are removed.
    """
    rules = rules or NormalizationConfig()
    text = raw.text
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IngestError(f"{raw.id}: invalid UTF-8 ({exc.reason})") from exc
    if not text.strip():
        raise IngestError(f"{raw.id}: empty document")
    text = unicodedata.normalize("NFC", text)

    for pattern in rules.date_patterns:
        text = re.sub(pattern, f" {NORM_MARKER} ", text, flags=re.IGNORECASE)
    for entity in rules.entities:
        text = re.sub(rf"(?<!\w){re.escape(entity)}(?!\w)", f" {NORM_MARKER} ", text,
                      flags=re.IGNORECASE)
    for ch in rules.removal_chars:
        text = text.replace(ch, " ")
    for ch in rules.split_punct:
        if ch not in rules.sentence_final:
            text = text.replace(ch, f" {ch} ")
    # French elision: l'eau -> l' eau
    text = re.sub(r"(\w['’])(?=\w)", r"\1 ", text)

    out: list[str] = []
    for token in text.split():
        boundary = False
        if token not in MARKERS:
            stripped = token.rstrip("".join(rules.sentence_final))
            if stripped != token:
                boundary, token = True, stripped
        if token and not (token not in MARKERS and _is_number(token, rules)):
            if token == SENT_MARKER:
                boundary = True
            else:
                out.append(token)
        if boundary and out and out[-1] != SENT_MARKER:
            out.append(SENT_MARKER)
    return " ".join(out)


def tokenize(text: str) -> list[str]:
    return text.split()


def tag_tokens(
    tokens: Sequence[str],
    lexicon: Mapping[str, tuple[Tag | str, str]],
    doc_id: str = "",
) -> TaggedDocument:
    """Tag tokens by case-insensitive lexicon lookup.

    Misses get ``OTHER`` with the lowercased surface as lemma.
    """
    out = []
    for tok in tokens:
        if tok == SENT_MARKER:
            out.append(BOUNDARY)
        elif tok == NORM_MARKER:
            out.append(NORM_TOKEN)
        else:
            entry = lexicon.get(tok.lower())
            if entry is None:
                out.append(TaggedToken(tok, tok.lower(), Tag.OTHER))
            else:
                pos, lemma = entry
                out.append(TaggedToken(tok, lemma.lower(), Tag(pos)))
    return TaggedDocument(doc_id, tuple(out))


def load_lexicon(path: str | Path, rules: NormalizationConfig | None = None) -> dict[str, tuple[Tag, str]]:
    """Read a ``word<TAB>pos<TAB>lemma`` lexicon; keys are lowercased."""
    rules = rules or NormalizationConfig()
    lexicon: dict[str, tuple[Tag, str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise IngestError(f"{path}:{lineno}: expected 3 tab-separated fields")
            word, pos, lemma = parts
            lexicon.setdefault(word.lower(), (rules.map_tag(pos), lemma))
    return lexicon


def parse_tagged(text: str, doc_id: str, rules: NormalizationConfig | None = None) -> TaggedDocument:
    rules = rules or NormalizationConfig()
    tokens = []
    if text.endswith("\n"):
        text = text[:-1]
    lines = text.split("\n") if text else []
    for lineno, line in enumerate(lines, 1):
        if line == "":
            tokens.append(BOUNDARY)
            continue
        parts = line.split("\t")
        if len(parts) != 3 or not parts[0]:
            raise IngestError(f"{doc_id}:{lineno}: expected 'surface<TAB>pos<TAB>lemma', got {line!r}")
        surface, pos, lemma = parts
        tag = rules.map_tag(pos)
        if tag is Tag.SENT:
            tokens.append(TaggedToken(surface, lemma, Tag.SENT, True))
        else:
            tokens.append(TaggedToken(surface, lemma or surface.lower(), tag))
    return TaggedDocument(doc_id, tuple(tokens))


def ingest_tagged(path: str | Path, rules: NormalizationConfig | None = None) -> TaggedDocument:
    """Load a tagged TSV file (one token per line, blank line = sentence break)."""
    path = Path(path)
    data = path.read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise IngestError(f"{path.stem}: invalid UTF-8 ({exc.reason})") from exc
    return parse_tagged(text, path.stem, rules)


def serialize_tagged(doc: TaggedDocument) -> str:
    lines = []
    for tok in doc.tokens:
        if tok.is_boundary and tok.surface == SENT_MARKER and not tok.lemma:
            lines.append("")
        else:
            lines.append(f"{tok.surface}\t{tok.pos.value}\t{tok.lemma}")
    return "".join(line + "\n" for line in lines)


def clean_tagged(doc: TaggedDocument, rules: NormalizationConfig | None = None) -> TaggedDocument:
    """Apply the normalization policy to tagger output.

    Tagger files arrive already tokenized, so this drops NUM tokens, number
    words and tokens carrying removal-set characters, and maps configured
    entities to the NORM marker.
    """
    rules = rules or NormalizationConfig()
    entities = {e.lower() for e in rules.entities}
    out: list[TaggedToken] = []
    for tok in doc.tokens:
        if tok.is_boundary:
            if out and not out[-1].is_boundary:
                out.append(BOUNDARY)
            continue
        if tok.surface == NORM_MARKER or tok.surface.lower() in entities:
            out.append(NORM_TOKEN)
            continue
        if tok.pos is Tag.NUM or _is_number(tok.surface, rules):
            continue
        if any(ch in tok.surface for ch in rules.removal_chars):
            continue
        out.append(tok)
    return TaggedDocument(doc.id, tuple(out))


def read_documents(paths: Iterable[str | Path]) -> list[RawDocument]:
    docs = []
    for p in paths:
        p = Path(p)
        try:
            text = p.read_bytes().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IngestError(f"{p.stem}: invalid UTF-8 ({exc.reason})") from exc
        docs.append(RawDocument(p.stem, text))
    ids = [d.id for d in docs]
    if len(set(ids)) != len(ids):
        raise IngestError("duplicate document ids in corpus")
    return docs
