"""Classification metrics, annotator agreement and expert-judgment merging."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Hashable, Iterable, Sequence


class EvaluationError(ValueError):
    pass


def prf(predictions: Sequence[int], gold: Sequence[int]) -> tuple[float, float, float]:
    """Positive-class precision, recall and F1, in percent.

    Precision is 0 when nothing is predicted positive.
    """
    if len(predictions) != len(gold):
        raise EvaluationError(f"length mismatch: {len(predictions)} predictions, {len(gold)} gold")
    tp = fp = fn = 0
    for p, g in zip(predictions, gold):
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1
    if tp + fn == 0:
        raise EvaluationError("gold labels contain no positive item; recall undefined")
    precision = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    recall = 100.0 * tp / (tp + fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def cohen_kappa(a: Sequence[Hashable], b: Sequence[Hashable]) -> tuple[float, float]:
    """Cohen's kappa and observed agreement for two annotators over the same items."""
    if len(a) != len(b):
        raise EvaluationError(f"annotation lengths differ: {len(a)} vs {len(b)}")
    n = len(a)
    if n == 0:
        raise EvaluationError("no annotations")
    observed = sum(x == y for x, y in zip(a, b)) / n
    ca, cb = Counter(a), Counter(b)
    expected = sum(ca[c] * cb[c] for c in ca.keys() & cb.keys()) / (n * n)
    if observed == 1.0:
        return 1.0, observed
    return (observed - expected) / (1.0 - expected), observed


class Verdict(IntEnum):
    IRRELEVANT = 0
    RELEVANT_OUT_OF_DOMAIN = 1
    RELEVANT_IN_DOMAIN = 2


class MergeMode(str, Enum):
    STRICT = "strict"
    FLEXIBLE = "flexible"


@dataclass(frozen=True)
class Judgment:
    ngram: str
    annotator: str
    verdict: Verdict


@dataclass
class MergeResult:
    mode: MergeMode
    outcomes: dict[str, bool]  # ngram -> correct

    @property
    def accuracy(self) -> float:
        return sum(self.outcomes.values()) / len(self.outcomes) if self.outcomes else 0.0

    @property
    def error_rate(self) -> float:
        return 1.0 - self.accuracy


def is_correct(v1: Verdict, v2: Verdict, mode: MergeMode | str) -> bool:
    mode = MergeMode(mode)
    if mode is MergeMode.STRICT:
        return v1 == v2 == Verdict.RELEVANT_IN_DOMAIN
    relevant = v1 != Verdict.IRRELEVANT and v2 != Verdict.IRRELEVANT
    return relevant and Verdict.RELEVANT_IN_DOMAIN in (v1, v2)


def merge_judgments(pairs: Iterable[tuple[Judgment, Judgment]], mode: MergeMode | str) -> MergeResult:
    mode = MergeMode(mode)
    outcomes: dict[str, bool] = {}
    for j1, j2 in pairs:
        if j1.ngram != j2.ngram:
            raise EvaluationError(f"judgments cover different n-grams: {j1.ngram!r} vs {j2.ngram!r}")
        outcomes[j1.ngram] = is_correct(j1.verdict, j2.verdict, mode)
    return MergeResult(mode, outcomes)


def pair_annotators(first: Sequence[Judgment], second: Sequence[Judgment]) -> list[tuple[Judgment, Judgment]]:
    """Align two annotators' judgments by n-gram (order of ``first``)."""
    by_ngram = {}
    for j in second:
        if j.ngram in by_ngram:
            raise EvaluationError(f"duplicate judgment for {j.ngram!r} by {j.annotator!r}")
        by_ngram[j.ngram] = j
    names = [j.ngram for j in first]
    if len(set(names)) != len(names):
        raise EvaluationError("duplicate n-gram in first annotator's judgments")
    missing_a = sorted(set(by_ngram) - set(names))
    missing_b = sorted(set(names) - set(by_ngram))
    if missing_a or missing_b:
        raise EvaluationError(
            f"annotators judged different n-gram sets; only first: {missing_b[:10]}, "
            f"only second: {missing_a[:10]}")
    return [(j, by_ngram[j.ngram]) for j in first]


def read_judgments(path: str | Path) -> list[Judgment]:
    """``ngram<TAB>annotator<TAB>verdict`` rows, verdict in {0, 1, 2}."""
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#") or line.startswith("ngram\t"):
            continue
        parts = line.split("\t")
        if len(parts) != 3 or not parts[2].strip():
            raise EvaluationError(f"{path}:{lineno}: expected 'ngram<TAB>annotator<TAB>verdict'")
        try:
            verdict = Verdict(int(parts[2]))
        except ValueError as exc:
            raise EvaluationError(f"{path}:{lineno}: verdict must be 0, 1 or 2") from exc
        out.append(Judgment(parts[0], parts[1], verdict))
    return out


def format_judgments(judgments: Iterable[Judgment]) -> str:
    lines = ["ngram\tannotator\tverdict"]
    lines += [f"{j.ngram}\t{j.annotator}\t{int(j.verdict)}" for j in judgments]
    return "\n".join(lines) + "\n"


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    m = sum(values) / len(values)
    return m, math.sqrt(sum((v - m) ** 2 for v in values) / len(values))


@dataclass
class EvalReport:
    """Cross-validated positive-class metrics (percent), population SD."""

    per_fold: list[tuple[float, float, float]] = field(default_factory=list)
    mean_p: float = math.nan
    sd_p: float = math.nan
    mean_r: float = math.nan
    sd_r: float = math.nan
    mean_f1: float = math.nan
    sd_f1: float = math.nan
    excluded: int = 0
    dataset: str = ""
    embedding: str = ""
    composition: str = ""
    algorithm: str = ""
    k: int = 0
    fold_fingerprint: str = ""
    error: str = ""

    @classmethod
    def from_folds(cls, per_fold: Sequence[tuple[float, float, float]], **meta) -> "EvalReport":
        per_fold = [tuple(float(v) for v in fold) for fold in per_fold]
        mean_p, sd_p = _mean_sd([f[0] for f in per_fold])
        mean_r, sd_r = _mean_sd([f[1] for f in per_fold])
        mean_f1, sd_f1 = _mean_sd([f[2] for f in per_fold])
        meta.setdefault("k", len(per_fold))
        return cls(per_fold, mean_p, sd_p, mean_r, sd_r, mean_f1, sd_f1, **meta)

    @property
    def ok(self) -> bool:
        return not self.error

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_fold"] = [{"precision": p, "recall": r, "f1": f} for p, r, f in self.per_fold]
        for key, value in d.items():
            if isinstance(value, float) and math.isnan(value):
                d[key] = None
        return d


REPORT_TSV_HEADER = "dataset\tembedding\tcomposition\talgorithm\tmean_f1\tsd_f1\tmean_r\tsd_r\tmean_p\tsd_p\texcluded\terror"


def format_reports_tsv(reports: Iterable[EvalReport]) -> str:
    lines = [REPORT_TSV_HEADER]
    for r in reports:
        nums = [r.mean_f1, r.sd_f1, r.mean_r, r.sd_r, r.mean_p, r.sd_p]
        cells = ["" if math.isnan(v) else f"{v:.2f}" for v in nums]
        lines.append("\t".join([r.dataset, r.embedding, r.composition, r.algorithm, *cells,
                                str(r.excluded), r.error.replace("\t", " ").replace("\n", " ")]))
    return "\n".join(lines) + "\n"
