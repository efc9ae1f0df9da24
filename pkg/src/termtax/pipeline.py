"""Pipeline stages behind the CLI subcommands.

Each stage reads only files written by earlier stages (plus inputs named in
the config) and writes plain TSV/JSON prefixed with provenance, so a stage
can be rerun on its own and unchanged inputs give byte-identical outputs.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

from .classifier import Algorithm, TrainConfig, cross_validate, featurize, run_grid, save_model, train
from .config import ConfigError, PipelineConfig
from .datasets import (DatasetFormat, Label, TermPair, format_pairs_csv, generate_negatives, kfold_split,
                       load_exclusions, load_pairs)
from .embeddings import Composition, load_vectors, vocabulary_for
from .evaluation import (EvalReport, MergeMode, cohen_kappa, format_judgments, format_reports_tsv,
                         Judgment, merge_judgments, pair_annotators, read_judgments)
from .evidence import (CacheOnlyProvider, EvidenceCache, FixtureProvider, ProviderError, http_provider,
                       kept_by_threshold, prune_by_evidence)
from .ingest import (IngestError, NormalizationConfig, RawDocument, TaggedDocument, clean_tagged,
                     ingest_tagged, load_lexicon, normalize_text, tag_tokens, tokenize)
from .ngrams import (CANDIDATE_HEADER, EmptyCorpusError, candidates_from_stats, corpus_stats,
                     format_candidate, format_stats, read_candidates, read_stats)
from .patterns import default_patterns, filter_by_patterns, load_patterns
from .ranking import format_ranked, rank_terms

log = logging.getLogger(__name__)

SWEEP = range(1, 51)


class OfflineCacheMiss(ProviderError):
    pass


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_json(path: Path, obj: Any) -> Path:
    return write_text(path, json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


# --- terminology ---------------------------------------------------------------

def load_corpus(cfg: PipelineConfig, corpus_dir: Path | None = None) -> list[TaggedDocument]:
    corpus = cfg.section("corpus")
    corpus_dir = corpus_dir or cfg.require("corpus", "dir")
    if not corpus_dir.is_dir():
        raise ConfigError(f"corpus directory {corpus_dir} does not exist")
    rules = NormalizationConfig.from_dict(cfg.section("normalization"))
    fmt = corpus.get("format", "text")
    if fmt == "tagged":
        files = sorted(corpus_dir.glob("*.tsv"))
        docs = [clean_tagged(ingest_tagged(f, rules), rules) for f in files]
    elif fmt == "text":
        lexicon = load_lexicon(cfg.require("corpus", "lexicon"), rules)
        files = sorted(corpus_dir.glob("*.txt"))
        docs = []
        for f in files:
            try:
                text = f.read_bytes().decode("utf-8")
            except UnicodeDecodeError as exc:
                raise IngestError(f"{f.stem}: invalid UTF-8 ({exc.reason})") from exc
            normalized = normalize_text(RawDocument(f.stem, text), rules)
            docs.append(tag_tokens(tokenize(normalized), lexicon, f.stem))
    else:
        raise ConfigError(f"corpus.format must be 'text' or 'tagged', got {fmt!r}")
    if not docs:
        raise EmptyCorpusError(f"empty corpus: no input files in {corpus_dir}")
    return docs


def _patterns(cfg: PipelineConfig):
    p = cfg.section("extract").get("patterns")
    return load_patterns(cfg.require("extract", "patterns")) if p else default_patterns()


def cmd_extract(cfg: PipelineConfig) -> dict:
    ex = cfg.section("extract")
    patterns = _patterns(cfg)
    docs = load_corpus(cfg)
    stats = corpus_stats(docs, ex["n_values"])
    frequent = candidates_from_stats(stats, int(ex["min_frequency"]))
    kept = filter_by_patterns(frequent, patterns)
    out = cfg.output_dir
    write_text(out / "candidates.tsv", cfg.provenance_line("extract") + CANDIDATE_HEADER + "\n"
               + "".join(format_candidate(c) + "\n" for c in kept))
    write_text(out / "specific_stats.tsv", cfg.provenance_line("extract") + format_stats(stats))

    def by_n(items):
        return {str(n): sum(1 for c in items if c.n == n) for n in sorted(stats.n_values)}

    summary = {
        "provenance": cfg.provenance("extract"),
        "documents": len(docs),
        "total_words": stats.total_words,
        "distinct_ngrams": {str(n): sum(1 for k in stats.freq if len(k) == n) for n in sorted(stats.n_values)},
        "after_min_frequency": by_n(frequent),
        "after_patterns": by_n(kept),
    }
    write_json(out / "extract_stats.json", summary)
    return summary


def build_provider(cfg: PipelineConfig, offline: bool):
    ev = cfg.section("evidence")
    kind = ev.get("provider", "fixture")
    cache = EvidenceCache(cfg.path(ev["cache"])) if ev.get("cache") else None
    if kind == "fixture":
        return FixtureProvider(cfg.require("evidence", "fixture")), cache
    if kind == "http":
        endpoint = ev.get("endpoint")
        if not endpoint:
            raise ConfigError("config: evidence.endpoint is required for the http provider")
        if offline:
            return CacheOnlyProvider(f"http:{endpoint}"), cache
        return http_provider(endpoint, rate_limit=float(ev["rate_limit"]), retries=int(ev["retries"]),
                             pages=int(ev["pages"])), cache
    if kind == "cache":
        if cache is None:
            raise ConfigError("config: evidence.cache is required for the cache provider")
        return CacheOnlyProvider(ev.get("provider_id", "cache")), cache
    raise ConfigError(f"unknown evidence provider {kind!r}")


def cmd_prune(cfg: PipelineConfig, offline: bool = False) -> dict:
    ev = cfg.section("evidence")
    out = cfg.output_dir
    candidates = read_candidates(_stage_input(out / "candidates.tsv", "extract"))
    provider, cache = build_provider(cfg, offline)
    result = prune_by_evidence(candidates, provider, int(ev["threshold"]), cache,
                               ev.get("mode", "occurrences"), int(ev.get("max_in_flight", 4)))
    unresolved = [r.query for r in result.records if not r.resolved]
    if unresolved and isinstance(provider, CacheOnlyProvider):
        raise OfflineCacheMiss("offline mode: no cached evidence for " + ", ".join(unresolved))
    write_text(out / "pruned.tsv", cfg.provenance_line("prune") + CANDIDATE_HEADER + "\n"
               + "".join(format_candidate(c) + "\n" for c in result.kept))
    summary = {
        "provenance": cfg.provenance("prune"),
        "provider_id": provider.provider_id,
        "threshold": int(ev["threshold"]),
        "mode": ev.get("mode", "occurrences"),
        "counts": {"input": len(candidates), "kept": len(result.kept), "dropped": len(result.dropped),
                   "unresolved": len(result.unresolved)},
        "unresolved": [{"query": r.query, "error": r.error} for r in result.records if not r.resolved],
        "threshold_sweep": [{"threshold": t, "kept": n}
                            for t, n in sorted(kept_by_threshold(result.records, SWEEP).items())],
        "records": [r.to_dict() for r in result.records],
    }
    if unresolved:
        log.warning("%d candidates unresolved (provider failures)", len(unresolved))
    write_json(out / "evidence.json", summary)
    return summary


def cmd_rank(cfg: PipelineConfig) -> dict:
    out = cfg.output_dir
    generic_path = cfg.require("rank", "generic_stats")
    pruned = read_candidates(_stage_input(out / "pruned.tsv", "prune"))
    specific = read_stats(_stage_input(out / "specific_stats.tsv", "extract"))
    generic = read_stats(generic_path)
    ranked = rank_terms(pruned, specific, generic, float(cfg.section("rank").get("smoothing", 0.5)))
    evidence = {}
    ev_path = out / "evidence.json"
    if ev_path.exists():
        evidence = {r["ngram"]: r["match_count"] for r in json.loads(ev_path.read_text("utf-8"))["records"]}
    write_text(out / "ranked.tsv", cfg.provenance_line("rank") + format_ranked(ranked))
    rows = []
    for i, r in enumerate(ranked, 1):
        c = r.candidate
        rows.append({
            "rank": i, "ngram": " ".join(r.ngram), "surface": c.phrase,
            "pattern": "-".join(t.value for t in c.pos_pattern),
            "a0": r.a0, "b0": r.b0, "a1": r.a1, "b1": r.b1, "z": r.z,
            "evidence_count": evidence.get(" ".join(r.ngram)),
        })
    summary = {"provenance": cfg.provenance("rank"), "smoothing": float(cfg.section("rank").get("smoothing", 0.5)),
               "terms": rows}
    write_json(out / "ranked.json", summary)
    return summary


def cmd_stats(cfg: PipelineConfig, corpus_dir: Path | None, output: Path) -> dict:
    docs = load_corpus(cfg, corpus_dir)
    stats = corpus_stats(docs, cfg.section("extract")["n_values"])
    write_text(output, cfg.provenance_line("stats") + format_stats(stats))
    return {"documents": len(docs), "total_words": stats.total_words, "ngrams": len(stats.freq)}


def _stage_input(path: Path, stage: str) -> Path:
    if not path.exists():
        raise ConfigError(f"{path} not found; run the '{stage}' stage first")
    return path


# --- hypernymy experiments --------------------------------------------------------

def _experiments(cfg: PipelineConfig) -> dict:
    return cfg.section("experiments")


def _dataset_entries(cfg: PipelineConfig) -> list[dict]:
    entries = _experiments(cfg).get("datasets") or []
    if not entries:
        raise ConfigError("config: experiments.datasets is empty")
    for e in entries:
        if "name" not in e:
            raise ConfigError("config: every dataset needs a name")
    return entries


def _embedding_entries(cfg: PipelineConfig) -> list[dict]:
    entries = _experiments(cfg).get("embeddings") or []
    if not entries:
        raise ConfigError("config: experiments.embeddings is empty")
    for e in entries:
        if "name" not in e or "path" not in e:
            raise ConfigError("config: every embedding needs a name and a path")
        if not cfg.path(e["path"]).exists():
            raise ConfigError(f"config: embedding file {cfg.path(e['path'])} is missing")
    return entries


def cmd_pairs(cfg: PipelineConfig) -> dict:
    seed = int(_experiments(cfg).get("seed", 42))
    summary = {}
    entries = _dataset_entries(cfg)
    for e in entries:
        for key in ("path", "exclude"):
            if e.get(key) and not cfg.path(e[key]).exists():
                raise ConfigError(f"config: dataset {e['name']}: {key} {cfg.path(e[key])} is missing")
    for e in entries:
        exclude = load_exclusions(cfg.path(e["exclude"])) if e.get("exclude") else set()
        pairs = load_pairs(cfg.path(e["path"]), e.get("format", "vocagen_csv"), e["name"], exclude)
        positives = [p for p in pairs if p.label is Label.POSITIVE]
        negatives = [p for p in pairs if p.label is Label.NEGATIVE]
        mode = e.get("negatives", "auto")
        if mode == "generate" or (mode == "auto" and not negatives):
            negatives = generate_negatives(positives, seed, e["name"])
        all_pairs = positives + negatives
        write_text(cfg.output_dir / "pairs" / f"{e['name']}.csv",
                   cfg.provenance_line("pairs") + format_pairs_csv(all_pairs))
        summary[e["name"]] = {"positives": len(positives), "negatives": len(negatives)}
    write_json(cfg.output_dir / "pairs" / "summary.json", {"provenance": cfg.provenance("pairs"), "datasets": summary})
    return summary


def load_stage_pairs(cfg: PipelineConfig, name: str) -> list[TermPair]:
    path = _stage_input(cfg.output_dir / "pairs" / f"{name}.csv", "pairs")
    return load_pairs(path, DatasetFormat.VOCAGEN_CSV, name)


def _load_stores(cfg: PipelineConfig, pairs_by_name: dict[str, list[TermPair]], only: str | None = None):
    vocab = vocabulary_for(t for pairs in pairs_by_name.values() for p in pairs for t in (p.x, p.y))
    stores = {}
    for e in _embedding_entries(cfg):
        if only and e["name"] != only:
            continue
        stores[e["name"]] = load_vectors(cfg.path(e["path"]), vocab)
    if only and not stores:
        raise ConfigError(f"no embedding named {only!r} in config")
    return stores


def train_config(cfg: PipelineConfig, **changes) -> TrainConfig:
    ex = _experiments(cfg)
    data = dict(ex.get("train") or {})
    data.setdefault("seed", int(ex.get("seed", 42)))
    data.update({k: v for k, v in changes.items() if v is not None})
    try:
        return TrainConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: experiments.train: {exc}") from exc


def _pick(cfg: PipelineConfig, dataset, embedding, composition, algorithm):
    ex = _experiments(cfg)
    dataset = dataset or _dataset_entries(cfg)[0]["name"]
    embedding = embedding or _embedding_entries(cfg)[0]["name"]
    composition = Composition(composition or ex["compositions"][0])
    algorithm = Algorithm(algorithm or ex["algorithms"][0])
    return dataset, embedding, composition, algorithm


def cmd_train(cfg: PipelineConfig, dataset=None, embedding=None, composition=None, algorithm=None) -> Path:
    dataset, embedding, composition, algorithm = _pick(cfg, dataset, embedding, composition, algorithm)
    pairs = load_stage_pairs(cfg, dataset)
    store = _load_stores(cfg, {dataset: pairs}, embedding)[embedding]
    config = train_config(cfg, composition=composition, algorithm=algorithm)
    X, y, kept = featurize(pairs, store, composition)
    model = train(X, y, config, store.fingerprint)
    model.metadata["dataset"] = dataset
    model.metadata["excluded_pairs"] = len(pairs) - len(kept)
    model.metadata["provenance"] = cfg.provenance("train")
    path = cfg.output_dir / "models" / f"{dataset}__{embedding}__{composition.value}__{algorithm.value}.model"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, path)
    return path


def cmd_eval(cfg: PipelineConfig, dataset=None, embedding=None, composition=None, algorithm=None) -> EvalReport:
    dataset, embedding, composition, algorithm = _pick(cfg, dataset, embedding, composition, algorithm)
    ex = _experiments(cfg)
    pairs = load_stage_pairs(cfg, dataset)
    store = _load_stores(cfg, {dataset: pairs}, embedding)[embedding]
    config = train_config(cfg, composition=composition, algorithm=algorithm)
    folds = kfold_split(pairs, int(ex.get("k", 5)), int(ex.get("seed", 42)))
    report = cross_validate(pairs, store, config, folds, dataset, embedding)
    stem = f"eval__{dataset}__{embedding}__{composition.value}__{algorithm.value}"
    write_json(cfg.output_dir / "reports" / f"{stem}.json",
               {"provenance": cfg.provenance("eval"), "reports": [report.to_dict()]})
    write_text(cfg.output_dir / "reports" / f"{stem}.tsv", cfg.provenance_line("eval") + format_reports_tsv([report]))
    return report


def cmd_grid(cfg: PipelineConfig, save_models: bool = True) -> list[EvalReport]:
    ex = _experiments(cfg)
    names = [e["name"] for e in _dataset_entries(cfg)]
    datasets = {n: load_stage_pairs(cfg, n) for n in names}
    stores = _load_stores(cfg, datasets)
    seed = int(ex.get("seed", 42))
    reports = run_grid(datasets, stores, ex["compositions"], ex["algorithms"], int(ex.get("k", 5)), seed,
                       base_config=train_config(cfg),
                       models_dir=cfg.output_dir / "grid_models" if save_models else None)
    write_json(cfg.output_dir / "reports" / "grid.json",
               {"provenance": cfg.provenance("grid"), "reports": [r.to_dict() for r in reports]})
    write_text(cfg.output_dir / "reports" / "grid.tsv", cfg.provenance_line("grid") + format_reports_tsv(reports))
    return reports


# --- annotation --------------------------------------------------------------------

def cmd_annotate_export(cfg: PipelineConfig, top_k: int | None = None) -> list[Path]:
    ann = cfg.section("annotation")
    top_k = top_k or int(ann.get("top_k", 100))
    ranked = _stage_input(cfg.output_dir / "ranked.tsv", "rank")
    terms = []
    for line in ranked.read_text("utf-8").splitlines():
        if line.startswith("#") or line.startswith("rank\t") or not line:
            continue
        parts = line.split("\t")
        if ann.get("n") and len(parts[1].split(" ")) != int(ann["n"]):
            continue
        terms.append(parts[1])
    terms = terms[:top_k]
    paths = []
    for name in ann.get("annotators", ["A", "B"]):
        body = "ngram\tannotator\tverdict\n" + "".join(f"{t}\t{name}\t\n" for t in terms)
        paths.append(write_text(cfg.output_dir / "annotation" / f"{name}.tsv",
                                cfg.provenance_line("annotate-export") + body))
    return paths


def score_annotations(first: list[Judgment], second: list[Judgment]) -> dict:
    pairs = pair_annotators(first, second)
    kappa, observed = cohen_kappa([a.verdict for a, _ in pairs], [b.verdict for _, b in pairs])
    strict = merge_judgments(pairs, MergeMode.STRICT)
    flexible = merge_judgments(pairs, MergeMode.FLEXIBLE)
    return {
        "items": len(pairs),
        "kappa": kappa,
        "observed_agreement": observed,
        "strict": {"accuracy": strict.accuracy, "error_rate": strict.error_rate},
        "flexible": {"accuracy": flexible.accuracy, "error_rate": flexible.error_rate},
    }


def cmd_annotate_score(cfg: PipelineConfig, first: Path, second: Path) -> dict:
    result = score_annotations(read_judgments(first), read_judgments(second))
    result["provenance"] = cfg.provenance("annotate-score")
    write_json(cfg.output_dir / "annotation" / "agreement.json", result)
    return result


__all__ = [
    "cmd_extract", "cmd_prune", "cmd_rank", "cmd_stats", "cmd_pairs", "cmd_train", "cmd_eval",
    "cmd_grid", "cmd_annotate_export", "cmd_annotate_score", "score_annotations", "format_judgments",
]
