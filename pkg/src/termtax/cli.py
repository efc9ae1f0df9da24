"""Command-line entry point: ``termtax <subcommand> --config pipeline.yaml``.

Exit codes: 0 success, 1 usage or configuration error, 2 input data error,
3 search provider or network failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, pipeline
from .classifier import TrainingError
from .config import ConfigError, load_config
from .datasets import DatasetError
from .embeddings import VectorFileError
from .evaluation import EvaluationError
from .evidence import FixtureError, ProviderError
from .ingest import IngestError
from .ngrams import EmptyCorpusError
from .ranking import ZScoreDomainError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PROVIDER = 0, 1, 2, 3

DATA_ERRORS = (IngestError, EmptyCorpusError, DatasetError, VectorFileError, EvaluationError,
               FixtureError, ZScoreDomainError, TrainingError, UnicodeDecodeError)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="pipeline YAML file")
    common.add_argument("--output-dir", help="override output_dir")
    common.add_argument("--seed", type=int, help="override experiments.seed")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="termtax", description="Domain terminology extraction and hypernym classification.")
    p.add_argument("--version", action="version", version=f"termtax {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("extract", parents=[common], help="n-gram candidates filtered by POS patterns")
    pr = sub.add_parser("prune", parents=[common], help="drop candidates with little web evidence")
    pr.add_argument("--threshold", type=int)
    pr.add_argument("--provider", choices=["fixture", "http", "cache"])
    pr.add_argument("--offline", action="store_true", help="serve evidence from the cache only")
    sub.add_parser("rank", parents=[common], help="rank pruned candidates by Z-score")
    st = sub.add_parser("stats", parents=[common], help="write n-gram statistics for a corpus")
    st.add_argument("--corpus-dir", type=Path)
    st.add_argument("--output", type=Path, required=True)

    sub.add_parser("pairs", parents=[common], help="build labelled pair datasets")
    for name, text in (("train", "train one classifier on a full dataset"),
                       ("eval", "cross-validate one configuration")):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("--dataset")
        sp.add_argument("--embedding")
        sp.add_argument("--composition", choices=["concat", "diff", "sum", "product"])
        sp.add_argument("--algorithm", choices=["mlp", "logreg"])
    g = sub.add_parser("grid", parents=[common], help="cross-validate every configured combination")
    g.add_argument("--no-models", action="store_true", help="skip saving full-data models")

    ae = sub.add_parser("annotate-export", parents=[common], help="write top-ranked terms for annotators")
    ae.add_argument("--top-k", type=int)
    asc = sub.add_parser("annotate-score", parents=[common], help="agreement and accuracy of two annotation files")
    asc.add_argument("first", type=Path)
    asc.add_argument("second", type=Path)
    return p


def _run(args: argparse.Namespace) -> object:
    overrides = {"output_dir": args.output_dir, "experiments.seed": args.seed}
    if args.command == "prune":
        overrides["evidence.threshold"] = args.threshold
        overrides["evidence.provider"] = args.provider
    cfg = load_config(args.config, overrides)
    cmd = args.command
    if cmd == "extract":
        return pipeline.cmd_extract(cfg)
    if cmd == "prune":
        summary = pipeline.cmd_prune(cfg, offline=args.offline)
        return {"counts": summary["counts"], "threshold": summary["threshold"]}
    if cmd == "rank":
        return {"ranked": len(pipeline.cmd_rank(cfg)["terms"])}
    if cmd == "stats":
        return pipeline.cmd_stats(cfg, args.corpus_dir, args.output)
    if cmd == "pairs":
        return pipeline.cmd_pairs(cfg)
    if cmd == "train":
        path = pipeline.cmd_train(cfg, args.dataset, args.embedding, args.composition, args.algorithm)
        return {"model": str(path)}
    if cmd == "eval":
        report = pipeline.cmd_eval(cfg, args.dataset, args.embedding, args.composition, args.algorithm)
        return {k: report.to_dict()[k] for k in ("mean_p", "mean_r", "mean_f1", "sd_f1", "excluded")}
    if cmd == "grid":
        reports = pipeline.cmd_grid(cfg, save_models=not args.no_models)
        failed = [r for r in reports if not r.ok]
        if reports and len(failed) == len(reports):
            raise TrainingError("every grid cell failed: " + failed[0].error)
        return {"cells": len(reports), "failed": len(failed)}
    if cmd == "annotate-export":
        return {"files": [str(p) for p in pipeline.cmd_annotate_export(cfg, args.top_k)]}
    if cmd == "annotate-score":
        result = pipeline.cmd_annotate_score(cfg, args.first, args.second)
        result.pop("provenance")
        return result
    raise AssertionError(cmd)


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = _run(args)
    except ConfigError as exc:
        print(f"termtax: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProviderError as exc:
        print(f"termtax: search provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except DATA_ERRORS as exc:
        print(f"termtax: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"termtax: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(json.dumps(result, indent=2, sort_keys=True, ensure_ascii=False))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
