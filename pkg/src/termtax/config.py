"""Declarative pipeline configuration (YAML) with flag overrides."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from . import __version__

DEFAULTS: dict[str, Any] = {
    "output_dir": "out",
    "corpus": {"dir": None, "format": "text", "lexicon": None},
    "normalization": {},
    "extract": {"n_values": [1, 2, 3], "min_frequency": 2, "patterns": None},
    "evidence": {
        "provider": "fixture",
        "fixture": None,
        "cache": None,
        "threshold": 10,
        "mode": "occurrences",
        "endpoint": None,
        "rate_limit": 1.0,
        "retries": 2,
        "pages": 1,
        "max_in_flight": 4,
    },
    "rank": {"generic_stats": None, "smoothing": 0.5},
    "experiments": {
        "datasets": [],
        "embeddings": [],
        "compositions": ["concat", "diff", "sum", "product"],
        "algorithms": ["mlp", "logreg"],
        "k": 5,
        "seed": 42,
        "train": {},
    },
    "annotation": {"top_k": 100, "annotators": ["A", "B"]},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, extra: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict) and key != "normalization":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class PipelineConfig:
    data: dict
    base_dir: Path

    def section(self, name: str) -> dict:
        return self.data.get(name) or {}

    def path(self, value: str | None) -> Path | None:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def require(self, section: str, key: str, must_exist: bool = True) -> Path:
        value = self.section(section).get(key)
        if not value:
            raise ConfigError(f"config: {section}.{key} is required for this command")
        p = self.path(value)
        if must_exist and not p.exists():
            raise ConfigError(f"config: {section}.{key} points to missing path {p}")
        return p

    @property
    def output_dir(self) -> Path:
        return self.path(self.data["output_dir"])

    @property
    def sha256(self) -> str:
        # where outputs go does not change what they contain
        content = {k: v for k, v in self.data.items() if k != "output_dir"}
        blob = json.dumps(content, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def provenance(self, stage: str) -> dict:
        return {
            "tool": "termtax",
            "version": __version__,
            "stage": stage,
            "config_sha256": self.sha256,
            "seed": self.section("experiments").get("seed"),
        }

    def provenance_line(self, stage: str) -> str:
        p = self.provenance(stage)
        return "# " + " ".join(f"{k}={p[k]}" for k in ("tool", "version", "stage", "config_sha256", "seed")) + "\n"


def set_override(data: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = data
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


def load_config(path: str | Path | None, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    """Read YAML config over the defaults; ``overrides`` use dotted keys and win."""
    raw: dict = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        base = path.resolve().parent
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    data = _merge(DEFAULTS, raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            set_override(data, key, value)
    return PipelineConfig(data, base)
