"""Binary hypernymy classifiers on composed embedding features.

A small numpy network: ReLU hidden layers (none for logistic regression),
one sigmoid output, binary cross-entropy with an L2 penalty, Adam updates on
seeded mini-batches and early stopping on a held-out stratified slice.
Training is single-threaded numpy so a fixed seed reproduces the exact
weights.
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .datasets import FoldPlan, TermPair, kfold_split
from .embeddings import Composition, EmbeddingStore, pair_features
from .evaluation import EvalReport, prf

MAGIC = b"TTXMODEL"
FORMAT_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


class TrainingError(RuntimeError):
    pass


class Algorithm(str, Enum):
    LOGREG = "logreg"
    MLP = "mlp"


@dataclass(frozen=True)
class TrainConfig:
    algorithm: Algorithm = Algorithm.MLP
    composition: Composition = Composition.DIFF
    hidden_layers: tuple[int, ...] = (100, 100)
    batch_size: int = 32
    max_epochs: int = 100
    early_stop_tolerance: float = 1e-4
    early_stop_patience: int = 5
    learning_rate: float = 1e-3
    l2: float = 1e-4
    validation_fraction: float = 0.15
    standardize: bool = False
    seed: int = 42

    def __post_init__(self) -> None:
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        object.__setattr__(self, "composition", Composition(self.composition))
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in [0, 1)")

    @property
    def widths(self) -> tuple[int, ...]:
        return self.hidden_layers if self.algorithm is Algorithm.MLP else ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["algorithm"] = self.algorithm.value
        d["composition"] = self.composition.value
        d["hidden_layers"] = list(self.hidden_layers)
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class ClassifierModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    composition: Composition = Composition.DIFF
    embedding_fingerprint: str = ""
    metadata: dict = field(default_factory=dict)
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: input {w.shape[0]} != previous output {self.weights[i - 1].shape[1]}")
        if self.weights[-1].shape[1] != 1:
            raise ValueError("output layer must have a single unit")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @classmethod
    def zeros(cls, input_dim: int, hidden: Sequence[int] = (), **kwargs) -> "ClassifierModel":
        dims = [input_dim, *hidden, 1]
        return cls([np.zeros((a, b)) for a, b in zip(dims, dims[1:])],
                   [np.zeros(b) for b in dims[1:]], **kwargs)


# --- network math -------------------------------------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(weights, biases, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    """Return output logits plus per-layer pre-activations and activations."""
    acts = [X]
    pres = []
    a = X
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        pres.append(z)
        if i < len(weights) - 1:
            a = np.maximum(z, 0.0)
            acts.append(a)
    return pres[-1][:, 0], pres, acts


def loss_and_grads(weights, biases, X: np.ndarray, y: np.ndarray, l2: float = 0.0):
    """Mean binary cross-entropy (+ ``l2/2n * sum ||W||^2``) and its gradients."""
    n = X.shape[0]
    logits, pres, acts = forward(weights, biases, X)
    data_loss = np.mean(np.maximum(logits, 0) - y * logits + np.log1p(np.exp(-np.abs(logits))))
    penalty = 0.5 * l2 / n * sum(float(np.sum(w * w)) for w in weights)
    delta = ((_sigmoid(logits) - y) / n)[:, None]
    gw = [None] * len(weights)
    gb = [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta + (l2 / n) * weights[i]
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ weights[i].T) * (pres[i - 1] > 0)
    return float(data_loss + penalty), gw, gb


def _loss(weights, biases, X, y, l2) -> float:
    logits, _, _ = forward(weights, biases, X)
    n = X.shape[0]
    data = np.mean(np.maximum(logits, 0) - y * logits + np.log1p(np.exp(-np.abs(logits))))
    return float(data + 0.5 * l2 / n * sum(float(np.sum(w * w)) for w in weights))


def _init_params(dims: Sequence[int], rng: np.random.Generator):
    weights, biases = [], []
    for fan_in, fan_out in zip(dims, dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _validation_split(y: np.ndarray, fraction: float, rng: np.random.Generator):
    """Stratified index split; returns (train_idx, val_idx or None)."""
    idx = np.arange(len(y))
    if fraction <= 0:
        return idx, None
    val = []
    for cls in (0, 1):
        members = idx[y == cls]
        take = int(np.floor(fraction * len(members)))
        if take < 1 or len(members) - take < 1:
            return idx, None
        val.append(rng.permutation(members)[:take])
    val_idx = np.sort(np.concatenate(val))
    train_idx = np.setdiff1d(idx, val_idx)
    return train_idx, val_idx


# --- public API -----------------------------------------------------------------

def _as_matrix(features) -> np.ndarray:
    rows = [getattr(f, "features", f) for f in features]
    X = np.asarray(np.vstack(rows) if rows else np.zeros((0, 0)), dtype=np.float64)
    return X


def train(features, labels: Sequence[int], config: TrainConfig | None = None,
          embedding_fingerprint: str = "") -> ClassifierModel:
    """Fit a classifier; ``features`` are vectors or :class:`PairFeatures`."""
    config = config or TrainConfig()
    X = _as_matrix(features)
    y = np.asarray(labels, dtype=np.float64)
    if X.shape[0] != y.shape[0] or X.shape[0] < 2:
        raise TrainingError(f"need >= 2 examples with matching labels, got {X.shape[0]} / {y.shape[0]}")
    if set(np.unique(y)) != {0.0, 1.0}:
        raise TrainingError("training labels must contain both classes")

    mean = scale = None
    if config.standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        X = (X - mean) / scale

    rng = np.random.default_rng(config.seed)
    dims = [X.shape[1], *config.widths, 1]
    weights, biases = _init_params(dims, rng)
    train_idx, val_idx = _validation_split(y.astype(int), config.validation_fraction, rng)
    Xt, yt = X[train_idx], y[train_idx]

    params = weights + biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    step = 0
    best = np.inf
    best_params = [p.copy() for p in params]
    stall = 0
    history = []
    epochs_run = 0
    nl = len(weights)
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(train_idx))
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            _, gw, gb = loss_and_grads(weights, biases, Xt[batch], yt[batch], config.l2)
            step += 1
            lr_t = config.learning_rate * np.sqrt(1 - ADAM_BETA2 ** step) / (1 - ADAM_BETA1 ** step)
            for j, g in enumerate(gw + gb):
                m[j] = ADAM_BETA1 * m[j] + (1 - ADAM_BETA1) * g
                v[j] = ADAM_BETA2 * v[j] + (1 - ADAM_BETA2) * g * g
                params[j] -= lr_t * m[j] / (np.sqrt(v[j]) + ADAM_EPSILON)
        epochs_run = epoch + 1
        train_loss = _loss(weights, biases, Xt, yt, config.l2)
        monitor = train_loss if val_idx is None else _loss(weights, biases, X[val_idx], y[val_idx], config.l2)
        if not (np.isfinite(train_loss) and np.isfinite(monitor)):
            raise TrainingError(f"loss became NaN/inf at epoch {epoch}")
        history.append(train_loss)
        if monitor < best - config.early_stop_tolerance:
            best = monitor
            best_params = [p.copy() for p in params]
            stall = 0
        else:
            stall += 1
            if stall >= config.early_stop_patience:
                break

    weights = best_params[:nl]
    biases = best_params[nl:]
    metadata = {
        "config": config.to_dict(),
        "epochs_run": epochs_run,
        "final_loss": history[-1],
        "best_monitor_loss": float(best),
        "loss_history": history,
        "validation_size": 0 if val_idx is None else int(len(val_idx)),
        "optimizer": {"name": "adam", "beta1": ADAM_BETA1, "beta2": ADAM_BETA2, "epsilon": ADAM_EPSILON},
    }
    return ClassifierModel(weights, biases, config.composition, embedding_fingerprint,
                           metadata, mean, scale)


def predict_proba(model: ClassifierModel, X) -> np.ndarray:
    X = np.atleast_2d(_as_matrix(X) if not isinstance(X, np.ndarray) else np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.input_dim:
        raise ValueError(f"feature length {X.shape[1]} != model input {model.input_dim}")
    if model.mean is not None:
        X = (X - model.mean) / model.scale
    logits, _, _ = forward(model.weights, model.biases, X)
    return _sigmoid(logits)


def predict(model: ClassifierModel, features) -> tuple[int, float]:
    vec = np.asarray(getattr(features, "features", features), dtype=np.float64)
    if vec.ndim != 1:
        raise ValueError("predict takes a single feature vector")
    prob = float(predict_proba(model, vec[None, :])[0])
    return int(prob >= 0.5), prob


# --- serialization ----------------------------------------------------------------

def _arrays(model: ClassifierModel) -> list[tuple[str, np.ndarray]]:
    out = []
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        out += [(f"W{i}", w), (f"b{i}", b)]
    if model.mean is not None:
        out += [("mean", model.mean), ("scale", model.scale)]
    return out


def model_to_bytes(model: ClassifierModel) -> bytes:
    """``MAGIC | u16 version | u32 header length | JSON header | float64 LE payload``."""
    arrays = _arrays(model)
    header = {
        "format_version": FORMAT_VERSION,
        "composition": model.composition.value,
        "embedding_fingerprint": model.embedding_fingerprint,
        "metadata": model.metadata,
        "arrays": [[name, list(a.shape)] for name, a in arrays],
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    return MAGIC + struct.pack("<HI", FORMAT_VERSION, len(head)) + head + payload


def model_from_bytes(data: bytes) -> ClassifierModel:
    if not data.startswith(MAGIC):
        raise ValueError("not a model file")
    off = len(MAGIC)
    version, hlen = struct.unpack_from("<HI", data, off)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    off += struct.calcsize("<HI")
    header = json.loads(data[off:off + hlen].decode("utf-8"))
    off += hlen
    arrays = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape).astype(np.float64)
        off += 8 * count
    if off != len(data):
        raise ValueError("trailing bytes in model file")
    n_layers = sum(1 for name in arrays if name.startswith("W"))
    return ClassifierModel(
        [arrays[f"W{i}"] for i in range(n_layers)],
        [arrays[f"b{i}"] for i in range(n_layers)],
        Composition(header["composition"]),
        header["embedding_fingerprint"],
        header["metadata"],
        arrays.get("mean"),
        arrays.get("scale"),
    )


def save_model(model: ClassifierModel, path: str | Path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path: str | Path) -> ClassifierModel:
    return model_from_bytes(Path(path).read_bytes())


# --- experiments ------------------------------------------------------------------

def featurize(pairs: Sequence[TermPair], store: EmbeddingStore, composition: Composition | str):
    """Feature matrix, labels and kept pairs; pairs with a missing vector are dropped."""
    rows, labels, kept = [], [], []
    for p in pairs:
        pf = pair_features(store, p.x, p.y, composition)
        if pf is None:
            continue
        rows.append(pf.features)
        labels.append(p.label.as_int)
        kept.append(p)
    X = np.vstack(rows) if rows else np.zeros((0, 0))
    return X, np.asarray(labels, dtype=int), kept


def cross_validate(pairs: Sequence[TermPair], store: EmbeddingStore, config: TrainConfig,
                   folds: FoldPlan, dataset: str = "", embedding: str = "") -> EvalReport:
    """k-fold train/test with positive-class P/R/F1 per fold."""
    X, y, kept = featurize(pairs, store, config.composition)
    excluded = len(pairs) - len(kept)
    fold_ids = np.asarray([folds.fold_of(p) for p in kept], dtype=int)
    per_fold = []
    for i in range(folds.k):
        test = fold_ids == i
        ytr, yte = y[~test], y[test]
        if len(set(ytr.tolist())) < 2:
            raise TrainingError(f"fold {i}: training data is single-class")
        if len(set(yte.tolist())) < 2:
            raise TrainingError(f"fold {i}: test data is single-class")
        model = train(X[~test], ytr, config, store.fingerprint)
        preds = (predict_proba(model, X[test]) >= 0.5).astype(int)
        per_fold.append(prf(preds.tolist(), yte.tolist()))
    return EvalReport.from_folds(
        per_fold, excluded=excluded, dataset=dataset, embedding=embedding or store.fingerprint,
        composition=config.composition.value, algorithm=config.algorithm.value,
        fold_fingerprint=folds.fingerprint)


@dataclass(frozen=True)
class GridCell:
    dataset: str
    embedding: str
    composition: Composition
    algorithm: Algorithm


def run_grid(
    datasets: Mapping[str, Sequence[TermPair]],
    stores: Mapping[str, EmbeddingStore],
    compositions: Sequence[Composition | str],
    algorithms: Sequence[Algorithm | str],
    k: int = 5,
    seed: int = 42,
    base_config: TrainConfig | None = None,
    workers: int = 1,
    models_dir: str | Path | None = None,
) -> list[EvalReport]:
    """Cross-validate every dataset x embedding x composition x algorithm cell.

    All cells on one dataset share a single fold plan. A failing cell yields a
    report carrying the error instead of aborting the grid. When
    ``models_dir`` is given, each successful cell also trains on its full
    dataset and writes the model there.
    """
    base_config = base_config or TrainConfig(seed=seed)
    plans = {name: kfold_split(pairs, k, seed) for name, pairs in datasets.items()}
    cells = [GridCell(d, e, Composition(c), Algorithm(a))
             for d in datasets for e in stores for c in compositions for a in algorithms]

    def run(cell: GridCell) -> EvalReport:
        cfg = replace(base_config, composition=cell.composition, algorithm=cell.algorithm, seed=seed)
        try:
            report = cross_validate(datasets[cell.dataset], stores[cell.embedding], cfg,
                                    plans[cell.dataset], cell.dataset, cell.embedding)
            if models_dir is not None:
                X, y, _ = featurize(datasets[cell.dataset], stores[cell.embedding], cell.composition)
                model = train(X, y, cfg, stores[cell.embedding].fingerprint)
                path = Path(models_dir) / f"{cell.dataset}__{cell.embedding}__{cell.composition.value}__{cell.algorithm.value}.model"
                save_model(model, path)
            return report
        except Exception as exc:  # recorded per cell
            return EvalReport(dataset=cell.dataset, embedding=cell.embedding,
                              composition=cell.composition.value, algorithm=cell.algorithm.value,
                              k=k, fold_fingerprint=plans[cell.dataset].fingerprint,
                              error=f"{type(exc).__name__}: {exc}")

    if models_dir is not None:
        Path(models_dir).mkdir(parents=True, exist_ok=True)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, cells))
    else:
        reports = [run(c) for c in cells]
    order = {id(r): i for i, r in enumerate(reports)}
    return sorted(reports, key=lambda r: (not r.ok, -(r.mean_f1 if r.ok else 0.0), order[id(r)]))
