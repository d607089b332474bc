"""Linear + softmax readout trained with cross-entropy."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, DivergenceError, EvaluationError, TrainingError

log = logging.getLogger(__name__)

N_CLASSES = 10
MODEL_FORMAT = "oscres-readout/1"
CHUNK_ELEMENTS = 1 << 24  # float64 elements per chunk when scanning a feature matrix


def _chunk_rows(n_features: int, chunk: int | None) -> int:
    return chunk or max(1, CHUNK_ELEMENTS // max(1, n_features))


def featurize(snap, n_neurons: int | None = None, n_snap: int | None = None) -> np.ndarray:
    """Row-major flatten of a (N, n_snap) snapshot matrix, or of a (B, N, n_snap) stack."""
    Y = getattr(snap, "Y", snap)
    Y = np.asarray(Y)
    if Y.ndim not in (2, 3):
        raise DimensionError(f"expected 2-D or 3-D snapshots, got shape {Y.shape}")
    if n_neurons is not None and Y.shape[-2] != n_neurons:
        raise DimensionError(f"snapshot has {Y.shape[-2]} neurons, expected {n_neurons}")
    if n_snap is not None and Y.shape[-1] != n_snap:
        raise DimensionError(f"snapshot has {Y.shape[-1]} columns, expected {n_snap}")
    return Y.reshape(*Y.shape[:-2], -1)


def unflatten(features: np.ndarray, n_neurons: int, n_snap: int) -> np.ndarray:
    features = np.asarray(features)
    if features.shape[-1] != n_neurons * n_snap:
        raise DimensionError(f"{features.shape[-1]} features != {n_neurons} x {n_snap}")
    return features.reshape(*features.shape[:-1], n_neurons, n_snap)


class PackedRows:
    """Row-indexable 0/1 feature matrix stored 8 columns per byte.

    Indexing returns unpacked uint8 rows, so training and evaluation can read
    mini-batches without ever holding the dense matrix.
    """

    ndim = 2

    def __init__(self, packed: np.ndarray, n_cols: int):
        packed = np.asarray(packed, dtype=np.uint8)
        if packed.ndim != 2 or packed.shape[1] != (n_cols + 7) // 8:
            raise DimensionError(f"packed shape {packed.shape} does not hold {n_cols} columns")
        self.packed = packed
        self.n_cols = n_cols

    @classmethod
    def from_dense(cls, X) -> "PackedRows":
        X = np.asarray(X)
        return cls(np.packbits(X.astype(bool), axis=1), X.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.packed.shape[0], self.n_cols)

    def __len__(self) -> int:
        return self.packed.shape[0]

    def __getitem__(self, idx) -> np.ndarray:
        return np.unpackbits(self.packed[idx], axis=-1, count=self.n_cols)


def _as_matrix(X):
    return X if isinstance(X, PackedRows) else np.asarray(X)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class TrainConfig:
    """Mini-batch training settings.

    ``optimizer="sgd"`` (default) is plain gradient descent with step
    ``learning_rate``; ``"adam"`` rescales steps per coordinate, which fits
    faster but generalizes worse on wide reservoir features. With ``center``
    the optimizer works on mean-shifted features and folds the shift back into
    the bias afterwards, so the returned model is still linear in the raw
    features. Without centering, 0/1 features make plain steps of 0.05 diverge.
    """

    learning_rate: float = 0.05
    epochs: int = 30
    batch_size: int = 128
    l2: float = 1e-4
    seed: int = 0
    optimizer: str = "sgd"
    center: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class ReadoutModel:
    weights: np.ndarray  # (10, F)
    bias: np.ndarray  # (10,)
    trained: bool = False
    history: list = field(default_factory=list)

    @classmethod
    def zeros(cls, n_features: int, n_classes: int = N_CLASSES) -> "ReadoutModel":
        return cls(np.zeros((n_classes, n_features)), np.zeros(n_classes))

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def logits(self, features: np.ndarray) -> np.ndarray:
        X = np.asarray(features, dtype=np.float64)
        if X.shape[-1] != self.n_features:
            raise DimensionError(f"{X.shape[-1]} features, model expects {self.n_features}")
        return X @ self.weights.T + self.bias

    def save(self, path) -> None:
        """Writes ``<path>.json`` (metadata) and ``<path>.npy`` (float64 weight blob).

        The blob is the (10, F) weight matrix followed by the 10 biases as one
        extra column, i.e. shape (10, F + 1).
        """
        path = Path(path)
        blob = np.concatenate([self.weights, self.bias[:, None]], axis=1)
        np.save(path.with_suffix(".npy"), blob)
        meta = {
            "format": MODEL_FORMAT,
            "n_classes": int(self.weights.shape[0]),
            "n_features": int(self.n_features),
            "trained": self.trained,
            "blob": path.with_suffix(".npy").name,
            "history": self.history,
        }
        path.with_suffix(".json").write_text(json.dumps(meta, indent=1))

    @classmethod
    def load(cls, path) -> "ReadoutModel":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        if meta.get("format") != MODEL_FORMAT:
            raise ConfigError(f"unknown model format {meta.get('format')!r}")
        blob = np.load(path.with_name(meta["blob"]))
        if blob.shape != (meta["n_classes"], meta["n_features"] + 1):
            raise DimensionError(f"weight blob shape {blob.shape} does not match metadata")
        return cls(blob[:, :-1].copy(), blob[:, -1].copy(), meta["trained"], meta.get("history", []))


def predict(model: ReadoutModel, features: np.ndarray) -> np.ndarray:
    return softmax(model.logits(features))


def loss_and_grad(weights, bias, X, y, l2):
    """Mean cross-entropy plus ``l2/2 * ||weights||^2`` and its gradients."""
    logits = X @ weights.T + bias
    z = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    n = X.shape[0]
    loss = float(np.mean(logsumexp - z[np.arange(n), y])) + 0.5 * l2 * float(np.sum(weights**2))
    p = np.exp(z - logsumexp[:, None])
    p[np.arange(n), y] -= 1.0
    p /= n
    return loss, p.T @ X + l2 * weights, p.sum(axis=0)


def _check_xy(X, y):
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.intp)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DimensionError(f"features {X.shape} and labels {y.shape} do not line up")
    return X, y


def train(X, y, config: TrainConfig = TrainConfig(), n_classes: int = N_CLASSES) -> ReadoutModel:
    """Minimize regularized cross-entropy by mini-batch descent.

    Batches are drawn from a seeded shuffle each epoch, so results are
    deterministic for a given seed. The recorded history holds the full
    training-set objective after each epoch.
    """
    X, y = _check_xy(X, y)
    if X.shape[0] == 0:
        raise TrainingError("empty training set")
    if y.min() < 0 or y.max() >= n_classes:
        raise TrainingError(f"labels must lie in [0, {n_classes})")
    rng = np.random.default_rng(config.seed)
    n, F = X.shape
    mu = _column_mean(X) if config.center else np.zeros(F)
    W = np.zeros((n_classes, F))
    b = np.zeros(n_classes)
    lr = config.learning_rate
    adam = config.optimizer == "adam"
    if adam:
        mW, vW = np.zeros_like(W), np.zeros_like(W)
        mb, vb = np.zeros_like(b), np.zeros_like(b)
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        t = 0
    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for i in range(0, n, config.batch_size):
            idx = np.sort(order[i : i + config.batch_size])
            Xb = np.asarray(X[idx], dtype=np.float64) - mu
            _, gW, gb = loss_and_grad(W, b, Xb, y[idx], config.l2)
            if adam:
                t += 1
                mW = beta1 * mW + (1 - beta1) * gW
                vW = beta2 * vW + (1 - beta2) * gW**2
                mb = beta1 * mb + (1 - beta1) * gb
                vb = beta2 * vb + (1 - beta2) * gb**2
                c1, c2 = 1 - beta1**t, 1 - beta2**t
                W -= lr * (mW / c1) / (np.sqrt(vW / c2) + eps)
                b -= lr * (mb / c1) / (np.sqrt(vb / c2) + eps)
            else:
                W -= lr * gW
                b -= lr * gb
        loss = _full_loss(W, b - W @ mu, X, y, config.l2)
        if not np.isfinite(loss):
            raise DivergenceError(epoch, loss)
        history.append(loss)
        log.debug("epoch %d loss %.6f", epoch, loss)
    return ReadoutModel(W, b - W @ mu, trained=True, history=history)


def _column_mean(X, chunk=None):
    chunk = _chunk_rows(X.shape[1], chunk)
    total = np.zeros(X.shape[1])
    for i in range(0, X.shape[0], chunk):
        total += np.asarray(X[i : i + chunk], dtype=np.float64).sum(axis=0)
    return total / X.shape[0]


def _full_loss(W, b, X, y, l2, chunk=None):
    chunk = _chunk_rows(X.shape[1], chunk)
    total = 0.0
    # a diverged model yields inf/nan here, which the caller reports
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(0, X.shape[0], chunk):
            Xc = np.asarray(X[i : i + chunk], dtype=np.float64)
            logits = Xc @ W.T + b
            z = logits - logits.max(axis=1, keepdims=True)
            lse = np.log(np.exp(z).sum(axis=1))
            total += float(np.sum(lse - z[np.arange(len(Xc)), y[i : i + chunk]]))
        return total / X.shape[0] + 0.5 * l2 * float(np.sum(W**2))


def predict_labels(model: ReadoutModel, X, chunk: int | None = None) -> np.ndarray:
    """Argmax class per row; ties go to the lowest class index."""
    X = _as_matrix(X)
    chunk = _chunk_rows(X.shape[-1], chunk)
    out = [np.argmax(model.logits(X[i : i + chunk]), axis=1) for i in range(0, X.shape[0], chunk)]
    return np.concatenate(out) if out else np.zeros(0, dtype=np.intp)


def evaluate(model: ReadoutModel, X, y) -> float:
    X, y = _check_xy(X, y)
    if X.shape[0] == 0:
        raise EvaluationError("cannot evaluate on an empty set")
    return float(np.mean(predict_labels(model, X) == y))


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
