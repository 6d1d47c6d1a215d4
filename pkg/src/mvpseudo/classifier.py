"""Bimodal feature fusion and a seeded multinomial logistic regression.

The linear softmax model stands in for the deep bimodal classifier: it is
trained by mini-batch gradient descent with decoupled weight decay, and the
same data plus the same seed always yields bit-identical parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateTrainingSet,
    DimensionMismatch,
    InvalidInput,
    TrainingDiverged,
    UnknownClass,
)

__all__ = [
    "FUSION_MODES",
    "FusedFeature",
    "HyperParams",
    "LinearModel",
    "fuse",
    "fuse_rows",
    "softmax",
    "loss_and_grad",
    "train",
    "predict_proba",
    "unweighted_accuracy",
]

FUSION_MODES = ("early", "tensor")
INIT_SCALE = 0.01


@dataclass(frozen=True, eq=False)
class FusedFeature:
    vector: np.ndarray
    mode: str
    source_dims: tuple[int, int]


def _check_view(v, name) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise InvalidInput(f"{name} features are empty")
    if not np.all(np.isfinite(v)):
        raise InvalidInput(f"{name} features contain non-finite values")
    return v


def fuse_rows(audio: np.ndarray, text: np.ndarray, mode: str = "early") -> np.ndarray:
    """Row-wise fusion of an (n, d_a) audio matrix with an (n, d_t) text matrix."""
    audio = _check_view(audio, "audio")
    text = _check_view(text, "text")
    audio, text = np.atleast_2d(audio), np.atleast_2d(text)
    if audio.shape[0] != text.shape[0]:
        raise DimensionMismatch(f"{audio.shape[0]} audio rows vs {text.shape[0]} text rows")
    if mode == "early":
        return np.hstack([audio, text])
    if mode == "tensor":
        ones = np.ones((audio.shape[0], 1))
        a = np.hstack([ones, audio])
        t = np.hstack([ones, text])
        return (a[:, :, None] * t[:, None, :]).reshape(audio.shape[0], -1)
    raise InvalidInput(f"unknown fusion mode {mode!r}; expected one of {FUSION_MODES}")


def fuse(audio, text, mode: str = "early") -> FusedFeature:
    audio = _check_view(audio, "audio").reshape(-1)
    text = _check_view(text, "text").reshape(-1)
    vec = fuse_rows(audio[None, :], text[None, :], mode)[0]
    return FusedFeature(vec, mode, (audio.size, text.size))


@dataclass(frozen=True)
class HyperParams:
    learning_rate: float = 1e-4
    weight_decay: float = 1e-5
    epochs: int = 30
    batch_size: int = 64
    seed: int = 0

    def with_seed(self, seed: int) -> "HyperParams":
        return replace(self, seed=int(seed))


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray  # (classes, features)
    bias: np.ndarray
    classes: tuple[str, ...]
    hyperparams: HyperParams = field(default_factory=HyperParams)

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    def logits(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.feature_dim:
            raise DimensionMismatch(f"feature dim {x.shape[-1]} != model dim {self.feature_dim}")
        return x @ self.weights.T + self.bias

    def predict_proba(self, x) -> np.ndarray:
        return softmax(self.logits(x))

    def predict(self, x) -> list[str]:
        idx = np.argmax(self.predict_proba(np.atleast_2d(x)), axis=1)
        return [self.classes[i] for i in idx]


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_grad(weights, bias, x, y) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy of softmax(x W^T + b) against integer targets ``y``.

    Returns ``(loss, dL/dW, dL/db)``.
    """
    n = x.shape[0]
    z = x @ weights.T + bias
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(n), y]))
    p = np.exp(z - logsum[:, None])
    p[np.arange(n), y] -= 1.0
    p /= n
    return loss, p.T @ x, p.sum(axis=0)


def _encode(labels: Sequence[str], classes: Sequence[str]) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    try:
        return np.array([index[l] for l in labels], dtype=np.int64)
    except KeyError as exc:
        raise UnknownClass(f"label {exc.args[0]!r} not in {list(classes)}") from None


def train(
    features,
    labels: Sequence[str],
    classes: Sequence[str],
    hp: HyperParams = HyperParams(),
) -> LinearModel:
    """Fit a multinomial logistic regression with seeded mini-batch descent."""
    if len(features) and isinstance(features[0], FusedFeature):
        features = np.vstack([f.vector for f in features])
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise InvalidInput(f"expected a non-empty (n, d) feature matrix, got shape {x.shape}")
    if len(labels) != x.shape[0]:
        raise InvalidInput(f"{x.shape[0]} feature rows but {len(labels)} labels")
    classes = tuple(classes)
    y = _encode(labels, classes)
    absent = [c for i, c in enumerate(classes) if not np.any(y == i)]
    if absent:
        raise DegenerateTrainingSet(f"classes without training examples: {absent}")
    if hp.batch_size < 1 or hp.epochs < 0:
        raise InvalidInput("batch_size must be >= 1 and epochs >= 0")

    rng = np.random.default_rng(hp.seed)
    weights = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(len(classes), x.shape[1]))
    bias = np.zeros(len(classes))
    lr, decay = hp.learning_rate, hp.weight_decay
    n = x.shape[0]
    for _ in range(hp.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hp.batch_size):
            batch = order[start : start + hp.batch_size]
            # overflow is reported through the finiteness check below
            with np.errstate(over="ignore", invalid="ignore"):
                loss, g_w, g_b = loss_and_grad(weights, bias, x[batch], y[batch])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss}")
            weights = weights - lr * g_w - lr * decay * weights
            bias = bias - lr * g_b
    if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
        raise TrainingDiverged("parameters became non-finite")
    weights.setflags(write=False)
    bias.setflags(write=False)
    return LinearModel(weights, bias, classes, hp)


def predict_proba(model: LinearModel, f) -> np.ndarray:
    if isinstance(f, FusedFeature):
        f = f.vector
    return model.predict_proba(f)


def unweighted_accuracy(predicted: Sequence[str], truth: Sequence[str]) -> float:
    """Mean per-class recall over the classes present in ``truth``."""
    predicted, truth = list(predicted), list(truth)
    if len(predicted) != len(truth) or not truth:
        raise InvalidInput(f"need equal, non-zero lengths (got {len(predicted)} and {len(truth)})")
    hits: dict[str, int] = {}
    totals: dict[str, int] = {}
    for p, t in zip(predicted, truth):
        totals[t] = totals.get(t, 0) + 1
        hits[t] = hits.get(t, 0) + (p == t)
    return float(np.mean([hits[c] / totals[c] for c in totals]))
