"""Seeded synthetic multi-view corpora with known generator parameters.

Every encoder view places the class centers on a scaled simplex so that any
two centers sit exactly ``class_separation`` apart. An item draws its own
latent mean around its class center (``item_spread``), and its frames
scatter around that latent with unit covariance. Linguistic predictors vote
for the true class with probability ``predictor_accuracy`` and otherwise pick
a wrong class uniformly.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from .errors import InvalidConfig

__all__ = [
    "BENCHMARK_HYPERPARAMS",
    "SynthConfig",
    "SynthCorpus",
    "generate_corpus",
    "oracle_frechet",
    "vote_outcome_probabilities",
    "class_names",
    "encoder_names",
]

SPLIT_FRACTIONS = (0.8, 0.1, 0.1)

# Classifier settings used with synthetic corpora. The learning rate is raised
# from the library default (1e-4) because plain mini-batch descent on a linear
# head needs a larger step than AdamW fine-tuning of a deep encoder.
BENCHMARK_HYPERPARAMS = {"learning_rate": 0.01, "weight_decay": 1e-5, "epochs": 30, "batch_size": 64}


def class_names(k: int) -> tuple[str, ...]:
    return tuple(f"c{i}" for i in range(k))


def encoder_names(k: int) -> tuple[str, ...]:
    return tuple(f"enc{i}" for i in range(k))


@dataclass(frozen=True)
class SynthConfig:
    classes: int = 4
    encoders: int = 4
    frames_per_item: int = 40
    items_per_class: int = 200
    dims: int = 16
    class_separation: float = 6.0
    predictor_count: int = 3
    predictor_accuracy: float = 0.8
    label_rate: float = 0.3
    seed: int = 42
    item_spread: float = 3.0
    frame_noise: float = 1.0

    def validate(self) -> None:
        counts = ("classes", "encoders", "frames_per_item", "items_per_class", "dims", "predictor_count")
        for name in counts:
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be positive")
        if self.classes < 2:
            raise InvalidConfig("need at least 2 classes")
        if self.frames_per_item < 2:
            raise InvalidConfig("frames_per_item must be >= 2")
        if not 0.0 < self.predictor_accuracy <= 1.0:
            raise InvalidConfig("predictor_accuracy must lie in (0, 1]")
        if not 0.0 < self.label_rate <= 1.0:
            raise InvalidConfig("label_rate must lie in (0, 1]")
        if self.class_separation < 0 or self.item_spread < 0 or self.frame_noise <= 0:
            raise InvalidConfig("separation and spreads must be non-negative, frame_noise positive")
        n_val, n_test = _split_sizes(self.items_per_class)
        n_train = self.items_per_class - n_val - n_test
        if n_val < 1 or n_test < 1 or n_train < 1:
            raise InvalidConfig(
                f"{self.items_per_class} items per class cannot fill an 80/10/10 split"
            )
        if round(self.label_rate * n_train) < 1:
            raise InvalidConfig("label_rate leaves a class without labeled training items")

    def to_dict(self) -> dict:
        return asdict(self)


def _split_sizes(n: int) -> tuple[int, int]:
    return int(round(SPLIT_FRACTIONS[1] * n)), int(round(SPLIT_FRACTIONS[2] * n))


@dataclass(frozen=True, eq=False)
class SynthCorpus:
    config: SynthConfig
    classes: tuple[str, ...]
    encoders: tuple[str, ...]
    embeddings: dict[str, dict[str, np.ndarray]]  # encoder -> item -> (frames, dims) float32
    labels: dict[str, str]
    predictions: list[tuple[str, str, str]]  # (item_id, predictor_id, label)
    splits: dict[str, str]  # item -> train / validation / test
    centers: dict[str, np.ndarray] = field(repr=False)  # encoder -> (classes, dims)

    def class_gaussian(self, label: str, encoder: str) -> tuple[np.ndarray, np.ndarray]:
        """True mean and covariance of a class's pooled frames under one encoder."""
        c = self.classes.index(label)
        var = self.config.item_spread**2 + self.config.frame_noise**2
        return self.centers[encoder][c].copy(), var * np.eye(self.config.dims)

    def split_ids(self, name: str) -> list[str]:
        return [i for i, s in self.splits.items() if s == name]


def _centers(rng: np.random.Generator, k: int, dims: int, sep: float) -> np.ndarray:
    out = np.zeros((k, dims))
    if dims >= k:
        axes = rng.permutation(dims)[:k]
        out[np.arange(k), axes] = sep / np.sqrt(2.0)
    else:
        # collinear fallback; neighbours stay ``sep`` apart
        direction = rng.normal(size=dims)
        direction /= np.linalg.norm(direction)
        out[:] = np.arange(k)[:, None] * sep * direction[None, :]
    return out


def generate_corpus(cfg: SynthConfig = SynthConfig()) -> SynthCorpus:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    classes = class_names(cfg.classes)
    encoders = encoder_names(cfg.encoders)
    k, n = cfg.classes, cfg.items_per_class
    total = k * n

    perm = rng.permutation(total)
    ids = [f"utt{perm[g]:05d}" for g in range(total)]
    truth = [classes[g // n] for g in range(total)]

    centers = {e: _centers(rng, k, cfg.dims, cfg.class_separation) for e in encoders}
    embeddings: dict[str, dict[str, np.ndarray]] = {}
    for e in encoders:
        latents = centers[e][np.repeat(np.arange(k), n)] + cfg.item_spread * rng.normal(size=(total, cfg.dims))
        frames = latents[:, None, :] + cfg.frame_noise * rng.normal(size=(total, cfg.frames_per_item, cfg.dims))
        frames = frames.astype(np.float32)
        embeddings[e] = {ids[g]: frames[g] for g in range(total)}

    predictors = [f"p{j}" for j in range(cfg.predictor_count)]
    correct = rng.random((total, cfg.predictor_count)) < cfg.predictor_accuracy
    wrong_pick = rng.integers(0, k - 1, size=(total, cfg.predictor_count))
    predictions = []
    for g in range(total):
        t = g // n
        for j, p in enumerate(predictors):
            if correct[g, j]:
                lab = t
            else:
                lab = wrong_pick[g, j] + (wrong_pick[g, j] >= t)
            predictions.append((ids[g], p, classes[lab]))

    splits: dict[str, str] = {}
    n_val, n_test = _split_sizes(n)
    for c in range(k):
        order = rng.permutation(n) + c * n
        for rank, g in enumerate(order):
            if rank < n_val:
                splits[ids[g]] = "validation"
            elif rank < n_val + n_test:
                splits[ids[g]] = "test"
            else:
                splits[ids[g]] = "train"

    by_id = sorted(range(total), key=lambda g: ids[g])
    sorted_ids = [ids[g] for g in by_id]
    return SynthCorpus(
        config=cfg,
        classes=classes,
        encoders=encoders,
        embeddings={e: {i: embeddings[e][i] for i in sorted_ids} for e in encoders},
        labels={ids[g]: truth[g] for g in by_id},
        predictions=sorted(predictions),
        splits={i: splits[i] for i in sorted_ids},
        centers=centers,
    )


def oracle_frechet(mu_a, cov_a, mu_b, cov_b) -> float:
    """Closed-form Frechet distance between two known Gaussians.

    Evaluated with a general (non-symmetric) matrix square root of
    ``cov_a @ cov_b``, independently of the package's eigh-based route.
    """
    mu_a, mu_b = np.atleast_1d(np.asarray(mu_a, float)), np.atleast_1d(np.asarray(mu_b, float))
    cov_a, cov_b = np.atleast_2d(np.asarray(cov_a, float)), np.atleast_2d(np.asarray(cov_b, float))
    cross = scipy.linalg.sqrtm(cov_a @ cov_b)
    diff = mu_a - mu_b
    return float(np.real(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(cross)))


def vote_outcome_probabilities(classes: int, predictors: int, accuracy: float) -> dict[str, float]:
    """Enumerate every vote tuple to get the distribution of strict-majority outcomes.

    The true class is taken as index 0. Returns probabilities of the outcome
    being the true class, one *specific* wrong class, and no consensus.
    """
    wrong = (1.0 - accuracy) / (classes - 1)
    out = {"true": 0.0, "specific_wrong": 0.0, "no_consensus": 0.0}
    for votes in itertools.product(range(classes), repeat=predictors):
        prob = 1.0
        for v in votes:
            prob *= accuracy if v == 0 else wrong
        counts = [votes.count(c) for c in range(classes)]
        top = max(counts)
        if counts.count(top) > 1:
            out["no_consensus"] += prob
        elif counts[0] == top:
            out["true"] += prob
        elif counts[1] == top:
            out["specific_wrong"] += prob
    return out
