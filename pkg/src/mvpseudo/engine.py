"""Iterative semi-supervised training and the comparison strategies.

``run_proposed`` trains a bimodal classifier on the confident pool, then
repeatedly pseudo-labels the unconfident pool, admitting an item only when
the model's label matches its acoustic or linguistic pseudo-label. Each
iteration also evicts a fresh slice of the initial confident data, and the
classifier is re-initialised from a per-iteration seed. Iteration stops
after ``patience`` consecutive non-improving validation scores or at
``max_iterations``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .classifier import HyperParams, LinearModel, fuse_rows, train, unweighted_accuracy
from .consensus import ConfidencePartition, PseudoLabelRecord
from .errors import EmptyTrainingSet, InvalidSplit

__all__ = [
    "STRATEGIES",
    "EngineConfig",
    "Splits",
    "Views",
    "TaskData",
    "IterationState",
    "SslResult",
    "MergedModel",
    "ViewModel",
    "derive_seed",
    "merge_distributions",
    "select_confident",
    "predict_items",
    "run_proposed",
    "run_supervised",
    "run_decision_merging",
    "run_co_training",
    "run_strategy",
]

STRATEGIES = ("proposed", "supervised_full", "supervised_limited", "decision_merging", "co_training")

# independent random streams derived from one run seed
_TRAIN_STREAM = 0
_REMOVAL_STREAM = 1
_SECOND_VIEW_STREAM = 2

Trainer = Callable[..., LinearModel]


@dataclass(frozen=True)
class EngineConfig:
    classes: tuple[str, ...]
    hyperparams: HyperParams = field(default_factory=HyperParams)
    max_iterations: int = 40
    patience: int = 2
    removal_fraction: float = 0.2
    threshold: float = 0.5
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0.0 <= self.removal_fraction <= 1.0:
            raise ValueError("removal_fraction must lie in [0, 1]")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def derive_seed(seed: int, iteration: int, stream: int = _TRAIN_STREAM) -> int:
    """Deterministic 32-bit seed for (run seed, iteration, stream)."""
    state = np.random.SeedSequence([int(seed), int(stream), int(iteration)]).generate_state(1)
    return int(state[0])


@dataclass(frozen=True)
class Splits:
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]

    def __post_init__(self):
        for name in ("train", "validation", "test"):
            object.__setattr__(self, name, tuple(getattr(self, name)))


@dataclass(frozen=True, eq=False)
class Views:
    """Per-item audio-view and text-view feature vectors."""

    audio: Mapping[str, np.ndarray]
    text: Mapping[str, np.ndarray]
    fusion: str = "early"

    def audio_rows(self, ids: Sequence[str]) -> np.ndarray:
        return np.vstack([self.audio[i] for i in ids])

    def text_rows(self, ids: Sequence[str]) -> np.ndarray:
        return np.vstack([self.text[i] for i in ids])

    def bimodal(self, ids: Sequence[str]) -> np.ndarray:
        return fuse_rows(self.audio_rows(ids), self.text_rows(ids), self.fusion)

    def rows(self, view: str, ids: Sequence[str]) -> np.ndarray:
        if view == "audio":
            return self.audio_rows(ids)
        if view == "text":
            return self.text_rows(ids)
        return self.bimodal(ids)


@dataclass(frozen=True, eq=False)
class TaskData:
    views: Views
    labels: Mapping[str, str]  # ground truth wherever known
    splits: Splits

    def truth(self, ids: Sequence[str]) -> list[str]:
        return [self.labels[i] for i in ids]


@dataclass(frozen=True)
class IterationState:
    iteration: int
    train_count: int
    validation_ua: float
    best_ua: float
    no_improve_count: int
    training_ids: tuple[str, ...]
    unconfident_ids: tuple[str, ...]
    removed_ids: tuple[str, ...] = ()
    promoted: tuple[str, ...] = ()
    removed_now: tuple[str, ...] = ()
    view_training_ids: Mapping[str, tuple[str, ...]] | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        if self.view_training_ids is None:
            del d["view_training_ids"]
        else:
            d["view_training_ids"] = {k: list(v) for k, v in self.view_training_ids.items()}
        return d


@dataclass(frozen=True, eq=False)
class MergedModel:
    """Audio-only and text-only models whose distributions are averaged."""

    audio_model: LinearModel
    text_model: LinearModel


@dataclass(frozen=True, eq=False)
class ViewModel:
    model: LinearModel
    view: str


@dataclass(frozen=True, eq=False)
class SslResult:
    final_model: LinearModel | MergedModel | ViewModel
    history: tuple[IterationState, ...]
    final_test_ua: float
    strategy: str
    config_digest: str
    best_iteration: int = 1
    records: Mapping[str, PseudoLabelRecord] | None = None

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "config_digest": self.config_digest,
            "best_iteration": self.best_iteration,
            "final_test_ua": self.final_test_ua,
            "iterations": len(self.history),
            "history": [s.to_dict() for s in self.history],
        }


def merge_distributions(p_a: np.ndarray, p_b: np.ndarray) -> np.ndarray:
    return 0.5 * (np.asarray(p_a, dtype=np.float64) + np.asarray(p_b, dtype=np.float64))


def select_confident(
    probs: np.ndarray, classes: Sequence[str], threshold: float
) -> list[tuple[int, str]]:
    """Rows whose top probability reaches ``threshold``, with their argmax labels."""
    probs = np.atleast_2d(probs)
    top = probs.argmax(axis=1)
    return [
        (r, classes[top[r]]) for r in range(probs.shape[0]) if probs[r, top[r]] >= threshold
    ]


def predict_items(model, views: Views, ids: Sequence[str]) -> list[str]:
    if isinstance(model, MergedModel):
        p = merge_distributions(
            model.audio_model.predict_proba(views.audio_rows(ids)),
            model.text_model.predict_proba(views.text_rows(ids)),
        )
        return [model.audio_model.classes[k] for k in p.argmax(axis=1)]
    if isinstance(model, ViewModel):
        return model.model.predict(views.rows(model.view, ids))
    return model.predict(views.bimodal(ids))


def _score(model, data: TaskData, ids: Sequence[str]) -> float:
    return unweighted_accuracy(predict_items(model, data.views, ids), data.truth(ids))


def _check_splits(data: TaskData) -> None:
    for name in ("validation", "test"):
        ids = getattr(data.splits, name)
        if not ids:
            raise InvalidSplit(f"{name} split is empty")
        missing = [i for i in ids if i not in data.labels]
        if missing:
            raise InvalidSplit(f"{len(missing)} {name} item(s) lack ground truth, e.g. {missing[:3]}")


class _Patience:
    def __init__(self, patience: int):
        self.patience = patience
        self.best = -math.inf
        self.count = 0

    def update(self, score: float) -> bool:
        """Record a validation score; True when it strictly improved."""
        if score > self.best:
            self.best = score
            self.count = 0
            return True
        self.count += 1
        return False

    @property
    def exhausted(self) -> bool:
        return self.count >= self.patience


def _fit(trainer: Trainer, x, labels, cfg: EngineConfig, seed: int) -> LinearModel:
    return trainer(x, labels, cfg.classes, cfg.hyperparams.with_seed(seed))


def run_proposed(
    partition: ConfidencePartition,
    pseudo: Mapping[str, PseudoLabelRecord],
    data: TaskData,
    cfg: EngineConfig,
    trainer: Trainer = train,
) -> SslResult:
    _check_splits(data)
    views = data.views
    records = dict(pseudo)
    training: dict[str, str] = {**partition.labeled_seed, **partition.confident}
    unconfident = list(partition.unconfident)
    removal_pool = list(partition.confident)
    removal_size = math.ceil(cfg.removal_fraction * len(partition.confident))
    removed: list[str] = []
    val_ids = data.splits.validation

    tracker = _Patience(cfg.patience)
    best_model, best_iter = None, 0
    history = []
    for i in range(1, cfg.max_iterations + 1):
        if not training:
            raise EmptyTrainingSet(f"no training data at iteration {i}")
        ids = list(training)
        model = _fit(trainer, views.bimodal(ids), [training[k] for k in ids], cfg, derive_seed(cfg.seed, i))
        val_ua = _score(model, data, val_ids)
        if tracker.update(val_ua):
            best_model, best_iter = model, i

        promoted: list[str] = []
        removed_now: list[str] = []
        if not tracker.exhausted:
            if unconfident:
                still = []
                for item, label in zip(unconfident, model.predict(views.bimodal(unconfident))):
                    if records[item].matches(label):
                        records[item] = records[item].promote(label)
                        training[item] = label
                        promoted.append(item)
                    else:
                        still.append(item)
                unconfident = still
            k = min(removal_size, len(removal_pool))
            if k:
                rng = np.random.default_rng(derive_seed(cfg.seed, i, _REMOVAL_STREAM))
                picked = set(rng.choice(len(removal_pool), size=k, replace=False).tolist())
                removed_now = [x for j, x in enumerate(removal_pool) if j in picked]
                removal_pool = [x for j, x in enumerate(removal_pool) if j not in picked]
                for x in removed_now:
                    del training[x]
                removed.extend(removed_now)

        history.append(
            IterationState(
                iteration=i,
                train_count=len(ids),
                validation_ua=val_ua,
                best_ua=tracker.best,
                no_improve_count=tracker.count,
                training_ids=tuple(training),
                unconfident_ids=tuple(unconfident),
                removed_ids=tuple(removed),
                promoted=tuple(promoted),
                removed_now=tuple(removed_now),
            )
        )
        if tracker.exhausted:
            break

    return SslResult(
        final_model=best_model,
        history=tuple(history),
        final_test_ua=_score(best_model, data, data.splits.test),
        strategy="proposed",
        config_digest=cfg.digest(),
        best_iteration=best_iter,
        records=records,
    )


def run_supervised(
    mode: str,
    seed_labels: Mapping[str, str],
    data: TaskData,
    cfg: EngineConfig,
    trainer: Trainer = train,
) -> SslResult:
    """Single training pass on the labeled seed (``limited``) or on every
    ground-truth-labeled training item (``full``)."""
    _check_splits(data)
    if mode == "limited":
        labeled = dict(seed_labels)
    elif mode == "full":
        labeled = {i: data.labels[i] for i in data.splits.train if i in data.labels}
    else:
        raise ValueError(f"unknown supervised mode {mode!r}")
    if not labeled:
        raise EmptyTrainingSet(f"supervised_{mode}: no labeled training items")
    ids = list(labeled)
    model = _fit(trainer, data.views.bimodal(ids), [labeled[k] for k in ids], cfg, derive_seed(cfg.seed, 1))
    val_ua = _score(model, data, data.splits.validation)
    pool = [i for i in data.splits.train if i not in labeled]
    state = IterationState(1, len(ids), val_ua, val_ua, 0, tuple(ids), tuple(pool))
    return SslResult(
        model, (state,), _score(model, data, data.splits.test), f"supervised_{mode}", cfg.digest()
    )


def run_decision_merging(
    seed_labels: Mapping[str, str],
    data: TaskData,
    cfg: EngineConfig,
    trainer: Trainer = train,
) -> SslResult:
    _check_splits(data)
    views = data.views
    training = dict(seed_labels)
    pool = [i for i in data.splits.train if i not in training]
    tracker = _Patience(cfg.patience)
    best_model, best_iter = None, 0
    history = []
    for i in range(1, cfg.max_iterations + 1):
        if not training:
            raise EmptyTrainingSet(f"no training data at iteration {i}")
        ids = list(training)
        y = [training[k] for k in ids]
        model = MergedModel(
            _fit(trainer, views.audio_rows(ids), y, cfg, derive_seed(cfg.seed, i)),
            _fit(trainer, views.text_rows(ids), y, cfg, derive_seed(cfg.seed, i, _SECOND_VIEW_STREAM)),
        )
        val_ua = _score(model, data, data.splits.validation)
        if tracker.update(val_ua):
            best_model, best_iter = model, i
        admitted = []
        if not tracker.exhausted and pool:
            merged = merge_distributions(
                model.audio_model.predict_proba(views.audio_rows(pool)),
                model.text_model.predict_proba(views.text_rows(pool)),
            )
            chosen = dict(select_confident(merged, cfg.classes, cfg.threshold))
            for r, item in enumerate(pool):
                if r in chosen:
                    training[item] = chosen[r]
                    admitted.append(item)
            pool = [x for r, x in enumerate(pool) if r not in chosen]
        history.append(
            IterationState(
                i, len(ids), val_ua, tracker.best, tracker.count,
                tuple(training), tuple(pool), promoted=tuple(admitted),
            )
        )
        if tracker.exhausted:
            break
    return SslResult(
        best_model, tuple(history), _score(best_model, data, data.splits.test),
        "decision_merging", cfg.digest(), best_iter,
    )


def run_co_training(
    seed_labels: Mapping[str, str],
    data: TaskData,
    cfg: EngineConfig,
    trainer: Trainer = train,
) -> SslResult:
    """Two single-view models; each one's confident predictions extend the
    other's training set. The better model on validation is reported."""
    _check_splits(data)
    views = data.views
    sets = {"audio": dict(seed_labels), "text": dict(seed_labels)}
    other = {"audio": "text", "text": "audio"}
    streams = {"audio": _TRAIN_STREAM, "text": _SECOND_VIEW_STREAM}
    candidates = [i for i in data.splits.train if i not in seed_labels]
    tracker = _Patience(cfg.patience)
    best_model, best_iter = None, 0
    history = []
    for i in range(1, cfg.max_iterations + 1):
        models = {}
        for view, labeled in sets.items():
            if not labeled:
                raise EmptyTrainingSet(f"{view} view has no training data at iteration {i}")
            ids = list(labeled)
            seed = derive_seed(cfg.seed, i, streams[view])
            models[view] = ViewModel(
                _fit(trainer, views.rows(view, ids), [labeled[k] for k in ids], cfg, seed), view
            )
        scores = {v: _score(m, data, data.splits.validation) for v, m in models.items()}
        leader = max(scores, key=lambda v: (scores[v], v == "audio"))
        if tracker.update(scores[leader]):
            best_model, best_iter = models[leader], i
        admitted: list[str] = []
        if not tracker.exhausted:
            additions = {}
            for view, vm in models.items():
                target = other[view]
                pool = [x for x in candidates if x not in sets[target]]
                if not pool:
                    additions[target] = {}
                    continue
                probs = vm.model.predict_proba(views.rows(view, pool))
                additions[target] = {pool[r]: lab for r, lab in select_confident(probs, cfg.classes, cfg.threshold)}
            for target, new in additions.items():
                sets[target].update(new)
                admitted.extend(x for x in new if x not in admitted)
        union = list(dict.fromkeys([*sets["audio"], *sets["text"]]))
        in_union = set(union)
        history.append(
            IterationState(
                i, len(sets["audio"]) + len(sets["text"]), scores[leader], tracker.best, tracker.count,
                tuple(union), tuple(x for x in candidates if x not in in_union),
                promoted=tuple(admitted),
                view_training_ids={v: tuple(s) for v, s in sets.items()},
            )
        )
        if tracker.exhausted:
            break
    return SslResult(
        best_model, tuple(history), _score(best_model, data, data.splits.test),
        "co_training", cfg.digest(), best_iter,
    )


def run_strategy(
    strategy: str,
    partition: ConfidencePartition,
    pseudo: Mapping[str, PseudoLabelRecord],
    data: TaskData,
    cfg: EngineConfig,
    trainer: Trainer = train,
) -> SslResult:
    seed = partition.labeled_seed
    if strategy == "proposed":
        return run_proposed(partition, pseudo, data, cfg, trainer)
    if strategy == "supervised_full":
        return run_supervised("full", seed, data, cfg, trainer)
    if strategy == "supervised_limited":
        return run_supervised("limited", seed, data, cfg, trainer)
    if strategy == "decision_merging":
        return run_decision_merging(seed, data, cfg, trainer)
    if strategy == "co_training":
        return run_co_training(seed, data, cfg, trainer)
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
