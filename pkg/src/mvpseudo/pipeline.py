"""End-to-end orchestration: dataset assembly, pseudo-labeling and runs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .acoustic import (
    FadScoreTable,
    assign_acoustic_label,
    average_over_encoders,
    build_class_references,
    ensure_two_rows,
    score_item,
)
from .classifier import HyperParams
from .config import RunConfig, default_threshold
from .consensus import ConfidencePartition, PseudoLabelRecord, build_records, partition_by_agreement
from .engine import STRATEGIES, EngineConfig, SslResult, Splits, TaskData, Views, derive_seed, run_strategy
from .errors import CoverageMismatch, InvalidSplit
from .formats import load_embeddings, read_labels, read_predictions, read_splits
from .gaussian import DEFAULT_RIDGE, EmbeddingSet
from .linguistic import PredictionSet, group_predictions, label_corpus
from .synth import BENCHMARK_HYPERPARAMS, SynthCorpus

log = logging.getLogger(__name__)

__all__ = [
    "Dataset",
    "PseudoLabels",
    "dataset_from_corpus",
    "load_dataset",
    "select_seed",
    "pseudo_label",
    "score_items",
    "build_views",
    "run_experiment",
    "run_from_config",
    "benchmark_config",
    "run_benchmark",
]

_SEED_STREAM = 3


@dataclass(frozen=True, eq=False)
class Dataset:
    classes: tuple[str, ...]
    encoders: tuple[str, ...]
    embeddings: Mapping[str, Mapping[str, EmbeddingSet]]  # encoder -> item -> frames
    labels: Mapping[str, str]
    predictions: Sequence[PredictionSet]
    splits: Splits


@dataclass(frozen=True, eq=False)
class PseudoLabels:
    acoustic: dict[str, str]
    linguistic: dict[str, str | None]
    partition: ConfidencePartition
    records: dict[str, PseudoLabelRecord]
    tables: dict[str, FadScoreTable] = field(repr=False)
    jittered: list[tuple[str, str]] = field(default_factory=list)

    def summary(self) -> dict:
        p = self.partition
        return {
            "seed": len(p.labeled_seed),
            "confident": len(p.confident),
            "unconfident": len(p.unconfident),
            "no_consensus": sum(v is None for v in self.linguistic.values()),
            "jittered": [list(x) for x in self.jittered],
        }


def _splits_from_map(split_of: Mapping[str, str]) -> Splits:
    return Splits(
        tuple(i for i, s in split_of.items() if s == "train"),
        tuple(i for i, s in split_of.items() if s == "validation"),
        tuple(i for i, s in split_of.items() if s == "test"),
    )


def dataset_from_corpus(corpus: SynthCorpus, encoders: Sequence[str] | None = None) -> Dataset:
    encoders = tuple(encoders or corpus.encoders)
    return Dataset(
        classes=corpus.classes,
        encoders=encoders,
        embeddings={
            e: {i: EmbeddingSet(v, (i,), e) for i, v in corpus.embeddings[e].items()}
            for e in corpus.encoders
        },
        labels=dict(corpus.labels),
        predictions=group_predictions(corpus.predictions),
        splits=_splits_from_map(corpus.splits),
    )


def load_dataset(cfg: RunConfig) -> Dataset:
    needed = dict.fromkeys([*cfg.encoders, cfg.audio_view, cfg.text_view])
    embeddings = {e: load_embeddings(cfg.path("embeddings", e), e) for e in needed}
    return Dataset(
        classes=cfg.classes,
        encoders=cfg.encoders,
        embeddings=embeddings,
        labels=read_labels(cfg.path("labels"), cfg.classes),
        predictions=group_predictions(read_predictions(cfg.path("predictions"))),
        splits=_splits_from_map(read_splits(cfg.path("splits"))),
    )


def select_seed(ds: Dataset, label_rate: float, seed: int) -> dict[str, str]:
    """Stratified ground-truth subset of the labeled training items.

    Takes ``round(label_rate * n_c)`` items from each class (at least one),
    returned in training-split order.
    """
    rng = np.random.default_rng(derive_seed(seed, 0, _SEED_STREAM))
    by_class: dict[str, list[str]] = {c: [] for c in ds.classes}
    for item in ds.splits.train:
        if item in ds.labels:
            by_class[ds.labels[item]].append(item)
    chosen: set[str] = set()
    for c, items in by_class.items():
        if not items:
            raise InvalidSplit(f"class {c!r} has no labeled training items")
        k = max(1, int(round(label_rate * len(items))))
        chosen.update(items[j] for j in rng.choice(len(items), size=k, replace=False))
    return {i: ds.labels[i] for i in ds.splits.train if i in chosen}


def _check_coverage(ds: Dataset, unlabeled: Sequence[str]) -> None:
    predicted = {p.item_id for p in ds.predictions}
    problems = []
    for enc in dict.fromkeys(ds.encoders):
        have = ds.embeddings.get(enc, {})
        absent = [i for i in unlabeled if i not in have]
        if absent:
            problems.append(f"{len(absent)} unlabeled item(s) missing from encoder {enc!r} (e.g. {absent[:3]})")
        stray = sorted(predicted - set(have))
        if stray:
            problems.append(f"{len(stray)} predicted item(s) have no {enc!r} embeddings (e.g. {stray[:3]})")
    unvoted = [i for i in unlabeled if i not in predicted]
    if unvoted:
        problems.append(f"{len(unvoted)} unlabeled item(s) have no predictions (e.g. {unvoted[:3]})")
    if problems:
        raise CoverageMismatch("; ".join(problems))


def score_items(
    ds: Dataset, seed_labels: Mapping[str, str], items: Sequence[str], ridge: float = DEFAULT_RIDGE
) -> tuple[dict[str, FadScoreTable], list[tuple[str, str]]]:
    """FAD score tables of ``items`` against class references built from the seed."""
    labeled: dict[str, dict[str, EmbeddingSet]] = {}
    for c in ds.classes:
        members = [i for i in seed_labels if seed_labels[i] == c]
        labeled[c] = {
            e: EmbeddingSet.concat([ds.embeddings[e][i] for i in members], e) for e in ds.encoders
        } if members else {}
    refs = build_class_references(labeled, ds.encoders, ridge)
    tables, jittered = {}, []
    for item in items:
        frames = {}
        for e in ds.encoders:
            frames[e], jit = ensure_two_rows(ds.embeddings[e][item], f"{e}/{item}")
            if jit:
                jittered.append((item, e))
        tables[item] = score_item(frames, refs, item, ridge)
    return tables, jittered


def pseudo_label(ds: Dataset, seed_labels: Mapping[str, str], ridge: float = DEFAULT_RIDGE) -> PseudoLabels:
    unlabeled = [i for i in ds.splits.train if i not in seed_labels]
    _check_coverage(ds, unlabeled)
    tables, jittered = score_items(ds, seed_labels, unlabeled, ridge)
    if jittered:
        log.info("duplicated %d single-vector embedding(s) with jitter", len(jittered))
    acoustic = {i: assign_acoustic_label(average_over_encoders(tables[i]), ds.classes) for i in unlabeled}
    votes = label_corpus(ds.predictions, ds.classes)
    linguistic = {i: votes[i] for i in unlabeled}
    partition = partition_by_agreement(acoustic, linguistic, seed_labels)
    records = build_records(acoustic, linguistic, partition)
    return PseudoLabels(acoustic, linguistic, partition, records, tables, jittered)


def build_views(ds: Dataset, audio_view: str, text_view: str, fusion: str = "early") -> Views:
    """Per-item frame means of two encoder views as the classifier's inputs."""
    def means(enc):
        return {i: x.vectors.astype(np.float64).mean(axis=0) for i, x in ds.embeddings[enc].items()}

    return Views(means(audio_view), means(text_view), fusion)


def run_experiment(
    ds: Dataset,
    engine_cfg: EngineConfig,
    strategy: str = "proposed",
    label_rate: float = 0.3,
    audio_view: str | None = None,
    text_view: str | None = None,
    fusion: str = "early",
    ridge: float = DEFAULT_RIDGE,
    pseudo: PseudoLabels | None = None,
) -> tuple[SslResult, PseudoLabels | None]:
    """Select the seed, pseudo-label (when the strategy needs it) and run."""
    seed_labels = select_seed(ds, label_rate, engine_cfg.seed)
    views = build_views(ds, audio_view or ds.encoders[0], text_view or ds.encoders[-1], fusion)
    data = TaskData(views, ds.labels, ds.splits)
    if strategy == "proposed":
        if pseudo is None:
            pseudo = pseudo_label(ds, seed_labels, ridge)
        partition, records = pseudo.partition, pseudo.records
    else:
        partition = ConfidencePartition(seed_labels, {}, ())
        records = {}
    return run_strategy(strategy, partition, records, data, engine_cfg), pseudo


def run_from_config(cfg: RunConfig, ds: Dataset | None = None) -> tuple[SslResult, PseudoLabels | None]:
    ds = ds or load_dataset(cfg)
    return run_experiment(
        ds,
        cfg.engine_config(),
        strategy=cfg.strategy,
        label_rate=cfg.label_rate,
        audio_view=cfg.audio_view,
        text_view=cfg.text_view,
        fusion=cfg.fusion,
        ridge=cfg.ridge,
    )


def benchmark_config(corpus: SynthCorpus, seed: int | None = None) -> EngineConfig:
    """Engine settings that ``mvpseudo synth`` writes next to a corpus."""
    return EngineConfig(
        classes=corpus.classes,
        hyperparams=HyperParams(**BENCHMARK_HYPERPARAMS),
        threshold=default_threshold(len(corpus.classes)),
        seed=corpus.config.seed if seed is None else seed,
    )


def run_benchmark(
    corpus: SynthCorpus,
    strategies: Sequence[str] = STRATEGIES,
    label_rate: float | None = None,
) -> dict[str, SslResult]:
    """Run several strategies on one corpus, sharing its pseudo-labels.

    Equivalent to calling ``mvpseudo train`` per strategy on the config that
    ``mvpseudo synth`` writes for ``corpus``.
    """
    ds = dataset_from_corpus(corpus)
    cfg = benchmark_config(corpus)
    rate = corpus.config.label_rate if label_rate is None else label_rate
    pseudo = pseudo_label(ds, select_seed(ds, rate, cfg.seed)) if "proposed" in strategies else None
    return {s: run_experiment(ds, cfg, s, rate, pseudo=pseudo)[0] for s in strategies}
