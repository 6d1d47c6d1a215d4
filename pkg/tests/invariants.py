"""Shared checks for iteration histories, used by the engine and acceptance tests."""

import math
from dataclasses import replace

from mvpseudo.classifier import train
from mvpseudo.engine import TaskData
from mvpseudo.pipeline import benchmark_config, build_views, dataset_from_corpus, pseudo_label, select_seed
from mvpseudo.synth import SynthConfig, generate_corpus


class RecordingTrainer:
    """Wraps ``train`` and keeps every fitted model in call order."""

    def __init__(self, inner=train):
        self.inner = inner
        self.models = []
        self.sizes = []

    def __call__(self, x, labels, classes, hp):
        model = self.inner(x, labels, classes, hp)
        self.models.append(model)
        self.sizes.append(len(labels))
        return model


def check_proposed_run(result, partition, data, cfg, trainer):
    """Assert every Algorithm-1 invariant on a finished ``run_proposed`` result.

    ``trainer`` must be the :class:`RecordingTrainer` the run used.
    """
    history = result.history
    seed = set(partition.labeled_seed)
    initial_confident = set(partition.confident)
    pool = partition.pool
    budget = math.ceil(cfg.removal_fraction * len(initial_confident))

    assert 1 <= len(history) <= cfg.max_iterations
    assert [s.iteration for s in history] == list(range(1, len(history) + 1))
    assert len(trainer.models) == len(history)

    # patience: stop exactly when the counter reaches the limit
    for s in history[:-1]:
        assert s.no_improve_count < cfg.patience
    last = history[-1]
    assert last.no_improve_count == cfg.patience or last.iteration == cfg.max_iterations
    best = -1.0
    count = 0
    for s in history:
        if s.validation_ua > best:
            best, count = s.validation_ua, 0
        else:
            count += 1
        assert s.best_ua == best and s.no_improve_count == count

    removed_so_far = set()
    remaining_pool = len(initial_confident)
    previous_training = set(seed) | initial_confident
    for s, model, size in zip(history, trainer.models, trainer.sizes):
        training, unconfident, removed = set(s.training_ids), set(s.unconfident_ids), set(s.removed_ids)
        # the model of this iteration was trained on the previous state's set
        assert size == s.train_count == len(previous_training)
        # partition integrity
        assert not (training & unconfident) and not (training & removed) and not (unconfident & removed)
        assert training | unconfident | removed == pool
        # seed conservation
        assert seed <= training
        # removal budget
        assert removed <= initial_confident
        assert set(s.removed_now) == removed - removed_so_far
        stopping = s.no_improve_count >= cfg.patience
        want = 0 if stopping else min(budget, remaining_pool)
        assert len(s.removed_now) == want
        remaining_pool -= want
        removed_so_far = removed
        # promotion soundness
        if s.promoted:
            labels = model.predict(data.views.bimodal(list(s.promoted)))
            for item, label in zip(s.promoted, labels):
                rec = result.records[item]
                assert rec.matches(label)
                assert rec.model_label == label
        previous_training = training
    assert len(removed_so_far) <= len(initial_confident)
    assert result.best_iteration == max(
        range(1, len(history) + 1), key=lambda i: (history[i - 1].validation_ua, -i)
    )


def small_problem(seed, **overrides):
    """A quick synthetic corpus with pseudo-labels, ready for the engine."""
    base = SynthConfig(
        classes=3, encoders=2, frames_per_item=6, items_per_class=30, dims=4,
        class_separation=4.0, item_spread=1.5, seed=seed, label_rate=0.3,
    )
    corpus = generate_corpus(replace(base, **overrides))
    ds = dataset_from_corpus(corpus)
    cfg = benchmark_config(corpus)
    pl = pseudo_label(ds, select_seed(ds, corpus.config.label_rate, cfg.seed))
    data = TaskData(build_views(ds, ds.encoders[0], ds.encoders[-1]), ds.labels, ds.splits)
    return pl, data, cfg
