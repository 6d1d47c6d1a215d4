"""Acoustic pseudo-labels from multi-encoder Frechet audio distance scores.

Each labeled class is summarised per encoder by a single Gaussian fitted to
the pooled frames of all its labeled items. An unlabeled item is scored
against every class under every encoder; the per-encoder scores are averaged
per class and the class with the smallest average becomes the item's
acoustic pseudo-label. Scores from different encoders live on different
scales, so they are only ever averaged within a class column.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import IncompleteReference, InsufficientSamples, MvPseudoError, NoClasses, ScoringError
from .gaussian import DEFAULT_RIDGE, EmbeddingSet, GaussianSummary, estimate_gaussian, frechet_distance

__all__ = [
    "ClassReference",
    "FadScoreTable",
    "build_class_references",
    "score_item",
    "average_over_encoders",
    "assign_acoustic_label",
    "ensure_two_rows",
    "JITTER_STD",
]

JITTER_STD = 1e-6


@dataclass(frozen=True, eq=False)
class ClassReference:
    class_label: str
    per_encoder_summary: Mapping[str, GaussianSummary]


@dataclass(frozen=True, eq=False)
class FadScoreTable:
    """Encoders x classes matrix of Frechet distances for one item."""

    item_id: str
    encoders: tuple[str, ...]
    classes: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        scores = np.array(self.scores, dtype=np.float64)
        if scores.shape != (len(self.encoders), len(self.classes)):
            raise ValueError(
                f"score shape {scores.shape} != ({len(self.encoders)}, {len(self.classes)})"
            )
        if not np.all(np.isfinite(scores)) or np.any(scores < 0):
            raise ValueError("FAD scores must be finite and non-negative")
        scores.setflags(write=False)
        object.__setattr__(self, "encoders", tuple(self.encoders))
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "scores", scores)

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "encoders": list(self.encoders),
            "classes": list(self.classes),
            "scores": self.scores.tolist(),
        }


def build_class_references(
    labeled: Mapping[str, Mapping[str, EmbeddingSet]],
    encoders: Sequence[str] | None = None,
    ridge: float = DEFAULT_RIDGE,
) -> list[ClassReference]:
    """Fit one Gaussian per (class, encoder) from pooled labeled frames.

    ``labeled`` maps class -> encoder -> pooled embeddings of that class.
    When ``encoders`` is omitted, every encoder seen under any class is
    required for all classes.
    """
    if encoders is None:
        seen: dict[str, None] = {}
        for per_enc in labeled.values():
            seen.update(dict.fromkeys(per_enc))
        encoders = list(seen)
    refs = []
    for label, per_enc in labeled.items():
        missing = [e for e in encoders if e not in per_enc]
        if missing:
            raise IncompleteReference(f"class {label!r} has no embeddings for encoders {missing}")
        summaries = {}
        for enc in encoders:
            x = per_enc[enc]
            if x.n < 2:
                raise InsufficientSamples(
                    f"class {label!r} encoder {enc!r}: {x.n} row(s), need at least 2"
                )
            summaries[enc] = estimate_gaussian(x, ridge)
        refs.append(ClassReference(label, summaries))
    return refs


def score_item(
    item: Mapping[str, EmbeddingSet],
    refs: Sequence[ClassReference],
    item_id: str = "",
    ridge: float = DEFAULT_RIDGE,
) -> FadScoreTable:
    if not refs:
        raise NoClasses("no class references to score against")
    encoders = tuple(refs[0].per_encoder_summary)
    classes = tuple(r.class_label for r in refs)
    missing = [e for e in encoders if e not in item]
    if missing:
        raise IncompleteReference(f"item {item_id!r} lacks embeddings for encoders {missing}")
    scores = np.empty((len(encoders), len(classes)))
    for i, enc in enumerate(encoders):
        try:
            g_item = estimate_gaussian(item[enc], ridge)
        except MvPseudoError as exc:
            raise ScoringError(enc, None, exc) from exc
        for j, ref in enumerate(refs):
            try:
                scores[i, j] = frechet_distance(g_item, ref.per_encoder_summary[enc])
            except MvPseudoError as exc:
                raise ScoringError(enc, ref.class_label, exc) from exc
    return FadScoreTable(item_id, encoders, classes, scores)


def average_over_encoders(table: FadScoreTable) -> dict[str, float]:
    means = table.scores.mean(axis=0)
    return {c: float(m) for c, m in zip(table.classes, means)}


def assign_acoustic_label(averages: Mapping[str, float], order: Sequence[str] | None = None) -> str:
    """Return the class with the smallest averaged score.

    Ties go to whichever class comes first in ``order`` (default: the
    mapping's own iteration order).
    """
    if not averages:
        raise NoClasses("cannot assign a label without classes")
    if order is None:
        order = list(averages)
    best, best_score = None, np.inf
    for c in order:
        if c in averages and averages[c] < best_score:
            best, best_score = c, averages[c]
    if best is None:
        raise NoClasses("no class in the ordering has a score")
    return best


def ensure_two_rows(x: EmbeddingSet, key: str = "") -> tuple[EmbeddingSet, bool]:
    """Duplicate a single-vector embedding with tiny Gaussian jitter.

    Returns the (possibly expanded) set and whether jitter was applied. The
    jitter is seeded from ``key`` so repeated runs agree exactly.
    """
    if x.n >= 2:
        return x, False
    rng = np.random.default_rng(zlib.crc32(key.encode("utf-8")))
    row = x.vectors.astype(np.float64)
    extra = row + rng.normal(0.0, JITTER_STD, size=row.shape)
    return EmbeddingSet(np.vstack([row, extra]), x.items, x.encoder_id), True
