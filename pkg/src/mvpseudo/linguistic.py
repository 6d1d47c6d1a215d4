"""Linguistic pseudo-labels: strict majority vote over external predictors."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Collection, Iterable, Mapping

from .errors import DuplicateItem, InvalidInput, UnknownClass

__all__ = ["PredictionSet", "majority_vote", "label_corpus", "group_predictions"]


@dataclass(frozen=True)
class PredictionSet:
    item_id: str
    votes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.votes:
            raise InvalidInput(f"item {self.item_id!r} has no predictor votes")
        object.__setattr__(self, "votes", dict(self.votes))

    @property
    def predictor_count(self) -> int:
        return len(self.votes)


def majority_vote(p: PredictionSet, classes: Collection[str] | None = None) -> str | None:
    """Label with strictly the most votes, or ``None`` when the top count is shared."""
    if classes is not None:
        unknown = sorted({v for v in p.votes.values() if v not in classes})
        if unknown:
            raise UnknownClass(f"item {p.item_id!r}: unknown labels {unknown}")
    ranked = Counter(p.votes.values()).most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return None
    return ranked[0][0]


def label_corpus(
    predictions: Iterable[PredictionSet], classes: Collection[str] | None = None
) -> dict[str, str | None]:
    out: dict[str, str | None] = {}
    for p in predictions:
        if p.item_id in out:
            raise DuplicateItem(f"item {p.item_id!r} appears more than once")
        out[p.item_id] = majority_vote(p, classes)
    return out


def group_predictions(rows: Iterable[tuple[str, str, str]]) -> list[PredictionSet]:
    """Collect ``(item_id, predictor_id, label)`` rows into per-item sets, first-seen order."""
    grouped: dict[str, dict[str, str]] = {}
    for item_id, predictor_id, label in rows:
        votes = grouped.setdefault(item_id, {})
        if predictor_id in votes:
            raise DuplicateItem(f"duplicate prediction for ({item_id!r}, {predictor_id!r})")
        votes[predictor_id] = label
    return [PredictionSet(item, votes) for item, votes in grouped.items()]
