"""Agreement-based split of the training pool into confident and unconfident data."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from .errors import CoverageMismatch

__all__ = [
    "CONFIDENT",
    "UNCONFIDENT",
    "PseudoLabelRecord",
    "ConfidencePartition",
    "partition_by_agreement",
    "build_records",
]

CONFIDENT = "confident"
UNCONFIDENT = "unconfident"


@dataclass(frozen=True)
class PseudoLabelRecord:
    item_id: str
    acoustic_label: str
    linguistic_label: str | None
    model_label: str | None = None
    status: str = UNCONFIDENT

    @property
    def sources_agree(self) -> bool:
        return self.linguistic_label is not None and self.linguistic_label == self.acoustic_label

    def matches(self, label: str) -> bool:
        """True when ``label`` equals either the acoustic or the linguistic label."""
        return label == self.acoustic_label or (
            self.linguistic_label is not None and label == self.linguistic_label
        )

    def promote(self, model_label: str) -> "PseudoLabelRecord":
        return replace(self, model_label=model_label, status=CONFIDENT)


@dataclass(frozen=True)
class ConfidencePartition:
    """Seed (ground truth), confident (agreed pseudo-label) and unconfident items."""

    labeled_seed: Mapping[str, str]
    confident: Mapping[str, str]
    unconfident: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labeled_seed", dict(self.labeled_seed))
        object.__setattr__(self, "confident", dict(self.confident))
        object.__setattr__(self, "unconfident", tuple(self.unconfident))
        seed, conf, unc = set(self.labeled_seed), set(self.confident), set(self.unconfident)
        if len(unc) != len(self.unconfident):
            raise ValueError("duplicate ids in the unconfident set")
        if seed & conf or seed & unc or conf & unc:
            raise ValueError("partition sets overlap")

    @property
    def pool(self) -> set[str]:
        return set(self.labeled_seed) | set(self.confident) | set(self.unconfident)


def partition_by_agreement(
    acoustic: Mapping[str, str],
    linguistic: Mapping[str, str | None],
    seed: Mapping[str, str],
) -> ConfidencePartition:
    """Items whose acoustic and linguistic labels agree become confident.

    Seed items keep their ground-truth labels and are never placed in the
    confident or unconfident sets, even if they also carry pseudo-labels.
    """
    only_a = set(acoustic) - set(linguistic)
    only_l = set(linguistic) - set(acoustic)
    if only_a or only_l:
        raise CoverageMismatch(
            f"{len(only_a)} item(s) lack a linguistic label, {len(only_l)} lack an acoustic label"
            f" (e.g. {sorted(only_a | only_l)[:3]})"
        )
    confident: dict[str, str] = {}
    unconfident: list[str] = []
    for item, a_label in acoustic.items():
        if item in seed:
            continue
        l_label = linguistic[item]
        if l_label is not None and l_label == a_label:
            confident[item] = a_label
        else:
            unconfident.append(item)
    return ConfidencePartition(seed, confident, tuple(unconfident))


def build_records(
    acoustic: Mapping[str, str],
    linguistic: Mapping[str, str | None],
    partition: ConfidencePartition,
) -> dict[str, PseudoLabelRecord]:
    out = {}
    for item in list(partition.confident) + list(partition.unconfident):
        status = CONFIDENT if item in partition.confident else UNCONFIDENT
        out[item] = PseudoLabelRecord(item, acoustic[item], linguistic[item], None, status)
    return out
