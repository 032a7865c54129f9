# evaluation/ood.py
# ---------------------------------------------------------------------
# OOD detection from per-sample uncertainty.
#
# Score = the record's uncertainty (entropy for baseline / MC-dropout /
# ensemble, 1 - max p for FSL). Negatives = every record of the ID set.
# Positives = records of the OOD set; with positives="shifted" only the
# samples whose provenance is not "none" take part (unchanged normals
# inside a novel-condition set are dropped from the comparison).
# ---------------------------------------------------------------------
from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass
from typing import Literal

from evaluation.metrics import ScoredSample, aupr, auroc, fpr_at_tpr
from utils.data.samples import DistributionTag, LabeledSample, PredictionRecord
from utils.errors import InvariantViolationError, MetricUndefinedError

__all__ = [
    "EvaluatedSet",
    "DetectionResult",
    "Positives",
    "detection_scores",
    "ood_detection_eval",
]

log = logging.getLogger(__name__)

Positives = Literal["all", "shifted"]


@dataclass(frozen=True, slots=True, eq=False)
class EvaluatedSet:
    """Predictions of one method on one distribution, aligned with their samples."""

    method: str
    tag: DistributionTag
    records: tuple[PredictionRecord, ...]
    shifts: tuple[str, ...]  # provenance per record ("none" = unchanged process)
    task_index: tuple[int, ...] | None = None  # FSL: episode of each record

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "shifts", tuple(self.shifts))
        if not self.records:
            raise InvariantViolationError(f"{self.method}/{self.tag}: no records")
        if len(self.shifts) != len(self.records):
            raise InvariantViolationError("one shift entry per record is required")
        if self.task_index is not None and len(self.task_index) != len(self.records):
            raise InvariantViolationError("one task index per record is required")

    @classmethod
    def from_samples(
        cls,
        method: str,
        tag: DistributionTag,
        records: Sequence[PredictionRecord],
        samples: Sequence[LabeledSample],
        task_index: Sequence[int] | None = None,
    ) -> EvaluatedSet:
        return cls(
            method=method,
            tag=tag,
            records=tuple(records),
            shifts=tuple(s.shift for s in samples),
            task_index=None if task_index is None else tuple(task_index),
        )


@dataclass(frozen=True, slots=True)
class DetectionResult:
    method: str
    id_tag: str
    ood_tag: str
    auroc: float
    aupr: float
    fpr: float
    n_id: int
    n_ood: int

    def to_dict(self) -> dict[str, float | int | str]:
        return asdict(self)


def detection_scores(
    id_set: EvaluatedSet, ood_set: EvaluatedSet, positives: Positives = "shifted"
) -> list[ScoredSample]:
    if positives not in ("all", "shifted"):
        raise ValueError(f"positives must be 'all' or 'shifted', got {positives!r}")
    scored = [ScoredSample(r.uncertainty, False) for r in id_set.records]
    scored += [
        ScoredSample(r.uncertainty, True)
        for r, shift in zip(ood_set.records, ood_set.shifts, strict=True)
        if positives == "all" or shift != "none"
    ]
    return scored


def ood_detection_eval(
    sets: Mapping[str, Mapping[DistributionTag, EvaluatedSet]],
    id_tag: DistributionTag,
    ood_tag: DistributionTag,
    positives: Positives = "shifted",
    target_tpr: float = 0.95,
    id_overrides: Mapping[str, DistributionTag] | None = None,
) -> dict[str, DetectionResult]:
    """
    AUROC / AUPR / FPR@target-TPR of "uncertainty separates `ood_tag` from
    `id_tag`", per method.

    Parameters
    ----------
    sets : method -> tag -> EvaluatedSet
    id_overrides : method -> ID tag to use instead of `id_tag` (FSL has no
        in_test predictions and is compared against its reference tag).

    Raises
    ------
    InvariantViolationError
        A method lacks predictions for a requested tag.
    MetricUndefinedError
        The selection leaves one side empty.
    """
    overrides = dict(id_overrides or {})
    out: dict[str, DetectionResult] = {}
    for method, by_tag in sets.items():
        ref = overrides.get(method, id_tag)
        missing = [t.value for t in (ref, ood_tag) if t not in by_tag]
        if missing:
            raise InvariantViolationError(
                f"method '{method}' has no predictions for {', '.join(missing)}"
            )
        if ref == ood_tag:
            raise MetricUndefinedError(f"method '{method}': ID and OOD tag are both {ref}")
        scored = detection_scores(by_tag[ref], by_tag[ood_tag], positives)
        n_id = len(by_tag[ref].records)
        result = DetectionResult(
            method=method,
            id_tag=ref.value,
            ood_tag=ood_tag.value,
            auroc=auroc(scored),
            aupr=aupr(scored),
            fpr=fpr_at_tpr(scored, target_tpr),
            n_id=n_id,
            n_ood=len(scored) - n_id,
        )
        log.debug(
            "OOD %s vs %s [%s]: auroc=%.4f fpr=%.4f",
            ood_tag,
            ref,
            method,
            result.auroc,
            result.fpr,
        )
        out[method] = result
    return out
