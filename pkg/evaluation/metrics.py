# evaluation/metrics.py
# ---------------------------------------------------------------------
# Uncertainty and performance metrics.
#
#   - shannon_entropy(): bits (base 2); 0·log 0 := 0
#   - accuracy(), confusion()
#   - auroc():      Mann-Whitney U with average ranks (ties count 1/2)
#   - aupr():       average precision, step interpolation, tie groups atomic
#   - fpr_at_tpr(): lowest FPR over thresholds reaching the target TPR
#   - metric_block(): the per-(method, distribution) bundle
#
# Ranking metrics treat "score >= threshold" as a positive call and walk
# the distinct scores from high to low.
# ---------------------------------------------------------------------
from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.stats import entropy as _scipy_entropy, rankdata

from utils.data.samples import PROB_SUM_TOL, PredictionRecord
from utils.errors import MetricUndefinedError

__all__ = [
    "ConfusionCounts",
    "ScoredSample",
    "MetricBlock",
    "METRIC_NAMES",
    "shannon_entropy",
    "entropy_rows",
    "accuracy",
    "confusion",
    "scored_from_arrays",
    "auroc",
    "aupr",
    "fpr_at_tpr",
    "roc_curve",
    "metric_block",
    "summarize_blocks",
]


# ---------------------------- Types -----------------------------------


@dataclass(frozen=True, slots=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def tpr(self) -> float:
        if self.tp + self.fn == 0:
            raise MetricUndefinedError("TPR undefined without positives")
        return self.tp / (self.tp + self.fn)

    @property
    def fpr(self) -> float:
        if self.tn + self.fp == 0:
            raise MetricUndefinedError("FPR undefined without negatives")
        return self.fp / (self.tn + self.fp)

    @property
    def accuracy(self) -> float:
        if self.total == 0:
            raise MetricUndefinedError("accuracy of zero samples")
        return (self.tp + self.tn) / self.total


@dataclass(frozen=True, slots=True)
class ScoredSample:
    score: float  # higher = more positive / more OOD
    positive: bool

    def __post_init__(self) -> None:
        if not np.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score!r}")


METRIC_NAMES = ("accuracy", "auroc", "aupr", "fpr", "mean_entropy")


@dataclass(frozen=True, slots=True)
class MetricBlock:
    accuracy: float
    auroc: float
    aupr: float
    fpr: float
    mean_entropy: float
    n: int

    def __post_init__(self) -> None:
        for name in ("accuracy", "auroc", "aupr", "fpr"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
        if not self.mean_entropy >= 0.0:
            raise ValueError("mean_entropy must be >= 0")
        if self.n < 1:
            raise ValueError("a metric block needs at least one sample")

    def to_dict(self) -> dict[str, float | int]:
        return asdict(self)


# ---------------------------- Entropy ---------------------------------


def _check_probs(p: NDArray[np.float64]) -> None:
    if p.size == 0 or not np.isfinite(p).all():
        raise ValueError("probability vector must be non-empty and finite")
    if (p < 0.0).any() or (p > 1.0).any():
        raise ValueError("probability entries must lie in [0, 1]")
    sums = p.sum(axis=-1)
    if (np.abs(sums - 1.0) > PROB_SUM_TOL).any():
        raise ValueError("probabilities must sum to 1")


def shannon_entropy(p: ArrayLike) -> float:
    """H(p) = −Σ p_c log₂ p_c, in bits."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("shannon_entropy takes a single probability vector")
    _check_probs(arr)
    return float(_scipy_entropy(arr, base=2))


def entropy_rows(P: ArrayLike) -> NDArray[np.float64]:
    """Row-wise entropy (bits) of an (N, C) probability matrix."""
    arr = np.asarray(P, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("entropy_rows takes an (N, C) matrix")
    _check_probs(arr)
    return np.asarray(_scipy_entropy(arr, base=2, axis=1), dtype=np.float64)


# ---------------------------- Classification --------------------------


def accuracy(records: Sequence[PredictionRecord]) -> float:
    """Fraction of records whose argmax (lowest index on ties) is the true label."""
    if not records:
        raise MetricUndefinedError("accuracy of an empty record list")
    return sum(r.correct for r in records) / len(records)


def confusion(
    records: Iterable[PredictionRecord], positive_class: int = 1, threshold: float = 0.5
) -> ConfusionCounts:
    """Counts with "positive" predicted iff p[positive_class] >= threshold."""
    tp = tn = fp = fn = 0
    for r in records:
        if r.probs.size != 2:
            raise MetricUndefinedError(
                f"confusion counts need a binary task, got {r.probs.size} classes"
            )
        predicted = bool(r.probs[positive_class] >= threshold)
        actual = r.true_label == positive_class
        if predicted and actual:
            tp += 1
        elif predicted:
            fp += 1
        elif actual:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)


# ---------------------------- Ranking ---------------------------------


def scored_from_arrays(scores: ArrayLike, positives: ArrayLike) -> list[ScoredSample]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(positives, dtype=bool).ravel()
    if s.shape != y.shape:
        raise ValueError("one positive flag per score")
    return [ScoredSample(float(a), bool(b)) for a, b in zip(s, y, strict=True)]


def _arrays(scored: Sequence[ScoredSample]) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    scores = np.fromiter((s.score for s in scored), dtype=np.float64, count=len(scored))
    positive = np.fromiter((s.positive for s in scored), dtype=bool, count=len(scored))
    return scores, positive


def _require_both(positive: NDArray[np.bool_], metric: str) -> tuple[int, int]:
    n_pos = int(positive.sum())
    n_neg = int(positive.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError(
            f"{metric} needs both classes (positives={n_pos}, negatives={n_neg})"
        )
    return n_pos, n_neg


def _threshold_walk(
    scores: NDArray[np.float64], positive: NDArray[np.bool_]
) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    """Cumulative (tp, fp) after each distinct score, highest score first."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    hits = positive[order].astype(np.int64)
    last_of_group = np.r_[s[1:] != s[:-1], True]
    tp = np.cumsum(hits)[last_of_group]
    fp = np.cumsum(1 - hits)[last_of_group]
    return tp, fp


def auroc(scored: Sequence[ScoredSample]) -> float:
    """P(random positive outranks random negative), ties worth 1/2."""
    scores, positive = _arrays(scored)
    n_pos, n_neg = _require_both(positive, "AUROC")
    ranks = rankdata(scores, method="average")
    u = float(ranks[positive].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def aupr(scored: Sequence[ScoredSample]) -> float:
    """Average precision: Σ precision(t) · Δrecall(t) over descending score groups."""
    scores, positive = _arrays(scored)
    n_pos = int(positive.sum())
    if n_pos == 0:
        raise MetricUndefinedError("AUPR needs at least one positive")
    tp, fp = _threshold_walk(scores, positive)
    precision = tp / (tp + fp)
    gained = np.diff(np.r_[0, tp])
    return float(np.sum(precision * gained) / n_pos)


def fpr_at_tpr(scored: Sequence[ScoredSample], target_tpr: float = 0.95) -> float:
    if not 0.0 < target_tpr <= 1.0:
        raise ValueError(f"target_tpr must lie in (0, 1], got {target_tpr}")
    scores, positive = _arrays(scored)
    n_pos, n_neg = _require_both(positive, "FPR@TPR")
    tp, fp = _threshold_walk(scores, positive)
    reached = tp / n_pos >= target_tpr
    # FPR is non-decreasing along the walk, so the first qualifying threshold is the minimum
    return float(fp[int(np.argmax(reached))] / n_neg)


def roc_curve(
    scored: Sequence[ScoredSample],
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """(fpr, tpr) points from the all-negative corner to (1, 1)."""
    scores, positive = _arrays(scored)
    n_pos, n_neg = _require_both(positive, "ROC")
    tp, fp = _threshold_walk(scores, positive)
    return np.r_[0.0, fp / n_neg], np.r_[0.0, tp / n_pos]


# ---------------------------- Aggregates ------------------------------


def metric_block(
    records: Sequence[PredictionRecord], positive_class: int = 1, target_tpr: float = 0.95
) -> MetricBlock:
    """
    Bundle predictive metrics for one (method, distribution) cell.

    AUROC/AUPR/FPR rank records by p[positive_class] against
    `true_label == positive_class`; mean_entropy is the mean Shannon entropy of
    the probability vectors (whatever uncertainty the records carry).
    """
    if not records:
        raise MetricUndefinedError("metric block of an empty record list")
    scored = [
        ScoredSample(float(r.probs[positive_class]), r.true_label == positive_class)
        for r in records
    ]
    probs = np.stack([r.probs for r in records])
    return MetricBlock(
        accuracy=accuracy(records),
        auroc=auroc(scored),
        aupr=aupr(scored),
        fpr=fpr_at_tpr(scored, target_tpr),
        mean_entropy=float(entropy_rows(probs).mean()),
        n=len(records),
    )


def summarize_blocks(blocks: Sequence[MetricBlock]) -> tuple[MetricBlock, dict[str, float]]:
    """Mean block over tasks plus the per-metric population std."""
    if not blocks:
        raise MetricUndefinedError("no blocks to summarize")
    table = np.array([[getattr(b, k) for k in METRIC_NAMES] for b in blocks], dtype=np.float64)
    mean = table.mean(axis=0)
    std = table.std(axis=0)
    block = MetricBlock(
        **{k: float(v) for k, v in zip(METRIC_NAMES, mean, strict=True)},
        n=sum(b.n for b in blocks),
    )
    return block, {k: float(v) for k, v in zip(METRIC_NAMES, std, strict=True)}
