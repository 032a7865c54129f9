from __future__ import annotations

from collections.abc import Sequence
from typing import Any, ClassVar

import numpy as np
from numpy.typing import ArrayLike, NDArray

from utils.data.samples import Dataset, LabeledSample, PredictionRecord


class PredictorBase:
    """Base class for all uncertainty predictors, enforcing the PredictionRecord contract."""

    method: ClassVar[str] = ""

    def __init__(self, config: Any = None, name: str = "") -> None:
        self.name: str = name or self.method
        self.config: Any = config

    @property
    def input_dim(self) -> int:
        raise NotImplementedError

    def predict_batch(
        self, X: NDArray[np.float64], labels: NDArray[np.int64]
    ) -> list[PredictionRecord]:
        """One record per row of X. Implementations must not mutate their models."""
        raise NotImplementedError

    def predict(
        self, x: ArrayLike | LabeledSample, true_label: int | None = None
    ) -> PredictionRecord:
        features, label = _unpack(x, true_label)
        if features.shape != (self.input_dim,):
            raise ValueError(f"expected {self.input_dim} features, got shape {features.shape}")
        return self.predict_batch(features[None, :], np.array([label], dtype=np.int64))[0]

    def predict_dataset(self, ds: Dataset) -> list[PredictionRecord]:
        if ds.feature_dim != self.input_dim:
            raise ValueError(
                f"dataset '{ds.name}' has {ds.feature_dim} features, predictor expects "
                f"{self.input_dim}"
            )
        return self.predict_batch(np.asarray(ds.X), np.asarray(ds.y))


def _unpack(
    x: ArrayLike | LabeledSample, true_label: int | None
) -> tuple[NDArray[np.float64], int]:
    if isinstance(x, LabeledSample):
        return np.asarray(x.features), x.label if true_label is None else int(true_label)
    if true_label is None:
        raise ValueError("true_label is required for raw feature vectors")
    return np.asarray(x, dtype=np.float64), int(true_label)


def average_rows(stack: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Mean over axis 0 of a (T, ...) stack.

    Slices that are bit-identical across T come back unchanged, so averaging
    copies of one prediction reproduces it exactly.
    """
    if stack.shape[0] == 0:
        raise ValueError("nothing to average")
    mean = stack.mean(axis=0)
    same = (stack == stack[0]).all(axis=0)
    if same.ndim >= 1:
        same = same.all(axis=-1, keepdims=True)
    return np.asarray(np.where(same, stack[0], mean), dtype=np.float64)


def probability_spread(
    stack: NDArray[np.float64], mean: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Σ_c p̄_c · Var_t(p_t,c) for a (T, B, C) stack; 0 when all passes agree."""
    var = np.where((stack == stack[0]).all(axis=0), 0.0, stack.var(axis=0))
    return np.asarray((mean * var).sum(axis=-1), dtype=np.float64)


def make_records(
    probs: NDArray[np.float64],
    labels: Sequence[int] | NDArray[np.int64],
    uncertainty: NDArray[np.float64],
    method: str,
    spread: NDArray[np.float64] | None = None,
) -> list[PredictionRecord]:
    spreads = np.zeros(probs.shape[0]) if spread is None else spread
    return [
        PredictionRecord(
            probs=probs[i],
            true_label=int(labels[i]),
            uncertainty=float(uncertainty[i]),
            method=method,
            spread=float(spreads[i]),
        )
        for i in range(probs.shape[0])
    ]
