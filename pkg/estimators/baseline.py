# estimators/baseline.py
from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from estimators.base import PredictorBase, make_records
from evaluation.metrics import entropy_rows
from nets.mlp import MlpModel, forward, softmax
from utils.data.samples import LabeledSample, PredictionRecord

__all__ = ["BaselinePredictor", "baseline_predict"]


class BaselinePredictor(PredictorBase):
    """Vanilla network: softmax of one deterministic pass, entropy as uncertainty."""

    method = "baseline"

    def __init__(self, model: MlpModel, name: str = "") -> None:
        super().__init__(config=None, name=name)
        self.model = model

    @property
    def input_dim(self) -> int:
        return self.model.input_dim

    def predict_batch(
        self, X: NDArray[np.float64], labels: NDArray[np.int64]
    ) -> list[PredictionRecord]:
        logits, _ = forward(self.model, np.atleast_2d(X))
        probs = softmax(logits)
        return make_records(probs, labels, entropy_rows(probs), self.method)


def baseline_predict(
    model: MlpModel, x: ArrayLike | LabeledSample, true_label: int | None = None
) -> PredictionRecord:
    return BaselinePredictor(model).predict(x, true_label)
