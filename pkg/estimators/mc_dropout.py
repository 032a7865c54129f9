# estimators/mc_dropout.py
# ---------------------------------------------------------------------
# Monte-Carlo dropout: keep dropout on at test time, average T softmax
# outputs. Pass t is one thinned network: a single keep mask per hidden
# layer, drawn from RngStream(seed, stream_id=t) and shared by every row.
# A record therefore depends on the sample and the seed only, never on
# the batch it came in or the order passes are evaluated in.
# ---------------------------------------------------------------------
from __future__ import annotations

import logging

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field

from estimators.base import PredictorBase, average_rows, make_records, probability_spread
from evaluation.metrics import entropy_rows
from nets.mlp import MlpModel, forward, softmax
from utils.data.samples import LabeledSample, PredictionRecord
from utils.rng import RngStream

__all__ = ["McDropoutConfig", "McDropoutPredictor", "mc_dropout_predict", "pass_stream"]

log = logging.getLogger(__name__)


class McDropoutConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    passes: int = Field(50, ge=1)  # 100 also supported (--passes 100)
    seed: int = Field(0, ge=0)


DEFAULT_MC = McDropoutConfig()


def pass_stream(cfg: McDropoutConfig, pass_index: int) -> RngStream:
    return RngStream(seed=cfg.seed, stream_id=pass_index)


class McDropoutPredictor(PredictorBase):
    method = "mc_dropout"

    def __init__(self, model: MlpModel, cfg: McDropoutConfig = DEFAULT_MC, name: str = "") -> None:
        super().__init__(config=cfg, name=name)
        self.model = model
        self.cfg = cfg
        if not model.has_dropout:
            log.warning("MC dropout on a model without dropout: every pass is deterministic")

    @property
    def input_dim(self) -> int:
        return self.model.input_dim

    def pass_masks(self, pass_index: int) -> list[NDArray[np.float64] | None]:
        """Binary (1, h) keep mask per hidden layer for one pass; None where the rate is 0."""
        gen = pass_stream(self.cfg, pass_index).generator()
        hidden = self.model.layer_dims[1:-1]
        return [
            (gen.random((1, h)) >= rate).astype(np.float64) if rate > 0.0 else None
            for h, rate in zip(hidden, self.model.dropout_rates, strict=True)
        ]

    def pass_probs(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        """(T, B, C) per-pass softmax outputs."""
        X = np.atleast_2d(X)
        return np.stack(
            [
                softmax(forward(self.model, X, masks=self.pass_masks(t))[0])
                for t in range(self.cfg.passes)
            ]
        )

    def predict_batch(
        self, X: NDArray[np.float64], labels: NDArray[np.int64]
    ) -> list[PredictionRecord]:
        stack = self.pass_probs(X)
        mean = average_rows(stack)
        return make_records(
            mean, labels, entropy_rows(mean), self.method, probability_spread(stack, mean)
        )


def mc_dropout_predict(
    model: MlpModel,
    x: ArrayLike | LabeledSample,
    cfg: McDropoutConfig = DEFAULT_MC,
    true_label: int | None = None,
) -> PredictionRecord:
    return McDropoutPredictor(model, cfg).predict(x, true_label)
