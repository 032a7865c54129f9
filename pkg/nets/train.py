# nets/train.py
# ---------------------------------------------------------------------
# Mini-batch Adam training of an MlpModel on cross-entropy.
#
#   - per-epoch shuffle and dropout masks from RngStreams of cfg.seed
#   - an epoch improves when validation accuracy rises, or stays equal
#     while validation cross-entropy falls
#   - plateau scheduler: lr *= lr_decay_factor after `plateau_patience`
#     epochs without an improvement
#   - the snapshot of the last improving epoch is returned
# ---------------------------------------------------------------------
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from nets.adam import Adam
from nets.mlp import MlpModel, backward_params, forward_params, mean_cross_entropy, softmax
from utils.data.samples import Dataset
from utils.errors import InvariantViolationError, TrainingDivergedError
from utils.rng import RngStream

__all__ = ["TrainConfig", "TrainHistory", "train", "check_compatible", "predict_labels"]

log = logging.getLogger(__name__)

_SHUFFLE_STREAM = 1
_DROPOUT_STREAM = 2


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: float = Field(1e-3, ge=0.0)
    epochs: int = Field(100, ge=0)
    batch_size: int = Field(32, ge=1)
    plateau_patience: int = Field(5, ge=1)
    lr_decay_factor: float = Field(0.1, gt=0.0, lt=1.0)
    l2_weight: float = Field(0.0, ge=0.0)
    seed: int = Field(0, ge=0)


DEFAULT_TRAIN = TrainConfig()


@dataclass(slots=True)
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    learning_rate: list[float] = field(default_factory=list)
    best_epoch: int | None = None  # 0-based; None when no epoch ran

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def check_compatible(model: MlpModel, ds: Dataset) -> None:
    if ds.feature_dim != model.input_dim:
        raise InvariantViolationError(
            f"dataset '{ds.name}': feature_dim {ds.feature_dim} != model input {model.input_dim}"
        )
    if ds.class_count != model.class_count:
        raise InvariantViolationError(
            f"dataset '{ds.name}' has {ds.class_count} classes, model has {model.class_count}"
        )


def predict_labels(
    params: list[NDArray[np.float64]], X: NDArray[np.float64]
) -> NDArray[np.int64]:
    cache = forward_params(params[0::2], params[1::2], [0.0] * (len(params) // 2 - 1), X)
    return np.argmax(softmax(cache.output), axis=1)


def _validate(params: list[NDArray[np.float64]], ds: Dataset) -> tuple[float, float]:
    """(accuracy, mean cross-entropy) of the deterministic forward on `ds`."""
    cache = forward_params(params[0::2], params[1::2], [0.0] * (len(params) // 2 - 1), ds.X)
    probs = softmax(cache.output)
    accuracy = float(np.mean(np.argmax(probs, axis=1) == ds.y))
    return accuracy, mean_cross_entropy(probs, ds.y)


def train(
    model: MlpModel,
    train_ds: Dataset,
    val_ds: Dataset,
    cfg: TrainConfig = DEFAULT_TRAIN,
    member: int | None = None,
) -> tuple[MlpModel, TrainHistory]:
    """
    Train a copy of `model`; the input model is never modified.

    Raises TrainingDivergedError (with epoch, and `member` when given) as soon
    as a batch loss or activation turns non-finite.
    """
    check_compatible(model, train_ds)
    check_compatible(model, val_ds)

    params = [p.copy() for p in model.params()]
    weights, biases = params[0::2], params[1::2]
    rates = model.dropout_rates
    opt = Adam(learning_rate=cfg.learning_rate)
    shuffle_gen = RngStream(cfg.seed, _SHUFFLE_STREAM).generator()
    dropout_gen = RngStream(cfg.seed, _DROPOUT_STREAM).generator()

    X, y = train_ds.X, train_ds.y
    n = len(train_ds)
    history = TrainHistory()
    best_params = params
    best_acc, best_loss = -np.inf, np.inf
    stale = 0

    for epoch in range(cfg.epochs):
        order = shuffle_gen.permutation(n)
        total = 0.0
        try:
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                cache = forward_params(weights, biases, rates, X[idx], dropout_gen)
                probs = softmax(cache.output)
                loss = mean_cross_entropy(probs, y[idx])
                if not np.isfinite(loss):
                    raise TrainingDivergedError("non-finite loss")
                total += loss * idx.shape[0]
                dlogits = probs
                dlogits[np.arange(idx.shape[0]), y[idx]] -= 1.0
                dlogits /= idx.shape[0]
                grads = backward_params(weights, cache, dlogits, params, cfg.l2_weight)
                opt.step(params, grads)
        except TrainingDivergedError as exc:
            raise TrainingDivergedError(f"{exc} at epoch {epoch}", epoch, member) from exc

        val_acc, val_loss = _validate(params, val_ds)
        history.loss.append(total / n)
        history.val_accuracy.append(val_acc)
        history.val_loss.append(val_loss)
        history.learning_rate.append(opt.learning_rate)
        log.debug(
            "epoch %d loss=%.4f val_acc=%.4f val_loss=%.4f", epoch, total / n, val_acc, val_loss
        )

        if val_acc > best_acc or (val_acc == best_acc and val_loss < best_loss):
            best_acc, best_loss = val_acc, val_loss
            best_params = [p.copy() for p in params]
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= cfg.plateau_patience:
                opt.learning_rate *= cfg.lr_decay_factor
                stale = 0
                log.info("validation plateaued, lr -> %.3g (epoch %d)", opt.learning_rate, epoch)

    if history.best_epoch is None:
        return model, history
    log.info(
        "%sbest val accuracy %.4f at epoch %d",
        "" if member is None else f"member {member}: ",
        best_acc,
        history.best_epoch,
    )
    return model.with_params(best_params), history
