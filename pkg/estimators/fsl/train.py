# estimators/fsl/train.py
# ---------------------------------------------------------------------
# Episodic training of the FSL backbone.
#
# Per episode: embed support + queries in one deterministic pass, build the
# prototypes, score queries with softmax(-distance), and take an Adam step on
# the mean query cross-entropy. Gradients reach the support samples through
# the prototypes (each support row gets dL/dz_c / K).
#
# Validation: a fixed set of episodes, drawn once, scored every `val_every`
# episodes and after the last one; the best snapshot wins (earliest on
# ties), starting from the untrained backbone.
# ---------------------------------------------------------------------
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from estimators.fsl.core import proto_probabilities
from estimators.fsl.episodes import Episode, sample_episode
from nets.adam import Adam
from nets.mlp import CE_EPS, ForwardCache, MlpModel, backward_params, forward_params, softmax
from utils.data.samples import Dataset
from utils.errors import InvariantViolationError, TrainingDivergedError
from utils.rng import RngStream

__all__ = ["EpisodicConfig", "EpisodicHistory", "episodic_train", "episode_loss_and_grads"]

log = logging.getLogger(__name__)

_TRAIN_STREAM = 1
_VAL_STREAM = 2

Array = NDArray[np.float64]


class EpisodicConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    way: int = Field(2, ge=1)
    shot: int = Field(5, ge=1)
    query_per_class: int = Field(5, ge=1)
    train_episodes: int = Field(1000, ge=0)
    val_every: int = Field(200, ge=1)
    val_episodes: int = Field(100, ge=0)
    test_tasks: int = Field(20, ge=1)
    learning_rate: float = Field(1e-4, ge=0.0)
    l2_weight: float = Field(5e-5, ge=0.0)
    hidden: tuple[int, ...] = (32, 16)  # backbone widths; the last is the embedding size
    seed: int = Field(0, ge=0)


DEFAULT_EPISODIC = EpisodicConfig()


@dataclass(slots=True)
class EpisodicHistory:
    loss: list[float] = field(default_factory=list)  # per training episode
    val_accuracy: dict[int, float] = field(default_factory=dict)  # episodes done -> mean acc
    best_at: int = 0  # episodes done at the returned snapshot


def _split_embed(
    params: list[Array], rates: tuple[float, ...], episode: Episode
) -> tuple[Array, Array, ForwardCache]:
    X = np.concatenate([episode.support_matrix(), episode.query_matrix()])
    cache = forward_params(params[0::2], params[1::2], rates, X, embed_only=True)
    n_support = episode.way * episode.shot
    return cache.output[:n_support], cache.output[n_support:], cache


def _episode_scores(params: list[Array], rates: tuple[float, ...], episode: Episode) -> Array:
    Es, Eq, _ = _split_embed(params, rates, episode)
    Z = Es.reshape(episode.way, episode.shot, -1).mean(axis=1)
    return proto_probabilities(Eq, Z)


def _relative_labels(episode: Episode) -> NDArray[np.int64]:
    position = {c: i for i, c in enumerate(episode.classes)}
    return np.array([position[int(y)] for y in episode.query_labels()], dtype=np.int64)


def episode_loss_and_grads(
    params: list[Array], rates: tuple[float, ...], episode: Episode, l2_weight: float = 0.0
) -> tuple[float, list[Array]]:
    """Mean query cross-entropy of one episode and its gradient w.r.t. [W0, b0, ...]."""
    Es, Eq, cache = _split_embed(params, rates, episode)
    way, shot = episode.way, episode.shot
    Z = Es.reshape(way, shot, -1).mean(axis=1)

    diff = Eq[:, None, :] - Z[None, :, :]  # (nq, C, m)
    dist = np.sqrt((diff * diff).sum(axis=2))
    probs = softmax(-dist)
    y = _relative_labels(episode)
    nq = y.shape[0]
    loss = float(-np.log(np.maximum(probs[np.arange(nq), y], CE_EPS)).mean())

    dlogits = probs.copy()
    dlogits[np.arange(nq), y] -= 1.0
    dlogits /= nq
    ddist = -dlogits  # logits = -dist
    unit = np.divide(diff, dist[:, :, None], out=np.zeros_like(diff), where=dist[:, :, None] > 0)
    weighted = ddist[:, :, None] * unit
    dEq = weighted.sum(axis=1)
    dZ = -weighted.sum(axis=0)  # (C, m)
    dEs = np.repeat(dZ / shot, shot, axis=0)

    grad_out = np.concatenate([dEs, dEq])
    grads = backward_params(params[0::2], cache, grad_out, params, l2_weight)
    return loss, grads


def _val_accuracy(
    params: list[Array], rates: tuple[float, ...], episodes: list[Episode]
) -> float:
    hits = [
        np.argmax(_episode_scores(params, rates, ep), axis=1) == _relative_labels(ep)
        for ep in episodes
    ]
    return float(np.mean([h.mean() for h in hits]))


def episodic_train(
    model: MlpModel,
    train_ds: Dataset,
    episodes: int | None = None,
    val_every: int | None = None,
    val_episodes: int | None = None,
    cfg: EpisodicConfig = DEFAULT_EPISODIC,
    val_ds: Dataset | None = None,
) -> tuple[MlpModel, EpisodicHistory]:
    """
    Train the backbone on `episodes` sampled tasks (defaults from `cfg`).

    Validation episodes come from `val_ds` (default: `train_ds`). With zero
    episodes the input model is returned as is.
    """
    n_episodes = cfg.train_episodes if episodes is None else episodes
    every = cfg.val_every if val_every is None else val_every
    n_val = cfg.val_episodes if val_episodes is None else val_episodes
    if model.n_hidden == 0:
        raise InvariantViolationError("FSL backbone needs a hidden layer to embed with")
    if train_ds.feature_dim != model.input_dim:
        raise InvariantViolationError(
            f"dataset '{train_ds.name}' has {train_ds.feature_dim} features, "
            f"model expects {model.input_dim}"
        )
    if every < 1:
        raise ValueError("val_every must be >= 1")

    history = EpisodicHistory()
    if n_episodes == 0:
        return model, history

    params = [p.copy() for p in model.params()]
    rates = model.dropout_rates
    opt = Adam(learning_rate=cfg.learning_rate)
    train_gen = RngStream(cfg.seed, _TRAIN_STREAM).generator()
    val_gen = RngStream(cfg.seed, _VAL_STREAM).generator()
    val_source = val_ds if val_ds is not None else train_ds
    val_set = [
        sample_episode(val_source, cfg.way, cfg.shot, cfg.query_per_class, val_gen)
        for _ in range(n_val)
    ]

    best_params = [p.copy() for p in params]
    best_acc = _val_accuracy(params, rates, val_set) if val_set else -np.inf
    if val_set:
        history.val_accuracy[0] = float(best_acc)

    for step in range(1, n_episodes + 1):
        episode = sample_episode(train_ds, cfg.way, cfg.shot, cfg.query_per_class, train_gen)
        try:
            loss, grads = episode_loss_and_grads(params, rates, episode, cfg.l2_weight)
        except TrainingDivergedError as exc:
            raise TrainingDivergedError(f"{exc} at episode {step}", epoch=step) from exc
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"non-finite episode loss at episode {step}", epoch=step)
        history.loss.append(loss)
        opt.step(params, grads)

        if val_set and (step % every == 0 or step == n_episodes):
            acc = _val_accuracy(params, rates, val_set)
            history.val_accuracy[step] = acc
            log.debug("episode %d loss=%.4f val_acc=%.4f", step, loss, acc)
            if acc > best_acc:
                best_acc = acc
                best_params = [p.copy() for p in params]
                history.best_at = step

    if not val_set:
        # nothing to select on: keep the final parameters
        best_params, history.best_at = params, n_episodes
    log.info(
        "FSL backbone: best val episode accuracy %.4f after %d episodes",
        best_acc,
        history.best_at,
    )
    return model.with_params(best_params), history
