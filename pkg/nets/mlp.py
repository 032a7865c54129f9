# nets/mlp.py
# ---------------------------------------------------------------------
# Small fully-connected classifier f_θ: ReLU hidden layers, linear head,
# inverted dropout on hidden activations.
#
# Provides:
#   - MlpModel:      immutable parameters + architecture
#   - init_model():  N(0, 1)/sqrt(fan_in) weights, zero biases
#   - forward():     deterministic or stochastic pass, returns (output, cache)
#   - softmax(), cross_entropy_loss()
#   - backward():    exact cross-entropy gradients (+ L2), masks respected
#   - backward_from(): gradients for an arbitrary upstream gradient
#
# Weights are stored (fan_in, fan_out) so a batch X (B, m) maps as X @ W + b.
# Every function accepts a single feature vector or a (B, m) batch.
# ---------------------------------------------------------------------
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import softmax as _scipy_softmax

from utils.errors import InvariantViolationError, TrainingDivergedError
from utils.rng import RngStream, as_generator

__all__ = [
    "MlpModel",
    "Deterministic",
    "Stochastic",
    "ForwardMode",
    "DETERMINISTIC",
    "ForwardCache",
    "init_model",
    "forward",
    "forward_params",
    "softmax",
    "cross_entropy_loss",
    "mean_cross_entropy",
    "backward",
    "backward_from",
    "backward_params",
    "CE_EPS",
]

CE_EPS = 1e-12

Array = NDArray[np.float64]


def _frozen(values: ArrayLike) -> Array:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


# --------------------------- Model ------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class MlpModel:
    layer_dims: tuple[int, ...]
    weights: tuple[Array, ...]
    biases: tuple[Array, ...]
    dropout_rates: tuple[float, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        object.__setattr__(self, "weights", tuple(_frozen(w) for w in self.weights))
        object.__setattr__(self, "biases", tuple(_frozen(b) for b in self.biases))
        object.__setattr__(self, "dropout_rates", tuple(float(r) for r in self.dropout_rates))
        self.validate()

    def validate(self) -> None:
        dims = self.layer_dims
        if len(dims) < 2:
            raise InvariantViolationError("layer_dims needs at least input and output sizes")
        if any(d <= 0 for d in dims):
            raise InvariantViolationError(f"layer dims must be positive, got {list(dims)}")
        n_layers = len(dims) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise InvariantViolationError("one weight matrix and bias vector per layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases, strict=True)):
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise InvariantViolationError(
                    f"layer {i}: shapes {w.shape}/{b.shape} do not chain with {list(dims)}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise InvariantViolationError(f"layer {i}: non-finite parameter")
        if len(self.dropout_rates) != self.n_hidden:
            raise InvariantViolationError(
                f"{len(self.dropout_rates)} dropout rates for {self.n_hidden} hidden layers"
            )
        if any(not 0.0 <= r < 1.0 for r in self.dropout_rates):
            raise InvariantViolationError("dropout rates must lie in [0, 1)")

    @property
    def n_hidden(self) -> int:
        return len(self.layer_dims) - 2

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def class_count(self) -> int:
        return self.layer_dims[-1]

    @property
    def embedding_dim(self) -> int:
        if self.n_hidden == 0:
            raise InvariantViolationError("model has no hidden layer to embed with")
        return self.layer_dims[-2]

    @property
    def has_dropout(self) -> bool:
        return any(r > 0.0 for r in self.dropout_rates)

    def params(self) -> list[Array]:
        """Parameters as [W0, b0, W1, b1, ...] (read-only views)."""
        out: list[Array] = []
        for w, b in zip(self.weights, self.biases, strict=True):
            out.extend((w, b))
        return out

    def with_params(self, params: Sequence[ArrayLike]) -> MlpModel:
        """New model with the same architecture and the given [W0, b0, ...] values."""
        return MlpModel(
            layer_dims=self.layer_dims,
            weights=tuple(np.asarray(p) for p in params[0::2]),
            biases=tuple(np.asarray(p) for p in params[1::2]),
            dropout_rates=self.dropout_rates,
            seed=self.seed,
        )


def init_model(
    layer_dims: Sequence[int], dropout_rates: Sequence[float] | None = None, seed: int = 0
) -> MlpModel:
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise InvariantViolationError("layer_dims needs at least input and output sizes")
    if any(d <= 0 for d in dims):
        raise InvariantViolationError(f"layer dims must be positive, got {dims}")
    rates = [0.0] * (len(dims) - 2) if dropout_rates is None else list(dropout_rates)

    gen = RngStream(seed).generator()
    weights = [
        gen.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)
        for fan_in, fan_out in zip(dims[:-1], dims[1:], strict=True)
    ]
    biases = [np.zeros(fan_out) for fan_out in dims[1:]]
    return MlpModel(
        layer_dims=tuple(dims),
        weights=tuple(weights),
        biases=tuple(biases),
        dropout_rates=tuple(rates),
        seed=seed,
    )


# --------------------------- Forward ----------------------------------


@dataclass(frozen=True, slots=True)
class Deterministic:
    """No masking; activations unscaled."""


@dataclass(frozen=True, slots=True)
class Stochastic:
    """Dropout active; masks drawn from `rng` (hidden layers in order, rows in order)."""

    rng: RngStream | np.random.Generator


ForwardMode = Deterministic | Stochastic
DETERMINISTIC = Deterministic()


@dataclass(frozen=True, slots=True)
class ForwardCache:
    layer_dims: tuple[int, ...]
    inputs: tuple[Array, ...]  # input to each computed layer, (B, d_l)
    pre: tuple[Array, ...]  # pre-activations z_l
    masks: tuple[Array | None, ...]  # scaled keep masks per hidden layer, None = no dropout
    output: Array  # (B, C) logits, or (B, m_emb) when truncated
    truncated: bool  # stopped at the embedding
    batched: bool  # caller passed a 2-D batch


def _as_batch(features: ArrayLike, input_dim: int) -> tuple[Array, bool]:
    X = np.asarray(features, dtype=np.float64)
    batched = X.ndim == 2
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != input_dim:
        raise ValueError(
            f"features of shape {np.shape(features)} do not match input dim {input_dim}"
        )
    return X, batched


def forward_params(
    weights: Sequence[Array],
    biases: Sequence[Array],
    dropout_rates: Sequence[float],
    X: Array,
    rng: np.random.Generator | None = None,
    masks: Sequence[ArrayLike | None] | None = None,
    embed_only: bool = False,
) -> ForwardCache:
    """
    Forward pass on raw parameter lists with a 2-D batch.

    `masks` are binary keep masks per hidden layer (broadcastable to (B, h));
    when given they override sampling. Otherwise a rate-0 layer draws nothing,
    so a dropout-free model consumes no randomness.
    """
    n_layers = len(weights)
    depth = n_layers - 1 if embed_only else n_layers
    inputs: list[Array] = []
    pre: list[Array] = []
    scaled: list[Array | None] = []

    a = X
    for li in range(depth):
        inputs.append(a)
        z = a @ weights[li] + biases[li]
        pre.append(z)
        if li == n_layers - 1:
            a = z
            break
        h = np.maximum(z, 0.0)
        rate = float(dropout_rates[li])
        mask: Array | None = None
        if masks is not None and masks[li] is not None:
            keep = np.broadcast_to(np.asarray(masks[li], dtype=np.float64), h.shape)
            mask = keep / (1.0 - rate)
        elif rng is not None and rate > 0.0:
            keep = rng.random(h.shape) >= rate
            mask = keep / (1.0 - rate)
        if mask is not None:
            h = h * mask
        scaled.append(mask)
        a = h

    if not np.isfinite(a).all():
        raise TrainingDivergedError("non-finite activation in forward pass")
    return ForwardCache(
        layer_dims=tuple([weights[0].shape[0], *(w.shape[1] for w in weights)]),
        inputs=tuple(inputs),
        pre=tuple(pre),
        masks=tuple(scaled),
        output=a,
        truncated=embed_only,
        batched=True,
    )


def forward(
    model: MlpModel,
    features: ArrayLike,
    mode: ForwardMode = DETERMINISTIC,
    *,
    masks: Sequence[ArrayLike | None] | None = None,
    embed_only: bool = False,
) -> tuple[Array, ForwardCache]:
    """
    Run f_θ on one feature vector or a (B, m) batch.

    Returns the logits (or the last hidden activation when `embed_only`) with the
    same leading shape as the input, plus the cache `backward` needs.
    """
    if embed_only and model.n_hidden == 0:
        raise InvariantViolationError("model has no hidden layer to embed with")
    X, batched = _as_batch(features, model.input_dim)
    rng = as_generator(mode.rng) if isinstance(mode, Stochastic) else None
    cache = forward_params(
        model.weights, model.biases, model.dropout_rates, X, rng, masks, embed_only
    )
    cache = replace(cache, batched=batched)
    out = cache.output if batched else cache.output[0]
    return out, cache


# --------------------------- Loss -------------------------------------


def softmax(logits: ArrayLike) -> Array:
    """Row-wise softmax with max subtraction; rejects non-finite logits."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(z).all():
        raise ValueError("softmax needs finite logits")
    return np.asarray(_scipy_softmax(z, axis=-1), dtype=np.float64)


def cross_entropy_loss(probs: ArrayLike, true_label: int) -> float:
    """−ln p_true (natural log), with p clamped at CE_EPS."""
    p = np.asarray(probs, dtype=np.float64)
    return float(-np.log(max(float(p[int(true_label)]), CE_EPS)))


def mean_cross_entropy(probs: Array, labels: NDArray[np.int64]) -> float:
    picked = probs[np.arange(labels.shape[0]), labels]
    return float(-np.log(np.maximum(picked, CE_EPS)).mean())


# --------------------------- Backward ---------------------------------


def backward_params(
    weights: Sequence[Array],
    cache: ForwardCache,
    grad_out: Array,
    params: Sequence[Array] | None = None,
    l2_weight: float = 0.0,
) -> list[Array]:
    """
    Gradients [dW0, db0, ...] given dLoss/d(cache.output).

    Layers above a truncated pass get zero gradients. With `l2_weight` the term
    (λ/2)·Σθ² is added, i.e. λθ per parameter (`params` must then be given).
    """
    n_layers = len(weights)
    dims = tuple([weights[0].shape[0], *(w.shape[1] for w in weights)])
    if dims != cache.layer_dims:
        raise ValueError(f"stale cache: built for {list(cache.layer_dims)}, model is {list(dims)}")
    g = np.asarray(grad_out, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != cache.output.shape:
        raise ValueError(f"stale cache: gradient {g.shape} vs output {cache.output.shape}")

    grads: list[Array] = []
    for w in weights:
        grads.extend((np.zeros_like(w), np.zeros(w.shape[1])))

    top = len(cache.pre)
    for li in range(top - 1, -1, -1):
        if li < n_layers - 1:
            # g is dLoss/dh for hidden layer li
            mask = cache.masks[li]
            if mask is not None:
                g = g * mask
            g = g * (cache.pre[li] > 0.0)
        grads[2 * li] = cache.inputs[li].T @ g
        grads[2 * li + 1] = g.sum(axis=0)
        if li > 0:
            g = g @ weights[li].T

    if l2_weight:
        if params is None:
            raise ValueError("params are required for the L2 term")
        grads = [gr + l2_weight * p for gr, p in zip(grads, params, strict=True)]
    return grads


def backward_from(
    model: MlpModel, cache: ForwardCache, grad_out: ArrayLike, l2_weight: float = 0.0
) -> list[Array]:
    return backward_params(
        model.weights, cache, np.asarray(grad_out, dtype=np.float64), model.params(), l2_weight
    )


def backward(
    model: MlpModel,
    cache: ForwardCache,
    true_label: int | ArrayLike,
    l2_weight: float = 0.0,
) -> list[Array]:
    """
    Exact gradients of mean cross-entropy (+ (λ/2)·Σθ²) for the cached pass.

    dLoss/dlogits = (softmax − onehot) / B, masks from the cache are reused.
    """
    if cache.truncated:
        raise ValueError("cross-entropy backward needs a full (non-embedding) forward")
    logits = cache.output
    labels = np.atleast_1d(np.asarray(true_label, dtype=np.int64))
    if labels.shape[0] != logits.shape[0]:
        raise ValueError("one label per cached row is required")
    if (labels < 0).any() or (labels >= logits.shape[1]).any():
        raise ValueError("label outside the model's classes")
    dlogits = softmax(logits)
    dlogits[np.arange(labels.shape[0]), labels] -= 1.0
    dlogits /= labels.shape[0]
    return backward_from(model, cache, dlogits, l2_weight)
