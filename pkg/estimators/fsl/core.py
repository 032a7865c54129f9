# estimators/fsl/core.py
# ---------------------------------------------------------------------
# Prototypical few-shot classification on top of an MlpModel backbone.
#
#   embed(x)   = last hidden activation of the deterministic forward
#   z_c        = mean of the support embeddings of class c
#   p(y=c | x) = softmax_c( -||embed(x) - z_c|| )
#   uncertainty = 1 - max_c p
#
# Probability vectors span the model's class range; classes without a
# prototype get probability 0.
# ---------------------------------------------------------------------
from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import cdist

from estimators.base import PredictorBase, average_rows, make_records
from nets.mlp import MlpModel, forward, softmax
from utils.data.samples import LabeledSample, PredictionRecord
from utils.errors import InvariantViolationError

__all__ = [
    "PrototypeSet",
    "ProtoPredictor",
    "embed",
    "compute_prototypes",
    "proto_probabilities",
    "proto_predict",
]

Array = NDArray[np.float64]


@dataclass(frozen=True, slots=True, eq=False)
class PrototypeSet:
    prototypes: Mapping[int, Array]

    def __post_init__(self) -> None:
        if not self.prototypes:
            raise InvariantViolationError("prototype set has no classes")
        frozen: dict[int, Array] = {}
        for c in sorted(self.prototypes):
            z = np.array(self.prototypes[c], dtype=np.float64)
            if z.ndim != 1 or not np.isfinite(z).all():
                raise InvariantViolationError(f"prototype {c} must be a finite vector")
            z.setflags(write=False)
            frozen[int(c)] = z
        if len({z.shape for z in frozen.values()}) != 1:
            raise InvariantViolationError("prototypes differ in dimension")
        object.__setattr__(self, "prototypes", frozen)

    @property
    def classes(self) -> tuple[int, ...]:
        return tuple(self.prototypes)

    @property
    def dim(self) -> int:
        return next(iter(self.prototypes.values())).shape[0]

    def matrix(self) -> Array:
        """(k, m) prototypes in class order."""
        return np.stack(list(self.prototypes.values()))


def embed(model: MlpModel, x: ArrayLike) -> Array:
    """Deterministic forward truncated at the last hidden layer (no dropout)."""
    out, _ = forward(model, x, embed_only=True)
    return out


def _features(samples: Sequence[LabeledSample] | ArrayLike) -> Array:
    if isinstance(samples, Sequence) and samples and isinstance(samples[0], LabeledSample):
        return np.stack([s.features for s in samples])  # type: ignore[union-attr]
    return np.atleast_2d(np.asarray(samples, dtype=np.float64))


def compute_prototypes(
    model: MlpModel, support: Mapping[int, Sequence[LabeledSample] | ArrayLike]
) -> PrototypeSet:
    if not support:
        raise InvariantViolationError("support set has no classes")
    protos: dict[int, Array] = {}
    for c, samples in support.items():
        X = _features(samples)
        if X.shape[0] == 0 or X.size == 0:
            raise InvariantViolationError(f"class {c} has no support samples")
        protos[int(c)] = average_rows(embed(model, X))
    return PrototypeSet(protos)


def proto_probabilities(embeddings: ArrayLike, prototypes: ArrayLike) -> Array:
    """(B, k) softmax over negative Euclidean distances to the k prototypes."""
    E = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    Z = np.atleast_2d(np.asarray(prototypes, dtype=np.float64))
    if E.shape[1] != Z.shape[1]:
        raise ValueError(f"embedding dim {E.shape[1]} != prototype dim {Z.shape[1]}")
    return softmax(-cdist(E, Z, metric="euclidean"))


class ProtoPredictor(PredictorBase):
    method = "fsl"

    def __init__(
        self,
        model: MlpModel,
        protos: PrototypeSet,
        class_count: int | None = None,
        name: str = "",
    ) -> None:
        super().__init__(config=None, name=name)
        if protos.dim != model.embedding_dim:
            raise InvariantViolationError(
                f"prototype dim {protos.dim} != embedding dim {model.embedding_dim}"
            )
        self.model = model
        self.protos = protos
        self.class_count = class_count or max(model.class_count, max(protos.classes) + 1)

    @property
    def input_dim(self) -> int:
        return self.model.input_dim

    def predict_batch(
        self, X: NDArray[np.float64], labels: NDArray[np.int64]
    ) -> list[PredictionRecord]:
        local = proto_probabilities(embed(self.model, np.atleast_2d(X)), self.protos.matrix())
        probs = np.zeros((local.shape[0], self.class_count))
        probs[:, list(self.protos.classes)] = local
        return make_records(probs, labels, 1.0 - local.max(axis=1), self.method)


def proto_predict(
    model: MlpModel,
    protos: PrototypeSet,
    x: ArrayLike | LabeledSample,
    true_label: int | None = None,
) -> PredictionRecord:
    return ProtoPredictor(model, protos).predict(x, true_label)
