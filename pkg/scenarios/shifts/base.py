# scenarios/shifts/base.py
# ---------------------------------------------------------------------
# Shared geometry of the synthetic shift suite.
#
# Two classes in R^m with unit isotropic noise. Class means sit on the
# discriminative axis e = ones/sqrt(m):  mu_0 = -(s/2) e,  mu_1 = +(s/2) e.
# Shifts move mass along e and along a second unit axis f orthogonal to e
# (alternating signs, Gram-Schmidt against e).
#
# Every generator is a pure function of (params, seed).
# ---------------------------------------------------------------------
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import NDArray

from utils.data.samples import (
    EXT_5AD,
    EXT_PROT,
    IN_TEST,
    OOD_CAD,
    OOD_CXR,
    OOD_SCC,
    Dataset,
    DistributionTag,
)
from utils.rng import RngStream

__all__ = [
    "ShiftKind",
    "ShiftScenario",
    "InDomainParams",
    "DEFAULT_IN_DOMAIN",
    "CLASS_COUNT",
    "axes",
    "class_means",
    "sample_in_domain",
    "build_dataset",
]

CLASS_COUNT = 2


class ShiftKind(str, Enum):
    INTERNAL_TEST = "internal_test"
    SUBTYPE_SHIFT = "subtype_shift"
    COVARIATE_SHIFT = "covariate_shift"
    NOVEL_CONDITION = "novel_condition"
    ORGAN_SHIFT = "organ_shift"
    MODALITY_SHIFT = "modality_shift"

    @property
    def tag(self) -> DistributionTag:
        return _KIND_TAGS[self]


_KIND_TAGS: dict[ShiftKind, DistributionTag] = {
    ShiftKind.INTERNAL_TEST: IN_TEST,
    ShiftKind.SUBTYPE_SHIFT: EXT_5AD,
    ShiftKind.COVARIATE_SHIFT: EXT_PROT,
    ShiftKind.NOVEL_CONDITION: OOD_SCC,
    ShiftKind.ORGAN_SHIFT: OOD_CAD,
    ShiftKind.MODALITY_SHIFT: OOD_CXR,
}


@dataclass(frozen=True)
class InDomainParams:
    """The unshifted generative process (training distribution)."""

    feature_dim: int = 8
    separation: float = 6.0  # distance between the two class means, in noise std units
    n_train_per_class: int = 200
    n_test_per_class: int = 50

    def __post_init__(self) -> None:
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.separation < 0.0:
            raise ValueError("separation must be >= 0")
        if self.n_train_per_class < 1 or self.n_test_per_class < 1:
            raise ValueError("n_per_class must be >= 1")


# Module-level default (OK for B008)
DEFAULT_IN_DOMAIN = InDomainParams()


@dataclass(frozen=True)
class ShiftScenario:
    kind: ShiftKind
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0


def axes(m: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """(e, f): the class axis and a unit axis orthogonal to it (f = 0 when m = 1)."""
    e = np.ones(m) / np.sqrt(m)
    alt = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
    f = alt - (alt @ e) * e
    norm = np.linalg.norm(f)
    return e, (f / norm if norm > 0.0 else np.zeros(m))


def class_means(base: InDomainParams) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    e, _ = axes(base.feature_dim)
    half = 0.5 * base.separation
    return -half * e, half * e


def _draw_class(
    gen: np.random.Generator, mean: NDArray[np.float64], n: int
) -> NDArray[np.float64]:
    return mean + gen.standard_normal((n, mean.shape[0]))


def _draw_blocks(
    gen: np.random.Generator, base: InDomainParams, n_per_class: int
) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    mu0, mu1 = class_means(base)
    X = np.concatenate([_draw_class(gen, mu0, n_per_class), _draw_class(gen, mu1, n_per_class)])
    y = np.repeat(np.arange(CLASS_COUNT, dtype=np.int64), n_per_class)
    return X, y


def sample_in_domain(
    base: InDomainParams, n_per_class: int, seed: int
) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    """Class-0 block then class-1 block from RngStream(seed)."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    return _draw_blocks(RngStream(seed).generator(), base, n_per_class)


def build_dataset(
    X: NDArray[np.float64],
    y: NDArray[np.int64],
    tag: DistributionTag,
    shift: str | list[str],
    extra_meta: list[dict[str, str]] | None = None,
) -> Dataset:
    """Dataset named after `tag`; every sample records its shift kind in meta."""
    shifts = [shift] * len(y) if isinstance(shift, str) else shift
    meta = [{"shift": s} for s in shifts]
    if extra_meta is not None:
        meta = [{**m, **x} for m, x in zip(meta, extra_meta, strict=True)]
    return Dataset.from_arrays(X, y, tag=tag, name=tag.value, class_count=CLASS_COUNT, meta=meta)
