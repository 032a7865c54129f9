# scenarios/shifts/subtype_shift.py
# ---------------------------------------------------------------------
# Disease sub-types: the positive cluster is replaced by k sub-clusters on
# a circle of radius `spread` around the original mean, in the (e, f) plane:
#
#   c_j = mu_1 + spread * (cos(2 pi j / k) e + sin(2 pi j / k) f)
#
# All sub-type samples keep label 1; meta["subtype"] = str(j).
# ---------------------------------------------------------------------
from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from scenarios.shifts.base import (
    DEFAULT_IN_DOMAIN,
    InDomainParams,
    ShiftKind,
    axes,
    build_dataset,
    class_means,
)
from utils.data.samples import Dataset
from utils.rng import RngStream

__all__ = [
    "subtype_centers",
    "gen_subtype_shift",
    "DEFAULT_SUBTYPES",
    "DEFAULT_SUBTYPE_SPREAD",
    "DEFAULT_PER_SUBTYPE",
]

DEFAULT_SUBTYPES = 5
DEFAULT_SUBTYPE_SPREAD = 3.5
DEFAULT_PER_SUBTYPE = 10


def subtype_centers(base: InDomainParams, k_subtypes: int, spread: float) -> NDArray[np.float64]:
    """(k, m) sub-cluster means."""
    if k_subtypes < 2:
        raise ValueError("k_subtypes must be >= 2")
    if spread < 0.0:
        raise ValueError("spread must be >= 0")
    e, f = axes(base.feature_dim)
    _, mu1 = class_means(base)
    phi = 2.0 * np.pi * np.arange(k_subtypes) / k_subtypes
    return mu1 + spread * (np.outer(np.cos(phi), e) + np.outer(np.sin(phi), f))


def gen_subtype_shift(
    base: InDomainParams = DEFAULT_IN_DOMAIN,
    k_subtypes: int = DEFAULT_SUBTYPES,
    spread: float = DEFAULT_SUBTYPE_SPREAD,
    seed: int = 0,
    n_per_subtype: int = DEFAULT_PER_SUBTYPE,
) -> Dataset:
    """Positive-only sub-type samples, sub-type blocks in index order."""
    if n_per_subtype < 1:
        raise ValueError("n_per_subtype must be >= 1")
    centers = subtype_centers(base, k_subtypes, spread)
    gen = RngStream(seed).generator()
    X = np.concatenate(
        [c + gen.standard_normal((n_per_subtype, base.feature_dim)) for c in centers]
    )
    y = np.ones(X.shape[0], dtype=np.int64)
    subtypes = [{"subtype": str(j)} for j in range(k_subtypes) for _ in range(n_per_subtype)]
    return build_dataset(
        X, y, ShiftKind.SUBTYPE_SHIFT.tag, ShiftKind.SUBTYPE_SHIFT.value, extra_meta=subtypes
    )
