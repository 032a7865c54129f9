# scenarios/shifts/novel_condition.py
# ---------------------------------------------------------------------
# A condition the classifier never saw: the normal class is drawn from the
# unchanged process, the positive cluster moves to mu_1 + d.
#
# Presets, in (e, f) coordinates:
#   near (same organ, other condition):     d = -1.5 e + 2.5 f   -> ood_scc
#   far  (same condition, other organ):     d = -2.4 e + 5.0 f   -> ood_cad
# ---------------------------------------------------------------------
from __future__ import annotations

from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

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

__all__ = ["NEAR_DISPLACEMENT", "FAR_DISPLACEMENT", "preset_displacement", "gen_novel_condition"]

NEAR_DISPLACEMENT = (-1.5, 2.5)
FAR_DISPLACEMENT = (-2.4, 5.0)

Preset = Literal["near", "far"]


def preset_displacement(
    m: int, coords: tuple[float, float] | Preset = "near"
) -> NDArray[np.float64]:
    """Displacement vector a e + b f from (a, b) or a preset name."""
    if isinstance(coords, str):
        if coords not in ("near", "far"):
            raise ValueError(f"unknown preset '{coords}' (near | far)")
        coords = NEAR_DISPLACEMENT if coords == "near" else FAR_DISPLACEMENT
    e, f = axes(m)
    return coords[0] * e + coords[1] * f


def gen_novel_condition(
    base: InDomainParams = DEFAULT_IN_DOMAIN,
    displacement: ArrayLike | Preset = "near",
    seed: int = 0,
    kind: ShiftKind = ShiftKind.NOVEL_CONDITION,
    n_per_class: int | None = None,
) -> Dataset:
    """
    Normal block (label 0, shift "none") then the displaced positive block
    (label 1, shift = `kind`). Zero displacement reproduces the in-domain
    disease class, recorded with shift "none".
    """
    if kind not in (ShiftKind.NOVEL_CONDITION, ShiftKind.ORGAN_SHIFT):
        raise ValueError(f"kind must be novel_condition or organ_shift, got {kind.value}")
    if isinstance(displacement, str):
        d = preset_displacement(base.feature_dim, displacement)
    else:
        d = np.asarray(displacement, dtype=np.float64).ravel()
    if d.shape != (base.feature_dim,) or not np.isfinite(d).all():
        raise ValueError(f"displacement must be a finite vector of length {base.feature_dim}")
    n = base.n_test_per_class if n_per_class is None else n_per_class
    if n < 1:
        raise ValueError("n_per_class must be >= 1")

    mu0, mu1 = class_means(base)
    gen = RngStream(seed).generator()
    X = np.concatenate(
        [
            mu0 + gen.standard_normal((n, base.feature_dim)),
            (mu1 + d) + gen.standard_normal((n, base.feature_dim)),
        ]
    )
    y = np.repeat(np.array([0, 1], dtype=np.int64), n)
    moved = kind.value if d.any() else "none"
    return build_dataset(X, y, kind.tag, ["none"] * n + [moved] * n)
