# scenarios/shifts/modality_shift.py
# ---------------------------------------------------------------------
# Different imaging modality: both classes come from another generative
# family. Class means sit at -/+ c f (orthogonal to the trained class axis),
# noise is anisotropic (std alternates between the two `stds` per
# coordinate), and every coordinate is squashed:
#
#   x <- amplitude * tanh(x / width)        inverse: width * artanh(x / amplitude)
# ---------------------------------------------------------------------
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from scenarios.shifts.base import (
    DEFAULT_IN_DOMAIN,
    InDomainParams,
    ShiftKind,
    axes,
    build_dataset,
)
from utils.data.samples import Dataset
from utils.rng import RngStream

__all__ = ["ModalityTransform", "DEFAULT_MODALITY", "gen_modality_shift"]


@dataclass(frozen=True)
class ModalityTransform:
    offset: float = 2.0  # class means at -/+ offset * f
    stds: tuple[float, float] = (0.3, 1.2)  # per-coordinate noise std, alternating
    amplitude: float = 0.5
    width: float = 3.0

    def __post_init__(self) -> None:
        if self.amplitude <= 0.0 or self.width <= 0.0:
            raise ValueError("amplitude and width must be > 0")
        if min(self.stds) <= 0.0:
            raise ValueError("stds must be > 0")

    def std_vector(self, m: int) -> NDArray[np.float64]:
        return np.where(np.arange(m) % 2 == 0, self.stds[0], self.stds[1])

    def squash(self, X: ArrayLike) -> NDArray[np.float64]:
        return self.amplitude * np.tanh(np.asarray(X, dtype=np.float64) / self.width)

    def unsquash(self, Y: ArrayLike) -> NDArray[np.float64]:
        """Inverse of `squash` on the open interval (-amplitude, amplitude)."""
        Y = np.asarray(Y, dtype=np.float64)
        if np.any(np.abs(Y) >= self.amplitude):
            raise ValueError("value outside the squashed range")
        return self.width * np.arctanh(Y / self.amplitude)


# Module-level default (OK for B008)
DEFAULT_MODALITY = ModalityTransform()


def gen_modality_shift(
    base: InDomainParams = DEFAULT_IN_DOMAIN,
    transform: ModalityTransform = DEFAULT_MODALITY,
    seed: int = 0,
    n_per_class: int | None = None,
) -> Dataset:
    n = base.n_test_per_class if n_per_class is None else n_per_class
    if n < 1:
        raise ValueError("n_per_class must be >= 1")
    m = base.feature_dim
    _, f = axes(m)
    std = transform.std_vector(m)
    gen = RngStream(seed).generator()
    raw = np.concatenate(
        [
            -transform.offset * f + std * gen.standard_normal((n, m)),
            transform.offset * f + std * gen.standard_normal((n, m)),
        ]
    )
    y = np.repeat(np.array([0, 1], dtype=np.int64), n)
    return build_dataset(
        transform.squash(raw), y, ShiftKind.MODALITY_SHIFT.tag, ShiftKind.MODALITY_SHIFT.value
    )
