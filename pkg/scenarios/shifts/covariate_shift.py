# scenarios/shifts/covariate_shift.py
# ---------------------------------------------------------------------
# Same disease, shifted measurement process:  x <- s * R x + b
# applied to samples of the unchanged in-domain process. Labels unchanged.
# ---------------------------------------------------------------------
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from scenarios.shifts.base import (
    DEFAULT_IN_DOMAIN,
    InDomainParams,
    ShiftKind,
    axes,
    build_dataset,
    sample_in_domain,
)
from utils.data.samples import Dataset

__all__ = [
    "AffineTransform",
    "IDENTITY",
    "plane_rotation",
    "covariate_transform",
    "gen_covariate_shift",
    "DEFAULT_COVARIATE_ANGLE_DEG",
    "DEFAULT_COVARIATE_SCALE",
    "DEFAULT_COVARIATE_OFFSET",
]

DEFAULT_COVARIATE_ANGLE_DEG = 35.0
DEFAULT_COVARIATE_SCALE = 1.75
DEFAULT_COVARIATE_OFFSET = 0.5  # along f


@dataclass(frozen=True, eq=False)
class AffineTransform:
    scale: float = 1.0
    rotation: NDArray[np.float64] | None = None  # (m, m) orthogonal; None = identity
    offset: NDArray[np.float64] | None = None  # (m,); None = 0
    _dims: tuple[int, ...] = field(init=False, repr=False, default=())

    def __post_init__(self) -> None:
        if not np.isfinite(self.scale) or self.scale <= 0.0:
            raise ValueError("scale must be a positive finite number")
        dims: list[int] = []
        if self.rotation is not None:
            R = np.array(self.rotation, dtype=np.float64)
            if R.ndim != 2 or R.shape[0] != R.shape[1]:
                raise ValueError("rotation must be a square matrix")
            if not np.allclose(R @ R.T, np.eye(R.shape[0]), atol=1e-9):
                raise ValueError("rotation must be orthogonal")
            R.setflags(write=False)
            object.__setattr__(self, "rotation", R)
            dims.append(R.shape[0])
        if self.offset is not None:
            b = np.array(self.offset, dtype=np.float64).ravel()
            if not np.isfinite(b).all():
                raise ValueError("offset must be finite")
            b.setflags(write=False)
            object.__setattr__(self, "offset", b)
            dims.append(b.shape[0])
        if len(set(dims)) > 1:
            raise ValueError(f"rotation and offset disagree on dimension: {dims}")
        object.__setattr__(self, "_dims", tuple(dims))

    def apply(self, X: ArrayLike) -> NDArray[np.float64]:
        """Row-wise s * R x + b."""
        A = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self._dims and A.shape[1] != self._dims[0]:
            raise ValueError(f"transform is {self._dims[0]}-dimensional, got {A.shape[1]}")
        out = A if self.rotation is None else A @ self.rotation.T
        out = self.scale * out
        return out if self.offset is None else out + self.offset

    @property
    def is_identity(self) -> bool:
        rotates = self.rotation is not None and not np.array_equal(
            self.rotation, np.eye(self.rotation.shape[0])
        )
        shifts = self.offset is not None and bool(self.offset.any())
        return self.scale == 1.0 and not rotates and not shifts


IDENTITY = AffineTransform()


def plane_rotation(m: int, degrees: float) -> NDArray[np.float64]:
    """Rotation by `degrees` in the plane spanned by the class axis e and its partner f."""
    if m < 2:
        raise ValueError("a plane rotation needs feature_dim >= 2")
    e, f = axes(m)
    t = np.deg2rad(degrees)
    c, s = np.cos(t), np.sin(t)
    return (
        np.eye(m)
        + (c - 1.0) * (np.outer(e, e) + np.outer(f, f))
        + s * (np.outer(f, e) - np.outer(e, f))
    )


def covariate_transform(
    m: int,
    degrees: float = DEFAULT_COVARIATE_ANGLE_DEG,
    scale: float = DEFAULT_COVARIATE_SCALE,
    offset: float = DEFAULT_COVARIATE_OFFSET,
) -> AffineTransform:
    """The shipped measurement-process shift: rotate, magnify, push along f."""
    _, f = axes(m)
    return AffineTransform(scale=scale, rotation=plane_rotation(m, degrees), offset=offset * f)


def gen_covariate_shift(
    base: InDomainParams = DEFAULT_IN_DOMAIN,
    transform: AffineTransform | None = None,
    seed: int = 0,
    n_per_class: int | None = None,
) -> Dataset:
    """
    Draw `n_per_class` (default: the test size) per class from the in-domain
    process under `seed`, then apply `transform` (default: `covariate_transform`).
    The identity transform reproduces `sample_in_domain` bit for bit.
    """
    t = covariate_transform(base.feature_dim) if transform is None else transform
    n = base.n_test_per_class if n_per_class is None else n_per_class
    X, y = sample_in_domain(base, n, seed)
    shift = "none" if t.is_identity else ShiftKind.COVARIATE_SHIFT.value
    return build_dataset(t.apply(X), y, ShiftKind.COVARIATE_SHIFT.tag, shift)
