# utils/data/split.py
from __future__ import annotations

from collections.abc import Iterable, Sequence

import numpy as np

from utils.data.samples import Dataset
from utils.errors import InvariantViolationError
from utils.rng import RngStream

__all__ = ["split_dataset", "check_disjoint", "FRACTION_SUM_TOL"]

FRACTION_SUM_TOL = 1e-9


def split_dataset(ds: Dataset, fractions: Sequence[float], seed: int) -> list[Dataset]:
    """
    Shuffle `ds` under `seed` and cut it into consecutive parts of the given fractions.

    Part sizes are floor(f * N); the rounding remainder goes to the last part.
    Parts are named "<name>/<i>" and keep the input class count.
    """
    if not fractions:
        raise InvariantViolationError("at least one fraction is required")
    fr = np.asarray(fractions, dtype=np.float64)
    if (fr <= 0.0).any() or not np.isfinite(fr).all():
        raise InvariantViolationError(f"fractions must be positive, got {list(fractions)}")
    if abs(float(fr.sum()) - 1.0) > FRACTION_SUM_TOL:
        raise InvariantViolationError(f"fractions sum to {float(fr.sum())!r}, not 1")

    n = len(ds)
    sizes = np.floor(fr * n).astype(np.int64)
    sizes[-1] = n - int(sizes[:-1].sum())
    if (sizes <= 0).any():
        raise InvariantViolationError(
            f"split of {n} samples by {list(fractions)} leaves an empty partition"
        )

    order = RngStream(seed).generator().permutation(n)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return [
        ds.subset(np.sort(order[lo:hi]), name=f"{ds.name}/{i}")
        for i, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:], strict=True))
    ]


def check_disjoint(datasets: Iterable[Dataset]) -> None:
    """Raise if two datasets share a sample identity (source name, line index), not content."""
    seen: dict[tuple[str, int], str] = {}
    for ds in datasets:
        for key in ds.identities():
            if key in seen:
                raise InvariantViolationError(
                    f"datasets '{seen[key]}' and '{ds.name}' share sample {key[0]}:{key[1]}"
                )
            seen[key] = ds.name
