# utils/rng.py
# ---------------------------------------------------------------------
# Reproducibility contract: a stream is fully named by (seed, stream_id,
# counter). Two RngStream values that compare equal hand out the same
# draw sequence, wherever and in whatever order they are used.
# ---------------------------------------------------------------------
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RngStream", "derive_seed", "as_generator"]


@dataclass(frozen=True, slots=True)
class RngStream:
    seed: int
    stream_id: int = 0
    counter: int = 0  # raw 64-bit draws skipped before the first use

    def __post_init__(self) -> None:
        if self.seed < 0 or self.stream_id < 0 or self.counter < 0:
            raise ValueError("seed, stream_id and counter must be non-negative")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at `counter`."""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        bitgen = np.random.PCG64(seq)
        if self.counter:
            bitgen.advance(self.counter)
        return np.random.Generator(bitgen)

    def child(self, index: int) -> RngStream:
        """Independent stream for sub-task `index` (MC pass, ensemble member, ...)."""
        return RngStream(seed=derive_seed(self.seed, self.stream_id, index), stream_id=0)


def derive_seed(master: int, *keys: int) -> int:
    """Stable 32-bit seed derived from a master seed and integer keys."""
    seq = np.random.SeedSequence(entropy=master, spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def as_generator(rng: RngStream | np.random.Generator | int) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(seed=int(rng)).generator()
