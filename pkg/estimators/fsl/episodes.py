# estimators/fsl/episodes.py
from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from utils.data.dataset_io import dataset_lines
from utils.data.samples import Dataset, LabeledSample
from utils.errors import EpisodeSamplingError, InvariantViolationError
from utils.rng import RngStream, as_generator

__all__ = ["Episode", "sample_episode", "write_episode"]


@dataclass(frozen=True, slots=True, eq=False)
class Episode:
    """C-way K-shot task: K support samples per class plus held-out queries."""

    support: Mapping[int, tuple[LabeledSample, ...]]
    queries: tuple[LabeledSample, ...]
    way: int
    shot: int

    def __post_init__(self) -> None:
        support = {int(c): tuple(self.support[c]) for c in sorted(self.support)}
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "queries", tuple(self.queries))
        if len(support) != self.way:
            raise InvariantViolationError(f"{len(support)} support classes for way={self.way}")
        for c, samples in support.items():
            if len(samples) != self.shot:
                raise InvariantViolationError(
                    f"class {c} has {len(samples)} support samples, shot={self.shot}"
                )
        stray = {q.label for q in self.queries} - set(support)
        if stray:
            raise InvariantViolationError(f"query labels {sorted(stray)} have no support")
        support_ids = {id(s) for samples in support.values() for s in samples}
        if any(id(q) in support_ids for q in self.queries):
            raise InvariantViolationError("a sample appears in both support and queries")

    @property
    def classes(self) -> tuple[int, ...]:
        return tuple(self.support)

    def support_matrix(self) -> NDArray[np.float64]:
        """(C*K, m) support features, class-major in class order."""
        return np.stack([s.features for c in self.classes for s in self.support[c]])

    def query_matrix(self) -> NDArray[np.float64]:
        return np.stack([q.features for q in self.queries])

    def query_labels(self) -> NDArray[np.int64]:
        return np.array([q.label for q in self.queries], dtype=np.int64)


def sample_episode(
    ds: Dataset,
    way: int = 2,
    shot: int = 5,
    query_per_class: int = 5,
    rng: RngStream | np.random.Generator | int = 0,
) -> Episode:
    """
    Draw `way` classes uniformly, then shot + query_per_class samples per class
    without replacement. A Generator argument is advanced in place.
    """
    if way < 1 or shot < 1 or query_per_class < 0:
        raise ValueError("way and shot must be >= 1, query_per_class >= 0")
    gen = as_generator(rng)
    by_class = ds.by_class()
    if len(by_class) < way:
        raise EpisodeSamplingError(
            f"dataset '{ds.name}' has {len(by_class)} classes, episode needs {way}"
        )
    classes = np.sort(gen.choice(sorted(by_class), size=way, replace=False))
    need = shot + query_per_class
    support: dict[int, tuple[LabeledSample, ...]] = {}
    queries: list[LabeledSample] = []
    for c in classes.tolist():
        pool = by_class[c]
        if len(pool) < need:
            raise EpisodeSamplingError(
                f"class {c} of '{ds.name}' has {len(pool)} samples, episode needs {need}",
                label=c,
            )
        picked = gen.choice(pool, size=need, replace=False)
        support[c] = tuple(ds.samples[i] for i in picked[:shot])
        queries.extend(ds.samples[i] for i in picked[shot:])
    return Episode(support=support, queries=tuple(queries), way=way, shot=shot)


def write_episode(episode: Episode, path: str | Path) -> Path:
    """Dataset-format lines with an extra "role": "support" | "query"."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    support: Sequence[LabeledSample] = [s for c in episode.classes for s in episode.support[c]]
    body = dataset_lines(support, [{"role": "support"}] * len(support))
    body += dataset_lines(episode.queries, [{"role": "query"}] * len(episode.queries))
    path.write_bytes(body)
    return path
