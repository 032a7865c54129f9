# utils/data/samples.py
from __future__ import annotations

from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from utils.errors import InvariantViolationError

__all__ = [
    "TagKind",
    "DistributionTag",
    "IN_TRAIN",
    "IN_TEST",
    "EXT_PROT",
    "EXT_5AD",
    "OOD_SCC",
    "OOD_CAD",
    "OOD_CXR",
    "STANDARD_TAGS",
    "EVALUATION_TAGS",
    "LabeledSample",
    "Dataset",
    "PredictionRecord",
    "PROB_SUM_TOL",
]

PROB_SUM_TOL = 1e-9


# ---- Distribution tags ------------------------------------------------------
class TagKind(str, Enum):
    IN_TRAIN = "in_train"
    IN_TEST = "in_test"
    EXT_PROT = "ext_prot"  # covariate shift, p(y|x) fixed
    EXT_5AD = "ext_5ad"  # disease sub-types
    OOD_SCC = "ood_scc"  # novel condition, near
    OOD_CAD = "ood_cad"  # organ shift, far
    OOD_CXR = "ood_cxr"  # modality shift
    CUSTOM = "custom"


@dataclass(frozen=True, slots=True)
class DistributionTag:
    kind: TagKind
    name: str | None = None  # custom tags only

    def __post_init__(self) -> None:
        if self.kind is TagKind.CUSTOM:
            if not self.name:
                raise InvariantViolationError("custom distribution tag needs a name")
            if self.name in _BUILTIN_VALUES or self.name == TagKind.CUSTOM.value:
                raise InvariantViolationError(f"custom tag name '{self.name}' is reserved")
        elif self.name is not None:
            raise InvariantViolationError("only custom distribution tags carry a name")

    @classmethod
    def parse(cls, text: str | DistributionTag) -> DistributionTag:
        if isinstance(text, DistributionTag):
            return text
        value = str(text).strip()
        if value in _BUILTIN_VALUES:
            return cls(TagKind(value))
        return cls(TagKind.CUSTOM, value)

    @property
    def value(self) -> str:
        if self.kind is TagKind.CUSTOM:
            return str(self.name)
        return self.kind.value

    @property
    def is_training(self) -> bool:
        """Tags drawn from the training distribution (never scored by FSL)."""
        return self.kind in (TagKind.IN_TRAIN, TagKind.IN_TEST)

    @property
    def is_ood(self) -> bool:
        return self.kind in (TagKind.OOD_SCC, TagKind.OOD_CAD, TagKind.OOD_CXR)

    def __str__(self) -> str:
        return self.value


_BUILTIN_VALUES = frozenset(k.value for k in TagKind if k is not TagKind.CUSTOM)

IN_TRAIN = DistributionTag(TagKind.IN_TRAIN)
IN_TEST = DistributionTag(TagKind.IN_TEST)
EXT_PROT = DistributionTag(TagKind.EXT_PROT)
EXT_5AD = DistributionTag(TagKind.EXT_5AD)
OOD_SCC = DistributionTag(TagKind.OOD_SCC)
OOD_CAD = DistributionTag(TagKind.OOD_CAD)
OOD_CXR = DistributionTag(TagKind.OOD_CXR)

STANDARD_TAGS: tuple[DistributionTag, ...] = (
    IN_TRAIN,
    IN_TEST,
    EXT_PROT,
    EXT_5AD,
    OOD_SCC,
    OOD_CAD,
    OOD_CXR,
)
EVALUATION_TAGS: tuple[DistributionTag, ...] = STANDARD_TAGS[1:]


def _frozen_array(values: ArrayLike, ndim: int) -> NDArray[np.float64]:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise InvariantViolationError(f"expected a {ndim}-D array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


# ---- Data carriers ----------------------------------------------------------
@dataclass(frozen=True, slots=True, eq=False)
class LabeledSample:
    features: NDArray[np.float64]
    label: int
    dist_tag: DistributionTag
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", _frozen_array(self.features, ndim=1))
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "meta", dict(self.meta))
        self.validate()

    def validate(self) -> None:
        if not np.isfinite(self.features).all():
            raise InvariantViolationError("non-finite value in sample features")
        if self.label < 0:
            raise InvariantViolationError(f"label must be >= 0, got {self.label}")

    @property
    def shift(self) -> str:
        """Shift provenance recorded by the generators ('none' = unchanged process)."""
        return self.meta.get("shift", "none")


@dataclass(frozen=True, slots=True, eq=False)
class Dataset:
    samples: tuple[LabeledSample, ...]
    class_count: int
    feature_dim: int
    name: str
    _X: NDArray[np.float64] = field(init=False, repr=False)
    _y: NDArray[np.int64] = field(init=False, repr=False)
    # (source dataset name, line index) per sample; defaults to (name, position)
    origins: tuple[tuple[str, int], ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        samples = tuple(self.samples)
        object.__setattr__(self, "samples", samples)
        if not samples:
            raise InvariantViolationError(f"dataset '{self.name}': empty dataset")
        if self.class_count < 1 or self.feature_dim < 1:
            raise InvariantViolationError("class_count and feature_dim must be >= 1")
        for i, s in enumerate(samples):
            if s.features.shape[0] != self.feature_dim:
                raise InvariantViolationError(
                    f"dataset '{self.name}' sample {i}: feature length "
                    f"{s.features.shape[0]} != {self.feature_dim}"
                )
            if s.label >= self.class_count:
                raise InvariantViolationError(
                    f"dataset '{self.name}' sample {i}: label {s.label} out of range "
                    f"for class_count {self.class_count}"
                )
        X = np.stack([s.features for s in samples])
        X.setflags(write=False)
        y = np.fromiter((s.label for s in samples), dtype=np.int64, count=len(samples))
        y.setflags(write=False)
        object.__setattr__(self, "_X", X)
        object.__setattr__(self, "_y", y)
        origins = tuple((str(n), int(i)) for n, i in self.origins) or tuple(
            (self.name, i) for i in range(len(samples))
        )
        if len(origins) != len(samples):
            raise InvariantViolationError(
                f"dataset '{self.name}': {len(origins)} origins for {len(samples)} samples"
            )
        object.__setattr__(self, "origins", origins)

    # -- construction helpers --------------------------------------------------
    @classmethod
    def from_arrays(
        cls,
        features: ArrayLike,
        labels: ArrayLike,
        tag: DistributionTag,
        name: str,
        class_count: int,
        meta: Sequence[Mapping[str, str]] | None = None,
    ) -> Dataset:
        X = np.asarray(features, dtype=np.float64)
        y = np.asarray(labels, dtype=np.int64).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise InvariantViolationError("features must be (N, m) with one label per row")
        metas: Sequence[Mapping[str, str]] = meta if meta is not None else [{}] * len(y)
        samples = tuple(
            LabeledSample(features=X[i], label=int(y[i]), dist_tag=tag, meta=metas[i])
            for i in range(y.shape[0])
        )
        return cls(samples=samples, class_count=class_count, feature_dim=X.shape[1], name=name)

    def subset(self, indices: Sequence[int] | NDArray[np.int64], name: str) -> Dataset:
        return Dataset(
            samples=tuple(self.samples[int(i)] for i in indices),
            class_count=self.class_count,
            feature_dim=self.feature_dim,
            name=name,
            origins=tuple(self.origins[int(i)] for i in indices),
        )

    @classmethod
    def concat(
        cls, parts: Sequence[Dataset], name: str, tag: DistributionTag | None = None
    ) -> Dataset:
        """Pool datasets; with `tag` every sample is re-tagged (provenance kept in meta)."""
        if not parts:
            raise InvariantViolationError("nothing to concatenate")
        dims = {p.feature_dim for p in parts}
        if len(dims) != 1:
            raise InvariantViolationError(f"inconsistent feature dimensions {sorted(dims)}")
        samples: list[LabeledSample] = []
        for part in parts:
            for s in part.samples:
                if tag is None or s.dist_tag == tag:
                    samples.append(s)
                else:
                    meta = {**s.meta, "pooled_from": s.dist_tag.value}
                    samples.append(LabeledSample(s.features, s.label, tag, meta))
        return cls(
            samples=tuple(samples),
            class_count=max(p.class_count for p in parts),
            feature_dim=dims.pop(),
            name=name,
            origins=tuple(o for p in parts for o in p.origins),
        )

    # -- views ------------------------------------------------------------------
    @property
    def X(self) -> NDArray[np.float64]:
        return self._X

    @property
    def y(self) -> NDArray[np.int64]:
        return self._y

    @property
    def tag(self) -> DistributionTag | None:
        """The common distribution tag, or None when samples are mixed."""
        tags = {s.dist_tag for s in self.samples}
        return tags.pop() if len(tags) == 1 else None

    def tags(self) -> set[DistributionTag]:
        return {s.dist_tag for s in self.samples}

    def by_class(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for i, label in enumerate(self._y.tolist()):
            out.setdefault(int(label), []).append(i)
        return out

    def identities(self) -> set[tuple[str, int]]:
        """Sample identity is (source dataset name, line index); subsets and pools keep it."""
        return set(self.origins)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[LabeledSample]:
        return iter(self.samples)


@dataclass(frozen=True, slots=True, eq=False)
class PredictionRecord:
    probs: NDArray[np.float64]
    true_label: int
    uncertainty: float
    method: str
    spread: float = 0.0  # dispersion across passes/members; 0 for single models

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", _frozen_array(self.probs, ndim=1))
        object.__setattr__(self, "true_label", int(self.true_label))
        object.__setattr__(self, "uncertainty", float(self.uncertainty))
        object.__setattr__(self, "spread", float(self.spread))
        self.validate()

    def validate(self) -> None:
        p = self.probs
        if p.size == 0 or not np.isfinite(p).all():
            raise InvariantViolationError("probability vector must be non-empty and finite")
        if (p < 0.0).any() or (p > 1.0).any():
            raise InvariantViolationError("probability entries must lie in [0, 1]")
        if abs(float(p.sum()) - 1.0) > PROB_SUM_TOL:
            raise InvariantViolationError(f"probabilities sum to {float(p.sum())!r}, not 1")
        if not (0 <= self.true_label < p.size):
            raise InvariantViolationError(f"true_label {self.true_label} outside probs")
        if not np.isfinite(self.uncertainty) or self.uncertainty < 0.0:
            raise InvariantViolationError("uncertainty must be finite and >= 0")
        if not np.isfinite(self.spread) or self.spread < 0.0:
            raise InvariantViolationError("spread must be finite and >= 0")

    @property
    def predicted_label(self) -> int:
        """argmax of probs; ties go to the lower class index."""
        return int(np.argmax(self.probs))

    @property
    def correct(self) -> bool:
        return self.predicted_label == self.true_label

    def to_dict(self) -> dict[str, Any]:
        return {
            "probs": self.probs.tolist(),
            "label": self.true_label,
            "uncertainty": self.uncertainty,
            "method": self.method,
            "spread": self.spread,
        }
