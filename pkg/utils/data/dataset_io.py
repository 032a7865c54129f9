# utils/data/dataset_io.py
# ---------------------------------------------------------------------
# Line-delimited record files (UTF-8, one JSON map per line).
#
#   dataset line : {"features": [..], "label": int, "dist": str, "meta"?: {..}}
#   logits line  : {"logits": [..] | "probs": [..], "label": int}
#   records line : logits line + "uncertainty", "method", "spread" and any
#                  extra keys the writer was given (harness bookkeeping)
#
# Files written by `write_dataset` are canonical: loading and writing them
# again reproduces the bytes exactly.
# ---------------------------------------------------------------------
from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np
import orjson

from evaluation.metrics import shannon_entropy
from nets.mlp import softmax
from utils.data.samples import Dataset, DistributionTag, LabeledSample, PredictionRecord
from utils.errors import DatasetFormatError, InvariantViolationError

__all__ = [
    "load_dataset",
    "write_dataset",
    "dataset_lines",
    "load_logits",
    "write_records",
    "read_records",
    "iter_json_lines",
    "PROBS_SUM_TOL_INPUT",
]

PROBS_SUM_TOL_INPUT = 1e-6


def iter_json_lines(path: Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """(line number, object) per non-blank line; DatasetFormatError on bad JSON or non-objects."""
    with path.open("rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = orjson.loads(raw)
            except orjson.JSONDecodeError as exc:
                raise DatasetFormatError(f"malformed record ({exc})", path, lineno) from exc
            if not isinstance(obj, dict):
                raise DatasetFormatError("record must be a JSON object", path, lineno)
            yield lineno, obj


def _real_vector(obj: Mapping[str, Any], key: str, path: Path, lineno: int) -> np.ndarray:
    values = obj.get(key)
    if not isinstance(values, list) or not values:
        raise DatasetFormatError(f"'{key}' must be a non-empty list of reals", path, lineno)
    if not all(isinstance(v, int | float) and not isinstance(v, bool) for v in values):
        raise DatasetFormatError(f"'{key}' must contain only numbers", path, lineno)
    arr = np.asarray(values, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise DatasetFormatError(f"non-finite value in '{key}'", path, lineno)
    return arr


def _label(obj: Mapping[str, Any], path: Path, lineno: int) -> int:
    label = obj.get("label")
    if not isinstance(label, int) or isinstance(label, bool) or label < 0:
        raise DatasetFormatError("'label' must be a non-negative integer", path, lineno)
    return label


def load_dataset(
    path: str | Path,
    expected_dim: int | None = None,
    class_count: int | None = None,
    name: str | None = None,
) -> Dataset:
    """
    Read a dataset file, validating every line as it streams.

    `class_count` defaults to (max label + 1); when given, labels outside it are
    reported with their line number. Sample order follows the file.
    """
    path = Path(path)
    samples: list[LabeledSample] = []
    lines: list[int] = []
    dim = expected_dim
    for lineno, obj in iter_json_lines(path):
        features = _real_vector(obj, "features", path, lineno)
        label = _label(obj, path, lineno)
        if dim is None:
            dim = features.shape[0]
        elif features.shape[0] != dim:
            raise DatasetFormatError(
                f"inconsistent feature dimension {features.shape[0]} (expected {dim})",
                path,
                lineno,
            )
        if class_count is not None and label >= class_count:
            raise DatasetFormatError(
                f"label {label} out of range for class_count {class_count}", path, lineno
            )
        dist = obj.get("dist")
        if not isinstance(dist, str) or not dist:
            raise DatasetFormatError("'dist' must be a non-empty string", path, lineno)
        meta = obj.get("meta", {})
        if not isinstance(meta, dict) or not all(isinstance(v, str) for v in meta.values()):
            raise DatasetFormatError("'meta' must map strings to strings", path, lineno)
        try:
            tag = DistributionTag.parse(dist)
            samples.append(LabeledSample(features=features, label=label, dist_tag=tag, meta=meta))
            lines.append(lineno - 1)
        except InvariantViolationError as exc:
            raise DatasetFormatError(str(exc), path, lineno) from exc

    if not samples:
        raise DatasetFormatError("empty dataset", path)
    assert dim is not None
    count = class_count if class_count is not None else max(s.label for s in samples) + 1
    ds_name = name or path.stem
    return Dataset(
        samples=tuple(samples),
        class_count=count,
        feature_dim=dim,
        name=ds_name,
        origins=tuple((ds_name, i) for i in lines),
    )


def _sample_line(sample: LabeledSample, extra: Mapping[str, Any] | None = None) -> bytes:
    record: dict[str, Any] = {
        "features": sample.features.tolist(),
        "label": sample.label,
        "dist": sample.dist_tag.value,
    }
    if sample.meta:
        record["meta"] = dict(sample.meta)
    if extra:
        record.update(extra)
    return orjson.dumps(record) + b"\n"


def dataset_lines(
    samples: Iterable[LabeledSample], extras: Iterable[Mapping[str, Any]] | None = None
) -> bytes:
    if extras is None:
        return b"".join(_sample_line(s) for s in samples)
    return b"".join(_sample_line(s, e) for s, e in zip(samples, extras, strict=True))


def write_dataset(ds: Dataset, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dataset_lines(ds.samples))
    return path


def load_logits(
    path: str | Path, class_count: int, method: str = "external"
) -> list[PredictionRecord]:
    """
    Score-ready records from an external model's outputs.

    Logits go through softmax; probability rows must already sum to 1 (±1e-6)
    and are renormalized exactly. Uncertainty is the entropy of the row in bits.
    """
    path = Path(path)
    records: list[PredictionRecord] = []
    for lineno, obj in iter_json_lines(path):
        has_logits, has_probs = "logits" in obj, "probs" in obj
        if has_logits == has_probs:
            raise DatasetFormatError(
                "record needs exactly one of 'logits' or 'probs'", path, lineno
            )
        label = _label(obj, path, lineno)
        if label >= class_count:
            raise DatasetFormatError(
                f"label {label} out of range for class_count {class_count}", path, lineno
            )
        if has_logits:
            probs = softmax(_real_vector(obj, "logits", path, lineno))
        else:
            probs = _real_vector(obj, "probs", path, lineno)
            if (probs < 0.0).any() or (probs > 1.0).any():
                raise DatasetFormatError("probabilities must lie in [0, 1]", path, lineno)
            total = float(probs.sum())
            if abs(total - 1.0) > PROBS_SUM_TOL_INPUT:
                raise DatasetFormatError(f"probabilities sum to {total!r}, not 1", path, lineno)
            probs = probs / total
        if probs.shape[0] != class_count:
            raise DatasetFormatError(
                f"row has {probs.shape[0]} entries, expected {class_count}", path, lineno
            )
        records.append(
            PredictionRecord(
                probs=probs,
                true_label=label,
                uncertainty=shannon_entropy(probs),
                method=str(obj.get("method", method)),
            )
        )
    if not records:
        raise DatasetFormatError("empty logits file", path)
    return records


def write_records(
    records: Sequence[PredictionRecord],
    path: str | Path,
    extras: Sequence[Mapping[str, Any]] | None = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = extras if extras is not None else [{}] * len(records)
    with path.open("wb") as fh:
        for rec, extra in zip(records, rows, strict=True):
            fh.write(orjson.dumps({**rec.to_dict(), **extra}) + b"\n")
    return path


def read_records(path: str | Path) -> list[tuple[PredictionRecord, dict[str, Any]]]:
    """Records written by `write_records`, with their extra keys."""
    path = Path(path)
    out: list[tuple[PredictionRecord, dict[str, Any]]] = []
    for lineno, obj in iter_json_lines(path):
        try:
            record = PredictionRecord(
                probs=np.asarray(obj["probs"], dtype=np.float64),
                true_label=obj["label"],
                uncertainty=obj["uncertainty"],
                method=obj["method"],
                spread=obj.get("spread", 0.0),
            )
        except (KeyError, TypeError, InvariantViolationError) as exc:
            raise DatasetFormatError(f"bad prediction record ({exc})", path, lineno) from exc
        extra = {k: v for k, v in obj.items() if k not in _RECORD_KEYS}
        out.append((record, extra))
    return out


_RECORD_KEYS = frozenset({"probs", "label", "uncertainty", "method", "spread"})
