# nets/serialize.py
# ---------------------------------------------------------------------
# Model file layout (all integers little-endian):
#
#   magic        6 bytes   b"OUBMLP"
#   version      uint16    FORMAT_VERSION
#   header_len   uint32    length of the JSON header in bytes
#   header       UTF-8 JSON {"layer_dims": [...], "dropout_rates": [...], "seed": int}
#   parameters   float64 LE, per layer: W (row-major, fan_in x fan_out) then b
#
# The file must end exactly after the last bias vector.
# ---------------------------------------------------------------------
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import orjson

from nets.mlp import MlpModel
from utils.errors import InvariantViolationError, ModelFormatError

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "model_to_bytes",
    "model_from_bytes",
    "save_model",
    "load_model",
]

MAGIC = b"OUBMLP"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<6sHI")
_F64 = np.dtype("<f8")


def model_to_bytes(model: MlpModel) -> bytes:
    header = orjson.dumps(
        {
            "layer_dims": list(model.layer_dims),
            "dropout_rates": list(model.dropout_rates),
            "seed": model.seed,
        }
    )
    chunks = [_PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)), header]
    for w, b in zip(model.weights, model.biases, strict=True):
        chunks.append(np.ascontiguousarray(w, dtype=_F64).tobytes(order="C"))
        chunks.append(np.ascontiguousarray(b, dtype=_F64).tobytes(order="C"))
    return b"".join(chunks)


def model_from_bytes(data: bytes, source: str = "<bytes>") -> MlpModel:
    if len(data) < _PREFIX.size:
        raise ModelFormatError(f"{source}: truncated model file ({len(data)} bytes)")
    magic, version, header_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError(f"{source}: not a model file (bad magic {magic!r})")
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"{source}: unsupported model format version {version} (expected {FORMAT_VERSION})"
        )
    offset = _PREFIX.size
    if len(data) < offset + header_len:
        raise ModelFormatError(f"{source}: truncated header")
    try:
        header = orjson.loads(data[offset : offset + header_len])
        dims = [int(d) for d in header["layer_dims"]]
        rates = [float(r) for r in header["dropout_rates"]]
        seed = int(header["seed"])
    except (orjson.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{source}: corrupt header ({exc})") from exc
    offset += header_len

    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise ModelFormatError(f"{source}: invalid layer_dims {dims}")
    expected = sum(i * o + o for i, o in zip(dims[:-1], dims[1:], strict=True)) * _F64.itemsize
    if len(data) - offset != expected:
        raise ModelFormatError(
            f"{source}: parameter block is {len(data) - offset} bytes, expected {expected}"
        )

    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:], strict=True):
        w = np.frombuffer(data, dtype=_F64, count=fan_in * fan_out, offset=offset)
        offset += w.nbytes
        b = np.frombuffer(data, dtype=_F64, count=fan_out, offset=offset)
        offset += b.nbytes
        weights.append(w.reshape(fan_in, fan_out).astype(np.float64))
        biases.append(b.astype(np.float64))
    try:
        return MlpModel(
            layer_dims=tuple(dims),
            weights=tuple(weights),
            biases=tuple(biases),
            dropout_rates=tuple(rates),
            seed=seed,
        )
    except InvariantViolationError as exc:
        raise ModelFormatError(f"{source}: {exc}") from exc


def save_model(model: MlpModel, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(model_to_bytes(model))
    return path


def load_model(path: str | Path) -> MlpModel:
    path = Path(path)
    return model_from_bytes(path.read_bytes(), source=str(path))
