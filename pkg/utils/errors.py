# utils/errors.py
from __future__ import annotations

from pathlib import Path

__all__ = [
    "UqBenchError",
    "DatasetFormatError",
    "InvariantViolationError",
    "ModelFormatError",
    "TrainingDivergedError",
    "EpisodeSamplingError",
    "ProtocolViolationError",
    "MetricUndefinedError",
    "ConfigError",
    "StageError",
]


class UqBenchError(Exception):
    """Root of every error raised on purpose by this package."""


class DatasetFormatError(UqBenchError, ValueError):
    """A dataset / logits file line could not be parsed or validated."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path if line is None else f"{self.path}:{line}"
        elif line is not None:
            where = f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class InvariantViolationError(UqBenchError, ValueError):
    """A domain object was constructed with values breaking its invariants."""


class ModelFormatError(UqBenchError, ValueError):
    """Model file is corrupt, truncated, or has an unsupported version."""


class TrainingDivergedError(UqBenchError, RuntimeError):
    def __init__(self, message: str, epoch: int | None = None, member: int | None = None):
        self.epoch = epoch
        self.member = member
        prefix = "" if member is None else f"member {member}: "
        super().__init__(prefix + message)


class EpisodeSamplingError(UqBenchError, ValueError):
    def __init__(self, message: str, label: int | None = None):
        self.label = label
        super().__init__(message)


class ProtocolViolationError(UqBenchError, ValueError):
    """Evaluation requested on a distribution the protocol excludes."""


class MetricUndefinedError(UqBenchError, ValueError):
    """Metric has no value for the given input (e.g. AUROC with a single class)."""


class ConfigError(UqBenchError, ValueError):
    pass


class StageError(UqBenchError, RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
