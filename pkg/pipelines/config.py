# pipelines/config.py
# ---------------------------------------------------------------------
# ExperimentConfig: every hyperparameter of a run in one validated tree.
#
# Files are YAML mappings with `schema_version: 1`. Unknown keys are
# rejected. An empty file (or no file) yields the documented defaults,
# which configs/default.yaml spells out.
# ---------------------------------------------------------------------
from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any, Literal

import orjson
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from estimators.ensemble import DEFAULT_WIDTHS
from estimators.fsl.train import EpisodicConfig
from estimators.mc_dropout import McDropoutConfig
from nets.train import TrainConfig
from scenarios.shifts.suite import SuiteConfig
from utils.data.samples import DistributionTag
from utils.errors import ConfigError

__all__ = [
    "SCHEMA_VERSION",
    "ArchitectureConfig",
    "EnsembleConfig",
    "EvaluationConfig",
    "OutputConfig",
    "ExperimentConfig",
    "load_config",
    "dump_config",
    "config_hash",
]

SCHEMA_VERSION = 1


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ArchitectureConfig(_Frozen):
    """Hidden widths shared by the baseline and MC-dropout models."""

    hidden: tuple[int, ...] = (32, 16)
    mc_dropout_rates: tuple[float, ...] = (0.25, 0.5)

    @model_validator(mode="after")
    def _check(self) -> ArchitectureConfig:
        if not self.hidden or min(self.hidden) < 1:
            raise ValueError("hidden widths must be >= 1 and at least one layer")
        if len(self.mc_dropout_rates) != len(self.hidden):
            raise ValueError("one MC dropout rate per hidden layer")
        if any(not 0.0 <= r < 1.0 for r in self.mc_dropout_rates):
            raise ValueError("dropout rates must lie in [0, 1)")
        return self


class EnsembleConfig(_Frozen):
    widths: tuple[int, ...] = DEFAULT_WIDTHS  # one single-hidden-layer member per width
    train: TrainConfig = TrainConfig()

    @model_validator(mode="after")
    def _check(self) -> EnsembleConfig:
        if len(self.widths) < 2 or min(self.widths) < 1:
            raise ValueError("an ensemble needs >= 2 members with width >= 1")
        return self


class EvaluationConfig(_Frozen):
    positive_class: int = Field(1, ge=0)
    target_tpr: float = Field(0.95, gt=0.0, le=1.0)
    positives: Literal["all", "shifted"] = "shifted"
    fsl_reference_tag: str = "ext_prot"
    detection_tags: tuple[str, ...] = ("ext_5ad", "ood_scc", "ood_cad", "ood_cxr")

    @model_validator(mode="after")
    def _check(self) -> EvaluationConfig:
        for text in (self.fsl_reference_tag, *self.detection_tags):
            DistributionTag.parse(text)
        if DistributionTag.parse(self.fsl_reference_tag).is_training:
            raise ValueError("fsl_reference_tag cannot be a training tag")
        return self


class OutputConfig(_Frozen):
    directory: Path = Path("runs/default")
    plots: bool = False
    jobs: int = Field(1, ge=1)  # joblib threads for ensemble training and grid evaluation
    save_datasets: bool = True


class ExperimentConfig(_Frozen):
    schema_version: int = SCHEMA_VERSION
    seed: int = Field(0, ge=0)
    validation_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    suite: SuiteConfig = SuiteConfig()
    architecture: ArchitectureConfig = ArchitectureConfig()
    train: TrainConfig = TrainConfig()  # baseline and MC-dropout models
    mc_dropout: McDropoutConfig = McDropoutConfig()
    ensemble: EnsembleConfig = EnsembleConfig()
    fsl: EpisodicConfig = EpisodicConfig()
    evaluation: EvaluationConfig = EvaluationConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _check_version(self) -> ExperimentConfig:
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(
                f"unsupported schema_version {self.schema_version} (expected {SCHEMA_VERSION})"
            )
        return self

    def with_overrides(self, seed: int | None = None, out: Path | None = None) -> ExperimentConfig:
        cfg = self
        if seed is not None:
            cfg = cfg.model_copy(update={"seed": seed})
        if out is not None:
            output = cfg.output.model_copy(update={"directory": out})
            cfg = cfg.model_copy(update={"output": output})
        return cfg


def _format_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{where}: {err['msg']}")
    return "; ".join(parts)


def parse_config(data: Any, source: str = "<config>") -> ExperimentConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: expected a mapping at the top level")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_format_validation(exc)}") from exc


def load_config(
    path: str | Path | None = None, seed: int | None = None, out: str | Path | None = None
) -> ExperimentConfig:
    """Read a YAML config (None = defaults) and apply the CLI overrides."""
    if path is None:
        cfg = ExperimentConfig()
    else:
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
        cfg = parse_config(data, str(path))
    return cfg.with_overrides(seed, None if out is None else Path(out))


def _plain(cfg: ExperimentConfig) -> dict[str, Any]:
    return cfg.model_dump(mode="json")


def dump_config(cfg: ExperimentConfig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(_plain(cfg), sort_keys=False), encoding="utf-8")
    return path


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form (sorted keys); the output directory is excluded."""
    plain = _plain(cfg)
    plain["output"].pop("directory", None)
    return hashlib.sha256(orjson.dumps(plain, option=orjson.OPT_SORT_KEYS)).hexdigest()
