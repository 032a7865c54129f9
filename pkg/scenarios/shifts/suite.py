# scenarios/shifts/suite.py
# ---------------------------------------------------------------------
# The full seven-dataset grid from one master seed.
#
#   scenario            tag        seed
#   internal_test       in_train   derive_seed(master, 1, 0)   (+ in_test)
#   subtype_shift       ext_5ad    derive_seed(master, 1, 1)
#   covariate_shift     ext_prot   derive_seed(master, 1, 2)
#   novel_condition     ood_scc    derive_seed(master, 1, 3)
#   organ_shift         ood_cad    derive_seed(master, 1, 4)
#   modality_shift      ood_cxr    derive_seed(master, 1, 5)
# ---------------------------------------------------------------------
from __future__ import annotations

import logging
from pathlib import Path

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from scenarios.shifts.base import InDomainParams, ShiftKind, ShiftScenario
from scenarios.shifts.covariate_shift import covariate_transform, gen_covariate_shift
from scenarios.shifts.in_domain import gen_in_domain
from scenarios.shifts.modality_shift import ModalityTransform, gen_modality_shift
from scenarios.shifts.novel_condition import (
    FAR_DISPLACEMENT,
    NEAR_DISPLACEMENT,
    gen_novel_condition,
    preset_displacement,
)
from scenarios.shifts.subtype_shift import gen_subtype_shift
from utils.data.dataset_io import write_dataset
from utils.data.samples import IN_TRAIN, STANDARD_TAGS, Dataset, DistributionTag
from utils.rng import derive_seed

__all__ = [
    "SuiteConfig",
    "DEFAULT_SUITE",
    "SUITE_STREAM",
    "suite_scenarios",
    "run_scenario",
    "gen_suite",
    "describe_suite",
    "write_suite",
]

log = logging.getLogger(__name__)

SUITE_STREAM = 1

_ORDER = (
    ShiftKind.INTERNAL_TEST,
    ShiftKind.SUBTYPE_SHIFT,
    ShiftKind.COVARIATE_SHIFT,
    ShiftKind.NOVEL_CONDITION,
    ShiftKind.ORGAN_SHIFT,
    ShiftKind.MODALITY_SHIFT,
)


class SuiteConfig(BaseModel):
    """Shift magnitudes and sizes of the synthetic grid (frozen with the seed)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    feature_dim: int = Field(8, ge=2)
    separation: float = Field(6.0, ge=0.0)
    n_train_per_class: int = Field(200, ge=1)
    n_test_per_class: int = Field(50, ge=1)

    subtypes: int = Field(5, ge=2)
    subtype_spread: float = Field(3.5, ge=0.0)
    per_subtype: int = Field(10, ge=1)

    covariate_angle_deg: float = 35.0
    covariate_scale: float = Field(1.75, gt=0.0)
    covariate_offset: float = 0.5

    near_displacement: tuple[float, float] = NEAR_DISPLACEMENT  # (along e, along f)
    far_displacement: tuple[float, float] = FAR_DISPLACEMENT

    modality_offset: float = 2.0
    modality_stds: tuple[float, float] = (0.3, 1.2)
    modality_amplitude: float = Field(0.5, gt=0.0)
    modality_width: float = Field(3.0, gt=0.0)

    def in_domain(self) -> InDomainParams:
        return InDomainParams(
            feature_dim=self.feature_dim,
            separation=self.separation,
            n_train_per_class=self.n_train_per_class,
            n_test_per_class=self.n_test_per_class,
        )

    def modality(self) -> ModalityTransform:
        return ModalityTransform(
            offset=self.modality_offset,
            stds=self.modality_stds,
            amplitude=self.modality_amplitude,
            width=self.modality_width,
        )


DEFAULT_SUITE = SuiteConfig()


def suite_scenarios(master_seed: int, cfg: SuiteConfig = DEFAULT_SUITE) -> list[ShiftScenario]:
    params: dict[ShiftKind, dict[str, object]] = {
        ShiftKind.INTERNAL_TEST: {},
        ShiftKind.SUBTYPE_SHIFT: {
            "k_subtypes": cfg.subtypes,
            "spread": cfg.subtype_spread,
            "n_per_subtype": cfg.per_subtype,
        },
        ShiftKind.COVARIATE_SHIFT: {
            "degrees": cfg.covariate_angle_deg,
            "scale": cfg.covariate_scale,
            "offset": cfg.covariate_offset,
        },
        ShiftKind.NOVEL_CONDITION: {"displacement": cfg.near_displacement},
        ShiftKind.ORGAN_SHIFT: {"displacement": cfg.far_displacement},
        ShiftKind.MODALITY_SHIFT: {"transform": cfg.modality()},
    }
    return [
        ShiftScenario(kind=k, params=params[k], seed=derive_seed(master_seed, SUITE_STREAM, i))
        for i, k in enumerate(_ORDER)
    ]


def run_scenario(scenario: ShiftScenario, base: InDomainParams) -> list[Dataset]:
    """Datasets of one scenario (two for internal_test: train then test)."""
    p = scenario.params
    kind = scenario.kind
    if kind is ShiftKind.INTERNAL_TEST:
        return list(gen_in_domain(base, scenario.seed))
    if kind is ShiftKind.SUBTYPE_SHIFT:
        return [
            gen_subtype_shift(
                base, p["k_subtypes"], p["spread"], scenario.seed, p["n_per_subtype"]
            )
        ]
    if kind is ShiftKind.COVARIATE_SHIFT:
        t = covariate_transform(base.feature_dim, p["degrees"], p["scale"], p["offset"])
        return [gen_covariate_shift(base, t, scenario.seed)]
    if kind in (ShiftKind.NOVEL_CONDITION, ShiftKind.ORGAN_SHIFT):
        d = preset_displacement(base.feature_dim, tuple(p["displacement"]))
        return [gen_novel_condition(base, d, scenario.seed, kind=kind)]
    return [gen_modality_shift(base, p["transform"], scenario.seed)]


def gen_suite(
    master_seed: int = 0, cfg: SuiteConfig = DEFAULT_SUITE
) -> dict[DistributionTag, Dataset]:
    """All seven tagged datasets, keyed in the standard tag order."""
    base = cfg.in_domain()
    out: dict[DistributionTag, Dataset] = {}
    for scenario in suite_scenarios(master_seed, cfg):
        for ds in run_scenario(scenario, base):
            out[ds.samples[0].dist_tag] = ds
    log.info("generated suite (master seed %d): %d datasets", master_seed, len(out))
    return {t: out[t] for t in STANDARD_TAGS}


def describe_suite(suite: dict[DistributionTag, Dataset]) -> pd.DataFrame:
    """Per-tag sample counts by class, plus the sub-type count where present."""
    rows = []
    for tag, ds in suite.items():
        counts = {c: len(idx) for c, idx in sorted(ds.by_class().items())}
        subtypes = {s.meta["subtype"] for s in ds if "subtype" in s.meta}
        rows.append(
            {
                "dist": tag.value,
                "split": "train" if tag == IN_TRAIN else "test",
                **{f"class_{c}": counts.get(c, 0) for c in range(ds.class_count)},
                "subtypes": len(subtypes),
                "n": len(ds),
            }
        )
    return pd.DataFrame(rows).set_index("dist")


def write_suite(suite: dict[DistributionTag, Dataset], directory: str | Path) -> list[Path]:
    """One `<tag>.jsonl` dataset file per entry."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [write_dataset(ds, directory / f"{tag.value}.jsonl") for tag, ds in suite.items()]
    log.info("wrote %d dataset files to %s", len(paths), directory)
    return paths
