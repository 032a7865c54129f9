# tests/conftest.py
from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from pipelines.config import ExperimentConfig, parse_config
from utils.data.samples import EXT_PROT, IN_TRAIN, Dataset


def blobs(
    n_per_class: int = 30,
    dim: int = 4,
    separation: float = 8.0,
    seed: int = 0,
    tag=IN_TRAIN,
    name: str = "blobs",
) -> Dataset:
    """Two unit Gaussians at -/+ separation/2 along the first axis."""
    gen = np.random.default_rng(seed)
    center = np.zeros(dim)
    center[0] = separation / 2.0
    X = np.concatenate(
        [
            -center + gen.standard_normal((n_per_class, dim)),
            center + gen.standard_normal((n_per_class, dim)),
        ]
    )
    y = np.repeat([0, 1], n_per_class)
    return Dataset.from_arrays(X, y, tag=tag, name=name, class_count=2)


# Small grid: every evaluation set keeps >= 10 samples per class so the
# 2-way 5+5 FSL episodes can be drawn, and FSL validation is off.
TINY = {
    "seed": 3,
    "suite": {
        "feature_dim": 4,
        "n_train_per_class": 60,
        "n_test_per_class": 12,
        "subtypes": 5,
        "per_subtype": 4,
    },
    "architecture": {"hidden": [8, 4], "mc_dropout_rates": [0.25, 0.25]},
    "train": {"epochs": 15, "batch_size": 16},
    "mc_dropout": {"passes": 5},
    "ensemble": {"widths": [4, 6], "train": {"epochs": 10, "batch_size": 16}},
    "fsl": {
        "hidden": [8, 4],
        "train_episodes": 20,
        "val_every": 10,
        "val_episodes": 0,
        "test_tasks": 3,
        "learning_rate": 1e-3,
    },
}


def tiny_config(out: Path, **overrides: object) -> ExperimentConfig:
    data = {**TINY, **overrides, "output": {"directory": str(out)}}
    return parse_config(data, "<tiny>")


@pytest.fixture
def train_blobs() -> Dataset:
    return blobs(seed=1)


@pytest.fixture
def val_blobs() -> Dataset:
    return blobs(n_per_class=10, seed=2, name="val")


@pytest.fixture
def shifted_blobs() -> Dataset:
    return blobs(n_per_class=20, seed=4, tag=EXT_PROT, name="ext")


@pytest.fixture
def tiny(tmp_path: Path) -> ExperimentConfig:
    return tiny_config(tmp_path / "run")
