# estimators/ensemble.py
# ---------------------------------------------------------------------
# Deep ensemble: n independently trained MLPs, predictions averaged.
#
#   p(y=c | x) = (1/n) Σ_i softmax(f_θi(x))_c
#
# Member diversity comes from different hidden widths and seeds. Members
# train in parallel (joblib threads); each owns its TrainConfig.seed, so the
# result does not depend on scheduling.
#
# Container on disk: <dir>/manifest.json + <dir>/member_<i>.mlp
# ---------------------------------------------------------------------
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import orjson
from joblib import Parallel, delayed
from numpy.typing import ArrayLike, NDArray

from estimators.base import PredictorBase, average_rows, make_records, probability_spread
from evaluation.metrics import entropy_rows
from nets.mlp import MlpModel, forward, init_model, softmax
from nets.serialize import load_model, save_model
from nets.train import TrainConfig, train
from utils.data.samples import Dataset, LabeledSample, PredictionRecord
from utils.errors import InvariantViolationError, ModelFormatError
from utils.rng import derive_seed

__all__ = [
    "EnsembleModel",
    "MemberSpec",
    "EnsemblePredictor",
    "DEFAULT_WIDTHS",
    "member_specs",
    "ensemble_train",
    "ensemble_predict",
    "save_ensemble",
    "load_ensemble",
]

log = logging.getLogger(__name__)

DEFAULT_WIDTHS: tuple[int, ...] = (8, 12, 16, 24, 32)
MANIFEST = "manifest.json"
_CONTAINER = "openuqbench-ensemble"
_CONTAINER_VERSION = 1


@dataclass(frozen=True, slots=True, eq=False)
class EnsembleModel:
    members: tuple[MlpModel, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise InvariantViolationError("empty ensemble")
        first = self.members[0]
        for i, m in enumerate(self.members[1:], start=1):
            if m.input_dim != first.input_dim or m.class_count != first.class_count:
                raise InvariantViolationError(
                    f"member {i} maps {m.input_dim}->{m.class_count}, "
                    f"member 0 maps {first.input_dim}->{first.class_count}"
                )

    @property
    def input_dim(self) -> int:
        return self.members[0].input_dim

    @property
    def class_count(self) -> int:
        return self.members[0].class_count

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True, slots=True)
class MemberSpec:
    layer_dims: tuple[int, ...]
    dropout_rates: tuple[float, ...]
    train: TrainConfig


def member_specs(
    input_dim: int,
    class_count: int,
    train_cfg: TrainConfig,
    widths: Sequence[int] = DEFAULT_WIDTHS,
    master_seed: int = 0,
) -> list[MemberSpec]:
    """One single-hidden-layer member per width, each with its own derived seed."""
    return [
        MemberSpec(
            layer_dims=(input_dim, int(w), class_count),
            dropout_rates=(0.0,),
            train=train_cfg.model_copy(update={"seed": derive_seed(master_seed, i)}),
        )
        for i, w in enumerate(widths)
    ]


def _train_member(index: int, spec: MemberSpec, train_ds: Dataset, val_ds: Dataset) -> MlpModel:
    model = init_model(spec.layer_dims, spec.dropout_rates, seed=spec.train.seed)
    trained, history = train(model, train_ds, val_ds, spec.train, member=index)
    log.debug("member %d: %d epochs, best at %s", index, len(history.loss), history.best_epoch)
    return trained


def ensemble_train(
    specs: Sequence[MemberSpec], train_ds: Dataset, val_ds: Dataset, n_jobs: int = 1
) -> EnsembleModel:
    """
    Train every member independently. A diverging member aborts the whole
    call with TrainingDivergedError carrying the member index.
    """
    if len(specs) < 2:
        raise InvariantViolationError(f"an ensemble needs >= 2 member configs, got {len(specs)}")
    members = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_train_member)(i, spec, train_ds, val_ds) for i, spec in enumerate(specs)
    )
    log.info("trained %d ensemble members", len(members))
    return EnsembleModel(members=tuple(members))


class EnsemblePredictor(PredictorBase):
    method = "ensemble"

    def __init__(self, ens: EnsembleModel, name: str = "") -> None:
        super().__init__(config=None, name=name)
        self.ens = ens

    @property
    def input_dim(self) -> int:
        return self.ens.input_dim

    def member_probs(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        """(n, B, C) member softmax outputs."""
        X = np.atleast_2d(X)
        return np.stack([softmax(forward(m, X)[0]) for m in self.ens.members])

    def predict_batch(
        self, X: NDArray[np.float64], labels: NDArray[np.int64]
    ) -> list[PredictionRecord]:
        stack = self.member_probs(X)
        mean = average_rows(stack)
        return make_records(
            mean, labels, entropy_rows(mean), self.method, probability_spread(stack, mean)
        )


def ensemble_predict(
    ens: EnsembleModel, x: ArrayLike | LabeledSample, true_label: int | None = None
) -> PredictionRecord:
    return EnsemblePredictor(ens).predict(x, true_label)


def save_ensemble(ens: EnsembleModel, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i, member in enumerate(ens.members):
        name = f"member_{i}.mlp"
        save_model(member, directory / name)
        names.append(name)
    manifest = {"format": _CONTAINER, "version": _CONTAINER_VERSION, "members": names}
    (directory / MANIFEST).write_bytes(orjson.dumps(manifest, option=orjson.OPT_INDENT_2))
    return directory


def load_ensemble(directory: str | Path) -> EnsembleModel:
    directory = Path(directory)
    path = directory / MANIFEST
    try:
        manifest = orjson.loads(path.read_bytes())
    except (OSError, orjson.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: unreadable ensemble manifest ({exc})") from exc
    if manifest.get("format") != _CONTAINER or manifest.get("version") != _CONTAINER_VERSION:
        raise ModelFormatError(f"{path}: not a version-{_CONTAINER_VERSION} ensemble manifest")
    members = manifest.get("members")
    if not isinstance(members, list) or not members:
        raise ModelFormatError(f"{path}: manifest lists no members")
    return EnsembleModel(members=tuple(load_model(directory / str(name)) for name in members))
