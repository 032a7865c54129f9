# estimators/fsl/evaluate.py
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from estimators.fsl.core import ProtoPredictor, compute_prototypes
from estimators.fsl.episodes import sample_episode
from evaluation.metrics import MetricBlock, metric_block, summarize_blocks
from nets.mlp import MlpModel
from utils.data.samples import Dataset, LabeledSample, PredictionRecord
from utils.errors import ProtocolViolationError
from utils.rng import RngStream, as_generator

__all__ = ["EpisodicResult", "episodic_eval", "check_fsl_protocol"]

log = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class EpisodicResult:
    block: MetricBlock  # mean over tasks
    std: dict[str, float]  # per-metric dispersion across tasks
    task_blocks: tuple[MetricBlock, ...]
    task_records: tuple[tuple[PredictionRecord, ...], ...]
    task_samples: tuple[tuple[LabeledSample, ...], ...] = ()  # the queries behind each record

    @property
    def records(self) -> list[PredictionRecord]:
        return [r for task in self.task_records for r in task]

    @property
    def samples(self) -> list[LabeledSample]:
        return [s for task in self.task_samples for s in task]

    @property
    def task_index(self) -> list[int]:
        return [t for t, task in enumerate(self.task_records) for _ in task]


def check_fsl_protocol(ds: Dataset) -> None:
    """FSL is only scored on data it was not trained towards (no in_train / in_test)."""
    training = sorted({t.value for t in ds.tags() if t.is_training})
    if training:
        raise ProtocolViolationError(
            f"FSL cannot be evaluated on '{ds.name}': it holds {', '.join(training)} samples; "
            "few-shot evaluation needs an unseen distribution"
        )


def episodic_eval(
    model: MlpModel,
    test_ds: Dataset,
    tasks: int = 20,
    way: int = 2,
    shot: int = 5,
    rng: RngStream | np.random.Generator | int = 0,
    query_per_class: int = 5,
    positive_class: int = 1,
    target_tpr: float = 0.95,
) -> EpisodicResult:
    """
    Sample `tasks` episodes from `test_ds`, classify every query against the
    episode's prototypes, and average the per-task metric blocks.
    """
    check_fsl_protocol(test_ds)
    if tasks < 1:
        raise ValueError("tasks must be >= 1")
    gen = as_generator(rng)
    blocks: list[MetricBlock] = []
    per_task: list[tuple[PredictionRecord, ...]] = []
    queries: list[tuple[LabeledSample, ...]] = []
    for _ in range(tasks):
        episode = sample_episode(test_ds, way, shot, query_per_class, gen)
        protos = compute_prototypes(model, episode.support)
        predictor = ProtoPredictor(model, protos, class_count=test_ds.class_count)
        records = predictor.predict_batch(episode.query_matrix(), episode.query_labels())
        blocks.append(metric_block(records, positive_class, target_tpr))
        per_task.append(tuple(records))
        queries.append(episode.queries)
    block, std = summarize_blocks(blocks)
    log.debug("FSL on '%s': %d tasks, mean accuracy %.4f", test_ds.name, tasks, block.accuracy)
    return EpisodicResult(
        block=block,
        std=std,
        task_blocks=tuple(blocks),
        task_records=tuple(per_task),
        task_samples=tuple(queries),
    )
