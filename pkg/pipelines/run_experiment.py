# pipelines/run_experiment.py
# ---------------------------------------------------------------------
# Full grid: generate the suite, train the four methods on in_train,
# evaluate every method on every evaluation tag, score OOD detection,
# persist everything under the output directory.
#
# Run directory
#   config.yaml            the effective config
#   datasets/<tag>.jsonl   generated suite (output.save_datasets)
#   models/                baseline.mlp, mc_dropout.mlp, ensemble/, fsl_backbone.mlp
#   records/<method>__<tag>.jsonl   per-sample predictions (+ shift, task)
#   report.jsonl, metadata.json
#   tables/table{2,3,4,5}.txt|.csv
#   plots/                 (output.plots)
#   failure.json           only when a stage failed
#
# Each stage draws from derive_seed(master_seed, stage_id, <sub-config seed>),
# so nothing depends on execution order.
# ---------------------------------------------------------------------
from __future__ import annotations

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import orjson
from joblib import Parallel, delayed

from estimators.base import PredictorBase
from estimators.baseline import BaselinePredictor
from estimators.ensemble import (
    EnsembleModel,
    EnsemblePredictor,
    ensemble_train,
    member_specs,
    save_ensemble,
)
from estimators.fsl.evaluate import EpisodicResult, episodic_eval
from estimators.fsl.train import episodic_train
from estimators.mc_dropout import McDropoutConfig, McDropoutPredictor
from evaluation.metrics import metric_block
from evaluation.ood import DetectionResult, EvaluatedSet, ood_detection_eval
from evaluation.report import STYLES, EvalReport, RunMetadata, records_file, render_report
from nets.mlp import MlpModel, init_model
from nets.serialize import save_model
from nets.train import train
from pipelines.config import ExperimentConfig, config_hash, dump_config
from scenarios.shifts.suite import gen_suite, write_suite
from utils.data.dataset_io import write_records
from utils.data.samples import (
    EVALUATION_TAGS,
    EXT_5AD,
    IN_TEST,
    IN_TRAIN,
    Dataset,
    DistributionTag,
)
from utils.data.split import check_disjoint, split_dataset
from utils.errors import StageError
from utils.rng import derive_seed

__all__ = [
    "TrainedModels",
    "RunResult",
    "evaluation_sets",
    "train_models",
    "train_baseline",
    "train_mc_model",
    "train_ensemble",
    "train_fsl_backbone",
    "split_training",
    "mc_config",
    "fsl_evaluate",
    "evaluate_methods",
    "detection_results",
    "run_experiment",
    "stage_seed",
]

log = logging.getLogger(__name__)

# stage ids for derive_seed
STAGE_SPLIT = 1
STAGE_BASELINE = 2
STAGE_MC_MODEL = 3
STAGE_MC_PASSES = 4
STAGE_ENSEMBLE = 5
STAGE_FSL_TRAIN = 6
STAGE_FSL_EVAL = 7

FAILURE_FILE = "failure.json"


def stage_seed(master: int, stage_id: int, *keys: int) -> int:
    return derive_seed(master, stage_id, *keys)


@dataclass(frozen=True, slots=True, eq=False)
class TrainedModels:
    baseline: MlpModel
    mc_dropout: MlpModel
    ensemble: EnsembleModel
    fsl_backbone: MlpModel


@dataclass(slots=True)
class RunResult:
    report: EvalReport
    sets: dict[str, dict[DistributionTag, EvaluatedSet]] = field(default_factory=dict)
    directory: Path | None = None


@contextmanager
def _stage(name: str, out_dir: Path | None) -> Iterator[None]:
    log.info("stage %s", name)
    try:
        yield
    except Exception as exc:
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            failure = {"stage": name, "error": type(exc).__name__, "message": str(exc)}
            (out_dir / FAILURE_FILE).write_bytes(
                orjson.dumps(failure, option=orjson.OPT_INDENT_2)
            )
        raise StageError(name, exc) from exc


# ---------------------------- Data -------------------------------------


def evaluation_sets(suite: dict[DistributionTag, Dataset]) -> dict[DistributionTag, Dataset]:
    """
    The six evaluation datasets. ext_5ad holds only positives, so it is
    pooled with the in_test normals (re-tagged ext_5ad, provenance in meta).
    """
    in_test = suite[IN_TEST]
    normals = in_test.subset(in_test.by_class().get(0, []), name=f"{IN_TEST.value}/normal")
    out: dict[DistributionTag, Dataset] = {}
    for tag in EVALUATION_TAGS:
        if tag == EXT_5AD:
            out[tag] = Dataset.concat([suite[tag], normals], name=tag.value, tag=EXT_5AD)
        else:
            out[tag] = suite[tag]
    return out


# ---------------------------- Training ---------------------------------


def split_training(
    cfg: ExperimentConfig, suite: dict[DistributionTag, Dataset]
) -> tuple[Dataset, Dataset]:
    """in_train -> (train, validation) by `validation_fraction`."""
    frac = cfg.validation_fraction
    train_ds, val_ds = split_dataset(
        suite[IN_TRAIN], [1.0 - frac, frac], stage_seed(cfg.seed, STAGE_SPLIT)
    )
    return train_ds, val_ds


def _dims(ds: Dataset, hidden: tuple[int, ...]) -> tuple[int, ...]:
    return (ds.feature_dim, *hidden, ds.class_count)


def train_baseline(cfg: ExperimentConfig, train_ds: Dataset, val_ds: Dataset) -> MlpModel:
    seed = stage_seed(cfg.seed, STAGE_BASELINE, cfg.train.seed)
    init = init_model(_dims(train_ds, cfg.architecture.hidden), None, seed=seed)
    model, _ = train(init, train_ds, val_ds, cfg.train.model_copy(update={"seed": seed}))
    return model


def train_mc_model(cfg: ExperimentConfig, train_ds: Dataset, val_ds: Dataset) -> MlpModel:
    seed = stage_seed(cfg.seed, STAGE_MC_MODEL, cfg.train.seed)
    dims = _dims(train_ds, cfg.architecture.hidden)
    init = init_model(dims, cfg.architecture.mc_dropout_rates, seed=seed)
    model, _ = train(init, train_ds, val_ds, cfg.train.model_copy(update={"seed": seed}))
    return model


def train_ensemble(cfg: ExperimentConfig, train_ds: Dataset, val_ds: Dataset) -> EnsembleModel:
    specs = member_specs(
        train_ds.feature_dim,
        train_ds.class_count,
        cfg.ensemble.train,
        cfg.ensemble.widths,
        master_seed=stage_seed(cfg.seed, STAGE_ENSEMBLE, cfg.ensemble.train.seed),
    )
    return ensemble_train(specs, train_ds, val_ds, n_jobs=cfg.output.jobs)


def train_fsl_backbone(cfg: ExperimentConfig, train_ds: Dataset, val_ds: Dataset) -> MlpModel:
    fsl_cfg = cfg.fsl.model_copy(
        update={"seed": stage_seed(cfg.seed, STAGE_FSL_TRAIN, cfg.fsl.seed)}
    )
    init = init_model(_dims(train_ds, fsl_cfg.hidden), None, seed=fsl_cfg.seed)
    backbone, _ = episodic_train(init, train_ds, cfg=fsl_cfg, val_ds=val_ds)
    return backbone


def train_models(
    cfg: ExperimentConfig, train_ds: Dataset, val_ds: Dataset, out_dir: Path | None = None
) -> TrainedModels:
    with _stage("train_baseline", out_dir):
        baseline = train_baseline(cfg, train_ds, val_ds)
    with _stage("train_mc_dropout", out_dir):
        mc_model = train_mc_model(cfg, train_ds, val_ds)
    with _stage("train_ensemble", out_dir):
        ensemble = train_ensemble(cfg, train_ds, val_ds)
    with _stage("train_fsl", out_dir):
        backbone = train_fsl_backbone(cfg, train_ds, val_ds)
    return TrainedModels(baseline, mc_model, ensemble, backbone)


def save_models(models: TrainedModels, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    save_model(models.baseline, directory / "baseline.mlp")
    save_model(models.mc_dropout, directory / "mc_dropout.mlp")
    save_ensemble(models.ensemble, directory / "ensemble")
    save_model(models.fsl_backbone, directory / "fsl_backbone.mlp")


# ---------------------------- Evaluation -------------------------------


def mc_config(cfg: ExperimentConfig, base: McDropoutConfig | None = None) -> McDropoutConfig:
    """Pass settings with the run-derived seed (`base` defaults to cfg.mc_dropout)."""
    mc = cfg.mc_dropout if base is None else base
    return mc.model_copy(update={"seed": stage_seed(cfg.seed, STAGE_MC_PASSES, mc.seed)})


def _predictors(cfg: ExperimentConfig, models: TrainedModels) -> dict[str, PredictorBase]:
    mc_cfg = mc_config(cfg)
    return {
        "baseline": BaselinePredictor(models.baseline),
        "mc_dropout": McDropoutPredictor(models.mc_dropout, mc_cfg),
        "ensemble": EnsemblePredictor(models.ensemble),
    }


def _eval_probabilistic(
    method: str, predictor: PredictorBase, tag: DistributionTag, ds: Dataset
) -> EvaluatedSet:
    records = predictor.predict_dataset(ds)
    return EvaluatedSet.from_samples(method, tag, records, ds.samples)


def fsl_evaluate(
    cfg: ExperimentConfig, backbone: MlpModel, ds: Dataset, key: int = 0
) -> EpisodicResult:
    """Episodic evaluation with the run-derived task stream `key`."""
    f = cfg.fsl
    ev = cfg.evaluation
    return episodic_eval(
        backbone,
        ds,
        tasks=f.test_tasks,
        way=f.way,
        shot=f.shot,
        rng=stage_seed(cfg.seed, STAGE_FSL_EVAL, f.seed, key),
        query_per_class=f.query_per_class,
        positive_class=ev.positive_class,
        target_tpr=ev.target_tpr,
    )


def _eval_fsl(
    cfg: ExperimentConfig, backbone: MlpModel, tag: DistributionTag, ds: Dataset
) -> tuple[EvaluatedSet, EpisodicResult]:
    key = EVALUATION_TAGS.index(tag) if tag in EVALUATION_TAGS else len(EVALUATION_TAGS)
    result = fsl_evaluate(cfg, backbone, ds, key)
    evaluated = EvaluatedSet.from_samples(
        "fsl", tag, result.records, result.samples, task_index=result.task_index
    )
    return evaluated, result


def evaluate_methods(
    cfg: ExperimentConfig,
    models: TrainedModels,
    eval_sets: dict[DistributionTag, Dataset],
) -> tuple[EvalReport, dict[str, dict[DistributionTag, EvaluatedSet]]]:
    """Every (method, tag) cell, FSL only on non-training tags (23 blocks on the default grid)."""
    predictors = _predictors(cfg, models)
    ev = cfg.evaluation
    jobs = [
        delayed(_eval_probabilistic)(method, predictor, tag, ds)
        for method, predictor in predictors.items()
        for tag, ds in eval_sets.items()
    ]
    fsl_tags = [tag for tag in eval_sets if not tag.is_training]
    jobs += [delayed(_eval_fsl)(cfg, models.fsl_backbone, t, eval_sets[t]) for t in fsl_tags]
    results = Parallel(n_jobs=cfg.output.jobs, prefer="threads")(jobs)

    report = EvalReport()
    sets: dict[str, dict[DistributionTag, EvaluatedSet]] = {}
    for item in results:
        if isinstance(item, tuple):
            evaluated, episodic = item
            report.add_block("fsl", evaluated.tag, episodic.block, episodic.std)
        else:
            evaluated = item
            block = metric_block(list(evaluated.records), ev.positive_class, ev.target_tpr)
            report.add_block(evaluated.method, evaluated.tag, block)
        sets.setdefault(evaluated.method, {})[evaluated.tag] = evaluated
    return report, sets


def detection_results(
    cfg: ExperimentConfig, sets: dict[str, dict[DistributionTag, EvaluatedSet]]
) -> list[dict[str, DetectionResult]]:
    ev = cfg.evaluation
    fsl_ref = DistributionTag.parse(ev.fsl_reference_tag)
    out = []
    for text in ev.detection_tags:
        tag = DistributionTag.parse(text)
        usable = {
            method: by_tag
            for method, by_tag in sets.items()
            if not (method == "fsl" and tag == fsl_ref)
        }
        out.append(
            ood_detection_eval(
                usable,
                IN_TEST,
                tag,
                positives=ev.positives,
                target_tpr=ev.target_tpr,
                id_overrides={"fsl": fsl_ref},
            )
        )
    return out


def _persist_records(
    sets: dict[str, dict[DistributionTag, EvaluatedSet]], directory: Path
) -> None:
    for method, by_tag in sets.items():
        for tag, evaluated in by_tag.items():
            extras: list[dict[str, object]] = [{"shift": s} for s in evaluated.shifts]
            if evaluated.task_index is not None:
                extras = [
                    {**x, "task": t} for x, t in zip(extras, evaluated.task_index, strict=True)
                ]
            write_records(evaluated.records, records_file(directory, method, tag), extras)


def _save_plots(
    cfg: ExperimentConfig, sets: dict[str, dict[DistributionTag, EvaluatedSet]], directory: Path
) -> None:
    from evaluation.plotting import plot_entropy_by_distribution, plot_ood_roc, save_figure

    save_figure(plot_entropy_by_distribution(sets), directory / "uncertainty.png")
    fsl_ref = {"fsl": DistributionTag.parse(cfg.evaluation.fsl_reference_tag)}
    for text in cfg.evaluation.detection_tags:
        tag = DistributionTag.parse(text)
        fig = plot_ood_roc(sets, IN_TEST, tag, cfg.evaluation.positives, fsl_ref)
        save_figure(fig, directory / f"roc_{tag.value}.png")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_experiment(cfg: ExperimentConfig, persist: bool = True) -> RunResult:
    """
    Train, evaluate and report the whole grid under `cfg.seed`.

    Raises
    ------
    StageError
        Any stage failure; the stage name is in the message and, with
        `persist`, in `<out>/failure.json`.
    """
    started = _now()
    out_dir = Path(cfg.output.directory) if persist else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / FAILURE_FILE).unlink(missing_ok=True)
        dump_config(cfg, out_dir / "config.yaml")

    with _stage("suite", out_dir):
        suite = gen_suite(cfg.seed, cfg.suite)
        if out_dir is not None and cfg.output.save_datasets:
            write_suite(suite, out_dir / "datasets")

    with _stage("split", out_dir):
        train_ds, val_ds = split_training(cfg, suite)
        check_disjoint([train_ds, val_ds, *(ds for t, ds in suite.items() if t != IN_TRAIN)])

    models = train_models(cfg, train_ds, val_ds, out_dir)
    if out_dir is not None:
        with _stage("save_models", out_dir):
            save_models(models, out_dir / "models")

    with _stage("evaluate", out_dir):
        report, sets = evaluate_methods(cfg, models, evaluation_sets(suite))

    with _stage("ood_detection", out_dir):
        for results in detection_results(cfg, sets):
            report.add_detection(results)

    report.metadata = RunMetadata(
        config_hash=config_hash(cfg),
        seed=cfg.seed,
        started=started,
        finished=_now(),
        detection_reference={"fsl": cfg.evaluation.fsl_reference_tag},
    )
    if out_dir is not None:
        with _stage("report", out_dir):
            _persist_records(sets, out_dir / "records")
            report.write(out_dir)
            for style in STYLES:
                render_report(report, style, out_dir / "tables" / f"{style}.txt")
            if cfg.output.plots:
                _save_plots(cfg, sets, out_dir / "plots")
    log.info("run finished: %d metric blocks", len(report))
    return RunResult(report=report, sets=sets, directory=out_dir)

