# pipelines/cli.py
# ---------------------------------------------------------------------
# `oub` command line.
#
#   oub gen           write the synthetic suite + class-count table
#   oub train METHOD  train one method on in_train, save its model(s)
#   oub eval METHOD   score one method on one tag or dataset file
#   oub run           the full grid (run_experiment)
#   oub score-logits  metrics over an external logits / probs file
#   oub report        render a run's report in one of the table styles
#
# Exit codes: 0 ok, 1 usage error, 2 runtime failure (UqBenchError / I/O).
# ---------------------------------------------------------------------
from __future__ import annotations

import logging
from enum import Enum
from pathlib import Path
from typing import Annotated

import orjson
import typer
from rich.console import Console
from rich.table import Table

from estimators.baseline import BaselinePredictor
from estimators.ensemble import EnsemblePredictor, load_ensemble, save_ensemble
from estimators.fsl.evaluate import check_fsl_protocol
from estimators.mc_dropout import McDropoutConfig, McDropoutPredictor
from evaluation.metrics import MetricBlock, metric_block
from evaluation.report import EvalReport, render_report
from nets.serialize import load_model, save_model
from pipelines.config import ExperimentConfig, load_config
from pipelines.run_experiment import (
    evaluation_sets,
    fsl_evaluate,
    mc_config,
    run_experiment,
    split_training,
    train_baseline,
    train_ensemble,
    train_fsl_backbone,
    train_mc_model,
)
from scenarios.shifts.suite import describe_suite, gen_suite, write_suite
from utils.data.dataset_io import load_dataset, load_logits
from utils.data.samples import IN_TRAIN, Dataset, DistributionTag
from utils.errors import UqBenchError
from utils.log import configure_logging

__all__ = ["app", "main"]

log = logging.getLogger(__name__)

app = typer.Typer(
    name="oub",
    help="Predictive-uncertainty benchmark under synthetic distribution shift.",
    add_completion=False,
    no_args_is_help=True,
)
console = Console()

EXIT_USAGE = 1
EXIT_RUNTIME = 2
_CLICK_USAGE_STATUS = 2
MC_CONFIG_FILE = "mc_dropout.json"


class Method(str, Enum):
    baseline = "baseline"
    mc_dropout = "mc_dropout"
    ensemble = "ensemble"
    fsl = "fsl"


class Style(str, Enum):
    table2 = "table2"
    table3 = "table3"
    table4 = "table4"
    table5 = "table5"


ConfigOpt = Annotated[
    Path | None, typer.Option("--config", "-c", help="YAML experiment config.")
]
SeedOpt = Annotated[int | None, typer.Option("--seed", help="Master seed override.")]
OutOpt = Annotated[Path | None, typer.Option("--out", "-o", help="Output directory override.")]
VerboseOpt = Annotated[bool, typer.Option("--verbose", "-v", help="DEBUG logging.")]


def _setup(
    config: Path | None, seed: int | None, out: Path | None, verbose: bool
) -> ExperimentConfig:
    configure_logging(logging.DEBUG if verbose else logging.INFO)
    return load_config(config, seed=seed, out=out)


def _print_block(block: MetricBlock, title: str, std: dict[str, float] | None = None) -> None:
    table = Table(title=title)
    table.add_column("metric")
    table.add_column("value", justify="right")
    for name, value in block.to_dict().items():
        text = str(value) if name == "n" else f"{value:.4f}"
        if std and name in std:
            text += f" ± {std[name]:.4f}"
        table.add_row(name, text)
    console.print(table)


@app.command()
def gen(
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
) -> None:
    """Write the seven suite datasets to <out>/datasets."""
    cfg = _setup(config, seed, out, verbose)
    suite = gen_suite(cfg.seed, cfg.suite)
    paths = write_suite(suite, Path(cfg.output.directory) / "datasets")
    console.print(describe_suite(suite).to_string())
    console.print(f"wrote {len(paths)} datasets to {paths[0].parent}")


@app.command("train")
def train_cmd(
    method: Annotated[Method, typer.Argument(help="Which method to train.")],
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    passes: Annotated[
        int | None, typer.Option("--passes", min=1, help="MC-dropout forward passes.")
    ] = None,
    verbose: VerboseOpt = False,
) -> None:
    """Train one method on in_train and save it under <out>/models."""
    cfg = _setup(config, seed, out, verbose)
    train_ds, val_ds = split_training(cfg, gen_suite(cfg.seed, cfg.suite))
    models = Path(cfg.output.directory) / "models"
    if method is Method.baseline:
        path = save_model(train_baseline(cfg, train_ds, val_ds), models / "baseline.mlp")
    elif method is Method.mc_dropout:
        path = save_model(train_mc_model(cfg, train_ds, val_ds), models / "mc_dropout.mlp")
        mc = cfg.mc_dropout
        if passes is not None:
            mc = mc.model_copy(update={"passes": passes})
        (models / MC_CONFIG_FILE).write_bytes(orjson.dumps(mc.model_dump()))
    elif method is Method.ensemble:
        path = save_ensemble(train_ensemble(cfg, train_ds, val_ds), models / "ensemble")
    else:
        backbone = train_fsl_backbone(cfg, train_ds, val_ds)
        path = save_model(backbone, models / "fsl_backbone.mlp")
    console.print(f"saved {method.value} model to {path}")


def _eval_dataset(cfg: ExperimentConfig, dataset: str, dim: int) -> Dataset:
    candidate = Path(dataset)
    if candidate.suffix == ".jsonl" or candidate.exists():
        return load_dataset(candidate, expected_dim=dim)
    tag = DistributionTag.parse(dataset)
    suite = gen_suite(cfg.seed, cfg.suite)
    if tag == IN_TRAIN:
        return suite[IN_TRAIN]
    sets = evaluation_sets(suite)
    if tag not in sets:
        raise typer.BadParameter(f"no generated dataset for tag '{dataset}'")
    return sets[tag]


@app.command("eval")
def eval_cmd(
    method: Annotated[Method, typer.Argument(help="Which method to evaluate.")],
    dataset: Annotated[
        str, typer.Option("--dataset", "-d", help="Distribution tag or dataset file.")
    ],
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    passes: Annotated[int | None, typer.Option("--passes", min=1)] = None,
    verbose: VerboseOpt = False,
) -> None:
    """Score one trained method (from <out>/models) on one dataset."""
    cfg = _setup(config, seed, out, verbose)
    models = Path(cfg.output.directory) / "models"
    dim = cfg.suite.feature_dim
    ds = _eval_dataset(cfg, dataset, dim)
    ev = cfg.evaluation

    if method is Method.fsl:
        check_fsl_protocol(ds)
        result = fsl_evaluate(cfg, load_model(models / "fsl_backbone.mlp"), ds)
        _print_block(result.block, f"fsl on {ds.name}", result.std)
        return

    if method is Method.baseline:
        predictor = BaselinePredictor(load_model(models / "baseline.mlp"))
    elif method is Method.mc_dropout:
        mc_path = models / MC_CONFIG_FILE
        mc = cfg.mc_dropout
        if mc_path.exists():
            mc = McDropoutConfig.model_validate(orjson.loads(mc_path.read_bytes()))
        if passes is not None:
            mc = mc.model_copy(update={"passes": passes})
        mc_cfg = mc_config(cfg, mc)
        predictor = McDropoutPredictor(load_model(models / "mc_dropout.mlp"), mc_cfg)
    else:
        predictor = EnsemblePredictor(load_ensemble(models / "ensemble"))
    records = predictor.predict_dataset(ds)
    block = metric_block(records, ev.positive_class, ev.target_tpr)
    _print_block(block, f"{method.value} on {ds.name}")


@app.command()
def run(
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
) -> None:
    """Train and evaluate the full grid; write the run directory."""
    cfg = _setup(config, seed, out, verbose)
    result = run_experiment(cfg)
    console.print(f"{len(result.report)} metric blocks written to {result.directory}")
    tables = Path(cfg.output.directory) / "tables"
    console.print((tables / "table2.txt").read_text(encoding="utf-8"))


@app.command("score-logits")
def score_logits(
    path: Annotated[Path, typer.Argument(help="Line-delimited logits / probs file.")],
    classes: Annotated[int, typer.Option("--classes", min=1, help="Class count C.")],
    positive_class: Annotated[int, typer.Option("--positive-class", min=0)] = 1,
    target_tpr: Annotated[float, typer.Option("--target-tpr", min=0.0, max=1.0)] = 0.95,
    json_out: Annotated[bool, typer.Option("--json", help="Print the block as JSON.")] = False,
    verbose: VerboseOpt = False,
) -> None:
    """MetricBlock over an external model's predictions."""
    configure_logging(logging.DEBUG if verbose else logging.WARNING)
    if not 0.0 < target_tpr <= 1.0:
        raise typer.BadParameter("--target-tpr must lie in (0, 1]")
    records = load_logits(path, classes)
    block = metric_block(records, positive_class, target_tpr)
    if json_out:
        typer.echo(orjson.dumps(block.to_dict()).decode())
    else:
        _print_block(block, f"{path.name} ({len(records)} records)")


@app.command()
def report(
    run_dir: Annotated[Path, typer.Argument(help="Run directory holding report.jsonl.")],
    style: Annotated[Style, typer.Option("--style", "-s")] = Style.table2,
    out: OutOpt = None,
) -> None:
    """Render a stored report in one of the table layouts."""
    configure_logging(logging.WARNING)
    rep = EvalReport.read(run_dir)
    target = out if out is not None else run_dir / "tables" / f"{style.value}.txt"
    path = render_report(rep, style.value, target)
    console.print(path.read_text(encoding="utf-8"))


def main(argv: list[str] | None = None) -> int:
    """
    Run the command line and return its exit code instead of exiting.

    Parsing runs in standalone mode, so whichever click build typer ships
    reports usage errors itself; its exit status 2 is remapped to 1.
    """
    command = typer.main.get_command(app)
    try:
        command.main(args=argv, prog_name="oub", standalone_mode=True)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else (0 if exc.code is None else 1)
        return EXIT_USAGE if code == _CLICK_USAGE_STATUS else code
    except (UqBenchError, OSError) as exc:
        Console(stderr=True).print(f"[bold red]error:[/] {exc}", highlight=False)
        return EXIT_RUNTIME
    return 0

