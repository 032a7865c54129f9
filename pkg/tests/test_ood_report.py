# tests/test_ood_report.py
from pathlib import Path

import numpy as np
import pytest

from evaluation.metrics import MetricBlock
from evaluation.ood import EvaluatedSet, detection_scores, ood_detection_eval
from evaluation.report import (
    MISSING,
    REPORT_FILE,
    EvalReport,
    RunMetadata,
    render_report,
    report_frame,
)
from utils.data.samples import EXT_5AD, IN_TEST, IN_TRAIN, OOD_SCC, PredictionRecord
from utils.errors import InvariantViolationError, MetricUndefinedError, ProtocolViolationError


def _set(
    tag, uncertainties: list[float], shifts: list[str] | None = None, method: str = "baseline"
) -> EvaluatedSet:
    records = [PredictionRecord(np.array([0.5, 0.5]), 0, u, method) for u in uncertainties]
    return EvaluatedSet(method, tag, records, shifts or ["none"] * len(records))


def _block(acc: float, entropy: float = 0.3) -> MetricBlock:
    return MetricBlock(acc, 0.9, 0.85, 0.1, entropy, 20)


# ---- OOD detection ----------------------------------------------------------


def test_separated_uncertainty_detects_perfectly() -> None:
    sets = {
        "baseline": {
            IN_TEST: _set(IN_TEST, [0.1, 0.2, 0.15]),
            OOD_SCC: _set(OOD_SCC, [0.8, 0.9], ["novel_condition"] * 2),
        }
    }
    result = ood_detection_eval(sets, IN_TEST, OOD_SCC)["baseline"]
    assert result.auroc == 1.0 and result.aupr == 1.0 and result.fpr == 0.0
    assert (result.n_id, result.n_ood) == (3, 2)
    assert result.id_tag == "in_test" and result.ood_tag == "ood_scc"


def test_identical_uncertainty_is_chance() -> None:
    sets = {
        "baseline": {
            IN_TEST: _set(IN_TEST, [0.4] * 4),
            OOD_SCC: _set(OOD_SCC, [0.4] * 4, ["novel_condition"] * 4),
        }
    }
    assert ood_detection_eval(sets, IN_TEST, OOD_SCC)["baseline"].auroc == 0.5


def test_shifted_positives_drop_unchanged_samples() -> None:
    id_set = _set(IN_TEST, [0.1, 0.2])
    ood_set = _set(OOD_SCC, [0.05, 0.05, 0.9, 0.8], ["none", "none", "novel", "novel"])
    shifted = detection_scores(id_set, ood_set)
    assert [s.positive for s in shifted] == [False, False, True, True]
    assert len(detection_scores(id_set, ood_set, positives="all")) == 6
    with pytest.raises(ValueError):
        detection_scores(id_set, ood_set, positives="some")  # type: ignore[arg-type]


def test_detection_reference_override_and_errors() -> None:
    sets = {
        "fsl": {
            EXT_5AD: _set(EXT_5AD, [0.1, 0.2], method="fsl"),
            OOD_SCC: _set(OOD_SCC, [0.6, 0.7], ["novel_condition"] * 2, method="fsl"),
        }
    }
    with pytest.raises(InvariantViolationError, match="in_test"):
        ood_detection_eval(sets, IN_TEST, OOD_SCC)
    result = ood_detection_eval(sets, IN_TEST, OOD_SCC, id_overrides={"fsl": EXT_5AD})["fsl"]
    assert result.id_tag == "ext_5ad" and result.auroc == 1.0
    with pytest.raises(MetricUndefinedError):
        ood_detection_eval(sets, EXT_5AD, EXT_5AD)


def test_evaluated_set_alignment() -> None:
    with pytest.raises(InvariantViolationError):
        _set(IN_TEST, [0.1, 0.2], ["none"])
    with pytest.raises(InvariantViolationError):
        EvaluatedSet("baseline", IN_TEST, [], [])


# ---- report ---------------------------------------------------------------------


def _report() -> EvalReport:
    report = EvalReport(metadata=RunMetadata(config_hash="abc", seed=3))
    report.add_block("baseline", IN_TEST, _block(0.9))
    report.add_block("mc_dropout", IN_TEST, _block(0.8, entropy=0.2))
    report.add_block("ensemble", IN_TEST, _block(0.7))
    report.add_block(
        "fsl",
        EXT_5AD,
        _block(0.75),
        {"accuracy": 0.05, "auroc": 0.0, "aupr": 0.0, "fpr": 0.0, "mean_entropy": 0.01},
    )
    sets = {
        "baseline": {
            IN_TEST: _set(IN_TEST, [0.1, 0.3]),
            OOD_SCC: _set(OOD_SCC, [0.2, 0.9], ["novel_condition"] * 2),
        }
    }
    report.add_detection(ood_detection_eval(sets, IN_TEST, OOD_SCC))
    return report


def test_fsl_has_no_training_or_internal_cells() -> None:
    report = EvalReport()
    with pytest.raises(ProtocolViolationError):
        report.add_block("fsl", IN_TEST, _block(0.9))
    with pytest.raises(ProtocolViolationError):
        report.add_block("fsl", IN_TRAIN, _block(0.9))


def test_report_file_round_trip(tmp_path: Path) -> None:
    report = _report()
    assert len(report) == 4
    assert report.methods() == ["baseline", "mc_dropout", "ensemble", "fsl"]
    path = report.write(tmp_path)
    assert path.name == REPORT_FILE
    assert path.read_bytes() == report.body()

    loaded = EvalReport.read(tmp_path)
    assert loaded.body() == report.body()
    assert loaded.cell("fsl", EXT_5AD) == report.cell("fsl", EXT_5AD)
    assert loaded.stds[("fsl", EXT_5AD)]["accuracy"] == 0.05
    assert loaded.metadata is not None and loaded.metadata.seed == 3


def test_render_marks_best_and_second(tmp_path: Path) -> None:
    path = render_report(_report(), "table2", tmp_path / "table2.txt")
    text = path.read_text()
    assert "*0.9000*" in text
    assert "_0.8000_" in text
    assert MISSING in text
    assert path.with_suffix(".csv").exists()

    frame = report_frame(_report(), "table3")
    assert np.isnan(frame.loc[("fsl", "in_test"), "Entropy"])
    assert frame.loc[("mc_dropout", "in_test"), "Entropy"] == 0.2
    lowest = render_report(_report(), "table3", tmp_path / "table3.txt").read_text()
    assert "*0.2000*" in lowest


def test_render_detection_table(tmp_path: Path) -> None:
    frame = report_frame(_report(), "table5")
    assert frame.loc[("baseline", "ood_scc"), "AUROC"] == 0.75
    assert np.isnan(frame.loc[("baseline", "ext_5ad"), "FPR"])
    render_report(_report(), "table5", tmp_path / "table5.txt")
    assert (tmp_path / "table5.csv").exists()


def test_render_rejects_bad_input(tmp_path: Path) -> None:
    with pytest.raises(ValueError):
        report_frame(_report(), "table9")
    with pytest.raises(InvariantViolationError):
        render_report(EvalReport(), "table2", tmp_path / "t.txt")


# ---- figures ---------------------------------------------------------------------


def test_figures_are_written(tmp_path: Path) -> None:
    matplotlib = pytest.importorskip("matplotlib")
    matplotlib.use("Agg")
    from evaluation.plotting import plot_entropy_by_distribution, plot_ood_roc, save_figure

    sets = {
        "baseline": {
            IN_TEST: _set(IN_TEST, [0.1, 0.3, 0.2]),
            OOD_SCC: _set(OOD_SCC, [0.2, 0.9], ["novel_condition"] * 2),
        }
    }
    roc = save_figure(plot_ood_roc(sets, IN_TEST, OOD_SCC), tmp_path / "roc.png")
    box = save_figure(plot_entropy_by_distribution(sets), tmp_path / "entropy.png")
    assert roc.exists() and box.exists()
