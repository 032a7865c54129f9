# tests/test_cli.py
import logging
from pathlib import Path

import orjson
import pytest

from pipelines.cli import main
from pipelines.config import dump_config
from tests.conftest import tiny_config


@pytest.fixture(autouse=True)
def _restore_root_logger():
    root = logging.getLogger()
    before, level = list(root.handlers), root.level
    yield
    for h in list(root.handlers):
        if h not in before:
            root.removeHandler(h)
    root.setLevel(level)


@pytest.fixture
def tiny_yaml(tmp_path: Path) -> Path:
    return dump_config(tiny_config(tmp_path / "run"), tmp_path / "tiny.yaml")


def _logits_file(path: Path) -> Path:
    rows = [
        {"logits": [2.0, -1.0], "label": 0},
        {"logits": [-1.5, 1.0], "label": 1},
        {"probs": [0.3, 0.7], "label": 1},
        {"probs": [0.9, 0.1], "label": 0},
    ]
    path.write_bytes(b"\n".join(orjson.dumps(r) for r in rows) + b"\n")
    return path


def test_usage_errors_exit_1(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["no-such-command"]) == 1
    captured = capsys.readouterr()
    assert "no-such-command" in captured.err + captured.out
    assert main(["gen", "--no-such-option"]) == 1
    assert main(["train", "not-a-method"]) == 1


def test_help_exits_0(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["--help"]) == 0
    assert "score-logits" in capsys.readouterr().out


def test_score_logits_json(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    path = _logits_file(tmp_path / "logits.jsonl")
    assert main(["score-logits", str(path), "--classes", "2", "--json"]) == 0
    block = orjson.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert block["accuracy"] == 1.0
    assert block["auroc"] == 1.0
    assert block["n"] == 4


def test_score_logits_runtime_errors_exit_2(tmp_path: Path) -> None:
    assert main(["score-logits", str(tmp_path / "missing.jsonl"), "--classes", "2"]) == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"logits": [0.0, 1.0], "label": 0}\n{"probs": [0.5, 0.6], "label": 1}\n')
    assert main(["score-logits", str(bad), "--classes", "2"]) == 2


def test_fsl_is_not_scored_on_internal_test(tmp_path: Path) -> None:
    assert main(["eval", "fsl", "--dataset", "in_test", "--out", str(tmp_path)]) == 2


def test_gen_writes_the_suite(tmp_path: Path) -> None:
    assert main(["gen", "--out", str(tmp_path), "--seed", "2"]) == 0
    assert len(list((tmp_path / "datasets").glob("*.jsonl"))) == 7


def test_train_then_eval(tiny_yaml: Path, tmp_path: Path) -> None:
    out = tmp_path / "models_run"
    common = ["--config", str(tiny_yaml), "--out", str(out)]
    assert main(["train", "baseline", *common]) == 0
    assert (out / "models" / "baseline.mlp").is_file()
    assert main(["eval", "baseline", "--dataset", "ext_prot", *common]) == 0
    assert main(["gen", *common]) == 0
    dataset = out / "datasets" / "ood_scc.jsonl"
    assert main(["eval", "baseline", "--dataset", str(dataset), *common]) == 0
    assert main(["eval", "ensemble", "--dataset", "ext_prot", *common]) == 2


def test_run_then_report(tiny_yaml: Path, tmp_path: Path) -> None:
    out = tmp_path / "run"
    assert main(["run", "--config", str(tiny_yaml)]) == 0
    assert (out / "report.jsonl").is_file()
    target = tmp_path / "t5.txt"
    assert main(["report", str(out), "--style", "table5", "--out", str(target)]) == 0
    assert target.is_file()
    assert main(["report", str(tmp_path / "nowhere")]) == 2
