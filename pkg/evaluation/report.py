# evaluation/report.py
# ---------------------------------------------------------------------
# EvalReport: method x distribution -> MetricBlock, plus OOD-detection
# results and run metadata.
#
# Persisted as
#   report.jsonl   one {"method", "dist", "metric", "value"} object per line,
#                  methods / tags / metrics in fixed order (byte-stable)
#   metadata.json  config hash, seed, timestamps, detection reference tags
#
# render_report() lays a report out in one of four table styles: aligned
# text (best value *x*, second best _x_, 4 decimals, missing cells ---)
# plus a CSV twin.
# ---------------------------------------------------------------------
from __future__ import annotations

import logging
from collections import defaultdict
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import orjson
import pandas as pd

from evaluation.metrics import METRIC_NAMES, MetricBlock, metric_block, summarize_blocks
from evaluation.ood import DetectionResult
from utils.data.dataset_io import iter_json_lines, read_records
from utils.data.samples import (
    EVALUATION_TAGS,
    EXT_5AD,
    EXT_PROT,
    IN_TEST,
    OOD_CAD,
    OOD_CXR,
    OOD_SCC,
    DistributionTag,
)
from utils.errors import DatasetFormatError, InvariantViolationError, ProtocolViolationError

__all__ = [
    "METHODS",
    "STYLES",
    "RunMetadata",
    "EvalReport",
    "render_report",
    "report_frame",
    "records_file",
    "blocks_from_records",
]

log = logging.getLogger(__name__)

METHODS = ("baseline", "mc_dropout", "ensemble", "fsl")
DETECTION_METRICS = ("ood_auroc", "ood_aupr", "ood_fpr")
REPORT_FILE = "report.jsonl"
METADATA_FILE = "metadata.json"
MISSING = "---"


@dataclass(frozen=True, slots=True)
class RunMetadata:
    config_hash: str
    seed: int
    started: str = ""
    finished: str = ""
    detection_reference: dict[str, str] = field(default_factory=dict)  # method -> ID tag

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _method_key(method: str) -> tuple[int, str]:
    return (METHODS.index(method) if method in METHODS else len(METHODS), method)


def _tag_key(tag: DistributionTag) -> tuple[int, str]:
    order = list(EVALUATION_TAGS)
    return (order.index(tag) if tag in order else len(order), tag.value)


@dataclass(slots=True)
class EvalReport:
    blocks: dict[tuple[str, DistributionTag], MetricBlock] = field(default_factory=dict)
    stds: dict[tuple[str, DistributionTag], dict[str, float]] = field(default_factory=dict)
    detection: dict[tuple[str, DistributionTag], DetectionResult] = field(default_factory=dict)
    metadata: RunMetadata | None = None

    def add_block(
        self,
        method: str,
        tag: DistributionTag,
        block: MetricBlock,
        std: Mapping[str, float] | None = None,
    ) -> None:
        if method == "fsl" and tag.is_training:
            raise ProtocolViolationError(f"FSL has no {tag} cell")
        self.blocks[(method, tag)] = block
        if std is not None:
            self.stds[(method, tag)] = dict(std)

    def add_detection(self, results: Mapping[str, DetectionResult]) -> None:
        for method, result in results.items():
            self.detection[(method, DistributionTag.parse(result.ood_tag))] = result

    def cell(self, method: str, tag: DistributionTag) -> MetricBlock | None:
        return self.blocks.get((method, tag))

    def methods(self) -> list[str]:
        names = {m for m, _ in self.blocks} | {m for m, _ in self.detection}
        return sorted(names, key=_method_key)

    def dists(self) -> list[DistributionTag]:
        tags = {t for _, t in self.blocks} | {t for _, t in self.detection}
        return sorted(tags, key=_tag_key)

    def __len__(self) -> int:
        return len(self.blocks)

    # -- machine-readable form ------------------------------------------------
    def lines(self) -> list[dict[str, Any]]:
        out: list[dict[str, Any]] = []
        for method in self.methods():
            for tag in self.dists():
                block = self.blocks.get((method, tag))
                if block is not None:
                    for name in (*METRIC_NAMES, "n"):
                        out.append(_line(method, tag, name, getattr(block, name)))
                    for name, value in self.stds.get((method, tag), {}).items():
                        out.append(_line(method, tag, f"{name}_std", value))
                det = self.detection.get((method, tag))
                if det is not None:
                    for name in DETECTION_METRICS:
                        out.append(_line(method, tag, name, getattr(det, name[4:])))
        return out

    def body(self) -> bytes:
        return b"".join(orjson.dumps(line) + b"\n" for line in self.lines())

    def write(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / REPORT_FILE
        path.write_bytes(self.body())
        if self.metadata is not None:
            (directory / METADATA_FILE).write_bytes(
                orjson.dumps(self.metadata.to_dict(), option=orjson.OPT_INDENT_2)
            )
        return path

    @classmethod
    def read(cls, directory: str | Path) -> EvalReport:
        """Inverse of `write` (metadata optional)."""
        directory = Path(directory)
        path = directory / REPORT_FILE if directory.is_dir() else directory
        meta_path = path.parent / METADATA_FILE
        metadata = None
        if meta_path.exists():
            metadata = RunMetadata(**orjson.loads(meta_path.read_bytes()))

        cells: dict[tuple[str, DistributionTag], dict[str, float]] = defaultdict(dict)
        for lineno, obj in iter_json_lines(path):
            try:
                key = (str(obj["method"]), DistributionTag.parse(obj["dist"]))
                cells[key][str(obj["metric"])] = float(obj["value"])
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetFormatError(f"bad report line ({exc})", path, lineno) from exc

        report = cls(metadata=metadata)
        refs = metadata.detection_reference if metadata is not None else {}
        for (method, tag), values in cells.items():
            if "accuracy" in values:
                block = MetricBlock(
                    **{k: values[k] for k in METRIC_NAMES}, n=int(values["n"])
                )
                std = {k[:-4]: v for k, v in values.items() if k.endswith("_std")}
                report.add_block(method, tag, block, std or None)
            if "ood_auroc" in values:
                report.detection[(method, tag)] = DetectionResult(
                    method=method,
                    id_tag=refs.get(method, IN_TEST.value),
                    ood_tag=tag.value,
                    auroc=values["ood_auroc"],
                    aupr=values["ood_aupr"],
                    fpr=values["ood_fpr"],
                    n_id=0,
                    n_ood=0,
                )
        return report


def _line(method: str, tag: DistributionTag, metric: str, value: float | int) -> dict[str, Any]:
    v: float | int = int(value) if metric == "n" else float(value)
    return {"method": method, "dist": tag.value, "metric": metric, "value": v}


# ---------------------------- Rendering --------------------------------


@dataclass(frozen=True, slots=True)
class _Column:
    header: str
    metric: str
    higher_is_better: bool
    flagged: bool = True


@dataclass(frozen=True, slots=True)
class _Style:
    dists: tuple[DistributionTag, ...]
    columns: tuple[_Column, ...]
    detection: bool = False


_ACC = _Column("Acc", "accuracy", True)
_AUROC = _Column("AUROC", "auroc", True)
_AUPR = _Column("AUPR", "aupr", True)
_ENTROPY = _Column("Entropy", "mean_entropy", False)

STYLES: dict[str, _Style] = {
    "table2": _Style(EVALUATION_TAGS, (_ACC, _AUROC, _AUPR)),
    "table3": _Style(
        (IN_TEST, EXT_PROT, EXT_5AD),
        (_ENTROPY, _Column("AUROC", "auroc", True, False), _Column("AUPR", "aupr", True, False)),
    ),
    "table4": _Style(
        (OOD_SCC, OOD_CAD, OOD_CXR),
        (_ENTROPY, _Column("AUROC", "auroc", True, False), _Column("AUPR", "aupr", True, False)),
    ),
    "table5": _Style(
        (EXT_5AD, OOD_SCC),
        (
            _Column("AUROC", "ood_auroc", True, False),
            _Column("AUPR", "ood_aupr", True, False),
            _Column("FPR", "ood_fpr", False),
        ),
        detection=True,
    ),
}


def _value(
    report: EvalReport, style: _Style, method: str, tag: DistributionTag, metric: str
) -> float:
    if style.detection:
        det = report.detection.get((method, tag))
        return np.nan if det is None else float(getattr(det, metric[4:]))
    block = report.blocks.get((method, tag))
    return np.nan if block is None else float(getattr(block, metric))


def report_frame(report: EvalReport, style: str) -> pd.DataFrame:
    """Numeric table for `style`: rows (Method, Distribution), NaN for absent cells."""
    if style not in STYLES:
        raise ValueError(f"unknown report style '{style}' (one of {', '.join(STYLES)})")
    if not report.blocks and not report.detection:
        raise InvariantViolationError("empty report: nothing to render")
    spec = STYLES[style]
    methods = report.methods()
    rows = [
        {
            "Method": method,
            "Distribution": tag.value,
            **{c.header: _value(report, spec, method, tag, c.metric) for c in spec.columns},
        }
        for method in methods
        for tag in spec.dists
    ]
    return pd.DataFrame(rows).set_index(["Method", "Distribution"])


def _ranks(values: pd.Series, higher_is_better: bool) -> pd.Series:
    """1 = best, 2 = second best (dense over distinct values), NaN stays NaN."""
    return values.rank(method="dense", ascending=not higher_is_better)


def _mark(frame: pd.DataFrame, style: str) -> pd.DataFrame:
    spec = STYLES[style]
    text = frame.map(lambda v: MISSING if pd.isna(v) else f"{v:.4f}")
    for col in spec.columns:
        if not col.flagged:
            continue
        for _, group in frame[col.header].groupby(level="Distribution"):
            ranks = _ranks(group, col.higher_is_better)
            for idx, r in ranks.items():
                if r == 1:
                    text.loc[idx, col.header] = f"*{text.loc[idx, col.header]}*"
                elif r == 2:
                    text.loc[idx, col.header] = f"_{text.loc[idx, col.header]}_"
    return text


def render_report(report: EvalReport, style: str, path: str | Path) -> Path:
    """
    Write the aligned text table to `path` and its CSV twin next to it.

    Best / second-best flags are per distribution across methods, on the
    flagged columns of the style (all columns for table2, Entropy for
    table3/table4, FPR for table5).
    """
    frame = report_frame(report, style)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = _mark(frame, style)
    path.write_text(text.to_string() + "\n", encoding="utf-8")
    frame.round(4).to_csv(path.with_suffix(".csv"), na_rep="")
    log.info("rendered %s to %s", style, path)
    return path


# ---------------------------- Recomputation ----------------------------


def records_file(directory: str | Path, method: str, tag: DistributionTag) -> Path:
    return Path(directory) / f"{method}__{tag.value}.jsonl"


def blocks_from_records(
    directory: str | Path,
    positive_class: int = 1,
    target_tpr: float = 0.95,
) -> EvalReport:
    """Rebuild every metric block from persisted per-sample records."""
    report = EvalReport()
    for path in sorted(Path(directory).glob("*__*.jsonl")):
        method, _, tag_text = path.stem.partition("__")
        tag = DistributionTag.parse(tag_text)
        rows = read_records(path)
        if not rows:
            continue
        records = [r for r, _ in rows]
        if "task" in rows[0][1]:
            tasks: dict[int, list[Any]] = defaultdict(list)
            for rec, extra in rows:
                tasks[int(extra["task"])].append(rec)
            per_task: Sequence[MetricBlock] = [
                metric_block(tasks[t], positive_class, target_tpr) for t in sorted(tasks)
            ]
            block, std = summarize_blocks(per_task)
            report.add_block(method, tag, block, std)
        else:
            report.add_block(method, tag, metric_block(records, positive_class, target_tpr))
    return report

