# tests/test_data.py
from pathlib import Path

import numpy as np
import pytest

from tests.conftest import blobs
from utils.data.dataset_io import (
    iter_json_lines,
    load_dataset,
    load_logits,
    read_records,
    write_dataset,
    write_records,
)
from utils.data.samples import (
    EVALUATION_TAGS,
    EXT_5AD,
    IN_TEST,
    IN_TRAIN,
    OOD_SCC,
    STANDARD_TAGS,
    Dataset,
    DistributionTag,
    LabeledSample,
    PredictionRecord,
    TagKind,
)
from utils.data.split import check_disjoint, split_dataset
from utils.errors import DatasetFormatError, InvariantViolationError


def _write(path: Path, *lines: str) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# ---- tags ---------------------------------------------------------------


def test_tag_parse_builtin_and_custom() -> None:
    assert DistributionTag.parse("ood_scc") == OOD_SCC
    custom = DistributionTag.parse("site_b")
    assert custom.kind is TagKind.CUSTOM
    assert custom.value == "site_b"
    assert len(STANDARD_TAGS) == 7
    assert IN_TRAIN not in EVALUATION_TAGS


def test_tag_flags() -> None:
    assert IN_TRAIN.is_training and IN_TEST.is_training
    assert not EXT_5AD.is_training
    assert OOD_SCC.is_ood and not EXT_5AD.is_ood


def test_custom_tag_cannot_shadow_builtin() -> None:
    with pytest.raises(InvariantViolationError):
        DistributionTag(TagKind.CUSTOM, "in_test")
    with pytest.raises(InvariantViolationError):
        DistributionTag(TagKind.CUSTOM)


# ---- carriers -----------------------------------------------------------


def test_sample_rejects_bad_values() -> None:
    with pytest.raises(InvariantViolationError):
        LabeledSample(np.array([1.0, np.nan]), 0, IN_TEST)
    with pytest.raises(InvariantViolationError):
        LabeledSample(np.array([1.0, 2.0]), -1, IN_TEST)
    s = LabeledSample(np.array([1.0, 2.0]), 1, IN_TEST, {"shift": "novel_condition"})
    assert s.shift == "novel_condition"
    assert LabeledSample(np.zeros(2), 0, IN_TEST).shift == "none"


def test_dataset_checks_dimensions_and_labels() -> None:
    with pytest.raises(InvariantViolationError):
        Dataset.from_arrays(np.zeros((3, 2)), [0, 1, 2], IN_TEST, "d", class_count=2)
    a = LabeledSample(np.zeros(2), 0, IN_TEST)
    b = LabeledSample(np.zeros(3), 1, IN_TEST)
    with pytest.raises(InvariantViolationError):
        Dataset((a, b), class_count=2, feature_dim=2, name="mixed")
    with pytest.raises(InvariantViolationError):
        Dataset((), class_count=2, feature_dim=2, name="empty")


def test_dataset_views_and_concat_retag() -> None:
    ds = blobs(n_per_class=5, dim=3, tag=IN_TEST)
    assert ds.X.shape == (10, 3)
    assert not ds.X.flags.writeable
    assert sorted(ds.by_class()) == [0, 1]
    assert ds.tag == IN_TEST

    pooled = Dataset.concat([ds, blobs(n_per_class=2, dim=3, tag=EXT_5AD)], "p", tag=EXT_5AD)
    assert pooled.tags() == {EXT_5AD}
    assert len(pooled) == 14
    assert pooled.samples[0].meta["pooled_from"] == "in_test"
    assert "pooled_from" not in pooled.samples[-1].meta


def test_prediction_record_validation() -> None:
    r = PredictionRecord(np.array([0.25, 0.75]), 1, 0.8, "baseline")
    assert r.predicted_label == 1 and r.correct
    # ties resolve to the lower index
    assert PredictionRecord(np.array([0.5, 0.5]), 1, 1.0, "m").predicted_label == 0
    with pytest.raises(InvariantViolationError):
        PredictionRecord(np.array([0.6, 0.6]), 0, 0.1, "m")
    with pytest.raises(InvariantViolationError):
        PredictionRecord(np.array([0.5, 0.5]), 2, 0.1, "m")
    with pytest.raises(InvariantViolationError):
        PredictionRecord(np.array([0.5, 0.5]), 0, -0.1, "m")


# ---- dataset files ------------------------------------------------------


def test_load_dataset_reads_lines_in_order(tmp_path: Path) -> None:
    path = _write(
        tmp_path / "d.jsonl",
        '{"features": [0.0, 1.0], "label": 0, "dist": "in_test"}',
        "",
        '{"features": [2.0, 3.0], "label": 1, "dist": "ood_scc", "meta": {"shift": "x"}}',
    )
    ds = load_dataset(path)
    assert len(ds) == 2
    assert ds.class_count == 2
    np.testing.assert_array_equal(ds.X, [[0.0, 1.0], [2.0, 3.0]])
    assert ds.samples[1].dist_tag == OOD_SCC
    assert ds.samples[1].shift == "x"


@pytest.mark.parametrize(
    "bad_line",
    [
        '{"features": [1.0], "label": 0, "dist": "in_test"}',
        '{"features": [1.0, 2.0], "label": -1, "dist": "in_test"}',
        '{"features": [1.0, 2.0], "label": 0}',
        '{"features": [1.0, "a"], "label": 0, "dist": "in_test"}',
        "{not json",
        "[1, 2]",
    ],
)
def test_load_dataset_reports_line_numbers(tmp_path: Path, bad_line: str) -> None:
    path = _write(
        tmp_path / "d.jsonl", '{"features": [0.0, 1.0], "label": 0, "dist": "in_test"}', bad_line
    )
    with pytest.raises(DatasetFormatError) as info:
        load_dataset(path)
    assert info.value.line == 2
    assert f"{path}:2" in str(info.value)


def test_load_dataset_checks_class_count(tmp_path: Path) -> None:
    path = _write(tmp_path / "d.jsonl", '{"features": [0.0], "label": 3, "dist": "in_test"}')
    with pytest.raises(DatasetFormatError):
        load_dataset(path, class_count=2)


def test_written_dataset_is_canonical(tmp_path: Path) -> None:
    ds = blobs(n_per_class=4, dim=3)
    first = write_dataset(ds, tmp_path / "a.jsonl")
    again = write_dataset(load_dataset(first), tmp_path / "b.jsonl")
    assert first.read_bytes() == again.read_bytes()


# ---- logits / records ---------------------------------------------------


def test_load_logits_softmax_and_probs(tmp_path: Path) -> None:
    path = _write(
        tmp_path / "p.jsonl",
        '{"logits": [0.0, 0.0], "label": 1}',
        '{"probs": [0.9, 0.1], "label": 0}',
    )
    records = load_logits(path, class_count=2)
    np.testing.assert_allclose(records[0].probs, [0.5, 0.5])
    assert records[0].uncertainty == pytest.approx(1.0)
    assert records[1].true_label == 0
    assert records[1].method == "external"


@pytest.mark.parametrize(
    "line",
    [
        '{"probs": [0.5, 0.6], "label": 0}',
        '{"logits": [0.0, 0.0], "probs": [0.5, 0.5], "label": 0}',
        '{"label": 0}',
        '{"logits": [0.0, 0.0, 0.0], "label": 0}',
        '{"logits": [0.0, 0.0], "label": 2}',
    ],
)
def test_load_logits_rejects(tmp_path: Path, line: str) -> None:
    path = _write(tmp_path / "p.jsonl", line)
    with pytest.raises(DatasetFormatError):
        load_logits(path, class_count=2)


def test_records_keep_extras(tmp_path: Path) -> None:
    recs = [
        PredictionRecord(np.array([0.2, 0.8]), 1, 0.72, "ensemble", spread=0.01),
        PredictionRecord(np.array([1.0, 0.0]), 0, 0.0, "ensemble"),
    ]
    path = write_records(recs, tmp_path / "r.jsonl", [{"shift": "none"}, {"shift": "x"}])
    rows = read_records(path)
    assert [extra["shift"] for _, extra in rows] == ["none", "x"]
    assert rows[0][0].spread == 0.01
    np.testing.assert_array_equal(rows[0][0].probs, recs[0].probs)


# ---- splits -------------------------------------------------------------


def test_split_sizes_and_disjointness() -> None:
    ds = blobs(n_per_class=25)
    train, val = split_dataset(ds, [0.8, 0.2], seed=5)
    assert (len(train), len(val)) == (40, 10)
    check_disjoint([train, val])
    ids = {id(s) for s in train.samples} | {id(s) for s in val.samples}
    assert ids == {id(s) for s in ds.samples}


def test_split_is_seeded() -> None:
    ds = blobs(n_per_class=10)
    a = split_dataset(ds, [0.5, 0.5], seed=1)[0]
    b = split_dataset(ds, [0.5, 0.5], seed=1)[0]
    np.testing.assert_array_equal(a.X, b.X)


def test_split_rejects_bad_fractions() -> None:
    ds = blobs(n_per_class=2)
    with pytest.raises(InvariantViolationError):
        split_dataset(ds, [0.5, 0.4], seed=0)
    with pytest.raises(InvariantViolationError):
        split_dataset(ds, [0.1, 0.9], seed=0)


def test_check_disjoint_flags_shared_samples() -> None:
    ds = blobs(n_per_class=3)
    other = ds.subset([0, 1], name="other")
    with pytest.raises(InvariantViolationError):
        check_disjoint([ds, other])


def test_identities_follow_samples_through_subsets_and_pools() -> None:
    ds = blobs(n_per_class=3)
    assert ds.identities() == {("blobs", i) for i in range(6)}
    picked = ds.subset([4, 1], name="picked")
    assert picked.origins == (("blobs", 4), ("blobs", 1))
    pooled = Dataset.concat([picked, blobs(n_per_class=1, name="extra")], name="pool")
    assert pooled.identities() == {("blobs", 4), ("blobs", 1), ("extra", 0), ("extra", 1)}
    with pytest.raises(InvariantViolationError):
        check_disjoint([pooled, ds.subset([1], name="one")])
    check_disjoint([pooled, ds.subset([0, 2, 3, 5], name="rest")])


def test_loaded_identities_are_line_indices(tmp_path: Path) -> None:
    path = _write(
        tmp_path / "d.jsonl",
        '{"features": [0.0], "label": 0, "dist": "in_test"}',
        "",
        '{"features": [1.0], "label": 1, "dist": "in_test"}',
    )
    assert load_dataset(path).origins == (("d", 0), ("d", 2))


def test_json_lines_skip_blanks_and_reject_non_objects(tmp_path: Path) -> None:
    path = _write(tmp_path / "x.jsonl", '{"a": 1}', "", '{"b": 2}')
    assert list(iter_json_lines(path)) == [(1, {"a": 1}), (3, {"b": 2})]
    with pytest.raises(DatasetFormatError):
        list(iter_json_lines(_write(tmp_path / "y.jsonl", "[1, 2]")))
