# tests/test_estimators.py
from pathlib import Path

import numpy as np
import pytest

from estimators.base import average_rows, probability_spread
from estimators.baseline import BaselinePredictor, baseline_predict
from estimators.ensemble import (
    EnsembleModel,
    EnsemblePredictor,
    ensemble_train,
    load_ensemble,
    member_specs,
    save_ensemble,
)
from estimators.fsl.core import (
    PrototypeSet,
    ProtoPredictor,
    compute_prototypes,
    embed,
    proto_probabilities,
)
from estimators.mc_dropout import McDropoutConfig, McDropoutPredictor
from evaluation.metrics import shannon_entropy
from nets.mlp import MlpModel, init_model
from nets.train import TrainConfig
from utils.errors import InvariantViolationError, ModelFormatError


def _fixed_output(probs: list[float], input_dim: int = 3) -> MlpModel:
    """Linear model whose softmax is `probs` for every input."""
    c = len(probs)
    return MlpModel(
        layer_dims=(input_dim, c),
        weights=(np.zeros((input_dim, c)),),
        biases=(np.log(np.asarray(probs)),),
        dropout_rates=(),
    )


def _zero_backbone(input_dim: int = 3, emb: int = 2) -> MlpModel:
    """Every input embeds to the origin."""
    return MlpModel(
        layer_dims=(input_dim, emb, 2),
        weights=(np.zeros((input_dim, emb)), np.zeros((emb, 2))),
        biases=(np.zeros(emb), np.zeros(2)),
        dropout_rates=(0.0,),
    )


# ---- shared helpers ----------------------------------------------------------


def test_average_rows_is_exact_for_identical_rows() -> None:
    row = np.array([[0.1, 0.7, 0.2]])
    stack = np.stack([row, row, row])
    np.testing.assert_array_equal(average_rows(stack), row)
    mixed = np.array([[[0.8, 0.2]], [[0.6, 0.4]]])
    np.testing.assert_allclose(average_rows(mixed), [[0.7, 0.3]], atol=1e-12)
    assert probability_spread(stack, row)[0] == 0.0
    assert probability_spread(mixed, average_rows(mixed))[0] > 0.0


# ---- baseline ------------------------------------------------------------------


def test_baseline_record_fields() -> None:
    predictor = BaselinePredictor(_fixed_output([0.25, 0.75]))
    rec = predictor.predict(np.zeros(3), true_label=1)
    np.testing.assert_allclose(rec.probs, [0.25, 0.75])
    assert rec.method == "baseline"
    assert rec.spread == 0.0
    assert rec.uncertainty == pytest.approx(shannon_entropy([0.25, 0.75]))
    with pytest.raises(ValueError):
        predictor.predict(np.zeros(4), true_label=0)
    with pytest.raises(ValueError):
        predictor.predict(np.zeros(3))


def test_predict_dataset_one_record_per_sample(train_blobs) -> None:
    model = init_model([4, 5, 2], seed=1)
    records = BaselinePredictor(model).predict_dataset(train_blobs)
    assert len(records) == len(train_blobs)
    assert [r.true_label for r in records] == train_blobs.y.tolist()
    single = baseline_predict(model, train_blobs.samples[3])
    np.testing.assert_allclose(single.probs, records[3].probs, atol=1e-12)


# ---- MC dropout ------------------------------------------------------------------


def test_mc_dropout_without_dropout_equals_baseline(train_blobs) -> None:
    model = init_model([4, 6, 5, 2], [0.0, 0.0], seed=2)
    mc = McDropoutPredictor(model, McDropoutConfig(passes=7, seed=3))
    base = BaselinePredictor(model)
    for a, b in zip(
        mc.predict_dataset(train_blobs), base.predict_dataset(train_blobs), strict=True
    ):
        np.testing.assert_array_equal(a.probs, b.probs)
        assert a.uncertainty == b.uncertainty
        assert a.spread == 0.0


def test_mc_dropout_is_seeded_and_spreads(train_blobs) -> None:
    model = init_model([4, 16, 2], [0.5], seed=2)
    cfg = McDropoutConfig(passes=10, seed=4)
    first = McDropoutPredictor(model, cfg).predict_dataset(train_blobs)
    second = McDropoutPredictor(model, cfg).predict_dataset(train_blobs)
    for a, b in zip(first, second, strict=True):
        np.testing.assert_array_equal(a.probs, b.probs)
    assert all(r.spread >= 0.0 for r in first)
    assert any(r.spread > 0.0 for r in first)
    assert McDropoutPredictor(model, cfg).pass_probs(train_blobs.X).shape == (10, 60, 2)


def test_mc_record_does_not_depend_on_its_batch(train_blobs) -> None:
    model = init_model([4, 16, 8, 2], [0.25, 0.5], seed=2)
    predictor = McDropoutPredictor(model, McDropoutConfig(passes=20, seed=1))
    batch = predictor.predict_dataset(train_blobs)
    for i in (0, 7, 59):
        alone = predictor.predict(train_blobs.samples[i])
        np.testing.assert_allclose(alone.probs, batch[i].probs, rtol=1e-12, atol=1e-15)
    pair = predictor.predict_batch(train_blobs.X[7:9], train_blobs.y[7:9])
    np.testing.assert_allclose(pair[0].probs, batch[7].probs, rtol=1e-12, atol=1e-15)


def test_mc_means_under_two_seeds_agree_within_three_standard_errors() -> None:
    model = init_model([3, 32, 2], [0.5], seed=4)
    X = np.array([[0.3, -0.2, 0.5], [-1.0, 0.4, 0.1], [0.8, 0.8, -0.6]])
    a = McDropoutPredictor(model, McDropoutConfig(passes=50, seed=1)).pass_probs(X)
    b = McDropoutPredictor(model, McDropoutConfig(passes=50, seed=2)).pass_probs(X)
    assert not np.array_equal(a, b)
    standard_error = np.sqrt((a.var(axis=0) + b.var(axis=0)) / 50)
    assert (np.abs(a.mean(axis=0) - b.mean(axis=0)) <= 3.0 * standard_error).all()


# ---- ensemble ------------------------------------------------------------------------


def test_ensemble_of_copies_equals_member(train_blobs) -> None:
    member = init_model([4, 6, 2], seed=5)
    ens = EnsemblePredictor(EnsembleModel((member, member, member)))
    base = BaselinePredictor(member)
    for a, b in zip(
        ens.predict_dataset(train_blobs), base.predict_dataset(train_blobs), strict=True
    ):
        np.testing.assert_array_equal(a.probs, b.probs)
        assert a.uncertainty == b.uncertainty
        assert a.spread == 0.0


def test_ensemble_ignores_member_order(train_blobs) -> None:
    members = tuple(init_model([4, w, 2], seed=w) for w in (3, 5, 8))
    reordered = (members[2], members[0], members[1])
    first = EnsemblePredictor(EnsembleModel(members)).predict_dataset(train_blobs)
    second = EnsemblePredictor(EnsembleModel(reordered)).predict_dataset(train_blobs)
    for a, b in zip(first, second, strict=True):
        np.testing.assert_allclose(a.probs, b.probs, rtol=1e-12, atol=1e-15)
        assert a.uncertainty == pytest.approx(b.uncertainty, abs=1e-12)


def test_ensemble_averages_members() -> None:
    ens = EnsembleModel((_fixed_output([0.8, 0.2]), _fixed_output([0.6, 0.4])))
    rec = EnsemblePredictor(ens).predict(np.ones(3), true_label=0)
    np.testing.assert_allclose(rec.probs, [0.7, 0.3], atol=1e-12)
    assert rec.spread > 0.0


def test_ensemble_members_must_agree_on_shapes() -> None:
    with pytest.raises(InvariantViolationError):
        EnsembleModel((init_model([4, 3, 2]), init_model([5, 3, 2])))
    with pytest.raises(InvariantViolationError):
        EnsembleModel(())


def test_ensemble_train_needs_two_members(train_blobs, val_blobs) -> None:
    specs = member_specs(4, 2, TrainConfig(epochs=1), widths=(4,))
    with pytest.raises(InvariantViolationError):
        ensemble_train(specs, train_blobs, val_blobs)


def test_ensemble_train_and_files(tmp_path: Path, train_blobs, val_blobs) -> None:
    specs = member_specs(4, 2, TrainConfig(epochs=3, batch_size=8), widths=(3, 5), master_seed=1)
    assert specs[0].train.seed != specs[1].train.seed
    ens = ensemble_train(specs, train_blobs, val_blobs, n_jobs=2)
    assert [m.layer_dims for m in ens.members] == [(4, 3, 2), (4, 5, 2)]
    again = ensemble_train(specs, train_blobs, val_blobs, n_jobs=1)
    for a, b in zip(ens.members, again.members, strict=True):
        for pa, pb in zip(a.params(), b.params(), strict=True):
            np.testing.assert_array_equal(pa, pb)

    loaded = load_ensemble(save_ensemble(ens, tmp_path / "ens"))
    assert len(loaded) == 2
    x = train_blobs.X[:5]
    np.testing.assert_array_equal(
        EnsemblePredictor(loaded).member_probs(x), EnsemblePredictor(ens).member_probs(x)
    )


def test_load_ensemble_rejects_bad_manifest(tmp_path: Path) -> None:
    (tmp_path / "manifest.json").write_text('{"format": "other", "version": 1}')
    with pytest.raises(ModelFormatError):
        load_ensemble(tmp_path)
    with pytest.raises(ModelFormatError):
        load_ensemble(tmp_path / "missing")


# ---- prototypes --------------------------------------------------------------------------


def test_single_shot_prototypes_are_the_embeddings() -> None:
    model = init_model([3, 6, 4, 2], seed=7)
    X = np.array([[0.5, -1.0, 2.0], [1.5, 0.0, -0.5]])
    protos = compute_prototypes(model, {0: X[:1], 1: X[1:2]})
    np.testing.assert_array_equal(protos.prototypes[0], embed(model, X[0]))
    np.testing.assert_array_equal(protos.prototypes[1], embed(model, X[1]))


def test_prototype_is_mean_embedding() -> None:
    model = init_model([3, 6, 4, 2], seed=7)
    X = np.arange(12.0).reshape(4, 3) / 10.0
    protos = compute_prototypes(model, {1: X})
    np.testing.assert_allclose(protos.prototypes[1], embed(model, X).mean(axis=0))


def test_equidistant_query_is_a_coin_flip() -> None:
    np.testing.assert_array_equal(
        proto_probabilities([[0.0, 0.0]], [[1.0, 0.0], [-1.0, 0.0]]), [[0.5, 0.5]]
    )
    protos = PrototypeSet({0: np.array([1.0, 0.0]), 1: np.array([-1.0, 0.0])})
    rec = ProtoPredictor(_zero_backbone(), protos, class_count=2).predict(
        np.ones(3), true_label=1
    )
    np.testing.assert_array_equal(rec.probs, [0.5, 0.5])
    assert rec.uncertainty == 0.5
    assert rec.method == "fsl"


def test_closer_prototype_wins_by_distance() -> None:
    # query embeds at the class-0 prototype, class 1 is 10 away
    protos = PrototypeSet({0: np.zeros(2), 1: np.array([10.0, 0.0])})
    rec = ProtoPredictor(_zero_backbone(), protos, class_count=2).predict(
        np.zeros(3), true_label=0
    )
    expected = 1.0 / (1.0 + np.exp(-10.0))
    assert rec.probs[0] == pytest.approx(expected, abs=1e-12)
    assert rec.uncertainty == pytest.approx(1.0 - expected, abs=1e-12)


def test_prototype_dimension_must_match() -> None:
    protos = PrototypeSet({0: np.zeros(3), 1: np.ones(3)})
    with pytest.raises(InvariantViolationError):
        ProtoPredictor(_zero_backbone(emb=2), protos)
    with pytest.raises(InvariantViolationError):
        PrototypeSet({0: np.zeros(2), 1: np.zeros(3)})


def test_prototype_probabilities_ignore_a_common_translation() -> None:
    gen = np.random.default_rng(3)
    E, Z = gen.standard_normal((6, 4)), gen.standard_normal((3, 4))
    shift = 10.0 * gen.standard_normal(4)
    np.testing.assert_allclose(
        proto_probabilities(E + shift, Z + shift), proto_probabilities(E, Z), rtol=1e-9, atol=1e-12
    )


def test_scaling_distances_keeps_the_predicted_class() -> None:
    gen = np.random.default_rng(4)
    E, Z = gen.standard_normal((20, 4)), gen.standard_normal((3, 4))
    expected = proto_probabilities(E, Z).argmax(axis=1)
    for k in (0.1, 0.5, 3.0, 40.0):
        np.testing.assert_array_equal(proto_probabilities(k * E, k * Z).argmax(axis=1), expected)
