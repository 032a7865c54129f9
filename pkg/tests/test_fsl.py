# tests/test_fsl.py
from pathlib import Path

import numpy as np
import orjson
import pytest

from estimators.fsl.episodes import Episode, sample_episode, write_episode
from estimators.fsl.evaluate import check_fsl_protocol, episodic_eval
from estimators.fsl.train import EpisodicConfig, episode_loss_and_grads, episodic_train
from nets.mlp import forward, init_model
from tests.conftest import blobs
from utils.data.dataset_io import load_dataset
from utils.data.samples import IN_TEST, OOD_SCC, Dataset
from utils.errors import EpisodeSamplingError, InvariantViolationError, ProtocolViolationError

CFG = EpisodicConfig(learning_rate=1e-3, hidden=(8, 4), val_episodes=0, seed=2)


# ---- episodes ---------------------------------------------------------------


def test_sample_episode_shapes(train_blobs) -> None:
    ep = sample_episode(train_blobs, way=2, shot=5, query_per_class=3, rng=1)
    assert ep.classes == (0, 1)
    assert all(len(ep.support[c]) == 5 for c in ep.classes)
    assert len(ep.queries) == 6
    assert ep.support_matrix().shape == (10, 4)
    assert sorted(ep.query_labels().tolist()) == [0, 0, 0, 1, 1, 1]
    support_ids = {id(s) for c in ep.classes for s in ep.support[c]}
    assert support_ids.isdisjoint(id(q) for q in ep.queries)


def test_sample_episode_is_seeded(train_blobs) -> None:
    a = sample_episode(train_blobs, rng=3)
    b = sample_episode(train_blobs, rng=3)
    np.testing.assert_array_equal(a.query_matrix(), b.query_matrix())


def test_sample_episode_reports_short_class() -> None:
    X = np.zeros((23, 2))
    y = np.r_[np.zeros(20, dtype=int), np.ones(3, dtype=int)]
    ds = Dataset.from_arrays(X, y, OOD_SCC, "short", class_count=2)
    with pytest.raises(EpisodeSamplingError) as info:
        sample_episode(ds, way=2, shot=5, query_per_class=5)
    assert info.value.label == 1
    with pytest.raises(EpisodeSamplingError):
        sample_episode(ds, way=3, shot=1, query_per_class=0)


def test_episode_validates_support(train_blobs) -> None:
    ep = sample_episode(train_blobs, shot=2, query_per_class=1)
    with pytest.raises(InvariantViolationError):
        Episode(support=ep.support, queries=ep.queries, way=2, shot=3)
    with pytest.raises(InvariantViolationError):
        Episode(support=ep.support, queries=(ep.support[0][0],), way=2, shot=2)


def test_write_episode_marks_roles(tmp_path: Path, train_blobs) -> None:
    ep = sample_episode(train_blobs, shot=5, query_per_class=5, rng=0)
    path = write_episode(ep, tmp_path / "episode.jsonl")
    roles = [orjson.loads(line)["role"] for line in path.read_bytes().splitlines()]
    assert roles == ["support"] * 10 + ["query"] * 10
    assert len(load_dataset(path)) == 20


# ---- training ------------------------------------------------------------------


def _kink_free_model(episode: Episode) -> object:
    X = np.concatenate([episode.support_matrix(), episode.query_matrix()])
    for seed in range(100):
        model = init_model([4, 8, 4, 2], seed=seed)
        _, cache = forward(model, X)
        if all(np.abs(z).min() > 1e-3 for z in cache.pre[:-1]):
            return model
    pytest.skip("no kink-free backbone found")


def test_episode_gradients_match_central_differences(train_blobs) -> None:
    step = 1e-6
    for k in range(3):
        ep = sample_episode(train_blobs, shot=3, query_per_class=2, rng=k)
        model = _kink_free_model(ep)
        params = [p.copy() for p in model.params()]
        rates = model.dropout_rates
        _, grads = episode_loss_and_grads(params, rates, ep)
        # the classification head plays no part in the episode loss
        assert not grads[-1].any() and not grads[-2].any()
        for pi, p in enumerate(params[:-2]):
            for idx in np.ndindex(p.shape):
                orig = p[idx]
                p[idx] = orig + step
                up, _ = episode_loss_and_grads(params, rates, ep)
                p[idx] = orig - step
                down, _ = episode_loss_and_grads(params, rates, ep)
                p[idx] = orig
                numeric = (up - down) / (2.0 * step)
                a = grads[pi][idx]
                assert abs(a - numeric) <= 1e-5 * max(abs(a) + abs(numeric), 1e-3)


def test_episodic_train_is_deterministic(train_blobs) -> None:
    model = init_model([4, 8, 4, 2], seed=0)
    a, hist = episodic_train(model, train_blobs, episodes=15, val_every=5, cfg=CFG)
    b, _ = episodic_train(model, train_blobs, episodes=15, val_every=5, cfg=CFG)
    assert len(hist.loss) == 15
    assert hist.best_at == 15
    for pa, pb in zip(a.params(), b.params(), strict=True):
        np.testing.assert_array_equal(pa, pb)


def test_episodic_train_validation_schedule(train_blobs) -> None:
    model = init_model([4, 8, 4, 2], seed=0)
    _, hist = episodic_train(
        model, train_blobs, episodes=12, val_every=5, val_episodes=2, cfg=CFG, val_ds=train_blobs
    )
    assert sorted(hist.val_accuracy) == [0, 5, 10, 12]
    assert hist.best_at in (0, 5, 10, 12)


def test_episodic_train_edge_cases(train_blobs) -> None:
    model = init_model([4, 8, 4, 2], seed=0)
    same, hist = episodic_train(model, train_blobs, episodes=0, cfg=CFG)
    assert same is model
    assert hist.loss == []
    with pytest.raises(InvariantViolationError):
        episodic_train(init_model([4, 2]), train_blobs, episodes=1, cfg=CFG)


# ---- evaluation ------------------------------------------------------------------


def test_protocol_rejects_training_distributions(train_blobs) -> None:
    with pytest.raises(ProtocolViolationError):
        check_fsl_protocol(train_blobs)
    with pytest.raises(ProtocolViolationError):
        check_fsl_protocol(blobs(n_per_class=10, tag=IN_TEST))
    model = init_model([4, 8, 4, 2], seed=0)
    with pytest.raises(ProtocolViolationError):
        episodic_eval(model, train_blobs, tasks=1)


def test_single_task_summary_is_that_task(shifted_blobs) -> None:
    model = init_model([4, 8, 4, 2], seed=0)
    result = episodic_eval(model, shifted_blobs, tasks=1, rng=4)
    assert result.block == result.task_blocks[0]
    assert set(result.std.values()) == {0.0}


def test_episodic_eval_on_separated_clusters(train_blobs, shifted_blobs) -> None:
    cfg = EpisodicConfig(learning_rate=1e-3, hidden=(16, 8), val_episodes=0, seed=1)
    model = init_model([4, 16, 8, 2], seed=0)
    backbone, _ = episodic_train(model, train_blobs, episodes=100, cfg=cfg)
    result = episodic_eval(backbone, shifted_blobs, tasks=20, rng=1)
    assert result.block.accuracy >= 0.95
    assert len(result.task_blocks) == 20
    assert len(result.records) == 200
    assert result.task_index[:10] == [0] * 10 and result.task_index[-1] == 19
    assert len(result.samples) == 200
    assert set(result.std) == {"accuracy", "auroc", "aupr", "fpr", "mean_entropy"}
    # uncertainty is 1 - max p for prototype predictions
    r = result.records[0]
    assert r.uncertainty == pytest.approx(1.0 - r.probs.max())

    again = episodic_eval(backbone, shifted_blobs, tasks=20, rng=1)
    assert again.block == result.block
