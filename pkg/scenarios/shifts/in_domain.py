# scenarios/shifts/in_domain.py
from __future__ import annotations

from scipy.stats import norm

from scenarios.shifts.base import (
    DEFAULT_IN_DOMAIN,
    InDomainParams,
    _draw_blocks,
    build_dataset,
)
from utils.data.samples import IN_TEST, IN_TRAIN, Dataset
from utils.rng import RngStream

__all__ = ["gen_in_domain", "bayes_accuracy"]


def gen_in_domain(
    base: InDomainParams = DEFAULT_IN_DOMAIN, seed: int = 0
) -> tuple[Dataset, Dataset]:
    """
    Two-class Gaussian training data and its internal test split.

    Parameters
    ----------
    base : InDomainParams
        Feature dimension, class separation and per-class sizes.
    seed : int
        One stream: the train blocks are drawn first, then the test blocks, so
        the train set equals ``sample_in_domain(base, n_train_per_class, seed)``.

    Returns
    -------
    (train, test) : tuple[Dataset, Dataset]
        Tagged ``in_train`` / ``in_test``; every sample has ``meta.shift == "none"``.
    """
    gen = RngStream(seed).generator()
    X_tr, y_tr = _draw_blocks(gen, base, base.n_train_per_class)
    X_te, y_te = _draw_blocks(gen, base, base.n_test_per_class)
    train = build_dataset(X_tr, y_tr, IN_TRAIN, "none")
    test = build_dataset(X_te, y_te, IN_TEST, "none")
    return train, test


def bayes_accuracy(base: InDomainParams) -> float:
    """Accuracy of the optimal mid-point rule for two unit Gaussians `separation` apart."""
    return float(norm.cdf(0.5 * base.separation))
