"""Split-mean hunt-and-test statistic for testing a multivariate mean of zero.

One random subset estimates a direction (its sample mean); the held-out part
studentises the projection of its own mean onto that direction.  Under the
null the statistic is asymptotically standard normal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dist import STD_NORMAL, sample_covariance_matrix
from ..engine import RandomizedStatistic

__all__ = ["SplitMeanConfig", "split_mean_statistic", "make_split_mean_statistic"]


@dataclass(frozen=True)
class SplitMeanConfig:
    split_fraction: float = 0.5
    dimension: int | None = None

    def __post_init__(self):
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError("split fraction must lie in (0, 1)")


def _split_mean_from_indices(x: np.ndarray, hunt_idx: np.ndarray) -> float:
    n = x.shape[0]
    mask = np.zeros(n, dtype=bool)
    mask[hunt_idx] = True
    hunt, test = x[mask], x[~mask]

    mu1 = hunt.mean(axis=0)
    mu2 = test.mean(axis=0)
    sigma2 = sample_covariance_matrix(test)
    denom = float(mu1 @ sigma2 @ mu1)
    if denom <= 0.0 or not np.any(mu1):
        raise ValueError("degenerate hunting direction")
    n2 = test.shape[0]
    return float(np.sqrt(n2) * (mu1 @ mu2) / np.sqrt(denom))


def split_mean_statistic(
    x: np.ndarray, config: SplitMeanConfig, rng: np.random.Generator
) -> float:
    """sqrt(n2) mu1' mu2 / sqrt(mu1' Sigma2 mu1) for a random split drawn from rng."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected an n x p data matrix")
    n, p = x.shape
    n1 = int(config.split_fraction * n)
    n2 = n - n1
    if n1 < 1 or n2 < p + 2:
        raise ValueError("held-out part too small to estimate the covariance")
    hunt_idx = rng.permutation(n)[:n1]
    return _split_mean_from_indices(x, hunt_idx)


def make_split_mean_statistic(split_fraction: float = 0.5) -> RandomizedStatistic:
    config = SplitMeanConfig(split_fraction=split_fraction)
    return RandomizedStatistic(
        name=f"split-mean(q={split_fraction:g})",
        evaluate=lambda rows, rng: split_mean_statistic(rows, config, rng),
        null_marginal=STD_NORMAL,
    )
