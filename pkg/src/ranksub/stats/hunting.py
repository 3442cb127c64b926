"""Dip hunting: find a candidate clustering direction, then test unimodality.

Part A of a random split feeds a 2-means run whose centre difference gives
the projection direction; part B is projected onto it and its dip is
calibrated by Monte Carlo against uniform(0,1) samples of the same size,
the least favourable unimodal null.
"""

from __future__ import annotations

import numpy as np

from ..dist import UNIFORM01
from ..engine import RandomizedStatistic
from .dip import dip_statistic

__all__ = ["two_means_direction", "dip_hunt_pvalue", "make_dip_hunt_statistic"]


def two_means_direction(
    x: np.ndarray, rng: np.random.Generator, tol: float = 1e-8, max_iter: int = 100
) -> np.ndarray:
    """Unit vector joining the two cluster centres of a 2-means run.

    Seeding follows k-means++: the first centre is a uniformly chosen row,
    the second is chosen with probability proportional to squared distance
    from the first.  Lloyd's iterations then run until the centres move less
    than ``tol`` or ``max_iter`` is reached.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two rows")

    first = x[rng.integers(n)]
    sq_dist = np.sum((x - first) ** 2, axis=1)
    total = sq_dist.sum()
    if total == 0.0:
        raise ValueError("all rows identical: no direction to estimate")
    second = x[rng.choice(n, p=sq_dist / total)]
    centres = np.stack([first, second])

    for _ in range(max_iter):
        d0 = np.sum((x - centres[0]) ** 2, axis=1)
        d1 = np.sum((x - centres[1]) ** 2, axis=1)
        labels = d1 < d0
        new_centres = centres.copy()
        if np.any(~labels):
            new_centres[0] = x[~labels].mean(axis=0)
        if np.any(labels):
            new_centres[1] = x[labels].mean(axis=0)
        shift = float(np.max(np.abs(new_centres - centres)))
        centres = new_centres
        if shift < tol:
            break

    diff = centres[0] - centres[1]
    norm = float(np.linalg.norm(diff))
    if norm == 0.0:
        raise ValueError("coincident cluster centres: no direction to estimate")
    return diff / norm


def dip_hunt_pvalue(
    x: np.ndarray,
    split_fraction: float,
    calibration_reps: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo dip p-value of part-B projections along a part-A direction."""
    if calibration_reps < 199:
        raise ValueError("need at least 199 calibration replicates")
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    n_hunt = int(split_fraction * n)
    if n_hunt < 2 or n - n_hunt < 2:
        raise ValueError("both split parts must contain at least two rows")
    perm = rng.permutation(n)
    part_a, part_b = x[perm[:n_hunt]], x[perm[n_hunt:]]

    direction = two_means_direction(part_a, rng)
    observed = dip_statistic(part_b @ direction)

    n_test = part_b.shape[0]
    exceed = 0
    for _ in range(calibration_reps):
        if dip_statistic(rng.random(n_test)) >= observed:
            exceed += 1
    return (1 + exceed) / (1 + calibration_reps)


def make_dip_hunt_statistic(
    split_fraction: float = 0.5, calibration_reps: int = 199
) -> RandomizedStatistic:
    """Engine statistic 1 - p so that large values reject unimodality."""
    return RandomizedStatistic(
        name=f"dip-hunt(q={split_fraction:g})",
        evaluate=lambda rows, rng: 1.0
        - dip_hunt_pvalue(rows, split_fraction, calibration_reps, rng),
        null_marginal=UNIFORM01,
    )
