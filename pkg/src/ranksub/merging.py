"""Deterministic p-value merging rules valid under arbitrary dependence.

Each rule maps L p-values to one p-value, capped at 1, and is monotone and
permutation-symmetric.  ``z_half_average_test`` is the analogous
finite-sample-valid rule for exchangeable Z-statistics, and
``tail_bound_cx`` the matching tail bound for an average dominated by a
standard normal in the convex order.
"""

from __future__ import annotations

import numpy as np

from .dist import std_normal_cdf, std_normal_quantile

__all__ = [
    "merge_arithmetic",
    "merge_geometric",
    "merge_bonferroni",
    "merge_bonf_geom",
    "MERGE_RULES",
    "z_half_average_test",
    "tail_bound_cx",
]

# largest level for which the halved-average Z rule is proven valid
Z_HALF_ALPHA_MAX = float(1.0 - std_normal_cdf(1.0))


def _as_pvalues(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("expected a nonempty 1-D vector of p-values")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("p-values must lie in [0, 1]")
    return arr


def merge_arithmetic(p) -> float:
    """Twice the average p-value, capped at 1."""
    arr = _as_pvalues(p)
    return min(1.0, 2.0 * float(arr.mean()))


def merge_geometric(p) -> float:
    """e times the geometric mean, capped at 1; any zero input gives 0."""
    arr = _as_pvalues(p)
    if np.any(arr == 0.0):
        return 0.0
    return min(1.0, float(np.e * np.exp(np.mean(np.log(arr)))))


def merge_bonferroni(p) -> float:
    """L times the minimum p-value, capped at 1."""
    arr = _as_pvalues(p)
    return min(1.0, float(arr.size * arr.min()))


def merge_bonf_geom(p) -> float:
    """Twice the smaller of the Bonferroni and geometric merges, capped at 1."""
    arr = _as_pvalues(p)
    bonf = float(arr.size * arr.min())
    if np.any(arr == 0.0):
        return 0.0
    geom = float(np.e * np.exp(np.mean(np.log(arr))))
    return min(1.0, 2.0 * min(bonf, geom))


MERGE_RULES = {
    "M.arith": merge_arithmetic,
    "M.geom": merge_geometric,
    "M.Bonf": merge_bonferroni,
    "M.Bonf-geom": merge_bonf_geom,
}


def z_half_average_test(t, alpha: float) -> bool:
    """Reject when mean(T)/2 exceeds the upper-alpha standard normal quantile.

    Valid for exchangeable statistics with standard normal null margins, for
    alpha up to 1 - Phi(1) (about 0.159); larger levels are outside the
    guarantee and are refused.
    """
    arr = np.asarray(t, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("expected a nonempty 1-D vector of statistics")
    if not 0.0 < alpha <= Z_HALF_ALPHA_MAX:
        raise ValueError(
            f"outside theorem's validity range: alpha must lie in (0, {Z_HALF_ALPHA_MAX:.6f}]"
        )
    return bool(arr.mean() / 2.0 > std_normal_quantile(1.0 - alpha))


def tail_bound_cx(s: float) -> float:
    """Upper bound (1 - Phi(s - 1/s)) / (1 - 1/s^2) on P(mean > s), s > 1.

    Tight up to a constant: the ratio to the normal tail 1 - Phi(s) tends to
    e as s grows.  Diverges as s decreases to 1.
    """
    if s <= 1.0:
        raise ValueError("tail bound requires s > 1")
    return float((1.0 - std_normal_cdf(s - 1.0 / s)) / (1.0 - 1.0 / s**2))
