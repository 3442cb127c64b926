"""Independent brute-force oracles used only by the test suite.

The dip oracle minimises the sup-distance between the empirical CDF and a
piecewise-linear unimodal CDF directly, via one small linear program per
candidate mode location: every sample point (where the CDF may jump) and a
dense-plus-refined search inside every gap.  It shares no code with the
production dip computation.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog, minimize_scalar

# sentinel runway: far enough that entry/exit slopes distort e by < 1e-12
_RUNWAY_FACTOR = 1e12


def _ecdf_levels(sample: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.sort(np.asarray(sample, dtype=float))
    values, counts = np.unique(x, return_counts=True)
    levels = np.cumsum(counts) / x.size
    return values, levels


class _LP:
    """Accumulates rows of A x <= b over variables [e, q_1..q_k, qL, qR]."""

    def __init__(self, n_vars: int):
        self.n_vars = n_vars
        self.rows: list[np.ndarray] = []
        self.rhs: list[float] = []

    def add(self, coeffs: dict[int, float], bound: float) -> None:
        row = np.zeros(self.n_vars)
        for idx, val in coeffs.items():
            row[idx] = val
        self.rows.append(row)
        self.rhs.append(bound)

    def solve(self) -> float:
        c = np.zeros(self.n_vars)
        c[0] = 1.0  # minimise e
        res = linprog(
            c,
            A_ub=np.vstack(self.rows),
            b_ub=np.array(self.rhs),
            bounds=[(None, None)] * self.n_vars,
            method="highs",
        )
        if not res.success:
            return np.inf
        return float(res.fun)


def _base_lp(t: np.ndarray, c: np.ndarray, n_vars: int, mode_knot: int | None) -> _LP:
    """Constraints shared by all junction choices.

    Variable layout: x[0] = e, x[1 + j] = q at knot t_j (0-based), then the
    junction variables appended by the caller.  Left-limit constraints are
    skipped at ``mode_knot`` where the CDF may jump (the junction variables
    carry them instead).
    """
    k = t.size
    lp = _LP(n_vars)
    for j in range(k):
        # |c_j - q_j| <= e at each knot
        lp.add({1 + j: 1.0, 0: -1.0}, c[j])
        lp.add({1 + j: -1.0, 0: -1.0}, -c[j])
    # left limits: on (t_{j-1}, t_j) the empirical CDF is c_{j-1}
    for j in range(k):
        if j == mode_knot:
            continue
        lp.add({1 + j: 1.0, 0: -1.0}, c[j - 1] if j > 0 else 0.0)
    lp.add({1: -1.0}, 0.0)  # q_0 >= 0
    lp.add({k: 1.0}, 1.0)  # q_{k-1} <= 1
    return lp


def _chain_convex(lp: _LP, idx: list[int], pos: list[float], runway: float) -> None:
    """Slopes of consecutive segments are nondecreasing; entry slope from 0."""
    slopes = []
    # entry: from (pos[0] - runway, 0) up to (pos[0], q_first)
    slopes.append({idx[0]: 1.0 / runway})
    for a, b, xa, xb in zip(idx[:-1], idx[1:], pos[:-1], pos[1:]):
        inv = 1.0 / (xb - xa)
        slopes.append({a: -inv, b: inv})
    for s1, s2 in zip(slopes[:-1], slopes[1:]):
        combo = {key: s1.get(key, 0.0) - s2.get(key, 0.0) for key in {*s1, *s2}}
        lp.add(combo, 0.0)  # s1 - s2 <= 0


def _chain_concave(lp: _LP, idx: list[int], pos: list[float], runway: float) -> None:
    """Slopes nonincreasing; exit slope towards value 1 at pos[-1] + runway."""
    slopes = []
    for a, b, xa, xb in zip(idx[:-1], idx[1:], pos[:-1], pos[1:]):
        inv = 1.0 / (xb - xa)
        slopes.append({a: -inv, b: inv})
    slopes.append({idx[-1]: -1.0 / runway, "const": 1.0 / runway})
    for s1, s2 in zip(slopes[:-1], slopes[1:]):
        combo = {}
        const = 0.0
        for key in {*s1, *s2}:
            val = s2.get(key, 0.0) - s1.get(key, 0.0)  # s2 - s1 <= 0
            if key == "const":
                const += val
            else:
                combo[key] = val
        lp.add(combo, -const)


def _mode_at_knot(t: np.ndarray, c: np.ndarray, m: int, runway: float) -> float:
    k = t.size
    n_vars = 1 + k + 1  # e, q's, qL
    qL = 1 + k
    lp = _base_lp(t, c, n_vars, mode_knot=m)
    c_left = c[m - 1] if m > 0 else 0.0
    lp.add({qL: 1.0, 0: -1.0}, c_left)  # qL <= c_left + e
    lp.add({qL: -1.0, 0: -1.0}, -c_left)  # qL >= c_left - e
    lp.add({qL: -1.0}, 0.0)  # qL >= 0
    lp.add({qL: 1.0, 1 + m: -1.0}, 0.0)  # qL <= q_m (jump up at the mode)
    _chain_convex(lp, [1 + j for j in range(m)] + [qL], list(t[:m]) + [t[m]], runway)
    _chain_concave(lp, [1 + j for j in range(m, k)], list(t[m:]), runway)
    return lp.solve()


def _mode_in_gap(
    t: np.ndarray, c: np.ndarray, gap: int, a: float, runway: float
) -> float:
    k = t.size
    n_vars = 1 + k + 2  # e, q's, qL, qR
    qL, qR = 1 + k, 1 + k + 1
    lp = _base_lp(t, c, n_vars, mode_knot=None)
    for var in (qL, qR):
        lp.add({var: 1.0, 0: -1.0}, c[gap])
        lp.add({var: -1.0, 0: -1.0}, -c[gap])
    lp.add({qL: 1.0, qR: -1.0}, 0.0)  # qL <= qR
    _chain_convex(lp, [1 + j for j in range(gap + 1)] + [qL], list(t[: gap + 1]) + [a], runway)
    _chain_concave(lp, [qR] + [1 + j for j in range(gap + 1, k)], [a] + list(t[gap + 1 :]), runway)
    return lp.solve()


_GAP_SCAN_POINTS = 9
_cache: dict[tuple, float] = {}


def _canonical_key(x: np.ndarray) -> tuple:
    # the dip is invariant under increasing affine maps; cache accordingly
    lo, hi = x[0], x[-1]
    return tuple(np.round((x - lo) / (hi - lo), 12))


def dip_oracle(sample) -> float:
    """Exhaustive sup-distance to the nearest unimodal CDF (to ~1e-10)."""
    x = np.sort(np.asarray(sample, dtype=float))
    if x.size < 2:
        raise ValueError("need at least two observations")
    if x[0] == x[-1]:
        raise ValueError("constant sample")
    key = _canonical_key(x)
    if key in _cache:
        return _cache[key]

    t, c = _ecdf_levels(x)
    k = t.size
    runway = _RUNWAY_FACTOR * (t[-1] - t[0] + 1.0)
    floor = 1.0 / (2.0 * x.size)

    best = min(_mode_at_knot(t, c, m, runway) for m in range(k))
    for gap in range(k - 1):
        if best <= floor + 1e-12:
            break
        lo, hi = t[gap], t[gap + 1]
        width = hi - lo
        inner = np.linspace(lo + 1e-9 * width, hi - 1e-9 * width, _GAP_SCAN_POINTS)
        vals = [_mode_in_gap(t, c, gap, a, runway) for a in inner]
        i_best = int(np.argmin(vals))
        best = min(best, vals[i_best])
        bracket_lo = inner[max(i_best - 1, 0)]
        bracket_hi = inner[min(i_best + 1, len(inner) - 1)]
        if bracket_hi > bracket_lo:
            res = minimize_scalar(
                lambda a: _mode_in_gap(t, c, gap, a, runway),
                bounds=(bracket_lo, bracket_hi),
                method="bounded",
                options={"xatol": 1e-11 * width},
            )
            best = min(best, float(res.fun))
    best = max(best, floor)
    _cache[key] = best
    return best
