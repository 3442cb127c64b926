"""Subsampled calibration of aggregated randomised tests.

Workflow: draw blocks of disjoint index tuples, evaluate the randomised
statistic on every (tuple, replication) pair to fill a B x L matrix, rank-
transform the matrix onto the statistic's null marginal, aggregate rows to
get a reference distribution for the aggregated full-data statistic, and
reject when the full-data aggregate exceeds its upper-alpha quantile.

All randomness is derived from an integer master seed via
:mod:`ranksub.streams`, so a report is a pure function of
``(data, parameters, seed)`` no matter how evaluation is ordered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .dist import EmpiricalCDF, NullMarginal, rank_transform
from .streams import derive_rng

__all__ = [
    "IndexTupleSet",
    "RandomizedStatistic",
    "Aggregator",
    "TestReport",
    "MEAN",
    "MAX",
    "MIN",
    "AGGREGATORS",
    "default_subsample_size",
    "generate_tuples",
    "build_h_matrix",
    "full_data_statistics",
    "aggregate_test",
    "adaptive_test",
]


def default_subsample_size(n: int) -> int:
    """Default subsample size floor(n / log n); needs n >= 8."""
    if n < 8:
        raise ValueError("sample too small for subsampling (need n >= 8)")
    return int(n // math.log(n))


@dataclass(frozen=True)
class IndexTupleSet:
    """B = J * floor(n/m) ordered index tuples, grouped in J disjoint blocks."""

    n: int
    m: int
    J: int
    tuples: np.ndarray  # (B, m) integer row indices

    def __post_init__(self):
        t = np.asarray(self.tuples)
        per_block = self.n // self.m
        if t.shape != (self.J * per_block, self.m):
            raise ValueError("tuple array shape does not match (J * floor(n/m), m)")
        if t.min() < 0 or t.max() >= self.n:
            raise ValueError("tuple indices out of range")

    @property
    def B(self) -> int:
        return self.tuples.shape[0]


def generate_tuples(n: int, m: int, J: int, rng: np.random.Generator) -> IndexTupleSet:
    """One fresh permutation per block, sliced into floor(n/m) disjoint tuples."""
    if not 1 < m < n:
        raise ValueError("subsample size m must satisfy 1 < m < n")
    if J < 1:
        raise ValueError("J must be a positive integer")
    per_block = n // m
    blocks = []
    for _ in range(J):
        perm = rng.permutation(n)
        blocks.append(perm[: per_block * m].reshape(per_block, m))
    return IndexTupleSet(n=n, m=m, J=J, tuples=np.concatenate(blocks, axis=0))


@dataclass(frozen=True)
class RandomizedStatistic:
    """A test statistic T(data; omega) with a declared null marginal.

    ``evaluate`` receives a row-indexable data view and a dedicated random
    generator; repeated calls with independent generators on fixed data must
    produce exchangeable draws.  Larger values are stronger evidence against
    the null; wrap a p-value as 1 - p before constructing one of these.
    """

    name: str
    evaluate: Callable[[object, np.random.Generator], float]
    null_marginal: NullMarginal


@dataclass(frozen=True)
class Aggregator:
    """Symmetric, 1-Lipschitz (sup-norm) map from L statistics to one."""

    name: str
    apply: Callable[[np.ndarray], float]


MEAN = Aggregator("mean", lambda v: float(np.mean(v)))
MAX = Aggregator("max", lambda v: float(np.max(v)))
MIN = Aggregator("min", lambda v: float(np.min(v)))
AGGREGATORS = {a.name: a for a in (MEAN, MAX, MIN)}


@dataclass(frozen=True)
class TestReport:
    statistic: float
    critical_value: float
    p_value: float
    reject: bool
    aggregator: str
    n: int
    m: int
    B: int
    L: int
    J: int
    alpha: float
    seed: int
    degenerate: bool = False
    # adaptive runs: one (name, S_n^w, p^w) triple per aggregation function
    per_aggregator: tuple[tuple[str, float, float], ...] | None = None


def _subsample_rows(data, idx: np.ndarray):
    return data[idx]


def build_h_matrix(
    data,
    statistic: RandomizedStatistic,
    tuples: IndexTupleSet,
    L: int,
    seed: int,
) -> np.ndarray:
    """Evaluate the statistic on every (tuple, stream) pair.

    Entry (b, l) uses the generator derived from ``(seed, "sub", b, l)``,
    so the matrix is independent of evaluation order.
    """
    if L < 1:
        raise ValueError("L must be a positive integer")
    if len(data) != tuples.n:
        raise ValueError("tuple set was generated for a different sample size")
    B = tuples.B
    h = np.empty((B, L), dtype=float)
    for b in range(B):
        rows = _subsample_rows(data, tuples.tuples[b])
        for l in range(L):
            try:
                h[b, l] = statistic.evaluate(rows, derive_rng(seed, "sub", b, l))
            except Exception as exc:
                raise RuntimeError(
                    f"statistic {statistic.name!r} failed on subsample b={b}, l={l}"
                ) from exc
    return h


def full_data_statistics(
    data, statistic: RandomizedStatistic, L: int, seed: int
) -> np.ndarray:
    """(T_n^{(1)}, ..., T_n^{(L)}) with streams disjoint from the subsample ones."""
    return np.array(
        [statistic.evaluate(data, derive_rng(seed, "full", l)) for l in range(L)]
    )


def _prepare(data, statistic, L, alpha, J, seed, m):
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    n = len(data)
    if m is None:
        m = default_subsample_size(n)
    tuples = generate_tuples(n, m, J, derive_rng(seed, "tuples"))
    h_hat = build_h_matrix(data, statistic, tuples, L, seed)
    h_tilde = rank_transform(h_hat, statistic.null_marginal)
    t_full = full_data_statistics(data, statistic, L, seed)
    return n, m, tuples, h_tilde, t_full


def _row_aggregates(h_tilde: np.ndarray, aggregator: Aggregator) -> np.ndarray:
    return np.array([aggregator.apply(row) for row in h_tilde])


def aggregate_test(
    data,
    statistic: RandomizedStatistic,
    aggregator: Aggregator,
    *,
    L: int,
    alpha: float,
    seed: int,
    J: int = 100,
    m: int | None = None,
) -> TestReport:
    """Aggregated multiple-split test with a single aggregation function.

    Rejects when S_n exceeds the upper-alpha quantile of the ECDF of the
    row-aggregated, rank-transformed subsample matrix; the reported p-value
    is one minus that ECDF at S_n.
    """
    n, m, tuples, h_tilde, t_full = _prepare(data, statistic, L, alpha, J, seed, m)
    s_tilde = _row_aggregates(h_tilde, aggregator)
    s_n = aggregator.apply(t_full)

    degenerate = bool(np.all(s_tilde == s_tilde[0]))
    g_tilde = EmpiricalCDF(s_tilde)
    critical = g_tilde.upper_quantile(alpha)
    if degenerate:
        # constant reference distribution carries no evidence
        p_value, reject = 1.0, False
    else:
        p_value = 1.0 - g_tilde.evaluate(s_n)
        reject = s_n > critical
    return TestReport(
        statistic=float(s_n),
        critical_value=critical,
        p_value=float(p_value),
        reject=bool(reject),
        aggregator=aggregator.name,
        n=n,
        m=m,
        B=tuples.B,
        L=L,
        J=J,
        alpha=alpha,
        seed=seed,
        degenerate=degenerate,
    )


def adaptive_test(
    data,
    statistic: RandomizedStatistic,
    aggregators: Sequence[Aggregator],
    *,
    L: int,
    alpha: float,
    seed: int,
    J: int = 100,
    m: int | None = None,
) -> TestReport:
    """Multiple-split test that adapts to the best of several aggregators.

    The statistic is R_n, the largest of the per-aggregator reference-ECDF
    values at the full-data aggregates (one minus the smallest per-aggregator
    p-value); it is calibrated against its own subsampled counterparts.
    """
    if len(aggregators) < 1:
        raise ValueError("need at least one aggregation function")
    n, m, tuples, h_tilde, t_full = _prepare(data, statistic, L, alpha, J, seed, m)

    r_tilde = np.full(tuples.B, -np.inf)
    r_n = -np.inf
    per_agg = []
    for agg in aggregators:
        s_tilde_w = _row_aggregates(h_tilde, agg)
        g_w = EmpiricalCDF(s_tilde_w)
        r_tilde = np.maximum(r_tilde, g_w.evaluate(s_tilde_w))
        s_n_w = agg.apply(t_full)
        g_at_stat = g_w.evaluate(s_n_w)
        r_n = max(r_n, g_at_stat)
        per_agg.append((agg.name, float(s_n_w), float(1.0 - g_at_stat)))

    degenerate = bool(np.all(r_tilde == r_tilde[0]))
    q_tilde = EmpiricalCDF(r_tilde)
    critical = q_tilde.upper_quantile(alpha)
    if degenerate:
        p_value, reject = 1.0, False
    else:
        p_value = 1.0 - q_tilde.evaluate(r_n)
        reject = r_n > critical
    return TestReport(
        statistic=float(r_n),
        critical_value=critical,
        p_value=float(p_value),
        reject=bool(reject),
        aggregator="adaptive(" + ",".join(a.name for a in aggregators) + ")",
        n=n,
        m=m,
        B=tuples.B,
        L=L,
        J=J,
        alpha=alpha,
        seed=seed,
        degenerate=degenerate,
        per_aggregator=tuple(per_agg),
    )
