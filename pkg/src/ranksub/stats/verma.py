"""Testing no direct treatment effect in a two-stage randomised trial.

The independence of interest holds only in a reweighted population Q with
dQ/dP = q(A2) / p(A2 | A1, L).  We draw an approximate Q-sample by
rejection sampling with weights bounded by a constant chosen to maximise
the acceptance rate, then run an off-the-shelf permutation test
(|cov(A1, Y)| or the kernel MMD between the two Y groups) on the accepted
rows.  An inverse-probability-weighted Z-statistic serves as a benchmark.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..dist import UNIFORM01, std_normal_cdf
from ..engine import RandomizedStatistic

__all__ = [
    "TrialDataset",
    "RejectionPlan",
    "LogisticFit",
    "fit_logistic",
    "rejection_mask",
    "rejection_sample",
    "verma_rejection_plan",
    "permutation_pvalue_cov",
    "median_heuristic",
    "mmd_sq",
    "permutation_pvalue_mmd",
    "ipw_statistic",
    "ipw_pvalue",
    "verma_pvalue",
    "gen_trial_data",
    "true_propensity",
    "fitted_propensity",
    "make_verma_statistic",
    "make_ipw_statistic",
]

_PROP_EPS = 1e-6
# orchestrators truncate propensities strictly inside the admissible band, so
# a stray extreme row degrades a weight instead of aborting the test
_PROP_CLIP = 2e-6

# latent confounder loadings and covariance of the data-generating process
_BETA_UL = np.array([1.0, 1.0, -2.0, 2.0])
_BETA_UY = np.array([2.0, -1.0, 3.0, -10.0])
_SIGMA_U = np.array([[2.0 ** -abs(i - j) for j in range(4)] for i in range(4)])
_CHOL_U = np.linalg.cholesky(_SIGMA_U)


@dataclass(frozen=True)
class TrialDataset:
    """Per-row columns of a sequentially randomised trial."""

    a1: np.ndarray
    l: np.ndarray
    a2: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("a1", "l", "a2", "y"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise ValueError(f"column {name} must be one-dimensional")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite values in column {name}")
            arrays[name] = arr
        sizes = {a.size for a in arrays.values()}
        if len(sizes) != 1:
            raise ValueError("columns must have equal length")
        for name in ("a1", "a2"):
            if not np.all(np.isin(arrays[name], (0.0, 1.0))):
                raise ValueError(f"column {name} must be binary 0/1")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.a1.size

    def __getitem__(self, idx) -> "TrialDataset":
        return TrialDataset(self.a1[idx], self.l[idx], self.a2[idx], self.y[idx])


@dataclass(frozen=True)
class RejectionPlan:
    """Per-row density-ratio weights, their bound, and the target A2 marginal."""

    weights: np.ndarray
    bound: float
    q1: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0.0) or np.any(w > self.bound):
            raise ValueError("weight bound violated")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class LogisticFit:
    coef: np.ndarray
    converged: bool
    n_iter: int

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return expit(np.asarray(features, dtype=float) @ self.coef)


def fit_logistic(
    features: np.ndarray,
    labels: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 50,
    ridge: float = 1e-8,
) -> LogisticFit:
    """Newton/IRLS logistic regression; deterministic given its inputs.

    Stops when the gradient norm drops below ``tol``.  Perfectly separable
    data never converges: the coefficient path is capped at ``max_iter``
    steps and returned with ``converged=False``.
    """
    x = np.asarray(features, dtype=float)
    z = np.asarray(labels, dtype=float)
    if x.ndim != 2 or z.ndim != 1 or x.shape[0] != z.size:
        raise ValueError("features must be n x d with matching n labels")
    n, d = x.shape
    if n <= d:
        raise ValueError("need more observations than features")
    if np.linalg.matrix_rank(x) < d:
        raise ValueError("singular design matrix")

    beta = np.zeros(d)
    for it in range(1, max_iter + 1):
        p = expit(x @ beta)
        grad = x.T @ (z - p)
        if float(np.linalg.norm(grad)) < tol:
            return LogisticFit(coef=beta, converged=True, n_iter=it - 1)
        w = p * (1.0 - p)
        hess = (x * w[:, None]).T @ x + ridge * np.eye(d)
        beta = beta + np.linalg.solve(hess, grad)
    return LogisticFit(coef=beta, converged=False, n_iter=max_iter)


def true_propensity(data: TrialDataset) -> np.ndarray:
    """P(A2 = 1 | A1, L) of the simulated trial: expit(2 A1 - L + 2)."""
    return expit(2.0 * data.a1 - data.l + 2.0)


def fitted_propensity(data: TrialDataset) -> np.ndarray:
    """Logistic-regression estimate of P(A2 = 1 | A1, L) with an intercept."""
    design = np.column_stack([np.ones(len(data)), data.a1, data.l])
    return fit_logistic(design, data.a2).predict_proba(design)


def verma_rejection_plan(data: TrialDataset, propensity: np.ndarray) -> RejectionPlan:
    """Weights q(A2)/p(A2 | A1, L) with q chosen to maximise acceptance.

    The bound must cover the weights actually realised in the sample, so the
    balance equation q1 / min e = (1 - q1) / min(1 - e) runs over the rows of
    each treatment arm: min e over rows with A2 = 1, min(1 - e) over rows
    with A2 = 0 (all rows when an arm is empty).
    """
    e = np.asarray(propensity, dtype=float)
    if e.size != len(data):
        raise ValueError("propensity length mismatch")
    if np.any(e <= _PROP_EPS) or np.any(e >= 1.0 - _PROP_EPS):
        raise ValueError("propensity at boundary")

    treated = data.a2 == 1.0
    a = float(np.min(e[treated])) if np.any(treated) else float(np.min(e))
    b = float(np.min(1.0 - e[~treated])) if np.any(~treated) else float(np.min(1.0 - e))
    q1 = a / (a + b)
    bound = q1 / a
    weights = np.where(data.a2 == 1.0, q1 / e, (1.0 - q1) / (1.0 - e))
    # the balance makes max weight equal the bound; shave float ulps only
    weights = np.minimum(weights, bound)
    return RejectionPlan(weights=weights, bound=bound, q1=q1)


def rejection_mask(weights: np.ndarray, bound: float, u: np.ndarray) -> np.ndarray:
    """Accept row i when u_i < w_i / bound; depends on row i's entries only."""
    w = np.asarray(weights, dtype=float)
    u = np.asarray(u, dtype=float)
    if bound <= 0.0:
        raise ValueError("bound must be positive")
    if np.any(w < 0.0) or np.any(w > bound):
        raise ValueError("weight bound violated")
    if w.shape != u.shape:
        raise ValueError("weights and uniforms must align")
    return u < w / bound


def rejection_sample(
    weights: np.ndarray, bound: float, rng: np.random.Generator
) -> np.ndarray:
    """Indices of accepted rows; an empty acceptance is legitimate."""
    w = np.asarray(weights, dtype=float)
    return np.flatnonzero(rejection_mask(w, bound, rng.random(w.size)))


def permutation_pvalue_cov(
    a, y, n_perm: int, rng: np.random.Generator
) -> float:
    """Permutation p-value for |cov(A, Y)| with the add-one estimator."""
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    if a.shape != y.shape:
        raise ValueError("length mismatch between A and Y")
    n = a.size
    if n < 2:
        raise ValueError("need at least two observations")
    if n_perm < 99:
        raise ValueError("need at least 99 permutations")

    y_centred = y - y.mean()
    observed = abs(float(a @ y_centred)) / n
    permuted = rng.permuted(np.tile(a, (n_perm, 1)), axis=1)
    stats = np.abs(permuted @ y_centred) / n
    return float(1 + np.count_nonzero(stats >= observed)) / (1 + n_perm)


def median_heuristic(pooled) -> float:
    """Median pairwise absolute difference of the pooled sample; 0 falls back to 1."""
    x = np.asarray(pooled, dtype=float)
    if x.size < 2:
        return 1.0
    i, j = np.triu_indices(x.size, k=1)
    med = float(np.median(np.abs(x[i] - x[j])))
    return med if med > 0.0 else 1.0


def _gauss_kernel(a: np.ndarray, b: np.ndarray, bandwidth: float) -> np.ndarray:
    diff = a[:, None] - b[None, :]
    return np.exp(-0.5 * (diff / bandwidth) ** 2)


def mmd_sq(y0, y1, bandwidth: float) -> float:
    """Biased (V-statistic) squared MMD with a Gaussian kernel; nonnegative."""
    y0 = np.asarray(y0, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    if y0.size == 0 or y1.size == 0:
        raise ValueError("one group empty")
    if bandwidth <= 0.0:
        raise ValueError("bandwidth must be positive")
    k00 = _gauss_kernel(y0, y0, bandwidth).mean()
    k11 = _gauss_kernel(y1, y1, bandwidth).mean()
    k01 = _gauss_kernel(y0, y1, bandwidth).mean()
    return float(max(k00 + k11 - 2.0 * k01, 0.0))


def permutation_pvalue_mmd(
    a, y, n_perm: int, rng: np.random.Generator
) -> float:
    """Permutation p-value for the MMD between Y|A=0 and Y|A=1.

    The bandwidth comes from the pooled sample once and is held fixed across
    permutations, keeping the statistic a fixed function of the labels.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    if a.shape != y.shape:
        raise ValueError("length mismatch between A and Y")
    n = a.size
    if n < 2:
        raise ValueError("need at least two observations")
    if n_perm < 99:
        raise ValueError("need at least 99 permutations")
    ones = a == 1.0
    n1 = int(np.count_nonzero(ones))
    if n1 == 0 or n1 == n:
        raise ValueError("one group empty")

    bandwidth = median_heuristic(y)
    kernel = _gauss_kernel(y, y, bandwidth)
    row_sums = kernel.sum(axis=1)
    total = kernel.sum()
    n0 = n - n1

    def stat_for(indicator: np.ndarray) -> float:
        s1 = kernel[np.ix_(indicator, indicator)].sum()
        c1 = row_sums[indicator].sum()
        s0 = total - 2.0 * c1 + s1
        s01 = c1 - s1
        return s0 / n0**2 + s1 / n1**2 - 2.0 * s01 / (n0 * n1)

    observed = stat_for(ones)
    exceed = 0
    for _ in range(n_perm):
        perm = rng.permutation(n)
        if stat_for(ones[perm]) >= observed:
            exceed += 1
    return (1 + exceed) / (1 + n_perm)


def ipw_statistic(data: TrialDataset, propensity: np.ndarray) -> float:
    """Self-normalised inverse-probability-weighted statistic, N(0,1) under the null."""
    e = np.asarray(propensity, dtype=float)
    if np.any(e <= _PROP_EPS) or np.any(e >= 1.0 - _PROP_EPS):
        raise ValueError("propensity at boundary")
    p_obs = np.where(data.a2 == 1.0, e, 1.0 - e)
    z = data.y * (data.a1 - data.a1.mean()) / p_obs
    denom = float(np.sum(z**2))
    if denom == 0.0:
        raise ValueError("degenerate IPW statistic")
    return float(np.sum(z) / np.sqrt(denom))


def verma_pvalue(
    data: TrialDataset,
    statistic_kind: str,
    propensity_source: str,
    n_perm: int,
    rng: np.random.Generator,
) -> float:
    """Rejection-sample towards Q, then permutation-test A1 against Y.

    An acceptance too small to carry any evidence (fewer than two rows, or a
    single A1 group for the MMD) yields the most conservative p-value 1.
    """
    if statistic_kind not in ("cov", "mmd"):
        raise ValueError(f"unknown statistic kind {statistic_kind!r}")
    e = _propensity(data, propensity_source)
    plan = verma_rejection_plan(data, np.clip(e, _PROP_CLIP, 1.0 - _PROP_CLIP))
    accepted = rejection_sample(plan.weights, plan.bound, rng)
    if accepted.size < 2:
        return 1.0
    sub = data[accepted]
    if statistic_kind == "mmd":
        n1 = int(np.count_nonzero(sub.a1 == 1.0))
        if n1 == 0 or n1 == sub.a1.size:
            return 1.0
        return permutation_pvalue_mmd(sub.a1, sub.y, n_perm, rng)
    return permutation_pvalue_cov(sub.a1, sub.y, n_perm, rng)


def gen_trial_data(
    n: int, effect: float, variant: str, rng: np.random.Generator
) -> TrialDataset:
    """Simulate the sequential trial.

    ``variant="location"`` uses Y = effect*A1 - A2 + beta'U + eps, so the null
    is effect = 0.  ``variant="scale"`` reads ``effect`` as the degrees of
    freedom of a t-distributed noise attached to the treated arm,
    Y = -A2 + beta'U + (1-A1) eps + A1 xi_nu; the null is nu = inf.
    """
    if n < 1:
        raise ValueError("n must be positive")
    a1 = (rng.random(n) < 0.5).astype(float)
    u = rng.standard_normal((n, 4)) @ _CHOL_U.T
    eps_l = rng.standard_normal(n)
    l = a1 + u @ _BETA_UL + eps_l
    a2 = (rng.random(n) < expit(2.0 * a1 - l + 2.0)).astype(float)
    eps_y = rng.standard_normal(n)
    if variant == "location":
        y = effect * a1 - a2 + u @ _BETA_UY + eps_y
    elif variant == "scale":
        if not effect > 0.0:
            raise ValueError("degrees of freedom must be positive (or inf)")
        xi = rng.standard_normal(n) if np.isinf(effect) else rng.standard_t(effect, n)
        y = -a2 + u @ _BETA_UY + (1.0 - a1) * eps_y + a1 * xi
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return TrialDataset(a1=a1, l=l, a2=a2, y=y)


def make_verma_statistic(
    statistic_kind: str = "cov",
    propensity_source: str = "true",
    n_perm: int = 99,
) -> RandomizedStatistic:
    """Engine statistic 1 - p for the post-rejection-sampling permutation test."""
    return RandomizedStatistic(
        name=f"verma-{statistic_kind}({propensity_source})",
        evaluate=lambda rows, rng: 1.0
        - verma_pvalue(rows, statistic_kind, propensity_source, n_perm, rng),
        null_marginal=UNIFORM01,
    )


def _propensity(data: TrialDataset, source: str) -> np.ndarray:
    if source == "true":
        return true_propensity(data)
    if source == "fitted":
        return fitted_propensity(data)
    raise ValueError(f"unknown propensity source {source!r}")


def ipw_pvalue(data: TrialDataset, propensity_source: str = "true") -> float:
    """Two-sided p-value of the IPW benchmark, with truncated propensities."""
    e = _propensity(data, propensity_source)
    chi = ipw_statistic(data, np.clip(e, _PROP_CLIP, 1.0 - _PROP_CLIP))
    return 2.0 * (1.0 - float(std_normal_cdf(abs(chi))))


def make_ipw_statistic(propensity_source: str = "true") -> RandomizedStatistic:
    """Two-sided IPW benchmark folded into a p-value, exposed as 1 - p."""
    return RandomizedStatistic(
        name=f"ipw({propensity_source})",
        evaluate=lambda rows, rng: 1.0 - ipw_pvalue(rows, propensity_source),
        null_marginal=UNIFORM01,
    )
