"""Cross-fitted estimation in the partially linear model and its calibration.

Per-fold estimates solve the Robinson score with out-of-fold nuisances; the
point estimate is their average.  Confidence intervals come in two flavours:
the standard plug-in normal interval, and a subsampling interval whose width
is driven by quantiles of the rank-transformed per-fold estimates together
with a variance recovered from the least-squares slope of normal scores on
raw estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from .dist import STD_NORMAL, EmpiricalCDF, rank_transform, std_normal_quantile
from .engine import IndexTupleSet, default_subsample_size, generate_tuples
from .streams import derive_rng

__all__ = [
    "PLMData",
    "NuisanceLearner",
    "DMLResult",
    "knn_regressor",
    "make_folds",
    "cross_fit_theta",
    "dml_point",
    "sigma_plugin",
    "subsample_theta_matrix",
    "sigma_ls",
    "rank_ci",
    "dml_interval",
    "gen_plm_data",
]


@dataclass(frozen=True)
class PLMData:
    """Response Y, scalar treatment D and one-dimensional covariate X."""

    y: np.ndarray
    d: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        for name in ("y", "d", "x"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                raise ValueError(f"column {name} must be a finite 1-D array")
            object.__setattr__(self, name, arr)
        if not (self.y.size == self.d.size == self.x.size):
            raise ValueError("columns must have equal length")

    def __len__(self) -> int:
        return self.y.size

    def __getitem__(self, idx) -> "PLMData":
        return PLMData(self.y[idx], self.d[idx], self.x[idx])


@dataclass(frozen=True)
class NuisanceLearner:
    """fit(features, targets) -> model; predict(model, features) -> predictions."""

    name: str
    fit: Callable[[np.ndarray, np.ndarray], object]
    predict: Callable[[object, np.ndarray], np.ndarray]


def knn_regressor(k: int | None = None) -> NuisanceLearner:
    """k-nearest-neighbour regression on a 1-D feature.

    Distance ties are broken by training index.  With ``k=None`` the
    neighbourhood size adapts to the training size as ceil(n^(2/3) / 2),
    which keeps subsample fits in step with full-data fits.
    """
    if k is not None and k < 1:
        raise ValueError("k must be a positive integer")

    def fit(features: np.ndarray, targets: np.ndarray):
        features = np.asarray(features, dtype=float)
        targets = np.asarray(targets, dtype=float)
        if features.size == 0:
            raise ValueError("empty training set")
        k_eff = k if k is not None else math.ceil(0.5 * features.size ** (2.0 / 3.0))
        return features, targets, min(max(k_eff, 1), features.size)

    def predict(model, features: np.ndarray) -> np.ndarray:
        train_x, train_y, k_eff = model
        q = np.asarray(features, dtype=float)
        dist = np.abs(q[:, None] - train_x[None, :])
        # stable argsort keeps training order within exact distance ties
        nearest = np.argsort(dist, axis=1, kind="stable")[:, :k_eff]
        return train_y[nearest].mean(axis=1)

    label = "knn(adaptive)" if k is None else f"knn(k={k})"
    return NuisanceLearner(name=label, fit=fit, predict=predict)


def make_folds(n: int, L: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Random partition into L folds whose sizes differ by at most one."""
    if L < 1:
        raise ValueError("L must be a positive integer")
    if n < 2 * L:
        raise ValueError("need at least two observations per fold")
    return [np.sort(part) for part in np.array_split(rng.permutation(n), L)]


def _out_of_fold_residuals(data: PLMData, folds, learner: NuisanceLearner):
    """Residuals Y - l_hat(X) and D - m_hat(X), each from out-of-fold fits."""
    n = len(data)
    resid_y = np.empty(n)
    resid_d = np.empty(n)
    for fold in folds:
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        l_model = learner.fit(data.x[mask], data.y[mask])
        m_model = learner.fit(data.x[mask], data.d[mask])
        resid_y[fold] = data.y[fold] - learner.predict(l_model, data.x[fold])
        resid_d[fold] = data.d[fold] - learner.predict(m_model, data.x[fold])
    return resid_y, resid_d


def cross_fit_theta(data: PLMData, folds, learner: NuisanceLearner) -> np.ndarray:
    """Per-fold roots of the linear score: sum r_y r_d / sum r_d^2 within each fold."""
    resid_y, resid_d = _out_of_fold_residuals(data, folds, learner)
    thetas = np.empty(len(folds))
    for i, fold in enumerate(folds):
        denom = float(np.sum(resid_d[fold] ** 2))
        if denom == 0.0:
            raise ValueError("no treatment variation in fold")
        thetas[i] = float(np.sum(resid_y[fold] * resid_d[fold])) / denom
    return thetas


def dml_point(theta_per_fold) -> float:
    """The cross-fitted point estimate: the average of the per-fold roots."""
    return float(np.mean(np.asarray(theta_per_fold, dtype=float)))


def sigma_plugin(data: PLMData, folds, learner: NuisanceLearner, theta: float) -> float:
    """Plug-in asymptotic standard deviation sqrt(mean psi^2 / mean(psi_a)^2)."""
    resid_y, resid_d = _out_of_fold_residuals(data, folds, learner)
    psi = (resid_y - theta * resid_d) * resid_d
    psi_a_mean = float(np.mean(-(resid_d**2)))
    if psi_a_mean == 0.0:
        raise ValueError("no treatment variation")
    return float(np.sqrt(np.mean(psi**2) / psi_a_mean**2))


def subsample_theta_matrix(
    data: PLMData,
    learner: NuisanceLearner,
    L: int,
    tuples: IndexTupleSet,
    seed: int,
) -> np.ndarray:
    """Per-fold estimates on each subsample, with fresh folds per subsample."""
    B = tuples.B
    out = np.empty((B, L))
    for b in range(B):
        sub = data[tuples.tuples[b]]
        folds = make_folds(len(sub), L, derive_rng(seed, "folds", b))
        try:
            out[b] = cross_fit_theta(sub, folds, learner)
        except Exception as exc:
            raise RuntimeError(f"cross-fitting failed on subsample b={b}") from exc
    return out


def sigma_ls(theta_matrix: np.ndarray, m: int, epsilon: float = 0.1) -> float:
    """Variance estimate sqrt(m/L) / slope of normal scores on raw estimates.

    The regression uses only entries whose pooled ECDF value lies inside
    (epsilon/2, 1 - epsilon/2), dropping high-leverage tail points.
    """
    theta = np.asarray(theta_matrix, dtype=float)
    if theta.ndim != 2:
        raise ValueError("theta matrix must be 2-D")
    if not 0.0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 0.5)")
    L = theta.shape[1]

    scores = rank_transform(theta, STD_NORMAL)
    ecdf_values = rankdata(theta, method="average", axis=None).reshape(theta.shape) / theta.size
    keep = (ecdf_values > epsilon / 2.0) & (ecdf_values < 1.0 - epsilon / 2.0)
    if np.count_nonzero(keep) < 10:
        raise ValueError("too few retained points after trimming")

    x = theta[keep]
    z = scores[keep]
    slope = float(np.sum((x - x.mean()) * (z - z.mean())) / np.sum((x - x.mean()) ** 2))
    if slope <= 0.0:
        raise ValueError("degenerate slope")
    return math.sqrt(m / L) / slope


def rank_ci(
    theta_dml: float,
    sigma: float,
    g_tilde: EmpiricalCDF,
    alpha: float,
    n: int,
    L: int,
) -> tuple[float, float]:
    """[theta - sqrt(L/n) sigma G^{-1}(1-alpha/2), theta - sqrt(L/n) sigma G^{-1}(alpha/2)]."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    scale = math.sqrt(L / n) * sigma
    upper_q = g_tilde.upper_quantile(alpha / 2.0)
    lower_q = g_tilde.upper_quantile(1.0 - alpha / 2.0)
    lower = theta_dml - scale * upper_q
    upper = theta_dml - scale * lower_q
    if lower > upper:
        raise ValueError("inverted quantiles in reference distribution")
    return float(lower), float(upper)


@dataclass(frozen=True)
class DMLResult:
    theta_per_fold: np.ndarray
    theta_dml: float
    sigma_plugin: float
    sigma_ls: float
    ci_lower: float
    ci_upper: float
    plugin_lower: float
    plugin_upper: float
    fold_correlation_diag: float
    m: int
    B: int
    L: int


def _mean_pairwise_correlation(matrix: np.ndarray) -> float:
    L = matrix.shape[1]
    if L < 2:
        return float("nan")
    corr = np.corrcoef(matrix, rowvar=False)
    off = corr[np.triu_indices(L, k=1)]
    return float(np.mean(off))


def dml_interval(
    data: PLMData,
    *,
    L: int,
    alpha: float,
    seed: int,
    learner: NuisanceLearner | None = None,
    J: int = 50,
    m: int | None = None,
    epsilon: float = 0.1,
) -> DMLResult:
    """Full pipeline: point estimate, both sigmas, and both intervals."""
    if learner is None:
        learner = knn_regressor()
    n = len(data)
    if m is None:
        m = default_subsample_size(n)

    folds = make_folds(n, L, derive_rng(seed, "fullfolds"))
    theta_per_fold = cross_fit_theta(data, folds, learner)
    theta_hat = dml_point(theta_per_fold)
    sig_plugin = sigma_plugin(data, folds, learner, theta_hat)

    tuples = generate_tuples(n, m, J, derive_rng(seed, "tuples"))
    theta_matrix = subsample_theta_matrix(data, learner, L, tuples, seed)
    scores = rank_transform(theta_matrix, STD_NORMAL)
    g_tilde = EmpiricalCDF(scores.mean(axis=1))
    sig_ls = sigma_ls(theta_matrix, m, epsilon)
    lower, upper = rank_ci(theta_hat, sig_ls, g_tilde, alpha, n, L)

    z = std_normal_quantile(1.0 - alpha / 2.0)
    half = z * sig_plugin / math.sqrt(n)
    return DMLResult(
        theta_per_fold=theta_per_fold,
        theta_dml=theta_hat,
        sigma_plugin=sig_plugin,
        sigma_ls=sig_ls,
        ci_lower=lower,
        ci_upper=upper,
        plugin_lower=theta_hat - half,
        plugin_upper=theta_hat + half,
        fold_correlation_diag=_mean_pairwise_correlation(theta_matrix),
        m=m,
        B=tuples.B,
        L=L,
    )


def _m0(x: np.ndarray) -> np.ndarray:
    return x + np.cos(x) + np.exp(x) / (1.0 + np.exp(x))


def _g0(x: np.ndarray) -> np.ndarray:
    return (-10.0 * x + 3.0 * np.cos(4.0 * x) * x**2 / (1.0 + np.exp(x / 6.0))) / 10.0


def gen_plm_data(n: int, theta0: float, rng: np.random.Generator) -> PLMData:
    """Heteroscedastic partially linear model with centred Gamma errors."""
    if n < 1:
        raise ValueError("n must be positive")
    x = rng.standard_normal(n)
    scale = 4.0 * np.sqrt(np.abs(x))
    v = scale * (rng.gamma(0.5, 1.0, n) - 0.5)
    xi = scale * (rng.gamma(0.3, 1.0, n) - 0.3)
    d = _m0(x) + v
    y = theta0 * d + _g0(x) + xi
    return PLMData(y=y, d=d, x=x)
