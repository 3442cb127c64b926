"""Closed forms for the equicorrelated Gaussian location model.

A single test statistic is N(mu, 1); L exchangeable copies share pairwise
correlation rho.  The aggregated test compares the average against the
upper-alpha quantile of its exact null distribution.  This module provides
the aggregated power and non-replication probabilities, draws from the
model, and the adversarial exchangeable pair showing that comparing a raw
average of Z-statistics to z_alpha can double the size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .dist import std_normal_cdf, std_normal_quantile

__all__ = [
    "GaussLocationModel",
    "gauss_power",
    "gauss_nonreplication",
    "gen_exchangeable_gaussians",
    "adversarial_from_uniform",
    "adversarial_pair",
]


@dataclass(frozen=True)
class GaussLocationModel:
    mu: float
    rho: float
    L: int
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.L < 1:
            raise ValueError("L must be a positive integer")


def _avg_sd(model: GaussLocationModel) -> float:
    # sd of the average of L equicorrelated unit-variance Gaussians
    return math.sqrt(1.0 / model.L + model.rho * (model.L - 1) / model.L)


def gauss_power(model: GaussLocationModel) -> float:
    """Power Phi(mu / sd(avg) - z_alpha) of the exactly calibrated average test."""
    z_alpha = std_normal_quantile(1.0 - model.alpha)
    return float(std_normal_cdf(model.mu / _avg_sd(model) - z_alpha))


def gauss_nonreplication(model: GaussLocationModel, tol: float = 1e-8) -> float:
    """Probability that two independent runs of the average test disagree.

    Evaluates 1 - int {Phi^2(y) + Phi^2(-y)} phi(x) dx over x in [-8, 8] by
    adaptive quadrature, where y = (mu + sqrt(rho) x - t_alpha) / sqrt((1-rho)/L)
    and t_alpha is the null upper-alpha quantile of the average.
    """
    sd = _avg_sd(model)
    t_alpha = sd * std_normal_quantile(1.0 - model.alpha)
    scale = math.sqrt((1.0 - model.rho) / model.L)
    sqrt_rho = math.sqrt(model.rho)

    def integrand(x: float) -> float:
        y = (model.mu + sqrt_rho * x - t_alpha) / scale
        phi_x = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        py = float(std_normal_cdf(y))
        return (py * py + (1.0 - py) ** 2) * phi_x

    value, abserr = quad(integrand, -8.0, 8.0, epsabs=tol, limit=200)
    if abserr > 10.0 * tol:
        raise RuntimeError(
            f"quadrature did not converge: estimated error {abserr:.3g} > {tol:.3g}"
        )
    return float(min(max(1.0 - value, 0.0), 1.0))


def gen_exchangeable_gaussians(
    mu: float, rho: float, L: int, rng: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Draws T^(l) = mu + sqrt(rho) Z0 + sqrt(1-rho) Z_l with N(mu,1) margins.

    Returns shape (L,) or, with ``size`` given, (size, L) independent rows.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    rows = 1 if size is None else size
    z0 = rng.standard_normal((rows, 1))
    z = rng.standard_normal((rows, L))
    t = mu + math.sqrt(rho) * z0 + math.sqrt(1.0 - rho) * z
    return t[0] if size is None else t


def adversarial_from_uniform(u1: float, alpha: float) -> tuple[float, float]:
    """Deterministic core of the adversarial pair: maps one uniform draw.

    U2 equals U1 below 1 - 2*alpha and reflects about 1 - alpha above it;
    both coordinates are then pushed through the normal quantile.
    """
    if not 0.0 < alpha <= 0.5:
        raise ValueError("alpha must lie in (0, 1/2]")
    u2 = u1 if u1 <= 1.0 - 2.0 * alpha else 2.0 - 2.0 * alpha - u1
    return float(std_normal_quantile(u1)), float(std_normal_quantile(u2))


def adversarial_pair(alpha: float, rng: np.random.Generator) -> tuple[float, float]:
    """Exchangeable pair with exact N(0,1) margins whose average has size 2*alpha."""
    return adversarial_from_uniform(float(rng.random()), alpha)
