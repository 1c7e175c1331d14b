"""Classical James-Stein machinery in R^p.

Serves as the reference the manifold estimator reduces to in flat
coordinates, and as an oracle in the tests.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class ShrinkageWarning(UserWarning):
    """Shrinkage used outside its dominance regime or at a singular point."""


@dataclass(frozen=True)
class EuclideanObservation:
    x: np.ndarray
    sigma2: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=np.float64))
        if x.ndim != 1 or x.size < 1:
            raise ValueError("x must be a nonempty vector")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        object.__setattr__(self, "x", x)

    @property
    def p(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class EuclideanPrior:
    mu: float
    tau2: float

    def __post_init__(self):
        if not self.tau2 >= 0:
            raise ValueError("tau2 must be nonnegative")


def js_estimate(obs: EuclideanObservation) -> np.ndarray:
    """(1 - (p - 2) sigma^2 / |x|^2) x, without the positive-part clip."""
    if obs.p < 3:
        warnings.warn(f"James-Stein does not dominate the MLE for p={obs.p} < 3", ShrinkageWarning, stacklevel=2)
    nrm2 = float(obs.x @ obs.x)
    if nrm2 == 0.0:
        warnings.warn("|x| = 0: James-Stein factor is singular", ShrinkageWarning, stacklevel=2)
        return np.zeros_like(obs.x)
    return (1.0 - (obs.p - 2) * obs.sigma2 / nrm2) * obs.x


def js_estimate_batch(x: np.ndarray, sigma2: float) -> np.ndarray:
    """Row-wise James-Stein for an (n, p) array; zero rows map to zero."""
    x = np.asarray(x, dtype=np.float64)
    p = x.shape[-1]
    nrm2 = np.sum(x * x, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(nrm2 > 0, 1.0 - (p - 2) * sigma2 / nrm2, 0.0)
    return factor * x


def map_estimate(obs: EuclideanObservation, prior: EuclideanPrior) -> np.ndarray:
    denom = prior.tau2 + obs.sigma2
    return (prior.tau2 / denom) * obs.x + (obs.sigma2 / denom) * prior.mu


def sure_euclidean(obs: EuclideanObservation, prior: EuclideanPrior) -> float:
    """Stein's unbiased risk estimate of ``map_estimate``.

    -p s2 + |theta_hat - x|^2 + 2 s2 * sum_i d theta_hat_i / d x_i, where every
    partial derivative equals tau2 / (tau2 + s2).
    """
    est = map_estimate(obs, prior)
    resid = est - obs.x
    div = obs.p * prior.tau2 / (prior.tau2 + obs.sigma2)
    return float(-obs.p * obs.sigma2 + resid @ resid + 2.0 * obs.sigma2 * div)


def sure_euclidean_batch(x: np.ndarray, sigma2: float, mu: float, tau2: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    p = x.shape[-1]
    b = tau2 / (tau2 + sigma2)
    resid = (b - 1.0) * (x - mu)
    return -p * sigma2 + np.sum(resid * resid, axis=-1) + 2.0 * sigma2 * p * b
