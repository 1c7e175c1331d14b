"""Weighted Frechet means on P1, SO(2) and their product.

P1 is flat in log r, so its mean is closed form.  On the circle the global
minimiser of sum_i a_i d(x, x_i)**2 is found exactly by enumerating the n
ways of cutting the sorted angles across +-pi (see ``kernels.circular_mean``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .manifold import AngleSO2, PolarComplex, ScaleP1


class DegenerateMeanWarning(UserWarning):
    """The circular Frechet mean has more than one global minimiser."""


@dataclass(frozen=True)
class ConvexWeights:
    alpha: tuple[float, ...]

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=np.float64)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("weights must be a nonempty vector")
        if np.any(a < 0) or abs(a.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must lie on the simplex, got {self.alpha!r}")
        object.__setattr__(self, "alpha", tuple(float(x) for x in a))

    @classmethod
    def from_free(cls, z) -> ConvexWeights:
        return cls(tuple(softmax(np.asarray(z, dtype=np.float64))))

    @classmethod
    def uniform(cls, n: int) -> ConvexWeights:
        return cls((1.0 / n,) * n)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.alpha)

    def __len__(self):
        return len(self.alpha)


def softmax(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def _check(points, weights):
    if len(points) == 0:
        raise ValueError("need at least one point")
    if len(points) != len(weights):
        raise ValueError(f"{len(points)} points but {len(weights)} weights")


def fm_p1(points: list[ScaleP1], weights: ConvexWeights) -> ScaleP1:
    _check(points, weights)
    logs = np.array([p.log_r for p in points])
    return ScaleP1(float(np.dot(weights.array, logs)))


def fm_so2_with_flag(points: list[AngleSO2], weights: ConvexWeights) -> tuple[AngleSO2, bool]:
    _check(points, weights)
    theta = np.array([[p.theta for p in points]])
    mean, degen = kernels.circular_mean(theta, weights.array[None, :])
    return AngleSO2(float(mean[0])), bool(degen[0])


def fm_so2(points: list[AngleSO2], weights: ConvexWeights) -> AngleSO2:
    """Global weighted Frechet mean on SO(2).

    On a tie between global minimisers the smallest angle is returned and a
    ``DegenerateMeanWarning`` is emitted.
    """
    mean, degen = fm_so2_with_flag(points, weights)
    if degen:
        warnings.warn("circular Frechet mean is not unique", DegenerateMeanWarning, stacklevel=2)
    return mean


def wfm_c(points: list[PolarComplex], weights: ConvexWeights) -> PolarComplex:
    _check(points, weights)
    scale = fm_p1([p.scale for p in points], weights)
    angle = fm_so2([p.angle for p in points], weights)
    return PolarComplex(scale, angle)


def so2_objective(theta: float, points_theta, alpha) -> float:
    """sum_i alpha_i * dist_so2(theta, theta_i)**2."""
    d = kernels.wrapdiff(theta - np.asarray(points_theta))
    return float(np.sum(np.asarray(alpha) * 2.0 * d * d))


def fm_arrays(log_r, theta, alpha=None, axis=-1):
    """Frechet mean of (log_r, theta) arrays along ``axis``.

    Returns (mean_log_r, mean_theta, degenerate) with ``axis`` reduced.
    Equal weights when ``alpha`` is None.
    """
    u = np.moveaxis(np.asarray(log_r, dtype=np.float64), axis, -1)
    t = np.moveaxis(np.asarray(theta, dtype=np.float64), axis, -1)
    n = u.shape[-1]
    if alpha is None:
        a = np.full(u.shape, 1.0 / n)
    else:
        a = np.broadcast_to(np.moveaxis(np.asarray(alpha, dtype=np.float64), axis, -1), u.shape)
    lead = u.shape[:-1]
    mu = (a * u).sum(axis=-1) / a.sum(axis=-1)
    mt, degen = kernels.circular_mean(t.reshape(-1, n), a.reshape(-1, n))
    return mu, mt.reshape(lead), degen.reshape(lead)


def grid_fm_oracle(points: list[PolarComplex], weights: ConvexWeights, resolution: int = 401):
    """Brute-force 2-D grid minimiser of sum_i a_i dist_c(x, x_i)**2.

    Test oracle only: evaluates the full product objective on a
    (log r, theta) grid covering the log-scale hull and the whole circle,
    then zooms in around the best cell a few times.
    """
    a = weights.array
    u = np.array([p.log_r for p in points])
    t = np.array([p.theta for p in points])

    def objective(ug, tg):
        du = ug[:, None, None] - u[None, None, :]
        dt = kernels.wrapdiff(tg[None, :, None] - t[None, None, :])
        return ((du * du + 2.0 * dt * dt) * a).sum(axis=-1)

    u_lo, u_hi = u.min() - 1e-3, u.max() + 1e-3
    t_lo, t_hi = -math.pi, math.pi
    for _ in range(6):
        ug = np.linspace(u_lo, u_hi, resolution)
        tg = np.linspace(t_lo, t_hi, 4 * resolution)
        f = objective(ug, tg)
        i, j = np.unravel_index(np.argmin(f), f.shape)
        du_step = (u_hi - u_lo) / (resolution - 1)
        dt_step = (t_hi - t_lo) / (4 * resolution - 1)
        u_lo, u_hi = ug[i] - 2 * du_step, ug[i] + 2 * du_step
        t_lo, t_hi = tg[j] - 2 * dt_step, tg[j] + 2 * dt_step
    return PolarComplex.from_log(float(ug[i]), float(tg[j]))
