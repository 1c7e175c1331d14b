"""SURE-driven James-Stein shrinkage on the complex manifold.

Hierarchical model, per dimension i = 1..p and component k = 1..K::

    X_i | M_i ~ LN(M_i, v I)        M_i ~ MLN(w, mu, Diag(lambda_k I))

Each component contributes the MAP-style estimate

    M_ik = exp(b_k log Xbar_i + (1 - b_k) log mu_k),   b_k = lambda_k / (lambda_k + v)

where Xbar_i is the Log-Euclidean Frechet mean of the N observations of
dimension i.  (mu_k, lambda_k) minimise Stein's unbiased risk estimate

    SURE(mu, lam) = sum_i v / (lam + v)^2 * (v |log Xbar_i - log mu|^2 + q (lam^2 - v^2) / N)

with q the real dimension of the log-domain (2 for the complex plane,
1 for a single SO(2) or P1 factor).  Differences of angles are always taken
along the shorter arc.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .frechet import fm_arrays
from .kernels import canonical, wrapdiff
from .manifold import PolarComplex, from_arrays, sq_dist_arrays, to_arrays

TANGENT_DIM = 2
LAMBDA_MIN = 1e-6
LAMBDA_MAX = 1e3
LAMBDA_GRID = 61
GOLDEN_TOL = 1e-8

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class SureFitWarning(UserWarning):
    """The lambda search hit an end of its bracket."""


@dataclass(frozen=True)
class HierarchicalModel:
    v: float
    w: tuple[float, ...]
    mu: tuple[PolarComplex, ...] = ()
    lam: tuple[float, ...] = ()

    def __post_init__(self):
        if not (self.v >= 0 and math.isfinite(self.v)):
            raise ValueError(f"v must be finite and >= 0, got {self.v!r}")
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("w must be a nonempty vector")
        if np.any(w < 0) or np.any(w > 1) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"w must lie on the simplex, got {self.w!r}")
        if self.mu and len(self.mu) != w.size:
            raise ValueError("mu must have K entries")
        if self.lam and (len(self.lam) != w.size or any(not l > 0 for l in self.lam)):
            raise ValueError("lam must have K positive entries")
        object.__setattr__(self, "w", tuple(float(x) for x in w))

    @property
    def K(self) -> int:
        return len(self.w)

    @property
    def mle_mode(self) -> bool:
        return self.v == 0


@dataclass(frozen=True, eq=False)
class SampleSummary:
    """Per-dimension sample Frechet means, stored as (log_r, theta) arrays."""

    xbar_u: np.ndarray
    xbar_t: np.ndarray
    n_samples: int

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.xbar_u, dtype=np.float64))
        t = np.atleast_1d(canonical(self.xbar_t))
        if u.shape != t.shape or u.ndim != 1 or u.size < 1:
            raise ValueError("xbar arrays must be matching nonempty vectors")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        object.__setattr__(self, "xbar_u", u)
        object.__setattr__(self, "xbar_t", t)

    @classmethod
    def from_points(cls, xbar: list[PolarComplex], n_samples: int) -> SampleSummary:
        u, t = to_arrays(xbar)
        return cls(u, t, n_samples)

    @classmethod
    def from_samples(cls, log_r, theta) -> SampleSummary:
        """Summarise an (N, p) array of observations, one column per dimension."""
        log_r = np.asarray(log_r, dtype=np.float64)
        mu, mt, _ = fm_arrays(log_r, theta, axis=0)
        return cls(mu, mt, log_r.shape[0])

    @property
    def dim(self) -> int:
        return self.xbar_u.size

    @property
    def xbar(self) -> list[PolarComplex]:
        return from_arrays(self.xbar_u, self.xbar_t)


@dataclass
class ComponentFit:
    mu_hat: PolarComplex
    lambda_hat: float
    sure_value: float
    n_evals: int = 0
    saturated: bool = False
    floored: bool = False


@dataclass
class SureFit:
    components: list[ComponentFit] = field(default_factory=list)

    @property
    def mu_hat(self) -> list[PolarComplex]:
        return [c.mu_hat for c in self.components]

    @property
    def lambda_hat(self) -> list[float]:
        return [c.lambda_hat for c in self.components]

    @property
    def sure_value(self) -> list[float]:
        return [c.sure_value for c in self.components]

    def to_dict(self) -> dict:
        return {
            "components": [
                {
                    "mu_log_r": c.mu_hat.log_r,
                    "mu_theta": c.mu_hat.theta,
                    "lambda_hat": c.lambda_hat,
                    "sure_value": c.sure_value,
                    "n_evals": c.n_evals,
                    "saturated": c.saturated,
                    "floored": c.floored,
                }
                for c in self.components
            ]
        }

    @classmethod
    def from_dict(cls, doc: dict) -> SureFit:
        return cls([
            ComponentFit(
                PolarComplex.from_log(c["mu_log_r"], c["mu_theta"]),
                float(c["lambda_hat"]),
                float(c["sure_value"]),
                int(c.get("n_evals", 0)),
                bool(c.get("saturated", False)),
                bool(c.get("floored", False)),
            )
            for c in doc["components"]
        ])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def shrink_arrays(xbar_u, xbar_t, mu_u, mu_t, lam, v):
    """Elementwise MAP combination in the log-domain (shorter-arc on angles)."""
    if v == 0:
        return np.array(xbar_u, dtype=np.float64), np.array(xbar_t, dtype=np.float64)
    c = v / (lam + v)
    u = xbar_u + c * (mu_u - xbar_u)
    t = canonical(xbar_t + c * wrapdiff(mu_t - xbar_t))
    return u, t


def map_component_mean(xbar_i: PolarComplex, mu_k: PolarComplex, lambda_k: float, v: float) -> PolarComplex:
    if not lambda_k + v > 0:
        raise ValueError("lambda_k + v must be positive")
    u, t = shrink_arrays(xbar_i.log_r, xbar_i.theta, mu_k.log_r, mu_k.theta, lambda_k, v)
    return PolarComplex.from_log(float(u), float(t))


def dispersion(summary: SampleSummary, mu: PolarComplex) -> float:
    """sum_i |log Xbar_i - log mu|^2."""
    return float(sq_dist_arrays(summary.xbar_u, summary.xbar_t, mu.log_r, mu.theta).sum())


def sure_profile(lam, disp: float, p: int, n_samples: int, v: float, dim: int = TANGENT_DIM):
    """SURE as a function of lambda once the dispersion sum is known."""
    lam = np.asarray(lam, dtype=np.float64)
    return v / (lam + v) ** 2 * (v * disp + p * dim * (lam * lam - v * v) / n_samples)


def sure_objective(summary: SampleSummary, mu_k: PolarComplex, lambda_k: float, v: float,
                   dim: int = TANGENT_DIM) -> float:
    disp = dispersion(summary, mu_k)
    return float(sure_profile(lambda_k, disp, summary.dim, summary.n_samples, v, dim))


def golden_section(f, a: float, b: float, tol: float = GOLDEN_TOL, max_iter: int = 500):
    """Minimise a unimodal f on [a, b]; returns (x, f(x), n_evals)."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    n = 2
    while abs(b - a) > tol and n < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
        n += 1
    return (c, fc, n) if fc <= fd else (d, fd, n)


def fit_sure_component(summary: SampleSummary, v: float, *, dim: int = TANGENT_DIM,
                       lam_min: float = LAMBDA_MIN, lam_max: float = LAMBDA_MAX,
                       n_grid: int = LAMBDA_GRID, tol: float = GOLDEN_TOL,
                       warn: bool = True) -> ComponentFit:
    """Minimise SURE over (mu, lambda) for one component.

    The mu-coefficient v / (lambda + v)^2 does not depend on i, so the inner
    minimiser over mu is the equal-weight Frechet mean of the Xbar_i for every
    lambda.  lambda is then located on a log grid and refined by
    golden-section search inside the bracketing cells.
    """
    if summary.dim < 2 and warn:
        warnings.warn("shrinkage across a single dimension is vacuous", SureFitWarning, stacklevel=2)
    mu_u, mu_t, _ = fm_arrays(summary.xbar_u, summary.xbar_t)
    mu_hat = PolarComplex.from_log(float(mu_u), float(mu_t))
    if v == 0:
        # no shrinkage: every lambda gives the MLE and SURE vanishes
        return ComponentFit(mu_hat, lam_max, 0.0, 0)
    disp = dispersion(summary, mu_hat)
    p, N = summary.dim, summary.n_samples

    def f(lam):
        return float(sure_profile(lam, disp, p, N, v, dim))

    grid = np.geomspace(lam_min, lam_max, n_grid)
    vals = sure_profile(grid, disp, p, N, v, dim)
    i = int(np.argmin(vals))
    n_evals = n_grid
    if i == n_grid - 1:
        if warn:
            warnings.warn("SURE still decreasing at lambda_max", SureFitWarning, stacklevel=2)
        return ComponentFit(mu_hat, lam_max, float(vals[i]), n_evals, saturated=True)
    lo = grid[max(i - 1, 0)]
    hi = grid[i + 1]
    x, fx, ne = golden_section(f, lo, hi, tol)
    n_evals += ne
    if vals[i] < fx:
        x, fx = grid[i], float(vals[i])
    floored = bool(x - lam_min <= tol)
    if floored:
        if warn:
            warnings.warn("SURE minimised at the lambda floor", SureFitWarning, stacklevel=2)
        x, fx = lam_min, float(vals[0])
    return ComponentFit(mu_hat, float(x), float(fx), n_evals, floored=floored)


def fit_sure(summary: SampleSummary, v: float, K: int = 1, **kwargs) -> SureFit:
    """Fit all K components; every component sees the same summary."""
    comp = fit_sure_component(summary, v, **kwargs)
    return SureFit([ComponentFit(**vars(comp)) for _ in range(K)])


def csure_arrays(xbar_u, xbar_t, w, mu_u, mu_t, lam, v, combine: str = "algebra"):
    """C-SURE estimate from arrays; w, mu_*, lam have length K.

    ``combine='algebra'`` mixes the component log-contributions with the
    weights w and exponentiates once, which keeps the result on the manifold.
    ``combine='literal'`` sums the per-component exponentials on the P1
    factor, exp(w_k xi_k) summed over k, and keeps algebra mixing on the
    angle, where a sum of rotations is not a rotation.
    """
    xbar_u = np.asarray(xbar_u, dtype=np.float64)
    xbar_t = np.asarray(xbar_t, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    mu_u = np.asarray(mu_u, dtype=np.float64)
    mu_t = np.asarray(mu_t, dtype=np.float64)
    if combine not in ("algebra", "literal"):
        raise ValueError(f"unknown combine mode {combine!r}")
    c = np.zeros(w.size) if v == 0 else v / (lam + v)
    wc = w * c
    est_t = canonical(xbar_t + (wc[:, None] * wrapdiff(mu_t[:, None] - xbar_t[None, :])).sum(axis=0))
    du = mu_u[:, None] - xbar_u[None, :]
    if combine == "algebra":
        est_u = xbar_u + (wc[:, None] * du).sum(axis=0)
    else:
        xi_u = xbar_u[None, :] + c[:, None] * du
        est_u = np.log(np.exp(w[:, None] * xi_u).sum(axis=0))
    return est_u, est_t


def csure_estimate(summary: SampleSummary, model: HierarchicalModel, fits: SureFit,
                   combine: str = "algebra") -> list[PolarComplex]:
    if len(fits.components) != model.K:
        raise ValueError(f"model has K={model.K} but fit has {len(fits.components)} components")
    mu_u, mu_t = to_arrays(fits.mu_hat)
    u, t = csure_arrays(summary.xbar_u, summary.xbar_t, model.w, mu_u, mu_t,
                        fits.lambda_hat, model.v, combine)
    return from_arrays(u, t)


def manifold_loss(est: list[PolarComplex], truth: list[PolarComplex]) -> float:
    if len(est) != len(truth):
        raise ValueError(f"length mismatch: {len(est)} vs {len(truth)}")
    eu, et = to_arrays(est)
    tu, tt = to_arrays(truth)
    return float(sq_dist_arrays(eu, et, tu, tt).sum())


def analytic_risk(model: HierarchicalModel, truth: list[PolarComplex], k: int, N: int,
                  dim: int = TANGENT_DIM) -> float:
    """Exact risk of the k-th component estimate at fixed (mu_k, lambda_k)."""
    v, lam, mu = model.v, model.lam[k], model.mu[k]
    tu, tt = to_arrays(truth)
    off = sq_dist_arrays(mu.log_r, mu.theta, tu, tt)
    return float(np.sum(v / (lam + v) ** 2 * (v * off + dim * lam * lam / N)))
