"""Log-Normal and mixture-of-Log-Normal laws on the complex manifold.

A point X follows ``LN(M, v)`` when its log-coordinate (log r, sqrt(2)*theta)
is Gaussian with mean log(M) and covariance v * I.  Draws are taken in the
flat log-domain and the angle is folded back to the principal branch, which
is only a faithful model of the wrapped law while v is small (<= 0.5).

Random streams come from numpy's MT19937 (Mersenne Twister, a twisted
generalised feedback shift-register generator) so that a given seed yields
the same samples on every platform.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import canonical, wrapdiff
from .manifold import SQRT2, PolarComplex, from_arrays

LOG_2PI = math.log(2.0 * math.pi)


def make_rng(seed) -> np.random.Generator:
    """Seeded MT19937 generator; ``seed`` may be an int or a SeedSequence."""
    return np.random.Generator(np.random.MT19937(seed))


@dataclass(frozen=True)
class LogNormalOnC:
    mean: PolarComplex
    cov_scale: float

    def __post_init__(self):
        if not (self.cov_scale > 0 and math.isfinite(self.cov_scale)):
            raise ValueError(f"cov_scale must be positive and finite, got {self.cov_scale!r}")


@dataclass(frozen=True)
class MixtureLogNormal:
    weights: tuple[float, ...]
    components: tuple[LogNormalOnC, ...] = field(default=())

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if len(self.components) < 1:
            raise ValueError("mixture needs at least one component")
        if w.shape != (len(self.components),):
            raise ValueError("weights and components differ in length")
        if np.any(w < 0) or np.any(w > 1) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must lie on the simplex, got {self.weights!r}")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def K(self) -> int:
        return len(self.components)

    def to_dict(self) -> dict:
        return {
            "weights": list(self.weights),
            "components": [
                {"mean_r": c.mean.r, "mean_theta": c.mean.theta, "var": c.cov_scale}
                for c in self.components
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> MixtureLogNormal:
        comps = [
            LogNormalOnC(PolarComplex.from_polar(c["mean_r"], c["mean_theta"]), float(c["var"]))
            for c in doc["components"]
        ]
        return cls(tuple(doc["weights"]), tuple(comps))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> MixtureLogNormal:
        return cls.from_dict(json.loads(text))


def sample_ln_arrays(dist: LogNormalOnC, n: int, rng: np.random.Generator):
    """``n`` draws as (log_r, theta) arrays."""
    if n < 1:
        raise ValueError("n must be >= 1")
    sd = math.sqrt(dist.cov_scale)
    z = rng.standard_normal((n, 2))
    log_r = dist.mean.log_r + sd * z[:, 0]
    s = SQRT2 * dist.mean.theta + sd * z[:, 1]
    return log_r, canonical(s / SQRT2)


def sample_ln(dist: LogNormalOnC, n: int, rng_seed) -> list[PolarComplex]:
    return from_arrays(*sample_ln_arrays(dist, n, make_rng(rng_seed)))


def sample_mln_arrays(dist: MixtureLogNormal, n: int, rng: np.random.Generator):
    """Ancestral sampling; returns (log_r, theta, component_index)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    comp = rng.choice(dist.K, size=n, p=np.asarray(dist.weights))
    z = rng.standard_normal((n, 2))
    mu_u = np.array([c.mean.log_r for c in dist.components])[comp]
    mu_s = SQRT2 * np.array([c.mean.theta for c in dist.components])[comp]
    sd = np.sqrt(np.array([c.cov_scale for c in dist.components]))[comp]
    log_r = mu_u + sd * z[:, 0]
    theta = canonical((mu_s + sd * z[:, 1]) / SQRT2)
    return log_r, theta, comp


def sample_mln(dist: MixtureLogNormal, n: int, rng_seed) -> list[PolarComplex]:
    log_r, theta, _ = sample_mln_arrays(dist, n, make_rng(rng_seed))
    return from_arrays(log_r, theta)


def _ln_logpdf(u, t, comp: LogNormalOnC):
    du = u - comp.mean.log_r
    ds = SQRT2 * wrapdiff(t - comp.mean.theta)
    return -LOG_2PI - math.log(comp.cov_scale) - 0.5 * (du * du + ds * ds) / comp.cov_scale


def logpdf_arrays(dist, log_r, theta):
    """Log-density w.r.t. Lebesgue measure on the (log r, sqrt(2) theta) chart.

    The angle residual is taken along the shorter arc.
    """
    u = np.asarray(log_r, dtype=np.float64)
    t = np.asarray(theta, dtype=np.float64)
    if isinstance(dist, LogNormalOnC):
        return _ln_logpdf(u, t, dist)
    terms = np.stack(
        [math.log(w) + _ln_logpdf(u, t, c) if w > 0 else np.full(np.shape(u), -np.inf)
         for w, c in zip(dist.weights, dist.components)]
    )
    top = terms.max(axis=0)
    return top + np.log(np.exp(terms - top).sum(axis=0))


def logpdf(dist, x: PolarComplex) -> float:
    return float(logpdf_arrays(dist, x.log_r, x.theta))
