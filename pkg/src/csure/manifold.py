"""The complex plane as the product P1 x SO(2) under the Log-Euclidean metric.

A nonzero complex number r * exp(i theta) is stored as (log r, theta) with
theta on the principal branch (-pi, pi].  The flat log-domain coordinate is
``LogCoord(u, s) = (log r, sqrt(2) * theta)``; in it the group product is
addition and the metric is Euclidean up to the 2*sqrt(2)*pi wrap of ``s``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import PI, TWO_PI, canonical, wrapdiff

SQRT2 = math.sqrt(2.0)
S_PERIOD = 2.0 * SQRT2 * PI
# Smallest representable scale; zero-magnitude samples are clamped here.
SCALE_EPS = 1e-6
LOG_SCALE_EPS = math.log(SCALE_EPS)


class ManifoldDomainError(ValueError):
    """Raised for inputs that do not name a point on the manifold."""


class ScaleClampWarning(UserWarning):
    """A magnitude at or below ``SCALE_EPS`` was clamped onto P1."""


def canonicalize_angle(raw: float) -> AngleSO2:
    """Principal-branch representative of ``raw`` in (-pi, pi]."""
    if not math.isfinite(raw):
        raise ManifoldDomainError(f"angle must be finite, got {raw!r}")
    return AngleSO2(raw)


def _canon_scalar(raw: float) -> float:
    r = raw - TWO_PI * round(raw / TWO_PI)
    if r <= -PI:
        r += TWO_PI
    elif r > PI:
        r -= TWO_PI
    return r


@dataclass(frozen=True)
class AngleSO2:
    theta: float

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ManifoldDomainError(f"angle must be finite, got {self.theta!r}")
        object.__setattr__(self, "theta", _canon_scalar(float(self.theta)))

    def tilde(self) -> float:
        return SQRT2 * self.theta


@dataclass(frozen=True)
class ScaleP1:
    """Positive scale, stored as its logarithm.

    Build from a magnitude with :meth:`from_r`; magnitudes <= ``SCALE_EPS``
    are clamped and flagged through ``clamped``.
    """

    log_r: float
    clamped: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not math.isfinite(self.log_r):
            raise ManifoldDomainError(f"log-scale must be finite, got {self.log_r!r}")

    @classmethod
    def from_r(cls, r: float) -> ScaleP1:
        if math.isnan(r) or math.isinf(r):
            raise ManifoldDomainError(f"scale must be finite, got {r!r}")
        if r <= SCALE_EPS:
            warnings.warn(f"scale {r!r} clamped to {SCALE_EPS}", ScaleClampWarning, stacklevel=2)
            return cls(LOG_SCALE_EPS, clamped=True)
        return cls(math.log(r))

    @property
    def r(self) -> float:
        return math.exp(self.log_r)


@dataclass(frozen=True)
class PolarComplex:
    scale: ScaleP1
    angle: AngleSO2

    @classmethod
    def from_polar(cls, r: float, theta: float) -> PolarComplex:
        return cls(ScaleP1.from_r(r), AngleSO2(theta))

    @classmethod
    def from_log(cls, log_r: float, theta: float) -> PolarComplex:
        return cls(ScaleP1(float(log_r)), AngleSO2(float(theta)))

    @classmethod
    def from_cartesian(cls, re: float, im: float) -> PolarComplex:
        return cls.from_polar(math.hypot(re, im), math.atan2(im, re))

    @classmethod
    def from_complex(cls, z: complex) -> PolarComplex:
        return cls.from_cartesian(z.real, z.imag)

    @property
    def r(self) -> float:
        return self.scale.r

    @property
    def theta(self) -> float:
        return self.angle.theta

    @property
    def log_r(self) -> float:
        return self.scale.log_r

    def to_cartesian(self) -> tuple[float, float]:
        r = self.r
        return r * math.cos(self.theta), r * math.sin(self.theta)

    def to_complex(self) -> complex:
        return complex(*self.to_cartesian())

    def __mul__(self, other: PolarComplex) -> PolarComplex:
        """Group product: add log-coordinates, then exponentiate."""
        if not isinstance(other, PolarComplex):
            return NotImplemented
        return exp_map(log_map(self) + log_map(other))


@dataclass(frozen=True)
class LogCoord:
    """Tangent coordinate (log r, sqrt(2) * theta)."""

    u: float
    s: float
    # exact angle this coordinate was taken from, so exp(log(x)) == x bitwise
    _theta: float | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_polar(cls, x: PolarComplex) -> LogCoord:
        return log_map(x)

    def to_polar(self) -> PolarComplex:
        return exp_map(self)

    def __add__(self, other: LogCoord) -> LogCoord:
        return LogCoord(self.u + other.u, self.s + other.s)

    def __sub__(self, other: LogCoord) -> LogCoord:
        return LogCoord(self.u - other.u, self.s - other.s)

    def __mul__(self, c: float) -> LogCoord:
        return LogCoord(self.u * c, self.s * c)

    __rmul__ = __mul__

    def norm(self) -> float:
        return math.hypot(self.u, self.s)


def log_map(x: PolarComplex) -> LogCoord:
    return LogCoord(x.log_r, SQRT2 * x.theta, x.theta)


def exp_map(v: LogCoord) -> PolarComplex:
    theta = v._theta if v._theta is not None else v.s / SQRT2
    return PolarComplex(ScaleP1(v.u), AngleSO2(theta))


def dist_so2(a: AngleSO2, b: AngleSO2) -> float:
    d = abs(a.tilde() - b.tilde())
    return min(d, S_PERIOD - d)


def dist_p1(a: ScaleP1, b: ScaleP1) -> float:
    return abs(a.log_r - b.log_r)


def dist_c(a: PolarComplex, b: PolarComplex) -> float:
    return math.hypot(dist_p1(a.scale, b.scale), dist_so2(a.angle, b.angle))


# --------------------------------------------------------------------------
# Array helpers.  A batch of points is a pair of float arrays (log_r, theta).
# --------------------------------------------------------------------------

def to_arrays(points) -> tuple[np.ndarray, np.ndarray]:
    """Split a sequence of PolarComplex into (log_r, theta) arrays."""
    u = np.array([p.log_r for p in points], dtype=np.float64)
    t = np.array([p.theta for p in points], dtype=np.float64)
    return u, t


def from_arrays(log_r, theta) -> list[PolarComplex]:
    return [PolarComplex.from_log(a, b) for a, b in zip(np.ravel(log_r), np.ravel(theta))]


def cartesian_to_arrays(re, im, eps: float = SCALE_EPS):
    """(re, im) float arrays to (log_r, theta, clamped_mask)."""
    re = np.asarray(re, dtype=np.float64)
    im = np.asarray(im, dtype=np.float64)
    if not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
        raise ManifoldDomainError("cartesian input contains non-finite values")
    r = np.hypot(re, im)
    clamped = r <= eps
    log_r = np.log(np.where(clamped, eps, r))
    theta = canonical(np.arctan2(im, re))
    return log_r, theta, clamped


def arrays_to_cartesian(log_r, theta):
    r = np.exp(np.asarray(log_r, dtype=np.float64))
    return r * np.cos(theta), r * np.sin(theta)


def sq_dist_arrays(u1, t1, u2, t2):
    """Squared product distance between broadcastable point arrays."""
    du = np.asarray(u1) - np.asarray(u2)
    dt = wrapdiff(np.asarray(t1) - np.asarray(t2))
    return du * du + 2.0 * dt * dt


def dist_arrays(u1, t1, u2, t2):
    return np.sqrt(sq_dist_arrays(u1, t1, u2, t2))


def group_product_arrays(u1, t1, u2, t2):
    return np.asarray(u1) + np.asarray(u2), canonical(np.asarray(t1) + np.asarray(t2))
