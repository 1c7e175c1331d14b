"""Monte Carlo checks of the two asymptotic claims behind C-SURE.

* ``run_theorem1``: the sup over a (mu, lambda) probe grid of
  |SURE - loss| / p shrinks as the number of dimensions p grows.
* ``run_theorem2``: the SURE-tuned shrinkage estimate has lower risk than
  the per-dimension Frechet mean (the MLE).

Truth vectors are drawn with log M_i uniform on the box |.|_inf <= box in
(log r, sqrt(2) theta) coordinates; observations are LN(M_i, v I).
Every (p, trial) pair gets its own MT19937 stream derived from
(seed, p, trial), so trials can run in any order or concurrently and the
merged output is identical.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats

from . import kernels
from .distributions import make_rng
from .frechet import fm_arrays
from .kernels import canonical
from .manifold import SQRT2, sq_dist_arrays
from .shrinkage import (
    LAMBDA_GRID, LAMBDA_MAX, LAMBDA_MIN, TANGENT_DIM, SampleSummary, csure_arrays, fit_sure_component,
)

CSV_HEADER = ["p", "trial", "sup_gap", "risk_sure", "risk_mle"]


@dataclass(frozen=True)
class ExperimentConfig:
    p_grid: tuple[int, ...] = (8, 32, 128, 512)
    N: int = 10
    v: float = 0.25
    trials: int = 100
    seed: int = 0
    box: float = 2.0
    K: int = 1
    inner: int = 64
    n_lambda: int = LAMBDA_GRID
    lambda_range: tuple[float, float] = (LAMBDA_MIN, LAMBDA_MAX)
    mu_angles: int = 16
    mu_radii: int = 4
    # optional absolute probe centres as (log_r, theta) pairs
    mu_probes: tuple[tuple[float, float], ...] = ()
    theorem2_p_grid: tuple[int, ...] = (128, 512)
    theorem2_trials: int = 200
    workers: int = 1

    def __post_init__(self):
        counts = [self.N, self.trials, self.K, self.inner, self.n_lambda, self.mu_angles,
                  self.mu_radii, self.theorem2_trials, self.workers]
        if any(int(c) < 1 for c in counts) or any(int(p) < 1 for p in self.p_grid):
            raise ValueError("all counts must be >= 1")
        if not self.v >= 0:
            raise ValueError("v must be >= 0")
        if not self.box > 0:
            raise ValueError("box must be positive")
        if not 0 < self.lambda_range[0] < self.lambda_range[1]:
            raise ValueError("lambda_range must satisfy 0 < lo < hi")

    def for_theorem2(self) -> ExperimentConfig:
        return replace(self, p_grid=self.theorem2_p_grid, trials=self.theorem2_trials)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrialRecord:
    p: int
    trial: int
    sup_gap: float
    risk_sure: float
    risk_mle: float
    skipped: bool = field(default=False, compare=False)


def trial_rng(seed: int, p: int, trial: int, stream: int) -> np.random.Generator:
    return make_rng(np.random.SeedSequence([seed, p, trial, stream]))


def draw_truth(rng, p: int, box: float):
    u = rng.uniform(-box, box, p)
    s = rng.uniform(-box, box, p)
    return u, canonical(s / SQRT2)


def draw_observations(rng, m_u, m_t, v: float, N: int, reps: int = 1):
    """(reps, N, p) observation arrays around the truth."""
    p = m_u.size
    z = rng.standard_normal((reps, N, p, 2))
    sd = math.sqrt(v)
    u = m_u + sd * z[..., 0]
    t = canonical(m_t + sd * z[..., 1] / SQRT2)
    return u, t


def probe_grid(config: ExperimentConfig, xbar_u, xbar_t):
    """(mu_u, mu_t, lam) probes satisfying |log mu| < max_i |log Xbar_i|."""
    lam = np.geomspace(*config.lambda_range, config.n_lambda)
    radius = float(np.sqrt(xbar_u**2 + 2.0 * xbar_t**2).max())
    if config.mu_probes:
        pr = np.asarray(config.mu_probes, dtype=np.float64)
        mu_u, mu_t = pr[:, 0], canonical(pr[:, 1])
        keep = np.sqrt(mu_u**2 + 2.0 * mu_t**2) < radius
        return mu_u[keep], mu_t[keep], lam
    phi = 2.0 * math.pi * np.arange(config.mu_angles) / config.mu_angles
    frac = (np.arange(config.mu_radii) + 1.0) / (config.mu_radii + 1.0)
    rho = (frac[:, None] * radius * np.ones_like(phi)[None, :]).ravel()
    ang = np.tile(phi, config.mu_radii)
    mu_u = rho * np.cos(ang)
    mu_t = canonical(rho * np.sin(ang) / SQRT2)
    return mu_u, mu_t, lam


def sup_gap(config: ExperimentConfig, xbar_u, xbar_t, m_u, m_t) -> float:
    """max over probes of |SURE - loss| / p; NaN when no probe survives."""
    mu_u, mu_t, lam = probe_grid(config, xbar_u, xbar_t)
    if mu_u.size == 0:
        return math.nan
    sure, loss = kernels.sure_loss_grid(
        xbar_u, xbar_t, m_u, m_t, mu_u, mu_t, lam, config.v, config.N, TANGENT_DIM
    )
    return float(np.abs(sure - loss).max() / xbar_u.size)


def _estimate(config: ExperimentConfig, xbar_u, xbar_t):
    summary = SampleSummary(xbar_u, xbar_t, config.N)
    fit = fit_sure_component(summary, config.v, lam_min=config.lambda_range[0],
                             lam_max=config.lambda_range[1], n_grid=config.n_lambda, warn=False)
    w = np.full(config.K, 1.0 / config.K)
    mu_u = np.full(config.K, fit.mu_hat.log_r)
    mu_t = np.full(config.K, fit.mu_hat.theta)
    lam = np.full(config.K, fit.lambda_hat)
    return csure_arrays(xbar_u, xbar_t, w, mu_u, mu_t, lam, config.v)


def _losses(config, xbar_u, xbar_t, m_u, m_t):
    est_u, est_t = _estimate(config, xbar_u, xbar_t)
    loss_sure = float(sq_dist_arrays(est_u, est_t, m_u, m_t).sum())
    loss_mle = float(sq_dist_arrays(xbar_u, xbar_t, m_u, m_t).sum())
    return loss_sure, loss_mle


def theorem1_trial(config: ExperimentConfig, p: int, trial: int) -> TrialRecord:
    rng = trial_rng(config.seed, p, trial, 1)
    m_u, m_t = draw_truth(rng, p, config.box)
    xu, xt = draw_observations(rng, m_u, m_t, config.v, config.N)
    xbar_u, xbar_t, _ = fm_arrays(xu[0], xt[0], axis=0)
    gap = sup_gap(config, xbar_u, xbar_t, m_u, m_t)
    loss_sure, loss_mle = _losses(config, xbar_u, xbar_t, m_u, m_t)
    return TrialRecord(p, trial, gap, loss_sure, loss_mle, skipped=math.isnan(gap))


def theorem2_trial(config: ExperimentConfig, p: int, trial: int) -> TrialRecord:
    rng = trial_rng(config.seed, p, trial, 2)
    m_u, m_t = draw_truth(rng, p, config.box)
    xu, xt = draw_observations(rng, m_u, m_t, config.v, config.N, reps=config.inner)
    xbar_u, xbar_t, _ = fm_arrays(xu, xt, axis=1)
    ls = np.empty(config.inner)
    lm = np.empty(config.inner)
    for r in range(config.inner):
        ls[r], lm[r] = _losses(config, xbar_u[r], xbar_t[r], m_u, m_t)
    gap = sup_gap(config, xbar_u[0], xbar_t[0], m_u, m_t)
    return TrialRecord(p, trial, gap, float(ls.mean()), float(lm.mean()))


def _run(config: ExperimentConfig, trial_fn) -> list[TrialRecord]:
    keys = [(int(p), t) for p in sorted(set(config.p_grid)) for t in range(config.trials)]
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            records = list(pool.map(lambda k: trial_fn(config, *k), keys))
    else:
        records = [trial_fn(config, *k) for k in keys]
    return sorted(records, key=lambda r: (r.p, r.trial))


def run_theorem1(config: ExperimentConfig) -> list[TrialRecord]:
    """One record per (p, trial); risk fields hold single-draw losses."""
    return _run(config, theorem1_trial)


def run_theorem2(config: ExperimentConfig) -> list[TrialRecord]:
    """One record per (p, trial); risk fields average ``config.inner`` resamples."""
    return _run(config, theorem2_trial)


def emit_csv(records: list[TrialRecord], path) -> None:
    rows = sorted(records, key=lambda r: (r.p, r.trial))
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in rows:
                writer.writerow([r.p, r.trial, f"{r.sup_gap:.17g}", f"{r.risk_sure:.17g}", f"{r.risk_mle:.17g}"])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_csv(path) -> list[TrialRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            TrialRecord(int(row["p"]), int(row["trial"]), float(row["sup_gap"]),
                        float(row["risk_sure"]), float(row["risk_mle"]))
            for row in reader
        ]


def theorem1_summary(records: list[TrialRecord]) -> dict:
    ps = sorted({r.p for r in records})
    med = [float(np.nanmedian([r.sup_gap for r in records if r.p == p])) for p in ps]
    rho = float(stats.spearmanr(ps, med)[0]) if len(ps) > 1 else math.nan
    strictly = all(b < a for a, b in zip(med, med[1:]))
    return {"p": ps, "median_gap": med, "spearman": rho, "strictly_decreasing": strictly}


def theorem2_summary(records: list[TrialRecord]) -> dict:
    out = {}
    for p in sorted({r.p for r in records}):
        rs = np.array([r.risk_sure for r in records if r.p == p])
        rm = np.array([r.risk_mle for r in records if r.p == p])
        diff = rm - rs
        se = float(diff.std(ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else math.nan
        out[p] = {
            "mean_risk_sure": float(rs.mean()),
            "mean_risk_mle": float(rm.mean()),
            "mean_gain": float(diff.mean()),
            "stderr_gain": se,
            "dominance_fraction": float(np.mean(rs <= rm)),
        }
    return out
