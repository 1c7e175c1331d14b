import math

import numpy as np
import pytest

from csure import harness
from csure.harness import ExperimentConfig, TrialRecord
from csure.kernels import np_sure_loss_grid
from csure.shrinkage import TANGENT_DIM

SMALL = dict(p_grid=(8, 16), trials=3, inner=4, theorem2_trials=3, theorem2_p_grid=(16,))


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(v=-1.0)
    with pytest.raises(ValueError):
        ExperimentConfig(lambda_range=(1.0, 0.5))


def test_records_sorted_and_complete():
    recs = harness.run_theorem1(ExperimentConfig(**SMALL))
    assert [(r.p, r.trial) for r in recs] == [(8, 0), (8, 1), (8, 2), (16, 0), (16, 1), (16, 2)]
    assert all(r.risk_sure >= 0 and r.risk_mle >= 0 for r in recs)


def test_concurrent_run_matches_serial():
    cfg = ExperimentConfig(**SMALL)
    a = harness.run_theorem2(cfg.for_theorem2())
    b = harness.run_theorem2(ExperimentConfig(**SMALL, workers=3).for_theorem2())
    assert a == b


def test_v_zero_reduces_to_mle():
    recs = harness.run_theorem2(ExperimentConfig(**SMALL, v=0.0).for_theorem2())
    for r in recs:
        assert r.risk_sure == r.risk_mle
    # sup gap over lam > 0 stays finite
    t1 = harness.run_theorem1(ExperimentConfig(**SMALL, v=0.0))
    assert all(math.isfinite(r.sup_gap) for r in t1)


def test_probe_filtering_and_skip():
    cfg = ExperimentConfig(**SMALL, mu_probes=((100.0, 0.0),))
    recs = harness.run_theorem1(cfg)
    assert all(r.skipped and math.isnan(r.sup_gap) for r in recs)
    rng = harness.trial_rng(0, 8, 0, 1)
    xu, xt = rng.normal(size=8), rng.uniform(-1, 1, 8)
    mu_u, mu_t, lam = harness.probe_grid(ExperimentConfig(), xu, xt)
    radius = np.sqrt(xu**2 + 2 * xt**2).max()
    assert mu_u.size == 64 and lam.size == 61
    assert np.all(np.sqrt(mu_u**2 + 2 * mu_t**2) < radius)


def test_truth_in_box():
    rng = harness.trial_rng(1, 100, 0, 1)
    u, t = harness.draw_truth(rng, 1000, 2.0)
    assert np.all(np.abs(u) <= 2.0) and np.all(np.abs(np.sqrt(2) * t) <= 2.0 + 1e-12)


def test_true_probe_gap_is_unbiased():
    """SURE minus loss at the true prior centre averages to zero across trials."""
    cfg = ExperimentConfig(v=0.25, N=10)
    p = 32
    diffs = []
    for trial in range(400):
        rng = harness.trial_rng(5, p, trial, 1)
        m_u = 0.3 + np.sqrt(0.5) * rng.standard_normal(p)
        m_t = 0.1 + np.sqrt(0.5) * rng.standard_normal(p) / np.sqrt(2)
        xu, xt = harness.draw_observations(rng, m_u, m_t, cfg.v, cfg.N)
        from csure.frechet import fm_arrays
        xbar_u, xbar_t, _ = fm_arrays(xu[0], xt[0], axis=0)
        sure, loss = np_sure_loss_grid(xbar_u, xbar_t, m_u, m_t, np.array([0.3]), np.array([0.1]),
                                       np.array([0.5]), cfg.v, cfg.N, TANGENT_DIM)
        diffs.append(float(sure[0, 0] - loss[0, 0]))
    d = np.array(diffs)
    assert abs(d.mean()) <= 3 * d.std(ddof=1) / np.sqrt(d.size)


def test_csv_round_trip(tmp_path):
    recs = [TrialRecord(8, 0, 0.1 + 1e-17, 1 / 3, 2 / 3), TrialRecord(8, 1, math.pi, math.e, 1e-300)]
    path = tmp_path / "out.csv"
    harness.emit_csv(list(reversed(recs)), path)
    assert path.read_text().splitlines()[0] == "p,trial,sup_gap,risk_sure,risk_mle"
    assert harness.read_csv(path) == recs


def test_csv_empty_and_lines(tmp_path):
    path = tmp_path / "e.csv"
    harness.emit_csv([], path)
    assert path.read_text() == "p,trial,sup_gap,risk_sure,risk_mle\n"
    harness.emit_csv([TrialRecord(1, 0, 0, 0, 0), TrialRecord(1, 1, 0, 0, 0)], path)
    assert len(path.read_text().splitlines()) == 3


def test_csv_error_names_path(tmp_path):
    bad = tmp_path / "missing" / "x.csv"
    with pytest.raises(OSError, match="missing"):
        harness.emit_csv([], bad)


def test_deterministic_bytes(tmp_path):
    cfg = ExperimentConfig(**SMALL, seed=3)
    harness.emit_csv(harness.run_theorem1(cfg), tmp_path / "a.csv")
    harness.emit_csv(harness.run_theorem1(cfg), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_summaries():
    recs = [TrialRecord(8, i, 1.0 - 0.1 * i, 1.0, 2.0) for i in range(3)]
    recs += [TrialRecord(32, i, 0.5, 1.5, 1.0) for i in range(3)]
    s1 = harness.theorem1_summary(recs)
    assert s1["median_gap"] == [pytest.approx(0.9), 0.5] and s1["strictly_decreasing"]
    s2 = harness.theorem2_summary(recs)
    assert s2[8]["dominance_fraction"] == 1.0 and s2[32]["dominance_fraction"] == 0.0
    assert s2[8]["mean_gain"] == pytest.approx(1.0)


def test_small_p_reports_without_gating():
    recs = harness.run_theorem2(ExperimentConfig(p_grid=(2,), trials=3, inner=4))
    assert len(recs) == 3
