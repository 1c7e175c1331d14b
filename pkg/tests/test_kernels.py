"""The numba kernels and their numpy twins must agree."""
import math

import numpy as np
import pytest

from csure import _backend, kernels
from csure.distributions import make_rng

pytestmark = pytest.mark.skipif(not _backend.HAS_NUMBA, reason="numba not installed")


def test_canonical_boundaries():
    x = np.array([math.pi, -math.pi, 3 * math.pi, 0.0, -7.5])
    out = kernels.canonical(x)
    assert out[0] == math.pi and out[1] == math.pi
    assert np.all(out > -math.pi) and np.all(out <= math.pi)


def test_circular_mean_agrees():
    rng = make_rng(0)
    t = rng.uniform(-math.pi, math.pi, (500, 7))
    a = rng.dirichlet(np.ones(7), 500)
    m1, d1 = kernels.nb_circular_mean(t, a)
    m2, d2 = kernels.np_circular_mean(t, a)
    assert np.array_equal(m1, m2) and np.array_equal(d1, d2)


def test_circular_mean_ties_agree():
    t = np.array([[0.0, math.pi], [0.5, 0.5 - math.pi]])
    a = np.full_like(t, 0.5)
    assert np.array_equal(kernels.nb_circular_mean(t, a)[1], kernels.np_circular_mean(t, a)[1])
    assert kernels.np_circular_mean(t, a)[1].all()


def test_wfm_windows_agree():
    rng = make_rng(1)
    u = rng.normal(size=(6, 40, 2))
    t = rng.uniform(-math.pi, math.pi, (6, 40, 2))
    alpha = rng.dirichlet(np.ones(10), 4).reshape(4, 5, 2)
    a = kernels.nb_wfm_windows(u, t, alpha, 3)
    b = kernels.np_wfm_windows(u, t, alpha, 3)
    assert np.allclose(a[0], b[0], rtol=0, atol=1e-14)
    # numpy reduces windows longer than 8 in a different order
    assert np.allclose(kernels.canonical(a[1] - b[1]), 0, atol=1e-14) and a[2] == b[2]
    a = kernels.nb_wfm_windows(u[..., :1], t[..., :1], alpha[:, :, :1] * 2, 2)
    b = kernels.np_wfm_windows(u[..., :1], t[..., :1], alpha[:, :, :1] * 2, 2)
    assert np.array_equal(a[1], b[1])


def test_sure_loss_grid_agrees():
    rng = make_rng(2)
    p = 30
    xu, xt, mu_, mt_ = rng.normal(size=p), rng.uniform(-3, 3, p), rng.normal(size=p), rng.uniform(-3, 3, p)
    pu, pt = rng.normal(size=9), rng.uniform(-3, 3, 9)
    lam = np.geomspace(1e-3, 10, 7)
    a = kernels.nb_sure_loss_grid(xu, xt, mu_, mt_, pu, pt, lam, 0.3, 10, 2)
    b = kernels.np_sure_loss_grid(xu, xt, mu_, mt_, pu, pt, lam, 0.3, 10, 2)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-13, atol=1e-13)


def test_min_distance_agrees_with_bruteforce():
    rng = make_rng(3)
    fu = rng.normal(size=(5, 11, 3))
    ft = rng.uniform(-math.pi, math.pi, (5, 11, 3))
    pu = rng.normal(size=(4, 3))
    pt = rng.uniform(-math.pi, math.pi, (4, 3))
    d1, a1 = kernels.nb_min_distance(fu, ft, pu, pt)
    d2, a2 = kernels.np_min_distance(fu, ft, pu, pt)
    assert np.allclose(d1, d2, atol=1e-14) and np.array_equal(a1, a2)
    for i in range(5):
        for c in range(4):
            for j in range(3):
                best = min(
                    math.sqrt((fu[i, t, j] - pu[c, j]) ** 2
                              + 2 * math.remainder(ft[i, t, j] - pt[c, j], 2 * math.pi) ** 2)
                    for t in range(11)
                )
                assert d1[i, c, j] == pytest.approx(best, abs=1e-12)


def test_backend_flag_names_a_backend():
    assert _backend.BACKEND in ("numba", "numpy")
