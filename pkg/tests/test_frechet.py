import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csure.distributions import make_rng
from csure.frechet import (
    ConvexWeights, DegenerateMeanWarning, fm_arrays, fm_p1, fm_so2, fm_so2_with_flag, grid_fm_oracle,
    so2_objective, wfm_c,
)
from csure.manifold import AngleSO2, PolarComplex, ScaleP1, dist_c, dist_so2


def angles(*xs):
    return [AngleSO2(x) for x in xs]


def random_points(rng, n):
    return [PolarComplex.from_log(u, t) for u, t in zip(rng.normal(0, 1.5, n), rng.uniform(-math.pi, math.pi, n))]


def random_weights(rng, n):
    return ConvexWeights(tuple(rng.dirichlet(np.ones(n))))


class TestWeights:
    def test_simplex_enforced(self):
        with pytest.raises(ValueError):
            ConvexWeights((0.5, 0.6))
        with pytest.raises(ValueError):
            ConvexWeights((1.5, -0.5))

    @given(st.lists(st.floats(-30, 30), min_size=1, max_size=12))
    def test_from_free_on_simplex(self, z):
        w = ConvexWeights.from_free(z).array
        assert np.all(w >= 0) and abs(w.sum() - 1) < 1e-12


class TestP1:
    def test_single(self):
        assert fm_p1([ScaleP1.from_r(3.0)], ConvexWeights((1.0,))).r == pytest.approx(3.0)

    def test_log_midpoint(self):
        m = fm_p1([ScaleP1.from_r(1.0), ScaleP1.from_r(math.e**2)], ConvexWeights.uniform(2))
        assert m.r == pytest.approx(math.e, rel=1e-14)

    def test_weighted(self):
        pts = [ScaleP1.from_r(r) for r in (0.5, 2.0, 8.0)]
        w = ConvexWeights((0.2, 0.3, 0.5))
        expect = math.exp(0.2 * math.log(0.5) + 0.3 * math.log(2) + 0.5 * math.log(8))
        assert fm_p1(pts, w).r == pytest.approx(expect, rel=1e-14)
        grid = np.linspace(-1, 3, 40001)
        obj = sum(a * (grid - math.log(p.r)) ** 2 for a, p in zip(w.alpha, pts))
        assert grid[np.argmin(obj)] == pytest.approx(math.log(expect), abs=1e-4)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            fm_p1([ScaleP1.from_r(1.0)], ConvexWeights.uniform(2))


class TestSO2:
    def test_constant(self):
        assert fm_so2(angles(1.1, 1.1, 1.1), ConvexWeights.uniform(3)).theta == pytest.approx(1.1, abs=1e-15)

    def test_wrap_midpoint(self):
        m = fm_so2(angles(math.pi - 0.1, -math.pi + 0.1), ConvexWeights.uniform(2))
        assert m.theta == pytest.approx(math.pi, abs=1e-12)
        pts = [math.pi - 0.1, -math.pi + 0.1]
        assert so2_objective(math.pi, pts, [0.5, 0.5]) < so2_objective(0.0, pts, [0.5, 0.5])

    def test_weighted_flat(self):
        w = ConvexWeights((0.75, 0.25))
        m = fm_so2(angles(0.0, math.pi / 2), w)
        assert m.theta == pytest.approx(math.pi / 8, abs=1e-14)
        grid = np.linspace(-math.pi, math.pi, 10_001)
        obj = [so2_objective(g, [0.0, math.pi / 2], w.alpha) for g in grid]
        assert grid[int(np.argmin(obj))] == pytest.approx(math.pi / 8, abs=2 * math.pi / 10_000)

    def test_antipodal_tie_flagged(self):
        with pytest.warns(DegenerateMeanWarning):
            m = fm_so2(angles(0.0, math.pi), ConvexWeights.uniform(2))
        assert m.theta == pytest.approx(-math.pi / 2)
        _, flag = fm_so2_with_flag(angles(0.0, 0.2), ConvexWeights.uniform(2))
        assert not flag

    def test_minimiser_property(self):
        rng = make_rng(0)
        for _ in range(1000):
            n = int(rng.integers(1, 9))
            t = rng.uniform(-math.pi, math.pi, n)
            a = rng.dirichlet(np.ones(n))
            m, _ = fm_so2_with_flag(angles(*t), ConvexWeights(tuple(a)))
            f = so2_objective(m.theta, t, a)
            assert all(f <= so2_objective(x, t, a) + 1e-12 for x in t)

    def test_matches_dense_grid(self):
        rng = make_rng(1)
        grid = np.linspace(-math.pi, math.pi, 20_001)
        for _ in range(50):
            t = rng.uniform(-math.pi, math.pi, 5)
            a = rng.dirichlet(np.ones(5))
            m, degen = fm_so2_with_flag(angles(*t), ConvexWeights(tuple(a)))
            d = np.remainder(grid[:, None] - t[None, :] + math.pi, 2 * math.pi) - math.pi
            obj = (a * d * d).sum(axis=1)
            assert so2_objective(m.theta, t, a) <= 2 * obj.min() + 1e-7


class TestProduct:
    def test_one_hot_exact(self):
        rng = make_rng(2)
        for _ in range(1000):
            pts = random_points(rng, 5)
            k = int(rng.integers(5))
            w = ConvexWeights(tuple(float(i == k) for i in range(5)))
            assert wfm_c(pts, w) == pts[k]

    def test_identical_points(self):
        p = PolarComplex.from_log(0.3, -2.5)
        assert wfm_c([p, p], ConvexWeights((0.3, 0.7))) == p

    def test_grid_oracle(self):
        rng = make_rng(3)
        for _ in range(10):
            pts = random_points(rng, 5)
            w = random_weights(rng, 5)
            m = wfm_c(pts, w)
            assert dist_c(m, grid_fm_oracle(pts, w)) < 1e-3

    def test_left_translation_equivariance(self):
        rng = make_rng(4)
        for _ in range(1000):
            pts = random_points(rng, 6)
            w = random_weights(rng, 6)
            g = random_points(rng, 1)[0]
            a = wfm_c([g * p for p in pts], w)
            b = g * wfm_c(pts, w)
            assert dist_c(a, b) < 1e-9

    @settings(max_examples=200)
    @given(st.integers(0, 2**32 - 1))
    def test_permutation_equivariance(self, seed):
        rng = make_rng(seed)
        pts = random_points(rng, 7)
        w = random_weights(rng, 7)
        perm = rng.permutation(7)
        a = wfm_c(pts, w)
        b = wfm_c([pts[i] for i in perm], ConvexWeights(tuple(w.alpha[i] for i in perm)))
        assert abs(a.log_r - b.log_r) < 1e-12
        assert dist_so2(a.angle, b.angle) < 1e-12


def test_fm_arrays_axis_and_default_weights():
    rng = make_rng(5)
    u = rng.normal(size=(4, 3))
    t = rng.uniform(-math.pi, math.pi, (4, 3))
    mu, mt, _ = fm_arrays(u, t, axis=0)
    for j in range(3):
        ref = wfm_c([PolarComplex.from_log(a, b) for a, b in zip(u[:, j], t[:, j])], ConvexWeights.uniform(4))
        assert mu[j] == pytest.approx(ref.log_r, abs=1e-15)
        assert mt[j] == pytest.approx(ref.theta, abs=1e-14)
