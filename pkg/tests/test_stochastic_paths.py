import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from sigscope.stochastic_paths import (
    FbmSpec,
    SamplePath,
    StepFunction,
    apply_linear,
    fbm_covariance,
    fbm_increment_covariance,
    simulate_bm,
    simulate_fbm,
    theta_kernel,
    theta_norm_sq,
    trial_seed,
    wiener_integral,
)


class TestSamplePath:
    def test_validation(self):
        with pytest.raises(ValueError):
            SamplePath([0.0, 1.0, 1.0], [[0.0], [1.0], [2.0]])
        with pytest.raises(ValueError):
            SamplePath([0.5, 1.0], [[0.0], [1.0]])
        with pytest.raises(ValueError):
            SamplePath([0.0, 1.0], [[1.0], [1.0]])
        with pytest.raises(ValueError):
            SamplePath([0.0, 1.0], [[0.0], [1.0], [2.0]])

    def test_read_only(self):
        p = simulate_bm(2, 1.0, 5, seed=1)
        with pytest.raises(ValueError):
            p.values[1, 0] = 3.0

    def test_properties(self):
        p = SamplePath.from_increments(np.linspace(0, 2, 4), np.array([[1.0], [-2.0], [0.5]]))
        assert p.dim == 1 and p.steps == 3 and p.horizon == 2.0
        np.testing.assert_allclose(p.values[:, 0], [0, 1, -1, -0.5])
        assert p.realized_qv()[0] == pytest.approx(5.25)

    def test_csv_roundtrip(self, tmp_path):
        p = simulate_bm(3, 1.0, 20, seed=4)
        text = p.to_csv(tmp_path / "p.csv")
        assert text.splitlines()[0] == "t,x1,x2,x3"
        q = SamplePath.from_csv(tmp_path / "p.csv")
        np.testing.assert_array_equal(p.values, q.values)
        np.testing.assert_array_equal(p.times, q.times)
        r = SamplePath.from_csv(io.StringIO(text))
        np.testing.assert_array_equal(p.values, r.values)

    def test_csv_header(self):
        with pytest.raises(ValueError):
            SamplePath.from_csv(io.StringIO("time,x\n0,0\n1,1\n"))

    def test_apply_linear(self):
        p = simulate_bm(2, 1.0, 10, seed=2)
        V = np.array([[2.0, 1.0], [0.0, -1.0]])
        np.testing.assert_allclose(apply_linear(p, V).values, p.values @ V.T)


class TestBrownian:
    def test_seed_determinism(self):
        a = simulate_bm(2, 1.0, 100, seed=trial_seed(3, 7))
        b = simulate_bm(2, 1.0, 100, seed=trial_seed(3, 7))
        c = simulate_bm(2, 1.0, 100, seed=trial_seed(3, 8))
        np.testing.assert_array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_increment_variance(self):
        p = simulate_bm(1, 2.0, 40000, seed=0)
        # realized QV of BM on [0, 2] concentrates at 2 with sd 2*sqrt(2/m)
        assert abs(p.realized_qv()[0] - 2.0) < 5 * 2.0 * math.sqrt(2 / 40000)


class TestFbm:
    def test_spec_validation(self):
        for bad in (dict(hurst=0.0), dict(hurst=1.0), dict(hurst=0.5, horizon=0.0), dict(hurst=0.5, steps=0)):
            with pytest.raises(ValueError):
                FbmSpec(**bad)

    def test_covariance_values(self):
        assert fbm_covariance(0.5, 0.3, 0.7) == pytest.approx(0.3)
        assert fbm_covariance(0.75, 2.0, 2.0) == pytest.approx(2.0**1.5)

    def test_seed_determinism(self):
        spec = FbmSpec(0.7, 1.0, 64)
        a, b = simulate_fbm(spec, 11), simulate_fbm(spec, 11)
        np.testing.assert_array_equal(a.values, b.values)

    def test_shape_and_meta(self):
        p = simulate_fbm(FbmSpec(0.3, 2.0, 16, dim=2), trial_seed(0, 1))
        assert p.values.shape == (17, 2) and p.horizon == pytest.approx(2.0)
        assert p.meta["hurst"] == 0.3 and p.meta["seed"] == [0, 1]

    def test_bm_nests_in_fbm(self):
        # H = 1/2 fBM and BM have the same first two moments on the grid
        n, m = 4000, 8
        a = np.stack([simulate_fbm(FbmSpec(0.5, 1.0, m), trial_seed(1, i)).values[1:, 0] for i in range(n)])
        b = np.stack([simulate_bm(1, 1.0, m, trial_seed(2, i)).values[1:, 0] for i in range(n)])
        for x, y in ((a, b),):
            se = np.sqrt(x.var(0) / n + y.var(0) / n)
            assert np.all(np.abs(x.mean(0) - y.mean(0)) < 4 * se)
            ca, cb = np.cov(x.T), np.cov(y.T)
            # var of a sample covariance entry is about (s_ii s_jj + s_ij^2)/n
            grid = np.arange(1, m + 1) / m
            R = np.minimum.outer(grid, grid)
            se_cov = np.sqrt(2 * (np.outer(grid, grid) + R**2) / n)
            assert np.all(np.abs(ca - cb) < 4 * se_cov)


class TestTheta:
    def test_kernel_domain(self):
        with pytest.raises(ValueError):
            theta_kernel(0.5, 0.1, 0.2)
        with pytest.raises(ValueError):
            theta_kernel(0.75, 0.2, 0.2)
        assert theta_kernel(0.75, 0.0, 1.0) == pytest.approx(0.375)

    @pytest.mark.parametrize("H", [0.55, 0.75, 0.9])
    def test_off_diagonal_rectangle_vs_quadrature(self, H):
        val, _ = integrate.dblquad(lambda v, u: theta_kernel(H, u, v), 0.0, 0.4, 0.6, 1.5, epsabs=1e-13)
        assert fbm_increment_covariance(H, 0.0, 0.4, 0.6, 1.5) == pytest.approx(val, rel=1e-8)

    @pytest.mark.parametrize("H", [0.5, 0.6, 0.75, 0.9])
    @pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
    def test_indicator_norm(self, H, t):
        # ||1_[0,t]||^2 = E[(B_t)^2] = t^{2H}
        assert theta_norm_sq(StepFunction.indicator(0, t), H, t) == pytest.approx(t ** (2 * H), rel=1e-14)

    def test_restriction_and_zero(self):
        f = StepFunction([0.0, 1.0, 3.0], [2.0, -1.0])
        assert theta_norm_sq(f, 0.7, 1.0) == pytest.approx(4.0)
        assert theta_norm_sq(StepFunction.indicator(2.0, 3.0), 0.7, 1.0) == 0.0

    def test_white_noise_limit(self):
        f = StepFunction([0.0, 0.5, 2.0], [3.0, -1.0])
        assert theta_norm_sq(f, 0.5, 2.0) == pytest.approx(9 * 0.5 + 1.5)

    def test_domain(self):
        with pytest.raises(ValueError):
            theta_norm_sq(StepFunction.indicator(0, 1), 0.4, 1.0)
        with pytest.raises(ValueError):
            theta_norm_sq(StepFunction.indicator(0, 1), 0.7, 0.0)

    @settings(max_examples=50, deadline=None)
    @given(
        values=st.lists(st.floats(-3, 3), min_size=1, max_size=5),
        H=st.floats(0.5, 0.95),
        splits=st.integers(1, 4),
    )
    def test_refinement_invariant(self, values, H, splits):
        knots = np.linspace(0.0, 2.0, len(values) + 1)
        f = StepFunction(knots, values)
        fine_knots = np.linspace(0.0, 2.0, len(values) * (splits + 1) + 1)
        fine = StepFunction(fine_knots, np.repeat(values, splits + 1))
        a, b = theta_norm_sq(f, H, 2.0), theta_norm_sq(fine, H, 2.0)
        assert abs(a - b) <= 1e-10 * max(a, 1e-300) + 1e-13 * sum(v * v for v in values)

    def test_step_function_eval(self):
        f = StepFunction([0.0, 1.0, 2.0], [5.0, 7.0])
        np.testing.assert_array_equal(f([-0.5, 0.0, 0.99, 1.0, 2.0]), [0, 5, 5, 7, 0])
        with pytest.raises(ValueError):
            StepFunction([0.0, 0.0], [1.0])


class TestWienerIntegral:
    def test_indicator_is_endpoint(self):
        p = simulate_fbm(FbmSpec(0.75, 2.0, 64), 5)
        assert wiener_integral(p, StepFunction.indicator(0, 2.0)) == pytest.approx(p.values[-1, 0])
        assert wiener_integral(p, StepFunction.indicator(0, 1.0)) == pytest.approx(p.values[32, 0])

    def test_knot_off_grid(self):
        p = simulate_bm(1, 1.0, 4, seed=0)
        with pytest.raises(ValueError):
            wiener_integral(p, StepFunction.indicator(0, 0.3))

    def test_needs_1d(self):
        with pytest.raises(ValueError):
            wiener_integral(simulate_bm(2, 1.0, 4, 0), StepFunction.indicator(0, 1))

    def test_variance_matches_theta_norm(self):
        H, n = 0.8, 4000
        f = StepFunction([0.0, 0.5, 1.0], [1.0, -2.0])
        spec = FbmSpec(H, 1.0, 16)
        w = np.array([wiener_integral(simulate_fbm(spec, trial_seed(9, i)), f) for i in range(n)])
        target = theta_norm_sq(f, H, 1.0)
        # var of a sample variance of a Gaussian is 2 s^4/(n-1)
        assert abs(w.var(ddof=1) - target) < 4 * target * math.sqrt(2 / (n - 1))
