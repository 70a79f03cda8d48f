import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import segmented_lstsq
from frictiondiag.core import TelemetryWindow, UnidentifiableError, ValidationError
from frictiondiag.estimation import (
    IntervalSet,
    SegmentedFit,
    build_intervals,
    error_survival,
    estimate_noise_sigma,
    excess_rmse,
    fit,
    naive_fit,
    residuals,
    rmse,
)


def window(levels, cps, n, f_v=0.8, sigma=0.0, seed=0, omega=None):
    rng = np.random.default_rng(seed)
    om = np.linspace(0.5, 1.5, n) if omega is None else omega
    dry = np.full(n, levels[0], dtype=float)
    for k, v in zip(cps, levels[1:]):
        dry[k:] = v
    return TelemetryWindow(om, dry * np.sign(om) + f_v * om + rng.normal(0, sigma, n) * (sigma > 0))


class TestBuildIntervals:
    def test_no_changepoints(self):
        assert build_intervals([], 200, 10).intervals == ((0, 199),)

    def test_guard_bands(self):
        iv = build_intervals([100], 200, 10)
        assert iv.intervals == ((0, 90), (110, 199))

    def test_close_pair_shrinks_guards(self):
        iv = build_intervals([100, 115], 200, 10)
        assert iv.intervals == ((0, 90), (107, 108), (125, 199))
        assert iv.dropped == ()

    def test_adjacent_pair_merges(self):
        iv = build_intervals([100, 101], 200, 10)
        assert iv.changepoints == (100,) and iv.dropped == (101,)

    def test_invalid(self):
        with pytest.raises(ValidationError):
            build_intervals([250], 200, 10)
        with pytest.raises(ValidationError):
            build_intervals([5, 5], 200, 10)

    @given(st.lists(st.integers(0, 499), max_size=30, unique=True), st.integers(0, 25))
    def test_invariants(self, cps, delta):
        iv = build_intervals(cps, 500, delta)
        assert len(iv) == len(iv.changepoints) + 1
        assert sorted(iv.changepoints + iv.dropped) == sorted(cps)
        for (a, b), (c, _) in zip(iv.intervals, iv.intervals[1:]):
            assert b < c
        for i, (a, b) in enumerate(iv.intervals):
            assert b - a + 1 >= 2
            if i < len(iv.changepoints):
                assert b < iv.changepoints[i]
            if i > 0:
                assert a >= iv.changepoints[i - 1]

    def test_round_trip(self):
        iv = build_intervals([100, 115], 200, 10)
        assert IntervalSet.from_dict(iv.to_dict()) == iv


class TestFit:
    def test_noiseless_recovery(self):
        win = window([1.0, 1.3], [200], 400)
        seg = fit(win, build_intervals([200], 400, 10))
        np.testing.assert_allclose(seg.F, [1.0, 1.3], atol=1e-10)
        assert seg.f_v == pytest.approx(0.8, abs=1e-10)
        assert seg.sse < 1e-18

    @given(st.lists(st.integers(1, 298), max_size=6, unique=True), st.integers(0, 1000))
    def test_matches_dense_lstsq(self, cps, seed):
        rng = np.random.default_rng(seed)
        om = rng.uniform(-2, 2, 300)
        win = window(list(rng.uniform(0, 2, len(cps) + 1)), sorted(cps), 300, sigma=0.05, seed=seed, omega=om)
        iv = build_intervals(cps, 300, 3)
        seg = fit(win, iv)
        F_ref, fv_ref = segmented_lstsq(win.omega, win.f_hat, iv.intervals)
        np.testing.assert_allclose(seg.F, F_ref, atol=1e-9)
        assert seg.f_v == pytest.approx(fv_ref, abs=1e-9)
        assert seg.sse == pytest.approx(float(np.sum(residuals(win, iv, seg) ** 2)), rel=1e-9, abs=1e-12)

    def test_gram_diag_counts(self):
        iv = build_intervals([100, 150], 300, 5)
        seg = fit(window([1, 2, 3], [100, 150], 300, sigma=0.01), iv)
        np.testing.assert_array_equal(seg.gram_diag, [b - a + 1 for a, b in iv.intervals])

    def test_equal_levels_zero_cost(self):
        seg = fit(window([1.0, 1.0], [150], 300), build_intervals([150], 300, 5))
        assert seg.rejection_costs[0] == pytest.approx(0.0, abs=1e-18)

    def test_rejection_cost_is_merge_penalty(self):
        # identical spin samples in both intervals decouple dry and viscous terms
        rng = np.random.default_rng(1)
        half = rng.uniform(0.5, 1.5, 100)
        om = np.r_[half, half]
        win = TelemetryWindow(om, np.sign(om) + 0.8 * om + rng.normal(0, 0.1, 200))
        split = fit(win, build_intervals([100], 200, 0))
        merged = naive_fit(win)
        assert split.rejection_costs[0] == pytest.approx(merged.sse - split.sse, rel=1e-9)

    @given(st.lists(st.integers(5, 295), min_size=1, max_size=5, unique=True), st.integers(0, 1000))
    def test_adding_a_changepoint_never_increases_sse(self, cps, seed):
        win = window([1.0, 1.4], [150], 300, sigma=0.05, seed=seed)
        coarse = fit(win, build_intervals(cps[:-1], 300, 0))
        fine = fit(win, build_intervals(cps, 300, 0))
        assert fine.sse <= coarse.sse + 1e-9

    def test_permutation_within_interval(self):
        win = window([1.0, 1.3], [200], 400, sigma=0.05)
        iv = build_intervals([200], 400, 10)
        perm = np.arange(400)
        rng = np.random.default_rng(0)
        perm[210:] = 210 + rng.permutation(190)
        seg = fit(win, iv)
        seg2 = fit(TelemetryWindow(win.omega[perm], win.f_hat[perm]), iv)
        np.testing.assert_allclose(seg2.F, seg.F, rtol=1e-12)

    def test_unidentifiable(self):
        with pytest.raises(UnidentifiableError):
            fit(TelemetryWindow(np.ones(50), np.ones(50)), build_intervals([], 50, 0))

    def test_round_trip(self):
        seg = fit(window([1, 2], [50], 100, sigma=0.1), build_intervals([50], 100, 2))
        seg2 = SegmentedFit.from_dict(seg.to_dict())
        np.testing.assert_array_equal(seg2.F, seg.F)
        assert seg2.sse == seg.sse


class TestResidualMetrics:
    def test_noiseless_rmse_zero(self):
        win = window([1.0, 1.3], [200], 400)
        iv = build_intervals([200], 400, 10)
        assert rmse(win, iv, fit(win, iv)) < 1e-12

    def test_excess(self):
        assert excess_rmse(0.03, 0.02) == pytest.approx(0.01)
        assert excess_rmse(0.01, 0.02) == 0.0

    def test_pure_noise_excess_small(self):
        win = window([1.0], [], 20_000, sigma=0.02, seed=4)
        iv = build_intervals([], 20_000, 0)
        r = rmse(win, iv, fit(win, iv))
        assert excess_rmse(r, estimate_noise_sigma(win)) < 0.005

    def test_noise_sigma_constant(self):
        assert estimate_noise_sigma(np.ones(100)) == 0.0

    def test_noise_sigma_calibrated(self):
        est = [estimate_noise_sigma(np.random.default_rng(s).normal(0, 0.05, 10_000)) for s in range(100)]
        assert 0.045 < np.mean(est) < 0.055

    def test_noise_sigma_robust_to_steps(self):
        rng = np.random.default_rng(2)
        f = rng.normal(0, 0.05, 10_000) + 0.5 * (np.arange(10_000) // 1000)
        assert estimate_noise_sigma(f) == pytest.approx(0.05, rel=0.1)

    def test_noise_sigma_too_short(self):
        with pytest.raises(ValidationError):
            estimate_noise_sigma(np.zeros(10))

    def test_survival_gaussian(self):
        r = np.random.default_rng(3).normal(0, 0.02, 100_000)
        curve = error_survival([r], 0.02)
        assert curve.ks_distance() < 0.01
        assert curve.empirical[0] == 1.0 and curve.n == 100_000

    def test_survival_subsampled(self):
        r = np.random.default_rng(3).normal(0, 1.0, 5000)
        curve = error_survival([r[:2500], r[2500:]], n_grid=100)
        assert curve.x.size <= 100 and curve.sigma == pytest.approx(1.0, rel=0.05)
