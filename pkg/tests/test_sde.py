"""Coefficient SDE, measure changes, geometric Euler scheme, densities."""

import numpy as np
import pytest

from ratingsde import (HISTORICAL, MeasureChange, SdeParams, TimeGrid,
                       ValidationError, default_grid, girsanov_density,
                       kappa_from_h, mean_matrix, simulate_paths,
                       simulate_paths_threaded, var_matrix)
from ratingsde.sde import draw_noise, simulate_terminal


def flat_params(k, a, b, sigma):
    nc = (k - 1) ** 2
    return SdeParams(k=k, a=np.full(nc, a), b=np.full(nc, b),
                     sigma=np.full(nc, sigma))


class TestKappaFromH:
    def test_all_ones_collapse_to_ones(self):
        h = np.ones(4)
        for kind in ("jlt", "exponential"):
            kappa = kappa_from_h(MeasureChange(kind=kind, h=h), 4)
            assert np.array_equal(kappa, np.ones(9))

    def test_exponential_ratio(self):
        m = MeasureChange(kind="exponential", h=np.array([2.0, 1.0, 1.0, 1.0]))
        kappa = kappa_from_h(m, 4)
        assert kappa[0] == 2.0       # coordinate (1,2): h_1/h_2
        assert kappa[3] == 0.5       # coordinate (2,1): h_2/h_1

    def test_historical_is_zero(self):
        assert np.array_equal(kappa_from_h(HISTORICAL, 4), np.zeros(9))

    def test_exponential_rejects_zero_h(self):
        with pytest.raises(ValidationError):
            MeasureChange(kind="exponential", h=np.array([0.0, 1.0, 1.0, 1.0]))

    def test_h_last_must_be_one(self):
        with pytest.raises(ValidationError):
            MeasureChange(kind="jlt", h=np.array([1.0, 1.0, 1.0, 2.0]))


class TestSimulatePaths:
    def test_degenerate_params_freeze_at_identity(self):
        params = flat_params(4, 1.0, 0.0, 0.0)
        bundle = simulate_paths(params, HISTORICAL, TimeGrid(1.0, 10), 3, 0)
        assert np.allclose(bundle.require_rpaths(),
                           np.broadcast_to(np.eye(4), (3, 11, 4, 4)))

    def test_deterministic_ode_oracle(self):
        # K=2, a=1, b=lambda, sigma=0: cumulative intensity -> lambda T^2/2
        lam = 0.8
        grid = TimeGrid(1.0, 4000)
        params = flat_params(2, 1.0, lam, 0.0)
        bundle = simulate_paths(params, HISTORICAL, grid, 1, 0)
        p12 = bundle.require_rpaths()[0, -1, 0, 1]
        assert p12 == pytest.approx(1.0 - np.exp(-lam / 2.0), abs=2e-4)

    def test_all_steps_row_stochastic(self, calibrated_params):
        bundle = simulate_paths(calibrated_params, HISTORICAL,
                                TimeGrid(1.0, 30), 50, 1)
        rp = bundle.require_rpaths()
        assert np.abs(rp.sum(axis=-1) - 1.0).max() <= 1e-9
        assert rp.min() >= 0.0 and rp.max() <= 1.0 + 1e-12
        assert np.allclose(rp[:, :, -1, :], np.broadcast_to(
            np.eye(4)[-1], rp[:, :, -1, :].shape))

    def test_increments_nonnegative(self, calibrated_params):
        bundle = simulate_paths(calibrated_params, HISTORICAL,
                                TimeGrid(1.0, 20), 10, 2)
        assert bundle.increments.min() >= 0.0

    def test_measure_change_equals_drift_shift_bitwise(self):
        params = flat_params(4, 1.2, 0.05, 0.08)
        grid = TimeGrid(1.0, 25)
        h = np.array([2.0, 1.5, 0.5, 1.0])
        measure = MeasureChange(kind="exponential", h=h)
        kappa = kappa_from_h(measure, 4)
        shifted = SdeParams(k=4, a=params.a, b=params.b + params.sigma * kappa,
                            sigma=params.sigma)
        b_q = simulate_paths(params, measure, grid, 20, 3)
        b_p = simulate_paths(shifted, HISTORICAL, grid, 20, 3)
        assert np.array_equal(b_q.require_rpaths(), b_p.require_rpaths())

    def test_seed_determinism(self, calibrated_params):
        g = TimeGrid(1.0, 15)
        b1 = simulate_paths(calibrated_params, HISTORICAL, g, 8, 11)
        b2 = simulate_paths(calibrated_params, HISTORICAL, g, 8, 11)
        assert np.array_equal(b1.require_rpaths(), b2.require_rpaths())

    def test_thread_count_does_not_change_bits(self, calibrated_params):
        g = TimeGrid(1.0, 15)
        b1 = simulate_paths_threaded(calibrated_params, HISTORICAL, g, 600, 5,
                                     threads=1)
        b8 = simulate_paths_threaded(calibrated_params, HISTORICAL, g, 600, 5,
                                     threads=8)
        assert np.array_equal(b1.require_rpaths(), b8.require_rpaths())
        assert np.array_equal(b1.increments, b8.increments)

    def test_terminal_matches_full_simulation(self, calibrated_params):
        g = TimeGrid(1.0, 15)
        bundle = simulate_paths(calibrated_params, HISTORICAL, g, 6, 9)
        rt = simulate_terminal(calibrated_params, HISTORICAL, g, 6, 9)
        assert np.array_equal(bundle.require_rpaths()[:, -1], rt)

    def test_strong_convergence_under_halving(self):
        # halving dt changes the terminal matrix at O(dt) on a smoke test
        params = flat_params(4, 1.3, 0.3, 0.0)
        ref = simulate_paths(params, HISTORICAL, TimeGrid(1.0, 512), 1, 0)
        r_ref = ref.require_rpaths()[0, -1]
        errs = []
        for n in (32, 64, 128):
            b = simulate_paths(params, HISTORICAL, TimeGrid(1.0, n), 1, 0)
            errs.append(np.linalg.norm(b.require_rpaths()[0, -1] - r_ref))
        assert errs[0] > errs[1] > errs[2]
        assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.35)


class TestGirsanovDensity:
    def test_zero_kernel_is_unit_density(self):
        grid = TimeGrid(1.0, 5)
        w = np.zeros((5, 9))
        assert girsanov_density(np.zeros(9), w, grid) == 1.0

    def test_plug_in_value(self):
        # W_T = 0 and |kappa|^2 T = 2 -> L_T = e^{-1}
        grid = TimeGrid(1.0, 4)
        kappa = np.array([np.sqrt(2.0)])
        w = np.array([[0.5], [-0.5], [0.25], [-0.25]])
        assert girsanov_density(kappa, w, grid) == pytest.approx(np.exp(-1.0))

    def test_martingale_property(self):
        grid = TimeGrid(1.0, 8)
        rng = np.random.default_rng(12)
        kappa = rng.uniform(-0.5, 0.5, 9)
        w = rng.standard_normal((20000, 8, 9)) * np.sqrt(grid.dt)
        l = girsanov_density(kappa, w, grid)
        assert abs(l.mean() - 1.0) <= 3.0 * l.std(ddof=1) / np.sqrt(l.size)

    def test_density_from_bundle_increments(self, calibrated_params):
        g = TimeGrid(1.0, 10)
        bundle = simulate_paths(calibrated_params, HISTORICAL, g, 4, 13)
        l = girsanov_density(np.zeros(9), bundle.w_increments, g)
        assert np.array_equal(l, np.ones(4))


class TestMoments:
    def test_zero_volatility_variance_is_zero(self):
        params = flat_params(4, 1.0, 0.2, 0.0)
        bundle = simulate_paths(params, HISTORICAL, TimeGrid(1.0, 10), 5, 0)
        assert np.abs(var_matrix(bundle, 1.0)).max() == 0.0

    def test_single_trajectory_variance_rejected(self, calibrated_params):
        bundle = simulate_paths(calibrated_params, HISTORICAL,
                                TimeGrid(1.0, 5), 1, 0)
        with pytest.raises(ValidationError):
            var_matrix(bundle, 1.0)

    def test_identity_mean(self):
        params = flat_params(4, 1.0, 0.0, 0.0)
        bundle = simulate_paths(params, HISTORICAL, TimeGrid(1.0, 5), 4, 0)
        assert np.allclose(mean_matrix(bundle, 1.0), np.eye(4), atol=1e-12)

    def test_off_grid_time_rejected(self, calibrated_params):
        bundle = simulate_paths(calibrated_params, HISTORICAL,
                                TimeGrid(1.0, 7), 2, 0)
        with pytest.raises(ValidationError):
            mean_matrix(bundle, 0.5)


class TestRngContract:
    def test_noise_is_per_trajectory_per_coordinate(self):
        g = TimeGrid(1.0, 6)
        z_all = draw_noise(4, g, 3, 42)
        z_tail = draw_noise(4, g, 2, 42, traj_offset=1)
        assert np.array_equal(z_all[1:], z_tail)


def test_default_grid_steps():
    assert default_grid().steps == 120
    assert default_grid(0.5).steps == 60
