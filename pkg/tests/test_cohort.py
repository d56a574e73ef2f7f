"""Cohort repair: withdrawal rates, reconstruction, distance/adjustment."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratingsde import (CohortMatrix, ValidationError, WeightMatrix,
                       adjusted_matrix, distance_matrix, proportional_weights,
                       reconstruct, repair, uncertainty_target,
                       uniform_weights, withdrawal_rates)
from conftest import ADJUSTED_PUBLISHED, DISTANCE_PUBLISHED, PRINT_TOL


class TestWithdrawalRates:
    def test_published_first_row(self, cohort):
        # the published w_t column is rounded to 6 decimals
        assert withdrawal_rates(cohort)[0] == pytest.approx(0.096671, abs=5e-7)

    def test_stochastic_matrix_has_no_withdrawal(self):
        m = np.array([[0.9, 0.05, 0.03, 0.02],
                      [0.1, 0.8, 0.06, 0.04],
                      [0.02, 0.08, 0.7, 0.2],
                      [0.0, 0.0, 0.0, 1.0]])
        w = withdrawal_rates(CohortMatrix(k=4, entries=m))
        assert np.abs(w).max() <= 1e-12

    def test_absorbing_row_has_no_withdrawal(self, cohort):
        assert withdrawal_rates(cohort)[-1] == 0.0

    def test_rejects_row_sum_above_one(self):
        bad = np.eye(4)
        bad[0, 1] = 0.5
        with pytest.raises(ValidationError):
            CohortMatrix(k=4, entries=bad)


class TestReconstruct:
    def test_uniform_weights_spread_mass_evenly(self, cohort):
        out = reconstruct(cohort, uniform_weights(4)).entries
        gain = out[0] - cohort.entries[0]
        assert np.allclose(gain, 0.096671 / 4, atol=1e-9)

    def test_zero_withdrawal_is_identity_operation(self):
        m = np.array([[0.9, 0.05, 0.03, 0.02],
                      [0.1, 0.8, 0.06, 0.04],
                      [0.02, 0.08, 0.7, 0.2],
                      [0.0, 0.0, 0.0, 1.0]])
        stochastic = CohortMatrix(k=4, entries=m)
        out = reconstruct(stochastic, proportional_weights(stochastic))
        assert np.allclose(out.entries, m, atol=1e-12)

    def test_row_sums_exactly_one_for_random_weights(self, cohort):
        rng = np.random.default_rng(17)
        for _ in range(25):
            w = WeightMatrix(rng.uniform(0.01, 5.0, (4, 4)))
            out = reconstruct(cohort, w).entries
            assert np.abs(out.sum(axis=1) - 1.0).max() <= 1e-12

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_row_sums_one_property(self, cohort, seed):
        rng = np.random.default_rng(seed)
        out = reconstruct(cohort, WeightMatrix(rng.uniform(1e-3, 10, (4, 4))))
        assert np.abs(out.entries.sum(axis=1) - 1.0).max() <= 1e-12

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(ValidationError):
            WeightMatrix(np.zeros((4, 4)))


class TestDistanceMatrix:
    def test_matches_published_table(self, cohort, reconstructed):
        d = distance_matrix(reconstructed, cohort.entries)
        assert np.abs(d - DISTANCE_PUBLISHED).max() <= PRINT_TOL

    def test_identical_inputs_give_zero(self, reconstructed):
        assert np.array_equal(distance_matrix(reconstructed, reconstructed),
                              np.zeros((4, 4)))

    def test_absorbing_row_is_zero(self, cohort, reconstructed):
        d = distance_matrix(reconstructed, cohort.entries)
        assert np.array_equal(d[-1], np.zeros(4))

    def test_symmetric_in_arguments(self, cohort, reconstructed):
        assert np.array_equal(distance_matrix(reconstructed, cohort.entries),
                              distance_matrix(cohort.entries, reconstructed))

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            distance_matrix(np.eye(3), np.eye(4))


class TestAdjustedMatrix:
    def test_matches_published_table(self, cohort, reconstructed):
        adj = adjusted_matrix(cohort.entries, reconstructed)
        assert np.abs(adj - ADJUSTED_PUBLISHED).max() <= PRINT_TOL

    def test_equal_inputs_are_fixed_point(self, reconstructed):
        adj = adjusted_matrix(reconstructed, reconstructed)
        assert np.array_equal(adj, reconstructed)

    def test_row_sum_identity(self, cohort, reconstructed):
        # each row gains sum_j D_ij^2 / eta_i, which is at most eta_i
        d = distance_matrix(reconstructed, cohort.entries)
        eta = d.sum(axis=1)
        adj = adjusted_matrix(cohort.entries, reconstructed)
        gain = adj.sum(axis=1) - cohort.entries.sum(axis=1)
        expect = np.where(eta > 0, (d ** 2).sum(axis=1) / np.where(eta > 0, eta, 1.0), 0.0)
        assert np.allclose(gain, expect, atol=1e-12)
        assert np.all(gain <= eta + 1e-12)


class TestUncertaintyTarget:
    def test_entry_1_1_from_published_values(self, reconstructed):
        t = uncertainty_target(reconstructed, ADJUSTED_PUBLISHED)
        assert t[0, 0] == pytest.approx((0.964507 - 0.9624) ** 2, rel=1e-6)

    def test_entry_3_3_from_published_values(self, reconstructed):
        t = uncertainty_target(reconstructed, ADJUSTED_PUBLISHED)
        assert t[2, 2] == pytest.approx((0.802318 - 0.7773) ** 2, rel=1e-6)

    def test_equal_inputs_give_zero(self, reconstructed):
        assert np.array_equal(uncertainty_target(reconstructed, reconstructed),
                              np.zeros((4, 4)))


def test_repair_bundles_all_artifacts(cohort, reconstructed):
    out = repair(cohort, uniform_weights(4), reconstructed=reconstructed)
    assert np.array_equal(out.reconstructed, reconstructed)
    assert np.abs(out.distance - DISTANCE_PUBLISHED).max() <= PRINT_TOL
    assert np.abs(out.adjusted - ADJUSTED_PUBLISHED).max() <= PRINT_TOL
    assert np.array_equal(out.uncertainty,
                          (out.reconstructed - out.adjusted) ** 2)
