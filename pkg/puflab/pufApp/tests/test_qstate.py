import math

import numpy as np
from django.test import SimpleTestCase

from pufApp import qstate
from pufApp.checks import corrupted_mub8
from pufApp.exceptions import DimensionMismatch, StateError

BB84_OPTIMUM = 0.5 + 1.0 / (2.0 * math.sqrt(2.0))


def _value_mixture(bit):
    return qstate.mixture([(qstate.bb84_state(bit, 0), 0.5), (qstate.bb84_state(bit, 1), 0.5)])


class PureStateTests(SimpleTestCase):

    def test_rejects_unnormalized_vector(self):
        with self.assertRaises(StateError):
            qstate.PureState(np.array([1.0, 1.0]))

    def test_rejects_unsupported_dimension(self):
        with self.assertRaises(StateError):
            qstate.PureState(np.array([1.0, 0.0, 0.0]))

    def test_amplitudes_are_read_only(self):
        state = qstate.PureState(np.array([1.0, 0.0]))
        with self.assertRaises(ValueError):
            state.amplitudes[0] = 0.0

    def test_same_ray_ignores_global_phase(self):
        plus = qstate.bb84_state(0, 1)
        rotated = qstate.PureState(1j * plus.amplitudes)
        self.assertTrue(plus.same_ray(rotated))
        self.assertFalse(plus.same_ray(qstate.bb84_state(1, 1)))


class DensityMatrixTests(SimpleTestCase):

    def test_rejects_non_hermitian(self):
        with self.assertRaises(StateError):
            qstate.DensityMatrix(np.array([[0.5, 0.5], [0.0, 0.5]]))

    def test_rejects_wrong_trace(self):
        with self.assertRaises(StateError):
            qstate.DensityMatrix(np.eye(2))

    def test_mixture_weights_must_sum_to_one(self):
        with self.assertRaises(StateError):
            qstate.mixture([(qstate.bb84_state(0, 0), 0.4), (qstate.bb84_state(1, 0), 0.4)])

    def test_mixture_of_complementary_states_is_maximally_mixed(self):
        rho = qstate.mixture([(qstate.bb84_state(0, 0), 0.5), (qstate.bb84_state(1, 0), 0.5)])
        np.testing.assert_allclose(rho.entries, np.eye(2) / 2, atol=1e-12)


class DiscriminationTests(SimpleTestCase):

    def test_trace_distance_between_zero_and_plus(self):
        distance = qstate.trace_distance(qstate.pure(qstate.bb84_state(0, 0)), qstate.pure(qstate.bb84_state(0, 1)))
        self.assertAlmostEqual(distance, 1 / math.sqrt(2), places=9)

    def test_helstrom_on_bb84_value_mixtures(self):
        self.assertAlmostEqual(qstate.helstrom_success(_value_mixture(0), _value_mixture(1)), BB84_OPTIMUM, places=9)

    def test_helstrom_identical_hypotheses_falls_back_to_prior(self):
        zero = qstate.pure(qstate.bb84_state(0, 0))
        self.assertAlmostEqual(qstate.helstrom_success(zero, zero, 0.7), 0.7, places=9)

    def test_helstrom_orthogonal_states_is_certain(self):
        zero, one = (qstate.pure(qstate.bb84_state(bit, 0)) for bit in (0, 1))
        self.assertAlmostEqual(qstate.helstrom_success(zero, one), 1.0, places=9)

    def test_helstrom_rejects_mixed_dimensions(self):
        with self.assertRaises(DimensionMismatch):
            qstate.helstrom_success(qstate.pure(qstate.bb84_state(0, 0)),
                                    qstate.pure(qstate.mub4_family().state(0, 0)))

    def test_measurement_success_matches_helstrom(self):
        measurement = qstate.helstrom_measurement(_value_mixture(0), _value_mixture(1))
        self.assertAlmostEqual(measurement.success, BB84_OPTIMUM, places=9)
        projectors = measurement.projectors
        np.testing.assert_allclose(projectors[0] + projectors[1], np.eye(2), atol=1e-9)

    def test_measurement_rejects_prior_outside_unit_interval(self):
        for prior in (-0.1, 1.5):
            with self.subTest(prior=prior), self.assertRaises(StateError):
                qstate.helstrom_measurement(_value_mixture(0), _value_mixture(1), prior)


class MeasurementTests(SimpleTestCase):

    def test_zero_in_x_basis_is_a_fair_coin(self):
        rng = np.random.default_rng(11)
        samples = 4000
        outcomes = [qstate.measure(qstate.bb84_state(0, 0), qstate.bb84_basis(1), rng)[0] for _ in range(samples)]
        self.assertLess(abs(np.mean(outcomes) - 0.5), 3 * math.sqrt(0.25 / samples))

    def test_measure_collapses_onto_basis_vector(self):
        rng = np.random.default_rng(3)
        outcome, collapsed = qstate.measure(qstate.bb84_state(0, 1), qstate.bb84_basis(0), rng)
        self.assertTrue(collapsed.same_ray(qstate.bb84_state(outcome, 0)))

    def test_eigenstate_measures_deterministically(self):
        rng = np.random.default_rng(5)
        amplitudes = np.tile(qstate.bb84_state(1, 1).amplitudes, (500, 1))
        outcomes = qstate.measure_batch(amplitudes, qstate.bb84_basis(1), rng)
        self.assertTrue(np.all(outcomes == 1))

    def test_breidbart_basis_frequency(self):
        rng = np.random.default_rng(17)
        measurement = qstate.helstrom_measurement(_value_mixture(0), _value_mixture(1))
        samples = 4000
        decisions = measurement.decide_batch(np.tile(qstate.bb84_state(0, 0).amplitudes, (samples, 1)), rng)
        rate = float(np.mean(decisions == 0))
        self.assertLess(abs(rate - BB84_OPTIMUM), 3 * math.sqrt(BB84_OPTIMUM * (1 - BB84_OPTIMUM) / samples))

    def test_rejects_non_unitary_basis(self):
        with self.assertRaises(StateError):
            qstate.measure(qstate.bb84_state(0, 0), np.array([[1, 1], [0, 1]]), np.random.default_rng(0))


class MubTests(SimpleTestCase):

    def test_eight_dimensional_family_is_unbiased(self):
        family = qstate.mub8_family()
        self.assertEqual(len(family), 9)
        self.assertEqual(qstate.check_mub(family), [])

    def test_four_dimensional_family_is_unbiased(self):
        family = qstate.mub4_family()
        self.assertEqual(len(family), 5)
        self.assertEqual(qstate.check_mub(family), [])

    def test_basis_zero_is_computational(self):
        np.testing.assert_allclose(qstate.mub8_family()[0], np.eye(8))

    def test_corrupted_family_is_reported(self):
        violations = qstate.check_mub(corrupted_mub8())
        self.assertTrue(any('bases 1 and 2' in violation for violation in violations))
