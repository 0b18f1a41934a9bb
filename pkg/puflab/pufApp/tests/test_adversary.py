import math

import numpy as np
from django.test import SimpleTestCase

from pufApp import adversary, cpuf, hybrid, qstate
from pufApp.adversary import (ATTACK_COLUMNS, CrpDatabase, DirectQuery, ExactCopy, GameOracle, LrConfig,
                              QuantumCrpDatabase, UniformGuess)
from pufApp.choices import BasisPrior, CpufKind, CurveMode, DeviceKind, Scheme
from pufApp.exceptions import DatabaseExhausted, DimensionMismatch, EncodingError, QueryBudgetExceeded

BB84_OPTIMUM = 0.5 + 1.0 / (2.0 * math.sqrt(2.0))
FAST_LR = LrConfig(learning_rate=0.02, epochs=60, batch_size=64, restarts=1, seed=1)


def _band(rate, samples, sigmas=3):
    return sigmas * math.sqrt(rate * (1 - rate) / samples)


def _random_qdb(kind, count, rng):
    scheme = hybrid.encoding_scheme(kind)
    bits = rng.integers(0, 2, size=(count, scheme.bits_per_block), dtype=np.uint8)
    return bits, QuantumCrpDatabase.from_responses(np.zeros((count, 1), dtype=np.uint8), bits, scheme)


class DatabaseTests(SimpleTestCase):

    def test_split_keeps_every_entry(self):
        db = CrpDatabase(np.zeros((20, 4)), np.arange(20) % 2)
        train, holdout = db.split(0.25, np.random.default_rng(0))
        self.assertEqual((len(train), len(holdout)), (15, 5))
        self.assertEqual(db.width, 1)

    def test_mismatched_lengths(self):
        with self.assertRaises(DimensionMismatch):
            CrpDatabase(np.zeros((3, 4)), np.zeros((2, 1)))

    def test_quantum_database_shape(self):
        _, qdb = _random_qdb(Scheme.MUB8, 10, np.random.default_rng(0))
        self.assertEqual(qdb.amplitudes.shape, (10, 1, 8))
        self.assertEqual(len(list(qdb.entries())), 10)


class SplitAttackTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(123)

    def test_bb84_stage_optima(self):
        table = adversary.discrimination_table(Scheme.BB84)
        self.assertEqual([row['bit'] for row in table], ['value', 'basis'])
        for row in table:
            self.assertAlmostEqual(row['success'], BB84_OPTIMUM, places=9)

    def test_mub8_uniform_prior_stays_below_published_optima(self):
        table = adversary.discrimination_table(Scheme.MUB8, BasisPrior.FULL)
        self.assertEqual(len(table), 3)
        for row, limit in zip(table, (0.62, 0.69, 0.77)):
            self.assertLessEqual(row['success'], limit + 0.01)

    def test_mub8_uniform_prior_measured_rates(self):
        count = 20000
        family = qstate.mub8_family()
        bases = self.rng.integers(0, len(family), size=count)
        values = self.rng.integers(0, 8, size=count)
        amplitudes = np.stack([family[b][:, v] for b, v in zip(bases, values)])[:, None, :]
        qdb = QuantumCrpDatabase(np.zeros((count, 1), dtype=np.uint8), amplitudes, hybrid.encoding_scheme(Scheme.MUB8))
        value_bits = hybrid.int_to_bits(values, 3).reshape(count, 1, 3)
        table = adversary.discrimination_table(Scheme.MUB8, BasisPrior.FULL)
        for stage, limit in enumerate((0.62, 0.69, 0.77)):
            extracted = adversary.split_attack_extract(qdb, Scheme.MUB8, self.rng, stage=stage,
                                                       known=value_bits[:, :, :stage], prior=BasisPrior.FULL)
            rate = float(np.mean(extracted.responses[:, 0] == value_bits[:, 0, stage]))
            optimum = table[stage]['success']
            with self.subTest(stage=stage):
                self.assertLess(abs(rate - optimum), _band(optimum, count))
                self.assertLessEqual(rate, limit + 0.01 + _band(optimum, count))

    def test_bb84_value_extraction_rate(self):
        bits, qdb = _random_qdb(Scheme.BB84, 4000, self.rng)
        guessed = adversary.split_attack_extract(qdb, Scheme.BB84, self.rng).responses[:, 0]
        rate = float(np.mean(guessed == bits[:, 0]))
        self.assertLess(abs(rate - BB84_OPTIMUM), _band(BB84_OPTIMUM, 4000))

    def test_known_basis_reads_the_value_exactly(self):
        bits, qdb = _random_qdb(Scheme.MUB4, 500, self.rng)
        basis = hybrid.bits_to_int(bits[:, 2:])
        for stage in (0, 1):
            guessed = adversary.split_attack_extract(qdb, Scheme.MUB4, self.rng, stage=stage,
                                                     basis_hint=basis[:, None]).responses[:, 0]
            np.testing.assert_array_equal(guessed, bits[:, stage])

    def test_later_stages_need_the_prefix(self):
        _, qdb = _random_qdb(Scheme.BB84, 10, self.rng)
        with self.assertRaises(EncodingError):
            adversary.split_attack_extract(qdb, Scheme.BB84, self.rng, stage=1)

    def test_scheme_must_match_database(self):
        _, qdb = _random_qdb(Scheme.BB84, 10, self.rng)
        with self.assertRaises(EncodingError):
            adversary.split_attack_extract(qdb, Scheme.MUB8, self.rng)

    def test_chained_extraction_returns_full_blocks(self):
        bits, qdb = _random_qdb(Scheme.MUB8, 300, self.rng)
        extracted = adversary.split_attack_blocks(qdb, self.rng)
        self.assertEqual(extracted.responses.shape, (300, 6))
        self.assertTrue(extracted.noisy)
        first_stage = adversary.discrimination_table(Scheme.MUB8)[0]['success']
        rate = float(np.mean(extracted.responses[:, 0] == bits[:, 0]))
        self.assertLess(abs(rate - first_stage), _band(first_stage, 300))


class MultiCopyTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(77)

    def test_z_basis_inputs_are_exact(self):
        for _ in range(50):
            self.assertEqual(adversary.multi_copy_extract([qstate.bb84_state(1, 0)] * 3, self.rng), (1, 0))

    def test_basis_error_bounded_by_copies(self):
        count = 10000
        plus = np.tile(qstate.bb84_state(0, 1).amplitudes, (count, 1))
        for copies in range(2, 11):
            _, bases = adversary.multi_copy_extract_batch(plus, copies, self.rng)
            bound = 2.0 ** (1 - copies)
            with self.subTest(copies=copies):
                self.assertLessEqual(float(np.mean(bases != 1)), bound + _band(bound, count))

    def test_minus_with_two_copies(self):
        count = 4000
        minus = np.tile(qstate.bb84_state(1, 1).amplitudes, (count, 1))
        values, bases = adversary.multi_copy_extract_batch(minus, 2, self.rng)
        wrong = float(np.mean((values != 1) | (bases != 1)))
        self.assertLess(abs(wrong - 0.75), _band(0.75, count))

    def test_single_copy_is_refused(self):
        with self.assertRaises(ValueError):
            adversary.multi_copy_extract([qstate.bb84_state(0, 0)], self.rng)

    def test_intercept_resend_returns_basis_state(self):
        collapsed, outcome, basis = adversary.intercept_resend(qstate.bb84_state(0, 1), self.rng)
        self.assertTrue(collapsed.same_ray(qstate.bb84_state(outcome, basis)))


class LogisticRegressionTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(5)
        self.model = cpuf.make_model(CpufKind.ARBITER, 16, 1, 31)

    def _noisy(self, flip_rate, count):
        noisy = cpuf.make_model(CpufKind.ARBITER, 16, 1, 31, flip_rate=flip_rate)
        challenges = cpuf.random_challenges(16, count, self.rng)
        return CrpDatabase(challenges, cpuf.eval_batch(noisy, challenges, self.rng), noisy=True)

    def test_learns_a_clean_arbiter_chain(self):
        train = CrpDatabase.from_model(self.model, 5000, self.rng)
        test = CrpDatabase.from_model(self.model, 2000, self.rng)
        learned = adversary.lr_train(train, 0, 1, FAST_LR)
        self.assertGreaterEqual(adversary.lr_accuracy(learned, test), 0.98)
        self.assertFalse(learned.diverged)

    def test_uniform_label_noise_leaves_nothing_to_learn(self):
        learned = adversary.lr_train(self._noisy(0.5, 2000), 0, 1, FAST_LR)
        accuracy = adversary.lr_accuracy(learned, self._noisy(0.5, 10000))
        self.assertLess(abs(accuracy - 0.5), 0.02)

    def test_label_noise_does_not_help(self):
        noisy = self._noisy(0.15, 1000)
        clean = CrpDatabase(noisy.challenges, cpuf.eval_batch(self.model, noisy.challenges))
        test = CrpDatabase.from_model(self.model, 5000, self.rng)
        clean_accuracy = adversary.lr_accuracy(adversary.lr_train(clean, 0, 1, FAST_LR), test)
        noisy_accuracy = adversary.lr_accuracy(adversary.lr_train(noisy, 0, 1, FAST_LR), test)
        self.assertGreaterEqual(clean_accuracy, noisy_accuracy)

    def test_same_seed_same_model(self):
        train = CrpDatabase.from_model(self.model, 300, self.rng)
        first = adversary.lr_train(train, 0, 1, FAST_LR)
        second = adversary.lr_train(train, 0, 1, FAST_LR)
        np.testing.assert_array_equal(first.weights, second.weights)

    def test_batch_size_changes_the_trajectory(self):
        train = CrpDatabase.from_model(self.model, 300, self.rng)
        small = adversary.lr_train(train, 0, 1, LrConfig(learning_rate=0.02, epochs=20, batch_size=16,
                                                         restarts=1, seed=1))
        full = adversary.lr_train(train, 0, 1, LrConfig(learning_rate=0.02, epochs=20, batch_size=256,
                                                        restarts=1, seed=1))
        self.assertEqual(small.weights.shape, (1, 17))
        self.assertFalse(np.allclose(small.weights, full.weights))

    def test_too_few_entries_keep_the_untrained_model(self):
        learned = adversary.lr_train(CrpDatabase.from_model(self.model, 1, self.rng), 0, 1, FAST_LR)
        self.assertFalse(learned.weights.any())
        np.testing.assert_array_equal(adversary.lr_predict(learned, cpuf.random_challenges(16, 5, self.rng)),
                                      np.zeros(5))

    def test_rejects_bad_inputs(self):
        with self.assertRaises(ValueError):
            adversary.lr_train(CrpDatabase.empty(16, 1), 0, 1, FAST_LR)
        with self.assertRaises(DimensionMismatch):
            adversary.lr_train(CrpDatabase.from_model(self.model, 20, self.rng), 3, 1, FAST_LR)


class AttackCurveTests(SimpleTestCase):

    def test_zero_queries(self):
        result = adversary.run_attack(CurveMode.CPUF, 0, 1, n=8, k=1, test_size=200, lr_config=FAST_LR)
        self.assertEqual((result.bit_rate, result.epsilon_measured, result.runtime_ms), (1.0, 0.0, 0))
        self.assertEqual(list(result.as_row()), ATTACK_COLUMNS)

    def test_weak_extraction_is_noisy(self):
        result = adversary.run_attack(CurveMode.HLPUF_WEAK, 400, 2, n=8, k=1, test_size=200, lr_config=FAST_LR)
        self.assertLess(abs(result.bit_rate - BB84_OPTIMUM), _band(BB84_OPTIMUM, 400))
        self.assertGreater(result.epsilon_measured, 0.0)

    def test_adaptive_mode_needs_bb84(self):
        with self.assertRaises(EncodingError):
            adversary.run_attack(CurveMode.HPUF_ADAPTIVE, 10, 1, n=8, k=1, scheme=Scheme.MUB4,
                                 test_size=50, lr_config=FAST_LR)

    def test_deterministic_per_seed(self):
        first = adversary.run_attack(CurveMode.HLPUF_WEAK, 100, 4, n=8, k=1, test_size=200, lr_config=FAST_LR)
        second = adversary.run_attack(CurveMode.HLPUF_WEAK, 100, 4, n=8, k=1, test_size=200, lr_config=FAST_LR)
        self.assertEqual(first, second)

    def test_extracted_database_lags_the_clean_one(self):
        q_grid = (50, 250, 2500)
        curves = {}
        for mode in (CurveMode.CPUF, CurveMode.HLPUF_WEAK):
            curves[mode] = [np.mean([adversary.run_attack(mode, q, seed, n=16, k=1, test_size=2000,
                                                          lr_config=FAST_LR).accuracy for seed in range(3)])
                            for q in q_grid]
        for q, clean, extracted in zip(q_grid, curves[CurveMode.CPUF], curves[CurveMode.HLPUF_WEAK]):
            with self.subTest(q=q):
                self.assertGreaterEqual(clean, extracted)

        def first_reaching(curve):
            return next((q for q, accuracy in zip(q_grid, curve) if accuracy >= 0.9), math.inf)

        self.assertLess(first_reaching(curves[CurveMode.CPUF]), first_reaching(curves[CurveMode.HLPUF_WEAK]))


class UnforgeabilityGameTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(99)
        self.spec = hybrid.DeviceSpec(cpuf_kind=CpufKind.IDEAL, n=16, m=1)

    def test_exact_copy_always_forges_a_classical_puf(self):
        report = adversary.run_unforgeability_game(DeviceKind.CPUF, ExactCopy, 1, 20, self.rng, spec=self.spec)
        self.assertEqual(report.wins, 20)

    def test_uniform_guess_against_hybrid_puf(self):
        # only the second half is verified; a wrong basis still passes half the time
        trials = 400
        report = adversary.run_unforgeability_game(DeviceKind.HPUF, UniformGuess, 1, trials, self.rng,
                                                   spec=self.spec)
        self.assertLess(abs(report.win_rate - 0.5), _band(0.5, trials))

    def test_strategies_resolve_by_name(self):
        report = adversary.run_unforgeability_game(DeviceKind.CPUF, 'exact_copy', 1, 5, self.rng, spec=self.spec)
        self.assertEqual((report.strategy, report.wins), ('exact_copy', 5))
        self.assertEqual(set(adversary.STRATEGIES), {'exact_copy', 'uniform_guess', 'measure_then_forge',
                                                     'multi_copy_forge', 'replay_server_challenges',
                                                     'direct_query'})
        with self.assertRaises(ValueError):
            adversary.run_unforgeability_game(DeviceKind.CPUF, 'clone', 1, 5, self.rng, spec=self.spec)

    def test_direct_queries_only_see_bottom(self):
        report = adversary.run_unforgeability_game(DeviceKind.HLPUF, 'direct_query', 5, 10, self.rng,
                                                   spec=self.spec)
        self.assertEqual(report.strategy, DirectQuery.name)
        self.assertEqual(report.bottoms, 50)

    def test_thread_count_does_not_change_outcomes(self):
        serial = adversary.run_unforgeability_game(DeviceKind.HPUF, UniformGuess, 1, 30,
                                                   np.random.default_rng(4), spec=self.spec)
        pooled = adversary.run_unforgeability_game(DeviceKind.HPUF, UniformGuess, 1, 30,
                                                   np.random.default_rng(4), spec=self.spec, threads=4)
        self.assertEqual(serial.outcomes, pooled.outcomes)

    def test_query_budget_is_enforced(self):
        oracle = GameOracle(DeviceKind.CPUF, self.spec.build_cpuf(0), 5, self.rng)
        with self.assertRaises(QueryBudgetExceeded):
            oracle.random_crps(6)

    def test_locked_device_refuses_direct_queries(self):
        oracle = GameOracle(DeviceKind.HLPUF, self.spec.build_locked(0), 10, self.rng)
        self.assertIsNone(oracle.query_copies(cpuf.random_challenges(16, 2, self.rng), copies=3))
        self.assertEqual((oracle.used, oracle.bottoms), (2, 6))

    def test_verified_bits_are_the_second_half(self):
        hpuf = GameOracle(DeviceKind.HPUF, self.spec.build(0), 1, self.rng)
        self.assertEqual(list(hpuf.verified_bits), [2, 3])
        cpuf_oracle = GameOracle(DeviceKind.CPUF, self.spec.build_cpuf(0), 1, self.rng)
        self.assertEqual(list(cpuf_oracle.verified_bits), [0, 1, 2, 3])

    def test_fresh_challenge_fails_once_every_challenge_was_seen(self):
        oracle = GameOracle(DeviceKind.CPUF, cpuf.make_model(CpufKind.ARBITER, 2, 1, 0), 4, self.rng)
        oracle.query_copies(np.array([[0, 0], [0, 1], [1, 0], [1, 1]]))
        with self.assertRaises(DatabaseExhausted):
            oracle.fresh_challenge()

    def test_learning_phase_needs_queries(self):
        with self.assertRaises(ValueError):
            adversary.run_unforgeability_game(DeviceKind.CPUF, ExactCopy, 0, 1, self.rng, spec=self.spec)


class LockReductionTests(SimpleTestCase):
    """Learning strategies against one arbiter block per half, same budget for every player."""

    q = 300
    trials = 30
    copies = 10

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        spec = hybrid.DeviceSpec(cpuf_kind=CpufKind.ARBITER, n=10, k=1, m=1)

        def play(target, name, seed, **options):
            return adversary.run_unforgeability_game(target, name, cls.q, cls.trials, np.random.default_rng(seed),
                                                     spec=spec, lr_config=FAST_LR, **options)

        cls.weak = play(DeviceKind.HLPUF, 'measure_then_forge', 1)
        cls.replay = play(DeviceKind.HLPUF, 'replay_server_challenges', 2)
        cls.multi_copy = play(DeviceKind.HPUF, 'multi_copy_forge', 3, copies=cls.copies)
        cls.locked_multi_copy = play(DeviceKind.HLPUF, 'multi_copy_forge', 4, copies=cls.copies)

    @staticmethod
    def _slack(first, second):
        return 3 * math.sqrt(first.stderr ** 2 + second.stderr ** 2 + 1e-4)

    def test_adaptive_against_the_lock_is_no_better_than_multi_copy_access(self):
        self.assertLessEqual(self.replay.win_rate, self.multi_copy.win_rate + self._slack(self.replay, self.multi_copy))

    def test_adaptive_against_the_lock_is_close_to_weak(self):
        self.assertLessEqual(abs(self.replay.win_rate - self.weak.win_rate), self._slack(self.replay, self.weak))

    def test_learning_strategies_beat_guessing(self):
        self.assertGreater(self.multi_copy.win_rate, 0.8)
        self.assertGreater(self.weak.win_rate, 0.5)

    def test_lock_refuses_every_copy(self):
        self.assertEqual(self.locked_multi_copy.bottoms, self.trials * self.q * self.copies)
        self.assertLess(abs(self.locked_multi_copy.win_rate - 0.5), _band(0.5, self.trials))

    def test_replay_passes_the_lock(self):
        self.assertEqual(self.replay.bottoms, 0)
