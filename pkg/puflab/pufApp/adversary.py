"""Attacks on classical and hybrid PUFs.

Split-attack extraction of single quantum copies, multi-copy extraction of
BB84 responses, logistic-regression modeling of (k-XOR) arbiter chains on
clean or extracted databases, an intercept-resend eavesdropper and the
universal unforgeability game with its strategy library.
"""
import functools
import logging
import threading
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
import tensorflow as tf
from django.conf import settings
from pypuf.attack import LRAttack2021
from pypuf.io import ChallengeResponseSet

from . import cpuf, hybrid, qstate
from .choices import BasisPrior, CurveMode, DatabaseSource, DeviceKind, HalfRole, Scheme
from .exceptions import DatabaseExhausted, DimensionMismatch, EncodingError, QueryBudgetExceeded
from .utils.artifacts import append_csv
from .utils.pool import ordered_map
from .utils.seeding import derive_rng, derive_seed, spawn_seed

logger = logging.getLogger(__name__)

ATTACK_COLUMNS = ['seed', 'q', 'scheme', 'k', 'n', 'm', 'mode', 'accuracy', 'bit_rate',
                  'epsilon_measured', 'runtime_ms']


# ---- databases ----

@dataclass(frozen=True, eq=False)
class CrpDatabase:
    challenges: np.ndarray
    responses: np.ndarray
    noisy: bool = False
    source: str = DatabaseSource.CLEAN

    def __post_init__(self):
        challenges = np.atleast_2d(np.asarray(self.challenges, dtype=np.uint8))
        responses = np.asarray(self.responses, dtype=np.uint8)
        if responses.ndim == 1:
            responses = responses[:, None]
        if challenges.shape[0] != responses.shape[0]:
            raise DimensionMismatch(f"{challenges.shape[0]} challenges vs {responses.shape[0]} responses")
        object.__setattr__(self, 'challenges', challenges)
        object.__setattr__(self, 'responses', responses)

    def __len__(self):
        return self.challenges.shape[0]

    @property
    def n(self):
        return self.challenges.shape[1]

    @property
    def width(self):
        return self.responses.shape[1]

    @classmethod
    def from_model(cls, model, count, rng):
        challenges = cpuf.random_challenges(model.n, count, rng)
        return cls(challenges, cpuf.eval_batch(model, challenges))

    @classmethod
    def empty(cls, n, width):
        return cls(np.zeros((0, n), dtype=np.uint8), np.zeros((0, width), dtype=np.uint8))

    def subset(self, indices):
        return CrpDatabase(self.challenges[indices], self.responses[indices], self.noisy, self.source)

    def split(self, fraction, rng):
        """(train, holdout) with ``fraction`` of the entries held out."""
        order = rng.permutation(len(self))
        held = int(round(fraction * len(self)))
        return self.subset(order[held:]), self.subset(order[:held])


@dataclass(frozen=True, eq=False)
class QuantumCrpDatabase:
    """One copy of the block states per challenge, as an (N, blocks, d) amplitude array."""
    challenges: np.ndarray
    amplitudes: np.ndarray
    scheme: hybrid.EncodingScheme

    def __len__(self):
        return self.challenges.shape[0]

    @property
    def blocks(self):
        return self.amplitudes.shape[1]

    @classmethod
    def from_responses(cls, challenges, responses, scheme):
        scheme = hybrid.encoding_scheme(scheme) if isinstance(scheme, str) else scheme
        return cls(np.asarray(challenges, dtype=np.uint8), hybrid.encode_amplitudes(responses, scheme), scheme)

    def entries(self):
        for challenge, amplitudes in zip(self.challenges, self.amplitudes):
            yield challenge, tuple(qstate.PureState._trusted(row) for row in amplitudes)


# ---- split attack ----

def _pattern_weight(bits, p):
    zeros = sum(1 for bit in bits if bit == 0)
    return p ** zeros * (1.0 - p) ** (len(bits) - zeros)


def _block_ensemble(scheme, p, prior):
    """(block bits, amplitudes, weight) over every block the adversary considers possible."""
    ensemble = []
    if BasisPrior(prior) == BasisPrior.FULL:
        basis_weight = 1.0 / len(scheme.family)
        for basis in range(len(scheme.family)):
            for value in range(scheme.dim):
                value_bits = hybrid.int_to_bits(value, scheme.value_bits)
                ensemble.append((tuple(int(b) for b in value_bits), scheme.family[basis][:, value],
                                 basis_weight * _pattern_weight(value_bits, p)))
        return ensemble
    for bits, state in hybrid.block_states(scheme):
        ensemble.append((bits, state.amplitudes, _pattern_weight(bits, p)))
    return ensemble


class _ConstantGuess:
    """Stage where one hypothesis has no mass; the guess needs no measurement."""

    def __init__(self, label):
        self.label = label
        self.success = 1.0

    def decide_batch(self, amplitudes, rng):
        return np.full(np.atleast_2d(amplitudes).shape[0], self.label, dtype=np.uint8)


@functools.lru_cache(maxsize=None)
def stage_measurement(kind, stage, prefix, p=0.5, prior=BasisPrior.DEVICE):
    """Helstrom measurement for block bit ``stage`` given the earlier bits ``prefix``."""
    scheme = hybrid.encoding_scheme(kind)
    prior = BasisPrior(prior)
    limit = scheme.value_bits if prior == BasisPrior.FULL else scheme.bits_per_block
    if not 0 <= stage < limit:
        raise EncodingError(f"stage {stage} not available for {kind} under the {prior} prior")
    if len(prefix) != stage:
        raise EncodingError(f"stage {stage} needs {stage} known bits, got {len(prefix)}")
    mixtures = [np.zeros((scheme.dim, scheme.dim), dtype=complex) for _ in (0, 1)]
    masses = [0.0, 0.0]
    for bits, amplitudes, weight in _block_ensemble(scheme, p, prior):
        if bits[:stage] != tuple(prefix) or weight == 0.0:
            continue
        hypothesis = bits[stage]
        mixtures[hypothesis] += weight * np.outer(amplitudes, amplitudes.conj())
        masses[hypothesis] += weight
    if masses[1] == 0.0:
        return _ConstantGuess(0)
    if masses[0] == 0.0:
        return _ConstantGuess(1)
    zero, one = (qstate.DensityMatrix(mixtures[h] / masses[h]) for h in (0, 1))
    return qstate.helstrom_measurement(zero, one, masses[0] / (masses[0] + masses[1]))


def _check_scheme(qdb, scheme):
    kind = scheme.kind if isinstance(scheme, hybrid.EncodingScheme) else Scheme(scheme)
    if qdb.scheme.kind != kind:
        raise EncodingError(f"database holds {qdb.scheme.kind} states, attack configured for {kind}")
    return qdb.scheme


def split_attack_extract(qdb, scheme, rng, *, stage=0, known=None, p=0.5,
                         prior=BasisPrior.DEVICE, basis_hint=None):
    """Guess block bit ``stage`` of every entry from its single copy.

    ``known`` is an (N, blocks, stage) array of the earlier bits (from a previous
    modeling stage or ground truth). ``basis_hint`` (scalar or (N, blocks))
    replaces discrimination by a measurement in the named basis.
    Returns a noisy CrpDatabase with one extracted bit per block.
    """
    scheme = _check_scheme(qdb, scheme)
    count, blocks, dim = qdb.amplitudes.shape
    flat = qdb.amplitudes.reshape(count * blocks, dim)
    guesses = np.zeros(count * blocks, dtype=np.uint8)
    if basis_hint is not None:
        if stage >= scheme.value_bits:
            raise EncodingError("a basis hint only helps value stages")
        hints = np.broadcast_to(np.asarray(basis_hint), (count, blocks)).reshape(-1)
        for basis in np.unique(hints):
            rows = hints == basis
            outcomes = qstate.measure_batch(flat[rows], scheme.family[int(basis)], rng)
            guesses[rows] = (outcomes >> (scheme.value_bits - 1 - stage)) & 1
    else:
        if stage and known is None:
            raise EncodingError(f"stage {stage} needs the known bits of earlier stages")
        prefixes = (np.zeros((count * blocks, 0), dtype=np.uint8) if not stage
                    else np.asarray(known, dtype=np.uint8).reshape(count * blocks, stage))
        unique, inverse = np.unique(prefixes, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        for group, prefix in enumerate(unique):
            rows = inverse == group
            measurement = stage_measurement(scheme.kind, stage, tuple(int(b) for b in prefix), p, BasisPrior(prior))
            guesses[rows] = measurement.decide_batch(flat[rows], rng)
    return CrpDatabase(qdb.challenges, guesses.reshape(count, blocks), noisy=True, source=DatabaseSource.EXTRACTED)


def split_attack_blocks(qdb, rng, *, p=0.5):
    """Every bit of every block from the single copy, stage after stage on the collapsed state.

    Each stage is conditioned on the bits guessed so far; the returned database
    has the full (N, blocks x bits_per_block) responses.
    """
    scheme = qdb.scheme
    count, blocks, dim = qdb.amplitudes.shape
    amplitudes = qdb.amplitudes.reshape(count * blocks, dim).copy()
    guessed = np.zeros((count * blocks, scheme.bits_per_block), dtype=np.uint8)
    for stage in range(scheme.bits_per_block):
        unique, inverse = np.unique(guessed[:, :stage], axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        for group, prefix in enumerate(unique):
            rows = np.flatnonzero(inverse == group)
            measurement = stage_measurement(scheme.kind, stage, tuple(int(b) for b in prefix), p)
            if isinstance(measurement, _ConstantGuess):
                guessed[rows, stage] = measurement.label
                continue
            outcomes = qstate.measure_batch(amplitudes[rows], measurement.basis, rng)
            guessed[rows, stage] = measurement.labels[outcomes]
            amplitudes[rows] = measurement.basis[:, outcomes].T
    return CrpDatabase(qdb.challenges, guessed.reshape(count, blocks * scheme.bits_per_block),
                       noisy=True, source=DatabaseSource.EXTRACTED)


def discrimination_table(scheme, prior=BasisPrior.DEVICE, p=0.5):
    """Optimal success of every extraction stage, averaged over the prefixes it conditions on."""
    scheme = hybrid.encoding_scheme(scheme) if isinstance(scheme, str) else scheme
    prior = BasisPrior(prior)
    ensemble = _block_ensemble(scheme, p, prior)
    stages = scheme.value_bits if prior == BasisPrior.FULL else scheme.bits_per_block
    rows = []
    for stage in range(stages):
        prefix_mass = {}
        for bits, _, weight in ensemble:
            prefix_mass[bits[:stage]] = prefix_mass.get(bits[:stage], 0.0) + weight
        total = sum(prefix_mass.values())
        success = sum(mass * stage_measurement(scheme.kind, stage, prefix, p, prior).success
                      for prefix, mass in prefix_mass.items()) / total
        rows.append({'stage': stage, 'bit': 'value' if stage < scheme.value_bits else 'basis',
                     'success': success})
    return rows


# ---- multi-copy extraction ----

def multi_copy_extract(copies, rng):
    """(value bit, basis bit) of a BB84 state from K >= 2 copies.

    Copies are measured in Z until two outcomes disagree; the next unused copy
    is then measured in X. A disagreement on the last copy leaves the value
    bit to a fair coin.
    """
    copies = list(copies)
    if len(copies) < 2:
        raise ValueError(f"multi-copy extraction needs at least 2 copies, got {len(copies)}")
    if any(copy.dim != 2 for copy in copies):
        raise DimensionMismatch("multi-copy extraction takes qubits")
    z_basis, x_basis = qstate.bb84_basis(0), qstate.bb84_basis(1)
    first, _ = qstate.measure(copies[0], z_basis, rng)
    for index in range(1, len(copies)):
        outcome, _ = qstate.measure(copies[index], z_basis, rng)
        if outcome != first:
            if index + 1 < len(copies):
                value, _ = qstate.measure(copies[index + 1], x_basis, rng)
                return value, 1
            return int(rng.integers(0, 2)), 1
    return first, 0


def multi_copy_extract_batch(amplitudes, copies, rng):
    """Vectorized ``multi_copy_extract`` over the rows of an (N, 2) amplitude array."""
    if copies < 2:
        raise ValueError(f"multi-copy extraction needs at least 2 copies, got {copies}")
    amplitudes = np.atleast_2d(amplitudes)
    count = amplitudes.shape[0]
    z_outcomes = qstate.measure_batch(np.repeat(amplitudes, copies, axis=0), qstate.bb84_basis(0), rng)
    z_outcomes = z_outcomes.reshape(count, copies)
    disagree = z_outcomes != z_outcomes[:, :1]
    switched = disagree.any(axis=1)
    position = np.argmax(disagree, axis=1)
    x_outcomes = qstate.measure_batch(amplitudes, qstate.bb84_basis(1), rng)
    coins = rng.integers(0, 2, size=count)
    values = np.where(~switched, z_outcomes[:, 0], np.where(position < copies - 1, x_outcomes, coins))
    return values.astype(np.uint8), switched.astype(np.uint8)


def multi_copy_responses(amplitudes, copies, rng):
    """Full BB84 responses (N, blocks x 2) from K copies of each (N, blocks, 2) state."""
    count, blocks, _ = amplitudes.shape
    values, bases = multi_copy_extract_batch(amplitudes.reshape(count * blocks, 2), copies, rng)
    return np.stack([values, bases], axis=1).reshape(count, blocks * 2)


def intercept_resend(state, rng):
    """Measure in a uniformly random BB84 basis and resend the collapsed state."""
    if state.dim != 2:
        raise DimensionMismatch("intercept-resend takes single qubits")
    basis = int(rng.integers(0, 2))
    outcome, collapsed = qstate.measure(state, qstate.bb84_basis(basis), rng)
    return collapsed, outcome, basis


# ---- logistic regression ----

# keras seeds are process-global; fits are serialized so a seed pins a model
_FIT_LOCK = threading.Lock()
tf.config.experimental.enable_op_determinism()
# LRAttack2021 validates on 1% of its set; below 100 such CRPs it never stops early
EARLY_STOP_MIN_SIZE = 10000


@dataclass(frozen=True)
class LrConfig:
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 256
    restarts: int = 5
    validation_fraction: float = 0.1
    stop_validation_accuracy: float = 0.995
    seed: int = 0

    @classmethod
    def from_settings(cls, **overrides):
        values = dict(settings.HLPUF_LAB['LR'])
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True, eq=False)
class LrModel:
    weights: np.ndarray
    config: LrConfig
    validation_accuracy: float = 0.5
    diverged: bool = False
    epochs_run: int = 0
    restart: int = 0

    @property
    def k(self):
        return self.weights.shape[0]

    @property
    def n(self):
        return self.weights.shape[1] - 1

    @functools.cached_property
    def simulation(self):
        return cpuf.delay_simulation(self.weights)

    @classmethod
    def untrained(cls, n, k, config):
        """All-zero weights; predicts 0 everywhere."""
        return cls(np.zeros((k, n + 1)), config)


def _fit(training, target, k, config, seed):
    """One LRAttack2021 run; returns (weights, epochs run, final loss)."""
    stop = config.stop_validation_accuracy if len(training) >= EARLY_STOP_MIN_SIZE else np.inf
    crps = ChallengeResponseSet(cpuf.to_inputs(training.challenges),
                                (1.0 - 2.0 * training.responses[:, target]).astype(np.float64))
    with _FIT_LOCK:
        tf.keras.utils.set_random_seed(seed)
        attack = LRAttack2021(crps, seed=seed, k=k, bs=config.batch_size, lr=config.learning_rate,
                              epochs=config.epochs, stop_validation_accuracy=stop)
        learned = attack.fit(verbose=False)
        losses = attack.history.get('loss') or [np.nan]
    return np.array(learned.weight_array, dtype=float), len(losses), float(losses[-1])


def lr_train(db, target, k, config):
    """Fit a k-XOR arbiter model to one response bit of ``db``.

    Each restart is a mini-batch Adam run of pypuf's LRAttack2021 seeded from
    ``config.seed``; the restart with the best accuracy on a held-out share of
    ``db`` wins. Fewer than two training entries give the untrained model.
    """
    if not len(db):
        raise ValueError("cannot train on an empty database")
    if not 0 <= target < db.width:
        raise DimensionMismatch(f"target bit {target} outside response width {db.width}")
    if len(db) >= 10:
        training, validation = db.split(config.validation_fraction, derive_rng(config.seed, 0))
    else:
        training = validation = db
    if len(training) < 2:
        logger.debug("LR target=%d: %d entries, keeping the untrained model", target, len(training))
        return LrModel.untrained(db.n, k, config)
    best = None
    for restart in range(config.restarts):
        weights, epochs, loss = _fit(training, target, k, config, derive_seed(config.seed, 1, restart))
        diverged = not (np.isfinite(weights).all() and np.isfinite(loss))
        if diverged:
            logger.warning("LR restart %d diverged after %d epochs", restart, epochs)
            weights = np.zeros_like(weights)
        candidate = LrModel(weights, config, 0.0, diverged, epochs, restart)
        accuracy = lr_accuracy(candidate, validation, target)
        if best is None or accuracy > best.validation_accuracy:
            best = LrModel(weights, config, accuracy, diverged, epochs, restart)
        if best.validation_accuracy >= config.stop_validation_accuracy:
            break
    logger.debug("LR target=%d k=%d q=%d: validation %.4f (restart %d)",
                 target, k, len(db), best.validation_accuracy, best.restart)
    return best


def lr_predict(model, challenges):
    challenges = np.atleast_2d(challenges)
    if not model.weights.any():
        return np.zeros(challenges.shape[0], dtype=np.uint8)
    return cpuf.to_bits(model.simulation.eval(cpuf.to_inputs(challenges)))


def lr_accuracy(model, db, target=0):
    return float(np.mean(lr_predict(model, db.challenges) == db.responses[:, target]))


# ---- attack curves ----

@dataclass(frozen=True)
class AttackResult:
    seed: int
    q: int
    scheme: str
    k: int
    n: int
    m: int
    mode: str
    accuracy: float
    bit_rate: float
    epsilon_measured: float
    runtime_ms: int = 0

    def as_row(self):
        return {column: getattr(self, column) for column in ATTACK_COLUMNS}


def append_attack_rows(path, rows, *, digest, version):
    frame = pd.DataFrame([row.as_row() for row in rows], columns=ATTACK_COLUMNS)
    return append_csv(path, frame, digest=digest, version=version)


def run_attack(mode, q, seed, *, n=32, k=2, scheme=Scheme.BB84, p=0.5, cpuf_kind='xor_arbiter',
               test_size=10000, copies=10, lr_config=None, timing=False):
    """One point of an attack curve: LR accuracy on the first value bit after q training CRPs.

    The device is one encoded block (value PUFs and basis PUFs) built from ``seed``,
    so every mode and every q of a seed attacks the same device.
    """
    started = time.perf_counter()
    mode = CurveMode(mode)
    encoding = hybrid.encoding_scheme(scheme)
    lr_config = lr_config or LrConfig.from_settings()
    lr_config = LrConfig(**{**asdict(lr_config), 'seed': derive_seed(seed, 4, q)})
    model = cpuf.make_model(cpuf_kind, n, encoding.bits_per_block, derive_seed(seed, 0), k=k, p=p)
    test = CrpDatabase.from_model(model, test_size, derive_rng(seed, 1))
    train = CrpDatabase.from_model(model, q, derive_rng(seed, 2, q))
    labels = train.responses
    if q and mode == CurveMode.HLPUF_WEAK:
        qdb = QuantumCrpDatabase.from_responses(train.challenges, train.responses, encoding)
        labels = split_attack_blocks(qdb, derive_rng(seed, 3, q), p=p).responses
    elif q and mode == CurveMode.HPUF_ADAPTIVE:
        if encoding.kind != Scheme.BB84:
            raise EncodingError("multi-copy extraction is defined for BB84 only")
        amplitudes = hybrid.encode_amplitudes(train.responses, encoding)
        labels = multi_copy_responses(amplitudes, copies, derive_rng(seed, 3, q))
    if q:
        learned = lr_train(CrpDatabase(train.challenges, labels), 0, k, lr_config)
        bit_rate = float(np.mean(labels[:, 0] == train.responses[:, 0]))
        epsilon = float(1.0 - np.mean(np.all(labels == train.responses, axis=1)))
    else:
        learned = LrModel.untrained(n, k, lr_config)
        bit_rate, epsilon = 1.0, 0.0
    accuracy = lr_accuracy(learned, test, 0)
    runtime = int(round((time.perf_counter() - started) * 1000)) if timing else 0
    logger.info("attack %s q=%d seed=%d: accuracy %.4f bit_rate %.4f", mode, q, seed, accuracy, bit_rate)
    return AttackResult(seed=seed, q=q, scheme=str(encoding.kind), k=k, n=n, m=encoding.qubits_per_block,
                        mode=str(mode), accuracy=accuracy, bit_rate=bit_rate,
                        epsilon_measured=epsilon, runtime_ms=runtime)


# ---- unforgeability game ----

class GameOracle:
    """Everything an adversary may ask of the device during the learning phase.

    The budget counts challenges: a multi-copy query of one challenge costs one
    query whatever its copy count, while ``bottoms`` counts every refused copy.
    """

    def __init__(self, kind, device, budget, rng):
        self.kind = DeviceKind(kind)
        self.device = device
        self.budget = budget
        self.rng = rng
        self.used = 0
        self.bottoms = 0
        self.seen = set()

    @property
    def model(self):
        if self.kind == DeviceKind.CPUF:
            return self.device
        if self.kind == DeviceKind.HPUF:
            return self.device.cpuf
        return self.device.hpuf.cpuf

    @property
    def scheme(self):
        return None if self.kind == DeviceKind.CPUF else self.device.scheme

    @property
    def n(self):
        return self.model.n

    @property
    def out_bits(self):
        return self.model.out_bits

    @property
    def verified_bits(self):
        """Response bits the forgery is judged on: all of a CPUF, the second half of a hybrid device."""
        if self.kind == DeviceKind.CPUF:
            return range(self.out_bits)
        return range(self.out_bits // 2, self.out_bits)

    @property
    def remaining(self):
        return self.budget - self.used

    def _charge(self, count):
        if self.used + count > self.budget:
            raise QueryBudgetExceeded(f"{self.used} + {count} queries exceed the budget of {self.budget}")
        self.used += count

    def _remember(self, challenges):
        self.seen.update(bytes(row) for row in np.asarray(challenges, dtype=np.uint8))

    def random_crps(self, count):
        """Weak learning: uniform challenges with one copy of each response."""
        self._charge(count)
        challenges = cpuf.random_challenges(self.n, count, self.rng)
        self._remember(challenges)
        responses = cpuf.eval_batch(self.model, challenges)
        if self.kind == DeviceKind.CPUF:
            return CrpDatabase(challenges, responses)
        return QuantumCrpDatabase.from_responses(challenges, responses, self.scheme)

    def query_copies(self, challenges, copies=1):
        """Adaptive direct queries, ``copies`` per challenge. A locked device answers BOTTOM (None here)."""
        challenges = np.atleast_2d(np.asarray(challenges, dtype=np.uint8))
        self._charge(len(challenges))
        self._remember(challenges)
        if self.kind == DeviceKind.HLPUF:
            self.bottoms += len(challenges) * copies
            return None
        responses = cpuf.eval_batch(self.model, challenges)
        if self.kind == DeviceKind.CPUF:
            return CrpDatabase(challenges, responses)
        return hybrid.encode_amplitudes(responses, self.scheme)

    def observe_server(self, count):
        """First halves of honest server messages seen on the channel, one copy each."""
        if self.kind == DeviceKind.CPUF:
            raise EncodingError("a classical PUF has no first half")
        self._charge(count)
        challenges = cpuf.random_challenges(self.n, count, self.rng)
        self._remember(challenges)
        responses = cpuf.eval_batch(self.model, challenges)
        return [(x, hybrid.server_encode((x, y), HalfRole.FIRST, self.scheme)[1].states)
                for x, y in zip(challenges, responses)]

    def lock(self, x, incoming):
        if self.kind != DeviceKind.HLPUF:
            raise EncodingError("only a locked device takes a lock query")
        self._charge(1)
        self._remember([x])
        released = hybrid.lock_query(self.device, x, incoming, self.rng)
        if hybrid.is_bottom(released):
            self.bottoms += 1
        return released

    def fresh_challenge(self):
        if len(self.seen) >= 2 ** self.n:
            raise DatabaseExhausted(f"all {2 ** self.n} challenges of length {self.n} were queried")
        while True:
            x = cpuf.random_challenges(self.n, 1, self.rng)[0]
            if bytes(x) not in self.seen:
                return x


class ForgingStrategy:
    """Learns from a GameOracle, then answers one unseen challenge with a full response guess."""

    name = 'strategy'

    def __init__(self, rng, lr_config=None, k=None):
        self.rng = rng
        self.lr_config = lr_config or LrConfig.from_settings()
        self.k = k

    def learn(self, oracle):
        self.out_bits = oracle.out_bits

    def forge(self, x):
        raise NotImplementedError


class ExactCopy(ForgingStrategy):
    name = 'exact_copy'

    def learn(self, oracle):
        super().learn(oracle)
        self.model = oracle.model

    def forge(self, x):
        return cpuf.eval(self.model, x)


class UniformGuess(ForgingStrategy):
    name = 'uniform_guess'

    def forge(self, x):
        return self.rng.integers(0, 2, size=self.out_bits, dtype=np.uint8)


class _ModelingStrategy(ForgingStrategy):
    """Predicts each verified bit with its own LR model; other bits are guessed uniformly."""

    def learn(self, oracle):
        super().learn(oracle)
        self.models = {}
        self.k = self.k or oracle.model.k
        self.n = oracle.n
        self.bits = oracle.verified_bits

    def _fit(self, db, bits):
        """One model per bit; column j of ``db`` holds response bit ``bits[j]``."""
        if not len(db):
            return
        config = LrConfig(**{**asdict(self.lr_config), 'seed': spawn_seed(self.rng)})
        for column, bit in enumerate(bits):
            bit_config = LrConfig(**{**asdict(config), 'seed': derive_seed(config.seed, bit)})
            self.models[bit] = lr_train(db, column, self.k, bit_config)

    def _fit_verified(self, challenges, responses):
        bits = list(self.bits)
        self._fit(CrpDatabase(challenges, np.asarray(responses)[:, bits]), bits)

    def forge(self, x):
        guess = self.rng.integers(0, 2, size=self.out_bits, dtype=np.uint8)
        for bit, model in self.models.items():
            guess[bit] = lr_predict(model, x)[0]
        return guess


class MeasureThenForge(_ModelingStrategy):
    """Weak: split-attack extraction of q random CRPs, then LR per verified bit."""
    name = 'measure_then_forge'

    def learn(self, oracle):
        super().learn(oracle)
        db = oracle.random_crps(oracle.remaining)
        if isinstance(db, QuantumCrpDatabase):
            db = split_attack_blocks(db, self.rng, p=oracle.model.p)
        self._fit_verified(db.challenges, db.responses)


class MultiCopyForge(_ModelingStrategy):
    """Adaptive: K direct copies of each of q challenges, multi-copy extraction, then LR per verified bit."""
    name = 'multi_copy_forge'

    def __init__(self, rng, lr_config=None, k=None, copies=10):
        super().__init__(rng, lr_config, k)
        self.copies = copies

    def learn(self, oracle):
        super().learn(oracle)
        challenges = cpuf.random_challenges(oracle.n, oracle.remaining, self.rng)
        answer = oracle.query_copies(challenges, self.copies)
        if answer is None:
            logger.debug("multi-copy queries refused by the lock")
            return
        if isinstance(answer, CrpDatabase):
            self._fit_verified(answer.challenges, answer.responses)
            return
        if oracle.scheme.kind != Scheme.BB84:
            raise EncodingError("multi-copy extraction is defined for BB84 only")
        self._fit_verified(challenges, multi_copy_responses(answer, self.copies, self.rng))


class ReplayServerChallenges(_ModelingStrategy):
    """Adaptive against a lock: replay observed server first halves, extract the released second halves."""
    name = 'replay_server_challenges'

    def learn(self, oracle):
        super().learn(oracle)
        observed = oracle.observe_server(oracle.remaining // 2)
        challenges, amplitudes = [], []
        for x, first_half in observed:
            released = oracle.lock(x, first_half)
            if hybrid.is_bottom(released):
                continue
            challenges.append(x)
            amplitudes.append([state.amplitudes for state in released.states])
        if not challenges:
            return
        qdb = QuantumCrpDatabase(np.array(challenges), np.array(amplitudes), oracle.scheme)
        self._fit(split_attack_blocks(qdb, self.rng, p=oracle.model.p), self.bits)


class DirectQuery(_ModelingStrategy):
    """Adaptive negative control: asks the lock with no key, which always answers BOTTOM."""
    name = 'direct_query'

    def learn(self, oracle):
        super().learn(oracle)
        for x in cpuf.random_challenges(oracle.n, oracle.remaining, self.rng):
            oracle.lock(x, ())


STRATEGIES = {strategy.name: strategy for strategy in (
    ExactCopy, UniformGuess, MeasureThenForge, MultiCopyForge, ReplayServerChallenges, DirectQuery)}


def strategy_factory(name, **options):
    """Constructor of the named strategy with ``options`` bound; called with ``rng=``."""
    try:
        strategy = STRATEGIES[name]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; expected one of {sorted(STRATEGIES)}") from None
    return functools.partial(strategy, **options)


@dataclass(frozen=True)
class GameReport:
    target: str
    strategy: str
    q: int
    trials: int
    wins: int
    bottoms: int = 0
    outcomes: tuple = field(default=(), repr=False)

    @property
    def win_rate(self):
        return self.wins / self.trials if self.trials else 0.0

    @property
    def stderr(self):
        rate = self.win_rate
        return float(np.sqrt(rate * (1.0 - rate) / self.trials)) if self.trials else 0.0


def verify_forgery(kind, model, scheme, x, guess, rng):
    """Bit equality for a CPUF; measurement verification of the second half otherwise.

    The second half is what the server checks in a round, for the locked and
    the unlocked device alike, so both are judged on the same bits.
    """
    truth = cpuf.eval(model, x)
    guess = np.asarray(guess, dtype=np.uint8)
    if guess.shape != truth.shape:
        return False
    if DeviceKind(kind) == DeviceKind.CPUF:
        return bool(np.array_equal(guess, truth))
    _, expected = hybrid.server_encode((x, truth), HalfRole.SECOND, scheme)
    _, forged = hybrid.server_encode((x, guess), HalfRole.SECOND, scheme)
    return hybrid.server_verify(expected, forged.states, rng)


def _build_target(kind, spec, seed):
    kind = DeviceKind(kind)
    if kind == DeviceKind.CPUF:
        return spec.build_cpuf(seed)
    if kind == DeviceKind.HPUF:
        return spec.build(seed)
    return spec.build_locked(seed)


def run_unforgeability_game(target, strategy, q, trials, rng, spec=None, threads=1, **strategy_options):
    """Empirical win rate of a forging strategy over independent trials.

    ``strategy`` is a name from STRATEGIES (built with ``strategy_options``) or
    a callable taking ``rng=``. Each trial gets a fresh device and its own
    stream derived from (master seed, trial).
    """
    if q < 1:
        raise ValueError("the learning phase needs q >= 1")
    factory = strategy_factory(strategy, **strategy_options) if isinstance(strategy, str) else strategy
    target = DeviceKind(target)
    spec = spec or hybrid.DeviceSpec()
    master = spawn_seed(rng)

    def play(trial):
        trial_rng = derive_rng(master, trial)
        device = _build_target(target, spec, spawn_seed(trial_rng))
        oracle = GameOracle(target, device, q, trial_rng)
        player = factory(rng=trial_rng)
        player.learn(oracle)
        x = oracle.fresh_challenge()
        won = verify_forgery(target, oracle.model, oracle.scheme, x, player.forge(x), trial_rng)
        return won, oracle.bottoms, player.name

    results = ordered_map(play, range(trials), threads)
    wins = sum(1 for won, _, _ in results if won)
    name = results[0][2] if results else str(strategy)
    report = GameReport(target=str(target), strategy=name, q=q, trials=trials, wins=wins,
                        bottoms=sum(bottoms for _, bottoms, _ in results),
                        outcomes=tuple(won for won, _, _ in results))
    logger.info("game %s vs %s q=%d: %d/%d wins", name, target, q, wins, trials)
    return report
