"""Closed-form security bounds and the Monte Carlo estimators checked against them."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import entr, logsumexp
from scipy.stats import binom

from . import hybrid, qstate
from .adversary import QuantumCrpDatabase, split_attack_extract
from .choices import Scheme
from .utils.pool import ordered_map
from .utils.seeding import derive_rng, spawn_seed

logger = logging.getLogger(__name__)

BOUND_COLUMNS = ['curve', 'p', 'm', 'q', 'eps', 'k', 'zeta', 'delta_r', 'value', 'raw']


def _check_unit(name, value, low=0.0, high=1.0):
    if not low <= value <= high:
        raise ValueError(f"{name}={value!r} outside [{low}, {high}]")


@dataclass(frozen=True)
class BoundInputs:
    p: float = 0.5
    m: int = 1
    q: int = 1
    eps: float = 0.0
    k: int = 0
    zeta: float = 0.0
    delta_r: float = None

    def __post_init__(self):
        _check_unit('p', self.p, 0.5, 1.0)
        _check_unit('eps', self.eps)
        _check_unit('zeta', self.zeta, 0.0, 0.5)
        if self.m < 1 or self.q < 0 or self.k < 0:
            raise ValueError(f"need m >= 1, q >= 0, k >= 0 (got m={self.m}, q={self.q}, k={self.k})")
        if self.delta_r is None:
            object.__setattr__(self, 'delta_r', self.p - 0.5)
        _check_unit('delta_r', self.delta_r, 0.0, 0.5)


def binary_entropy(x):
    """h(x) in bits, with h(0) = h(1) = 0."""
    x = np.asarray(x, dtype=float)
    value = (entr(x) + entr(1.0 - x)) / math.log(2)
    return float(value) if value.ndim == 0 else value


def p_guess_bound(p, clamp=True):
    """Per-bit extraction bound p(1 + sqrt(p^2 + (1-p)^2)) of a p-random CPUF."""
    _check_unit('p', p, 0.5, 1.0)
    raw = p * (1.0 + math.sqrt(p ** 2 + (1.0 - p) ** 2))
    return min(1.0, raw) if clamp else raw


def extraction_threshold(q, eps):
    """ceil((1 - eps) q), the fewest fully extracted responses that count as a success."""
    return max(0, math.ceil((1.0 - eps) * q - 1e-9))


def binomial_tail(q, threshold, success):
    """P(Binomial(q, success) >= threshold), summed in log space."""
    if threshold <= 0:
        return 1.0
    if threshold > q:
        return 0.0
    ks = np.arange(threshold, q + 1)
    with np.errstate(divide='ignore'):
        log_terms = binom.logpmf(ks, q, success)
    return float(np.clip(np.exp(logsumexp(log_terms)), 0.0, 1.0))


def p_extract_bound(q, eps, m, p_guess):
    """Probability that at least (1 - eps) q of q responses (2m bits each) are extracted exactly."""
    _check_unit('eps', eps)
    _check_unit('p_guess', p_guess)
    if q < 0 or m < 1:
        raise ValueError(f"need q >= 0 and m >= 1 (got q={q}, m={m})")
    return binomial_tail(q, extraction_threshold(q, eps), p_guess ** (2 * m))


def forge_bound(p_extract, p_classical):
    _check_unit('p_extract', p_extract)
    _check_unit('p_classical', p_classical)
    return p_extract * p_classical


def reuse_bound(k, m, eps1, clamp=True):
    """Adversary advantage after a challenge has been reused k times: eps1 + k 2^-m."""
    if k < 0:
        raise ValueError(f"reuse count k={k} must be >= 0")
    raw = eps1 + k * 2.0 ** -m
    return min(1.0, raw) if clamp else raw


def minentropy_bound(m, zeta, delta_r):
    """Eve's min-entropy on a verified m-qubit half: m (1 - h(zeta) - log2(1 + 2 delta_r))."""
    _check_unit('zeta', zeta, 0.0, 0.5)
    _check_unit('delta_r', delta_r, 0.0, 0.5)
    return m * (1.0 - binary_entropy(zeta) - math.log2(1.0 + 2.0 * delta_r))


# ---- curves ----

def _row(curve, inputs, value, raw=None, **overrides):
    row = {'curve': curve, 'p': inputs.p, 'm': inputs.m, 'q': inputs.q, 'eps': inputs.eps,
           'k': inputs.k, 'zeta': inputs.zeta, 'delta_r': inputs.delta_r,
           'value': value, 'raw': value if raw is None else raw}
    row.update(overrides)
    return row


def pextract_curve(eps_list, q_range, m, p):
    """p_extract against q for every eps, at the p_guess of a p-random CPUF."""
    p_guess = p_guess_bound(p)
    rows = []
    for eps in eps_list:
        for q in q_range:
            inputs = BoundInputs(p=p, m=m, q=q, eps=eps)
            rows.append(_row('p_extract', inputs, p_extract_bound(q, eps, m, p_guess)))
    return pd.DataFrame(rows, columns=BOUND_COLUMNS)


def bounds_table(*, p_grid, m_grid, q_grid, eps_grid, k_grid, zeta_grid, p_classical=1.0):
    """Every closed-form bound over the given grids, in one long table."""
    rows = []
    for p in p_grid:
        inputs = BoundInputs(p=p)
        rows.append(_row('p_guess', inputs, p_guess_bound(p), p_guess_bound(p, clamp=False)))
    frames = [pd.DataFrame(rows, columns=BOUND_COLUMNS)]
    for p in p_grid:
        for m in m_grid:
            curve = pextract_curve(eps_grid, q_grid, m, p)
            forge = curve.assign(curve='forge', value=[forge_bound(v, p_classical) for v in curve['value']])
            forge['raw'] = forge['value']
            frames.extend([curve, forge])
    rows = []
    for m in m_grid:
        for k in k_grid:
            inputs = BoundInputs(m=m, k=k)
            rows.append(_row('reuse', inputs, reuse_bound(k, m, 0.0), reuse_bound(k, m, 0.0, clamp=False)))
        for p in p_grid:
            for zeta in zeta_grid:
                inputs = BoundInputs(p=p, m=m, zeta=zeta)
                bound = minentropy_bound(m, zeta, inputs.delta_r)
                rows.append(_row('minentropy', inputs, max(0.0, bound), bound))
    frames.append(pd.DataFrame(rows, columns=BOUND_COLUMNS))
    return pd.concat(frames, ignore_index=True)


# ---- Monte Carlo ----

def _sample_bits(shape, p, rng):
    """Bits of an ideal p-random PUF: P(0) = p."""
    return (rng.random(shape) >= p).astype(np.uint8)


@dataclass(frozen=True)
class ExtractEstimate:
    q: int
    m: int
    trials: int
    per_bit_rate: float
    per_response_rate: float
    counts: np.ndarray = field(repr=False)

    def threshold_rate(self, eps):
        """Fraction of trials with at least ceil((1 - eps) q) responses fully extracted."""
        return float(np.mean(self.counts >= extraction_threshold(self.q, eps)))

    def threshold_stderr(self, eps):
        rate = self.threshold_rate(eps)
        return math.sqrt(rate * (1.0 - rate) / self.trials)

    def bound(self, eps):
        """p_extract_bound evaluated at the measured per-bit rate."""
        return p_extract_bound(self.q, eps, self.m, min(1.0, self.per_bit_rate))


def mc_extract_rate(scheme, m, p, q, trials, rng, threads=1):
    """Split-attack extraction of q random halves (2m bits each) per trial.

    Every bit is discriminated on its own copy with the true earlier bits of its
    block, the independent per-bit model the extraction bound assumes.
    """
    encoding = hybrid.encoding_scheme(scheme)
    blocks = encoding.blocks_for(2 * m)
    master = spawn_seed(rng)

    def trial(index):
        trial_rng = derive_rng(master, index)
        bits = _sample_bits((q, 2 * m), p, trial_rng)
        qdb = QuantumCrpDatabase.from_responses(np.zeros((q, 1), dtype=np.uint8), bits, encoding)
        truth = bits.reshape(q, blocks, encoding.bits_per_block)
        correct = np.zeros_like(truth, dtype=bool)
        for stage in range(encoding.bits_per_block):
            guessed = split_attack_extract(qdb, encoding, trial_rng, stage=stage,
                                           known=truth[:, :, :stage], p=p).responses
            correct[:, :, stage] = guessed == truth[:, :, stage]
        full = correct.reshape(q, -1).all(axis=1)
        return int(correct.sum()), int(full.sum())

    results = ordered_map(trial, range(trials), threads)
    bit_hits = sum(hits for hits, _ in results)
    counts = np.array([full for _, full in results])
    estimate = ExtractEstimate(q=q, m=m, trials=trials,
                               per_bit_rate=bit_hits / (trials * q * 2 * m) if q else 1.0,
                               per_response_rate=float(counts.sum()) / (trials * q) if q else 1.0,
                               counts=counts)
    logger.debug("extraction %s m=%d q=%d: per-bit %.4f", scheme, m, q, estimate.per_bit_rate)
    return estimate


@dataclass(frozen=True)
class EveGuessEstimate:
    m: int
    trials: int
    passed: int
    guess_rate: float
    zeta: float
    delta_r: float

    @property
    def bound(self):
        """2^-Hmin at the measured disturbance rate."""
        return 2.0 ** -max(0.0, minentropy_bound(self.m, min(self.zeta, 0.5), self.delta_r))

    @property
    def stderr(self):
        if not self.passed:
            return 0.0
        return math.sqrt(self.guess_rate * (1.0 - self.guess_rate) / self.passed)


def mc_eve_guess(m, p, trials, rng):
    """Intercept-resend Eve on an m-qubit BB84 half: full-half guess rate among verified rounds.

    zeta is the per-qubit disturbance rate she causes over all rounds.
    """
    bits = _sample_bits((trials, m, 2), p, rng)
    values, bases = bits[..., 0].reshape(-1), bits[..., 1].reshape(-1)
    amplitudes = hybrid.encode_amplitudes(bits.reshape(trials * m, 2), Scheme.BB84)[:, 0, :]
    eve_bases = rng.integers(0, 2, size=values.size).astype(np.uint8)
    eve_outcomes = np.zeros(values.size, dtype=np.uint8)
    resent = np.zeros_like(amplitudes)
    for basis in (0, 1):
        rows = eve_bases == basis
        unitary = qstate.bb84_basis(basis)
        eve_outcomes[rows] = qstate.measure_batch(amplitudes[rows], unitary, rng)
        resent[rows] = unitary[:, eve_outcomes[rows]].T
    checked = np.zeros(values.size, dtype=np.uint8)
    for basis in (0, 1):
        rows = bases == basis
        checked[rows] = qstate.measure_batch(resent[rows], qstate.bb84_basis(basis), rng)
    qubit_ok = (checked == values).reshape(trials, m)
    guess_ok = ((eve_outcomes == values) & (eve_bases == bases)).reshape(trials, m)
    passed = qubit_ok.all(axis=1)
    hits = (guess_ok.all(axis=1) & passed).sum()
    return EveGuessEstimate(m=m, trials=trials, passed=int(passed.sum()),
                            guess_rate=float(hits / passed.sum()) if passed.any() else 0.0,
                            zeta=float(1.0 - qubit_ok.mean()), delta_r=p - 0.5)


def mc_helstrom_rate(a, b, prior_a, samples, rng):
    """Empirical success of the Helstrom measurement on ensembles a and b.

    ``a`` and ``b`` are sequences of (PureState, probability). Returns
    (empirical rate, optimal success).
    """
    measurement = qstate.helstrom_measurement(qstate.mixture(a), qstate.mixture(b), prior_a)
    truth = (rng.random(samples) >= prior_a).astype(np.uint8)
    amplitudes = np.zeros((samples, a[0][0].dim), dtype=complex)
    for label, ensemble in enumerate((a, b)):
        rows = np.flatnonzero(truth == label)
        weights = np.array([weight for _, weight in ensemble], dtype=float)
        picks = rng.choice(len(ensemble), size=rows.size, p=weights / weights.sum())
        states = np.array([state.amplitudes for state, _ in ensemble])
        amplitudes[rows] = states[picks]
    decisions = measurement.decide_batch(amplitudes, rng)
    return float(np.mean(decisions == truth)), measurement.success
