"""Exact quantum toolkit for dimensions 2, 4 and 8.

Pure states, density matrices, Born-rule measurement, trace distance,
two-hypothesis Helstrom discrimination and the mutually unbiased bases
used by the encoders. Everything is dense double precision; values are
immutable once built and randomness only enters through the caller's
``numpy.random.Generator``.
"""
import functools
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, StateError

logger = logging.getLogger(__name__)

TOL = 1e-9
SUPPORTED_DIMS = (2, 4, 8)

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)     # O: X eigenbasis
_Y = np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2)   # I: Y eigenbasis


def _frozen(array):
    array.setflags(write=False)
    return array


def _check_dim(dim):
    if dim not in SUPPORTED_DIMS:
        raise StateError(f"dimension {dim} not in {SUPPORTED_DIMS}")


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        _check_dim(amps.size)
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > TOL:
            raise StateError(f"squared norm {norm!r} != 1")
        object.__setattr__(self, 'amplitudes', _frozen(amps))

    @classmethod
    def _trusted(cls, amplitudes):
        # columns of validated unitaries; skips re-validation on hot paths
        state = object.__new__(cls)
        object.__setattr__(state, 'amplitudes', amplitudes)
        return state

    @property
    def dim(self):
        return self.amplitudes.size

    def overlap(self, other):
        return np.vdot(self.amplitudes, other.amplitudes)

    def same_ray(self, other, tol=TOL):
        """Equal up to global phase."""
        return self.dim == other.dim and abs(abs(self.overlap(other)) ** 2 - 1.0) <= tol

    def __repr__(self):
        return f"PureState({np.round(self.amplitudes, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        rho = np.array(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise StateError(f"density matrix must be square, got shape {rho.shape}")
        _check_dim(rho.shape[0])
        if not np.allclose(rho, rho.conj().T, atol=TOL, rtol=0):
            raise StateError("density matrix is not Hermitian")
        trace = np.trace(rho).real
        if abs(trace - 1.0) > TOL:
            raise StateError(f"trace {trace!r} != 1")
        smallest = np.linalg.eigvalsh(rho).min()
        if smallest < -TOL:
            raise StateError(f"negative eigenvalue {smallest!r}")
        object.__setattr__(self, 'entries', _frozen(rho))

    @property
    def dim(self):
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class MubFamily:
    """Bases as unitaries whose columns are the basis vectors, in a fixed order."""
    dim: int
    bases: tuple

    def __len__(self):
        return len(self.bases)

    def __getitem__(self, index):
        return self.bases[index]

    def state(self, basis, index):
        return PureState._trusted(self.bases[basis][:, index])


# ---- construction ----

_BB84_BASES = (_frozen(np.eye(2, dtype=complex)), _frozen(_H.copy()))


def bb84_basis(basis):
    """Z (0) or X (1) basis, columns ordered by encoded bit value."""
    if basis not in (0, 1):
        raise StateError(f"BB84 basis must be 0 or 1, got {basis!r}")
    return _BB84_BASES[basis]


def bb84_state(bit, basis):
    """Basis 0: |0>, |1>; basis 1: |+>, |->."""
    if bit not in (0, 1):
        raise StateError(f"BB84 bit must be 0 or 1, got {bit!r}")
    return PureState._trusted(bb84_basis(basis)[:, bit])


def pure(state):
    return DensityMatrix(np.outer(state.amplitudes, state.amplitudes.conj()))


def mixture(states):
    """Density matrix of an ensemble given as (PureState, probability) pairs."""
    states = list(states)
    if not states:
        raise StateError("empty ensemble")
    weights = np.array([weight for _, weight in states], dtype=float)
    if (weights < 0).any() or abs(weights.sum() - 1.0) > TOL:
        raise StateError(f"probabilities must be non-negative and sum to 1, got {weights.tolist()}")
    dims = {state.dim for state, _ in states}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed dimensions {sorted(dims)}")
    amps = np.array([state.amplitudes for state, _ in states])
    rho = np.einsum('e,ei,ej->ij', weights, amps, amps.conj())
    return DensityMatrix(rho)


# ---- distances and discrimination ----

def _same_dim(a, b):
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions differ: {a.dim} vs {b.dim}")


def trace_norm(hermitian):
    return float(np.abs(np.linalg.eigvalsh(hermitian)).sum())


def trace_distance(a, b):
    _same_dim(a, b)
    return 0.5 * trace_norm(a.entries - b.entries)


def helstrom_success(a, b, prior_a=0.5):
    """Best achievable probability of naming the right hypothesis."""
    _same_dim(a, b)
    if not 0.0 <= prior_a <= 1.0:
        raise StateError(f"prior {prior_a!r} outside [0, 1]")
    gamma = prior_a * a.entries - (1.0 - prior_a) * b.entries
    return 0.5 * (1.0 + trace_norm(gamma))


@dataclass(frozen=True, eq=False)
class HelstromMeasurement:
    """Projective measurement onto the eigenbasis of prior_a*a - (1-prior_a)*b.

    ``labels[i]`` is 0 when column i of ``basis`` votes for hypothesis a,
    1 for b. Zero eigenvalues vote for a.
    """
    basis: np.ndarray
    labels: np.ndarray
    success: float

    @property
    def projectors(self):
        projectors = []
        for label in (0, 1):
            columns = self.basis[:, self.labels == label]
            projectors.append(columns @ columns.conj().T)
        return tuple(projectors)

    def decide(self, state, rng):
        outcome, _ = measure(state, self.basis, rng)
        return int(self.labels[outcome])

    def decide_batch(self, amplitudes, rng):
        return self.labels[measure_batch(amplitudes, self.basis, rng)]


def helstrom_measurement(a, b, prior_a=0.5):
    _same_dim(a, b)
    if not 0.0 <= prior_a <= 1.0:
        raise StateError(f"prior {prior_a!r} outside [0, 1]")
    gamma = prior_a * a.entries - (1.0 - prior_a) * b.entries
    eigenvalues, eigenvectors = np.linalg.eigh(gamma)
    labels = np.where(eigenvalues >= -TOL, 0, 1).astype(np.uint8)
    success = 0.5 * (1.0 + float(np.abs(eigenvalues).sum()))
    return HelstromMeasurement(_frozen(eigenvectors), _frozen(labels), success)


# ---- measurement ----

def _check_orthonormal(basis, dim):
    basis = np.asarray(basis, dtype=complex)
    if basis.shape != (dim, dim):
        raise StateError(f"basis shape {basis.shape} does not span dimension {dim}")
    if not np.allclose(basis.conj().T @ basis, np.eye(dim), atol=1e-8, rtol=0):
        raise StateError("basis is not orthonormal")
    return basis


def measure(state, basis, rng):
    """Born-rule measurement; returns the outcome index and the collapsed state."""
    basis = _check_orthonormal(basis, state.dim)
    probabilities = np.abs(basis.conj().T @ state.amplitudes) ** 2
    probabilities /= probabilities.sum()
    outcome = int(rng.choice(state.dim, p=probabilities))
    return outcome, PureState._trusted(_frozen(basis[:, outcome].copy()))


def measure_batch(amplitudes, basis, rng):
    """Vectorized ``measure`` over the rows of an N x d amplitude array (outcomes only)."""
    amplitudes = np.atleast_2d(np.asarray(amplitudes, dtype=complex))
    basis = _check_orthonormal(basis, amplitudes.shape[1])
    probabilities = np.abs(amplitudes @ basis.conj()) ** 2
    cumulative = np.cumsum(probabilities, axis=1)
    cumulative /= cumulative[:, -1:]
    draws = rng.random(amplitudes.shape[0])
    outcomes = (draws[:, None] >= cumulative).sum(axis=1)
    return np.minimum(outcomes, amplitudes.shape[1] - 1)


# ---- mutually unbiased bases ----

def _kron(*factors):
    return functools.reduce(np.kron, factors)


@functools.cache
def mub8_family():
    """The nine 8-dimensional MUBs: identity, three-qubit tensor bases and diagonal-phase twists.

    Order is fixed (basis 0 is computational) so indices are stable across runs.
    """
    u = np.diag([1, 1, 1, 1, 1, -1, -1, 1]).astype(complex)
    v = np.diag([1, 1, 1, -1, 1, -1, 1, 1]).astype(complex)
    w = np.diag([1, 1, 1, -1, 1, 1, -1, 1]).astype(complex)
    bases = (
        np.eye(8, dtype=complex),
        _kron(_H, _H, _H),
        u @ _kron(_H, _H, _Y),
        v @ _kron(_H, _Y, _H),
        w @ _kron(_H, _Y, _Y),
        w @ _kron(_Y, _H, _H),
        v @ _kron(_Y, _H, _Y),
        u @ _kron(_Y, _Y, _H),
        _kron(_Y, _Y, _Y),
    )
    return MubFamily(8, tuple(_frozen(basis) for basis in bases))


@functools.cache
def mub4_family():
    """The five 4-dimensional MUBs, built in the same tensor/diagonal-phase pattern."""
    cz = np.diag([1, 1, 1, -1]).astype(complex)
    bases = (
        np.eye(4, dtype=complex),
        _kron(_H, _H),
        _kron(_Y, _Y),
        cz @ _kron(_H, _Y),
        cz @ _kron(_Y, _H),
    )
    return MubFamily(4, tuple(_frozen(basis) for basis in bases))


def check_mub(family, tol=TOL):
    """Every violated unitarity or unbiasedness condition, as readable strings."""
    violations = []
    dim = family.dim
    for index, basis in enumerate(family.bases):
        if not np.allclose(basis.conj().T @ basis, np.eye(dim), atol=tol, rtol=0):
            violations.append(f"basis {index} is not unitary")
    target = 1.0 / dim
    for first in range(len(family)):
        for second in range(first + 1, len(family)):
            overlaps = np.abs(family[first].conj().T @ family[second]) ** 2
            worst = float(np.abs(overlaps - target).max())
            if worst > tol:
                violations.append(f"bases {first} and {second} are biased (max deviation {worst:.3e})")
    if violations:
        logger.warning("MUB family of dimension %d has %d violations", dim, len(violations))
    return violations
