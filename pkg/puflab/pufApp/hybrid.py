"""Hybrid PUF devices.

An HPUF evaluates its classical PUF once and encodes the 4m response bits
into quantum states, block by block: BB84 blocks carry (value, basis) on one
qubit, MUB-4 blocks carry 2 value + 2 basis bits on two qubits and MUB-8
blocks 3 value + 3 basis bits on three qubits. Within a block the value bits
come first, most significant bit first. The first half of the response is
the lock key of an HLPUF, the second half is what the lock releases.
"""
import functools
import logging
import threading
from dataclasses import dataclass, field

import numpy as np

from . import cpuf, qstate
from .choices import CpufKind, HalfRole, Scheme
from .exceptions import DimensionMismatch, EncodingError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncodingScheme:
    kind: str
    value_bits: int
    basis_bits: int
    family: qstate.MubFamily = field(repr=False, compare=False)

    @property
    def bits_per_block(self):
        return self.value_bits + self.basis_bits

    @property
    def qubits_per_block(self):
        return self.value_bits

    @property
    def dim(self):
        return 2 ** self.value_bits

    @property
    def basis_count(self):
        """Bases reachable by the encoder (the family may hold one more)."""
        return 2 ** self.basis_bits

    def blocks_for(self, bit_count):
        if bit_count % self.bits_per_block:
            raise EncodingError(f"{bit_count} bits do not split into {self.kind} blocks of {self.bits_per_block}")
        return bit_count // self.bits_per_block

    def check_out_bits(self, out_bits):
        if out_bits % (2 * self.bits_per_block):
            raise EncodingError(
                f"out_bits={out_bits} must be divisible by 2 x {self.bits_per_block} for {self.kind}")


@functools.cache
def encoding_scheme(kind):
    kind = Scheme(kind)
    if kind == Scheme.BB84:
        family = qstate.MubFamily(2, (qstate.bb84_basis(0), qstate.bb84_basis(1)))
        return EncodingScheme(kind, 1, 1, family)
    if kind == Scheme.MUB4:
        return EncodingScheme(kind, 2, 2, qstate.mub4_family())
    return EncodingScheme(kind, 3, 3, qstate.mub8_family())


def _as_scheme(scheme):
    return scheme if isinstance(scheme, EncodingScheme) else encoding_scheme(scheme)


# ---- block codec ----

def bits_to_int(bits):
    bits = np.asarray(bits, dtype=np.int64)
    weights = 1 << np.arange(bits.shape[-1] - 1, -1, -1)
    return bits @ weights


def int_to_bits(values, width):
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def block_fields(bits, scheme):
    """(value index, basis index) arrays for a (..., blocks * bits_per_block) bit array."""
    scheme = _as_scheme(scheme)
    bits = np.asarray(bits, dtype=np.uint8)
    blocks = scheme.blocks_for(bits.shape[-1])
    shaped = bits.reshape(bits.shape[:-1] + (blocks, scheme.bits_per_block))
    return bits_to_int(shaped[..., :scheme.value_bits]), bits_to_int(shaped[..., scheme.value_bits:])


def encode_block(bits, scheme):
    scheme = _as_scheme(scheme)
    bits = tuple(int(bit) for bit in bits)
    if len(bits) != scheme.bits_per_block or any(bit not in (0, 1) for bit in bits):
        raise EncodingError(f"{scheme.kind} blocks take {scheme.bits_per_block} bits, got {bits}")
    value, basis = block_fields(bits, scheme)
    return qstate.PureState(scheme.family[int(basis[0])][:, int(value[0])])


def decode_block(outcome, basis, scheme):
    """Bits of the block whose state is column ``outcome`` of basis ``basis``."""
    scheme = _as_scheme(scheme)
    if not 0 <= basis < scheme.basis_count or not 0 <= outcome < scheme.dim:
        raise EncodingError(f"outcome {outcome} / basis {basis} out of range for {scheme.kind}")
    return tuple(int(bit) for bit in np.concatenate([
        int_to_bits(outcome, scheme.value_bits), int_to_bits(basis, scheme.basis_bits)]))


def block_states(scheme):
    """Every encodable block as (bits, PureState), in bit-integer order."""
    scheme = _as_scheme(scheme)
    ensemble = []
    for code in range(2 ** scheme.bits_per_block):
        bits = tuple(int(bit) for bit in int_to_bits(code, scheme.bits_per_block))
        ensemble.append((bits, encode_block(bits, scheme)))
    return ensemble


def encode_amplitudes(bits, scheme):
    """Amplitudes (..., blocks, d) for a bit array, vectorized over leading axes."""
    scheme = _as_scheme(scheme)
    values, bases = block_fields(bits, scheme)
    stacked = np.stack(scheme.family.bases[:scheme.basis_count])  # (bases, d, d)
    return stacked[bases, :, values]


# ---- devices ----

@dataclass(frozen=True)
class DeviceSpec:
    cpuf_kind: str = CpufKind.XOR_ARBITER
    n: int = 32
    k: int = 2
    m: int = 2
    scheme: str = Scheme.BB84
    p: float = 0.5
    flip_rate: float = 0.0

    @property
    def out_bits(self):
        return 4 * self.m

    def build_cpuf(self, seed):
        return cpuf.make_model(self.cpuf_kind, self.n, self.out_bits, seed,
                               k=self.k, p=self.p, flip_rate=self.flip_rate)

    def build(self, seed):
        return HpufDevice(self.build_cpuf(seed), encoding_scheme(self.scheme))

    def build_locked(self, seed):
        return HlpufDevice(self.build(seed))


@dataclass(frozen=True, eq=False)
class HpufDevice:
    cpuf: cpuf.CpufModel
    scheme: EncodingScheme

    def __post_init__(self):
        self.scheme.check_out_bits(self.cpuf.out_bits)

    @property
    def n(self):
        return self.cpuf.n

    @property
    def half_bits(self):
        return self.cpuf.out_bits // 2

    @property
    def half_blocks(self):
        return self.half_bits // self.scheme.bits_per_block

    @property
    def m(self):
        """Qubits per half."""
        return self.half_blocks * self.scheme.qubits_per_block


@dataclass(frozen=True, eq=False)
class HalfResponse:
    role: str
    scheme: EncodingScheme
    states: tuple
    classical_bits: np.ndarray = None

    def __len__(self):
        return len(self.states)


def encode_half(bits, role, scheme):
    scheme = _as_scheme(scheme)
    bits = np.asarray(bits, dtype=np.uint8)
    blocks = scheme.blocks_for(bits.size)
    states = tuple(
        encode_block(bits[index * scheme.bits_per_block:(index + 1) * scheme.bits_per_block], scheme)
        for index in range(blocks))
    bits = bits.copy()
    bits.setflags(write=False)
    return HalfResponse(HalfRole(role), scheme, states, bits)


def split_response(response):
    response = np.asarray(response, dtype=np.uint8)
    half = response.size // 2
    return response[:half], response[half:]


def _response(device, x):
    x = np.asarray(x, dtype=np.uint8)
    if x.shape != (device.n,):
        raise DimensionMismatch(f"challenge shape {x.shape} != ({device.n},)")
    return cpuf.eval(device.cpuf, x)


def hpuf_half(device, x, role):
    """One half of the HPUF output (the f1 or f2 tensor factor)."""
    first, second = split_response(_response(device, x))
    role = HalfRole(role)
    return encode_half(first if role == HalfRole.FIRST else second, role, device.scheme)


def hpuf_eval(device, x):
    first, second = split_response(_response(device, x))
    return (encode_half(first, HalfRole.FIRST, device.scheme),
            encode_half(second, HalfRole.SECOND, device.scheme))


class _Bottom:
    """The lock's abort output."""
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return '⊥'

    def __bool__(self):
        return False


BOTTOM = _Bottom()


def is_bottom(value):
    return value is BOTTOM


@dataclass(eq=False)
class HlpufDevice:
    hpuf: HpufDevice
    query_log: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def scheme(self):
        return self.hpuf.scheme

    @property
    def m(self):
        return self.hpuf.m

    def record_pass(self):
        with self._lock:
            self.query_log += 1


def _count_mismatches(expected_bits, received, scheme, rng):
    """Measure each received block in the basis the expected bits name; None on malformed input."""
    values, bases = block_fields(expected_bits, scheme)
    if len(received) != values.size:
        return None
    mismatches = 0
    for state, value, basis in zip(received, values, bases):
        if not isinstance(state, qstate.PureState) or state.dim != scheme.dim:
            return None
        outcome, _ = qstate.measure(state, scheme.family[int(basis)], rng)
        mismatches += outcome != value
    return mismatches


def lock_query(device, x, incoming, rng):
    """Second half if every incoming block measures to the device's own first half, else BOTTOM."""
    expected = hpuf_half(device.hpuf, x, HalfRole.FIRST)
    incoming = tuple(incoming) if incoming is not None else ()
    mismatches = _count_mismatches(expected.classical_bits, incoming, device.scheme, rng)
    if mismatches is None or mismatches:
        logger.debug("lock refused challenge (mismatches=%s)", mismatches)
        return BOTTOM
    device.record_pass()
    return hpuf_half(device.hpuf, x, HalfRole.SECOND)


def server_encode(entry, role, scheme, m=None):
    """Encode one half of a stored (x, y); ``y`` must hold 4m bits when ``m`` is given."""
    x, y = entry
    scheme = _as_scheme(scheme)
    y = np.asarray(y, dtype=np.uint8)
    if y.size % (2 * scheme.bits_per_block) or (m is not None and y.size != 4 * m):
        expected = f"4m = {4 * m}" if m is not None else f"a multiple of {2 * scheme.bits_per_block}"
        raise DimensionMismatch(f"response of {y.size} bits, expected {expected}")
    first, second = split_response(y)
    role = HalfRole(role)
    return x, encode_half(first if role == HalfRole.FIRST else second, role, scheme)


def server_verify(expected, received, rng, tolerance=0.0):
    """Accept iff at most floor(tolerance x blocks) blocks measure to the wrong value."""
    if received is None or is_bottom(received):
        return False
    mismatches = _count_mismatches(expected.classical_bits, tuple(received), expected.scheme, rng)
    if mismatches is None:
        return False
    return mismatches <= int(np.floor(tolerance * len(expected.states) + 1e-12))
