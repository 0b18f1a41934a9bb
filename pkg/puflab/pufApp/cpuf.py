"""Classical PUF emulators.

Arbiter and k-XOR arbiter PUFs are pypuf additive-delay simulations; the
ideal biased random function is a keyed hash. A ``CpufModel`` is ``out_bits``
independent single-bit PUFs with sub-seeds derived from the model seed, so
the 4m-bit response of the hybrid devices has i.i.d. bits.

Challenges are {0,1} arrays here and {+1,-1} inputs for pypuf (0 -> +1);
a pypuf response of -1 is the bit 1.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from pypuf.io import random_inputs
from pypuf.simulation import ArbiterPUF, XORArbiterPUF
from pypuf.simulation.base import LTFArray

from .choices import CpufKind
from .exceptions import DimensionMismatch, ModelFormatError
from .utils.seeding import derive_seed

logger = logging.getLogger(__name__)

FORMAT_HEADER = '# hlpuf-cpuf v1'

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def to_inputs(challenges):
    """{0,1} challenges as pypuf {+1,-1} inputs."""
    return (1 - 2 * np.asarray(challenges, dtype=np.int8)).astype(np.int8)


def to_bits(responses):
    return (np.asarray(responses) < 0).astype(np.uint8)


def feature_transform(challenges):
    """Parity features: phi_i = prod_{j >= i} (1 - 2 c_j), plus a trailing constant 1.

    Accepts one challenge (1-D) or a batch (N x n).
    """
    challenges = np.asarray(challenges)
    single = challenges.ndim == 1
    inputs = to_inputs(np.atleast_2d(challenges))
    parities = XORArbiterPUF.transform_atf(inputs, 1)[:, 0, :]
    features = np.hstack([parities, np.ones((parities.shape[0], 1), dtype=parities.dtype)])
    return features[0] if single else features


def random_challenges(n, count, rng):
    inputs = random_inputs(n, count, seed=int(rng.integers(0, 2**32)))
    return to_bits(inputs)


def delay_simulation(weights):
    """pypuf LTF array over (k, n+1) delay weights, bias in the last column."""
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    return LTFArray(weight_array=weights[:, :-1], transform=XORArbiterPUF.transform_atf,
                    combiner=LTFArray.combiner_xor, bias=weights[:, -1])


def _splitmix64(values):
    with np.errstate(over='ignore'):
        z = values + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _pack_words(challenges):
    packed = np.packbits(challenges.astype(np.uint8), axis=1, bitorder='little')
    pad = (-packed.shape[1]) % 8
    if pad:
        packed = np.hstack([packed, np.zeros((packed.shape[0], pad), dtype=np.uint8)])
    return np.ascontiguousarray(packed).view('<u8')


@dataclass(frozen=True, eq=False)
class IdealBiasedPuf:
    """Keyed pseudo-random function thresholded so that P(bit = 0) = p."""
    n: int
    p: float
    seed: int

    def uniforms(self, challenges):
        words = _pack_words(challenges)
        state = np.full(words.shape[0], np.uint64(self.seed % 2**64), dtype=np.uint64)
        state = _splitmix64(state ^ np.uint64(self.n))
        for column in range(words.shape[1]):
            state = _splitmix64(state ^ words[:, column])
        return (state >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def eval_challenges(self, challenges):
        return (self.uniforms(challenges) >= self.p).astype(np.uint8)


# ---- the widened model ----

@dataclass(frozen=True, eq=False)
class CpufModel:
    kind: str
    n: int
    seed: int
    components: tuple
    k: int = 1
    p: float = 0.5
    flip_rate: float = 0.0
    label: str = field(default='', compare=False)

    @property
    def out_bits(self):
        return len(self.components)

    def with_seed(self, seed):
        return make_model(self.kind, self.n, self.out_bits, seed, k=self.k, p=self.p, flip_rate=self.flip_rate)

    def weights(self):
        """(out_bits, k, n+1) delay parameters; None for the ideal model."""
        if self.kind == CpufKind.IDEAL:
            return None
        return np.array([component.weight_array for component in self.components])


def make_model(kind, n, out_bits, seed, *, k=1, p=0.5, flip_rate=0.0):
    """out_bits independent single-bit PUFs, one pypuf seed per output bit."""
    kind = CpufKind(kind)
    if out_bits < 1 or n < 1:
        raise ValueError(f"need n >= 1 and out_bits >= 1, got n={n}, out_bits={out_bits}")
    if not 0.5 <= p <= 1.0:
        raise ValueError(f"p-randomness must lie in [0.5, 1], got {p}")
    if kind == CpufKind.ARBITER:
        k = 1
    components = []
    for bit in range(out_bits):
        sub_seed = derive_seed(seed, bit)
        if kind == CpufKind.IDEAL:
            components.append(IdealBiasedPuf(n, p, sub_seed))
        elif kind == CpufKind.ARBITER:
            components.append(ArbiterPUF(n, seed=sub_seed))
        else:
            components.append(XORArbiterPUF(n, k, seed=sub_seed))
    return CpufModel(kind=kind, n=n, seed=seed, components=tuple(components), k=k, p=p, flip_rate=flip_rate)


def eval_batch(model, challenges, rng=None):
    """N x out_bits responses. Flip noise is applied only when an rng is given."""
    challenges = np.atleast_2d(np.asarray(challenges, dtype=np.uint8))
    if challenges.shape[1] != model.n:
        raise DimensionMismatch(f"challenge length {challenges.shape[1]} != n={model.n}")
    if model.kind == CpufKind.IDEAL:
        columns = [component.eval_challenges(challenges) for component in model.components]
    else:
        inputs = to_inputs(challenges)
        columns = [to_bits(component.eval(inputs)) for component in model.components]
    responses = np.stack(columns, axis=1).astype(np.uint8)
    if rng is not None and model.flip_rate > 0:
        responses ^= (rng.random(responses.shape) < model.flip_rate).astype(np.uint8)
    return responses


def eval(model, challenge, rng=None):  # noqa: A001 - mirrors the device operation name
    challenge = np.asarray(challenge, dtype=np.uint8)
    if challenge.ndim != 1:
        raise DimensionMismatch("eval takes a single challenge; use eval_batch for batches")
    return eval_batch(model, challenge[None, :], rng)[0]


def quality_metrics(model, sample_count, rng):
    """Empirical p-randomness, uniqueness against an independent sibling, and reliability."""
    if sample_count < 100:
        raise ValueError("quality metrics need at least 100 samples")
    challenges = random_challenges(model.n, sample_count, rng)
    responses = eval_batch(model, challenges)
    zeros = 1.0 - responses.mean(axis=0)
    bias = float(np.maximum(zeros, 1.0 - zeros).max())
    sibling = model.with_seed(int(rng.integers(0, 2**63 - 1)))
    inter = float((responses != eval_batch(sibling, challenges)).mean())
    intra = float((responses != eval_batch(model, challenges)).mean())
    return {'bias_estimate': bias, 'inter_distance': inter, 'intra_distance': intra}


# ---- text format ----

def dumps(model):
    lines = [
        FORMAT_HEADER,
        f"kind={model.kind} n={model.n} k={model.k} out_bits={model.out_bits} "
        f"seed={model.seed} p={model.p!r} flip_rate={model.flip_rate!r}",
    ]
    weights = model.weights()
    if weights is not None:
        for bit, chains in enumerate(weights):
            for index, row in enumerate(chains):
                lines.append(f"w {bit} {index} " + ' '.join(repr(float(value)) for value in row))
    return '\n'.join(lines) + '\n'


def loads(text):
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0].strip() != FORMAT_HEADER:
        raise ModelFormatError("missing or unsupported format header")
    try:
        header = dict(token.split('=', 1) for token in lines[1].split())
        kind = CpufKind(header['kind'])
        n, k, out_bits = int(header['n']), int(header['k']), int(header['out_bits'])
        seed, p, flip_rate = int(header['seed']), float(header['p']), float(header['flip_rate'])
    except (IndexError, KeyError, ValueError) as exc:
        raise ModelFormatError(f"bad header line: {exc}") from exc
    if kind == CpufKind.IDEAL:
        return make_model(kind, n, out_bits, seed, p=p, flip_rate=flip_rate)
    weights = np.zeros((out_bits, k, n + 1))
    seen = set()
    for line in lines[2:]:
        parts = line.split()
        try:
            bit, index = int(parts[1]), int(parts[2])
            row = [float(value) for value in parts[3:]]
        except (IndexError, ValueError) as exc:
            raise ModelFormatError(f"bad weight line {line!r}") from exc
        if parts[0] != 'w' or len(row) != n + 1 or not (0 <= bit < out_bits and 0 <= index < k):
            raise ModelFormatError(f"bad weight line {line!r}")
        weights[bit, index] = row
        seen.add((bit, index))
    if len(seen) != out_bits * k:
        raise ModelFormatError(f"expected {out_bits * k} weight lines, found {len(seen)}")
    return from_weights(weights, kind=kind, seed=seed, p=p, flip_rate=flip_rate)


def from_weights(weights, *, kind=CpufKind.XOR_ARBITER, seed=0, p=0.5, flip_rate=0.0):
    """Model over fixed (out_bits, k, n+1) delay weights."""
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 3:
        raise DimensionMismatch(f"expected (out_bits, k, n+1) weights, got shape {weights.shape}")
    components = tuple(delay_simulation(chains) for chains in weights)
    return CpufModel(kind=CpufKind(kind), n=weights.shape[2] - 1, seed=seed, components=components,
                     k=weights.shape[1], p=p, flip_rate=flip_rate)
