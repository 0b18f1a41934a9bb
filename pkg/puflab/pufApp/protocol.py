"""HLPUF authentication rounds.

The server picks a stored CRP, sends the encoded first half, the client's
lock releases the second half and the server verifies it. A channel
adversary sits on both directions. Every state object crossing a hook gets a
serial number so a transcript can show that each state passed each hook once.
"""
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import hybrid, qstate
from .adversary import intercept_resend
from .analytics import reuse_bound
from .choices import ChannelAdversaryKind, HalfRole, ReuseStatus, RoundStatus
from .exceptions import ConfigError, DatabaseExhausted, EncodingError
from .utils.artifacts import write_jsonl

logger = logging.getLogger(__name__)

SERVER_TO_CLIENT = 'server_to_client'
CLIENT_TO_SERVER = 'client_to_server'


@dataclass
class ChallengeRecord:
    status: str = ReuseStatus.FRESH
    accepted: int = 0
    issued: int = 0


class ServerState:
    """CRP table plus the reuse policy.

    ``reuse_cap`` None allows unlimited reuse after accepted rounds, c >= 1
    issues a challenge at most c times (1 disables reuse).
    """

    def __init__(self, db, scheme, rng, reuse_cap=None, tolerance=0.0):
        self.db = db
        self.scheme = hybrid.encoding_scheme(scheme) if isinstance(scheme, str) else scheme
        self.scheme.check_out_bits(db.width)
        self.rng = rng
        if reuse_cap is not None and reuse_cap < 1:
            raise ConfigError(f"reuse cap {reuse_cap!r} must be at least 1")
        self.reuse_cap = reuse_cap
        self.tolerance = tolerance
        self.records = [ChallengeRecord() for _ in range(len(db))]

    def selectable(self):
        return [index for index, record in enumerate(self.records) if record.status != ReuseStatus.RETIRED]

    def select(self):
        candidates = self.selectable()
        if not candidates:
            raise DatabaseExhausted(f"all {len(self.records)} challenges retired")
        index = candidates[int(self.rng.integers(0, len(candidates)))]
        self.records[index].issued += 1
        return index

    def entry(self, index):
        return self.db.challenges[index], self.db.responses[index]

    def encode(self, index, role):
        return hybrid.server_encode(self.entry(index), role, self.scheme)

    def verify(self, index, received):
        _, expected = self.encode(index, HalfRole.SECOND)
        return hybrid.server_verify(expected, received, self.rng, self.tolerance)

    def record(self, index, accepted):
        record = self.records[index]
        if not accepted:
            record.status = ReuseStatus.RETIRED
            return
        record.accepted += 1
        record.status = ReuseStatus.REUSABLE
        if self.reuse_cap is not None and record.issued >= self.reuse_cap:
            record.status = ReuseStatus.RETIRED

    @property
    def retired(self):
        return sum(1 for record in self.records if record.status == ReuseStatus.RETIRED)


@dataclass
class ClientState:
    device: hybrid.HlpufDevice

    def respond(self, x, incoming, rng):
        return hybrid.lock_query(self.device, x, incoming, rng)


# ---- channel adversaries ----

class ChannelAdversary:
    """Hooks on both directions; each hook sees each in-flight state once."""

    name = 'passthrough'

    def __init__(self, rng):
        self.rng = rng
        self.storage = {}

    def forward(self, x, states):
        return tuple(states)

    def backward(self, x, states):
        return tuple(states)

    def observe(self, x, status):
        pass

    def guess_half(self, x, role, bits):
        """A ``bits``-bit guess of half ``role`` of f(x); uniform unless overridden."""
        return self.rng.integers(0, 2, size=bits, dtype=np.uint8)


class Passthrough(ChannelAdversary):
    name = ChannelAdversaryKind.PASSTHROUGH


class PassiveObserver(ChannelAdversary):
    """Reads the classical transcript only."""
    name = ChannelAdversaryKind.PASSIVE

    def observe(self, x, status):
        key = bytes(np.asarray(x, dtype=np.uint8))
        self.storage.setdefault(key, []).append(str(status))


class InterceptResend(ChannelAdversary):
    """Measures every passing qubit in a random BB84 basis and resends the result.

    Remembers its latest observation of each half per challenge.
    """
    name = ChannelAdversaryKind.INTERCEPT_RESEND

    def __init__(self, rng, directions=(SERVER_TO_CLIENT, CLIENT_TO_SERVER)):
        super().__init__(rng)
        self.directions = tuple(directions)

    def _attack(self, x, states, role):
        resent, observed = [], []
        for state in states:
            if state.dim != 2:
                raise EncodingError("intercept-resend works on BB84 qubits")
            collapsed, outcome, basis = intercept_resend(state, self.rng)
            resent.append(collapsed)
            observed.extend((outcome, basis))
        self.storage[(bytes(np.asarray(x, dtype=np.uint8)), role)] = np.array(observed, dtype=np.uint8)
        return tuple(resent)

    def forward(self, x, states):
        if SERVER_TO_CLIENT not in self.directions:
            return tuple(states)
        return self._attack(x, states, HalfRole.FIRST)

    def backward(self, x, states):
        if CLIENT_TO_SERVER not in self.directions:
            return tuple(states)
        return self._attack(x, states, HalfRole.SECOND)

    def guess_half(self, x, role, bits):
        seen = self.storage.get((bytes(np.asarray(x, dtype=np.uint8)), HalfRole(role)))
        if seen is None or seen.size != bits:
            return super().guess_half(x, role, bits)
        return seen.copy()


class ReplayStored(ChannelAdversary):
    """Answers the server with a second half captured for a different challenge."""
    name = ChannelAdversaryKind.REPLAY

    def __init__(self, rng):
        super().__init__(rng)
        self.captured = []

    def backward(self, x, states):
        key = bytes(np.asarray(x, dtype=np.uint8))
        replay = ()
        for position in range(len(self.captured) - 1, -1, -1):
            if self.captured[position][0] != key:
                replay = self.captured.pop(position)[1]
                break
        self.captured.append((key, tuple(states)))
        return replay


class ForceFailure(ChannelAdversary):
    """Spoils the first half of every round so the lock refuses."""
    name = ChannelAdversaryKind.FORCE_FAILURE

    _FLIP = np.array([[0, -1j], [1j, 0]])

    def forward(self, x, states):
        states = tuple(states)
        if states and states[0].dim == 2:
            # maps every BB84 state to its orthogonal partner
            flipped = qstate.PureState(self._FLIP @ states[0].amplitudes)
            return (flipped,) + states[1:]
        return states[1:]


CHANNEL_ADVERSARIES = {
    ChannelAdversaryKind.PASSTHROUGH: Passthrough,
    ChannelAdversaryKind.PASSIVE: PassiveObserver,
    ChannelAdversaryKind.INTERCEPT_RESEND: InterceptResend,
    ChannelAdversaryKind.REPLAY: ReplayStored,
    ChannelAdversaryKind.FORCE_FAILURE: ForceFailure,
}


def make_channel_adversary(kind, rng, **options):
    return CHANNEL_ADVERSARIES[ChannelAdversaryKind(kind)](rng, **options)


# ---- rounds ----

class _Serials:
    """Sequential numbers for state objects, stable for one session."""

    def __init__(self):
        self._numbers = {}
        self._held = []

    def __call__(self, states):
        numbers = []
        for state in states:
            if id(state) not in self._numbers:
                self._numbers[id(state)] = len(self._numbers)
                self._held.append(state)
            numbers.append(self._numbers[id(state)])
        return numbers


@dataclass(frozen=True)
class RoundOutcome:
    round: int
    status: str
    challenge_index: int
    challenge: str
    events: tuple = field(default=(), repr=False)


def _event(round_index, step, direction=None, action=None, states_in=(), states_out=(), outcome=None,
           challenge_index=None):
    return {'round': round_index, 'step': step, 'direction': direction, 'action': action,
            'states_in': list(states_in), 'states_out': list(states_out), 'outcome': outcome,
            'challenge_index': challenge_index}


def run_round(server, client, adversary, rng, round_index=0, serials=None):
    """select, encode first half, forward hook, lock, backward hook, verify.

    Raises DatabaseExhausted when no challenge is selectable.
    """
    serials = serials or _Serials()
    index = server.select()
    x, first = server.encode(index, HalfRole.FIRST)
    events = [_event(round_index, 'select', challenge_index=index, states_out=serials(first.states))]
    forwarded = adversary.forward(x, first.states)
    events.append(_event(round_index, 'hook', SERVER_TO_CLIENT, adversary.name,
                         serials(first.states), serials(forwarded)))
    released = client.respond(x, forwarded, rng)
    if hybrid.is_bottom(released):
        status = RoundStatus.CLIENT_ABORT
        events.append(_event(round_index, 'lock', action='bottom', states_in=serials(forwarded),
                             outcome=str(status)))
    else:
        events.append(_event(round_index, 'lock', action='release', states_in=serials(forwarded),
                             states_out=serials(released.states)))
        returned = adversary.backward(x, released.states)
        events.append(_event(round_index, 'hook', CLIENT_TO_SERVER, adversary.name,
                             serials(released.states), serials(returned)))
        accepted = server.verify(index, returned)
        status = RoundStatus.ACCEPTED if accepted else RoundStatus.SERVER_REJECT
        events.append(_event(round_index, 'verify', states_in=serials(returned), outcome=str(status)))
    server.record(index, status == RoundStatus.ACCEPTED)
    adversary.observe(x, status)
    logger.debug("round %d challenge %d: %s", round_index, index, status)
    return RoundOutcome(round=round_index, status=str(status), challenge_index=index,
                        challenge=''.join(map(str, x)), events=tuple(events))


@dataclass(frozen=True)
class SessionReport:
    rounds_requested: int
    rounds_run: int
    accepted: int
    client_aborts: int
    server_rejects: int
    retired: int
    exhausted: bool
    reuse_histogram: dict
    audit: dict
    outcomes: tuple = field(default=(), repr=False)

    @property
    def acceptance_rate(self):
        return self.accepted / self.rounds_run if self.rounds_run else 0.0

    def as_dict(self):
        return {
            'rounds_requested': self.rounds_requested,
            'rounds_run': self.rounds_run,
            'accepted': self.accepted,
            'client_aborts': self.client_aborts,
            'server_rejects': self.server_rejects,
            'acceptance_rate': self.acceptance_rate,
            'retired': self.retired,
            'exhausted': self.exhausted,
            'reuse_histogram': self.reuse_histogram,
            'audit': self.audit,
        }


def knowledge_audit(server, adversary, m):
    """Adversary's full first-half guesses on every accepted challenge, grouped by acceptance count.

    eps1 is the hit rate on challenges accepted exactly once.
    """
    half = server.db.width // 2
    groups = defaultdict(lambda: [0, 0])
    for index, record in enumerate(server.records):
        if not record.accepted:
            continue
        x, y = server.entry(index)
        guess = adversary.guess_half(x, HalfRole.FIRST, half)
        groups[record.accepted][0] += 1
        groups[record.accepted][1] += int(np.array_equal(guess, y[:half]))
    once = groups.get(1, [0, 0])
    eps1 = once[1] / once[0] if once[0] else 0.0
    by_k = {}
    for k in sorted(groups):
        challenges, hits = groups[k]
        by_k[k] = {'challenges': challenges, 'hits': hits, 'rate': hits / challenges,
                   'bound': reuse_bound(k, m, eps1)}
    return {'eps1': eps1, 'by_k': by_k}


def run_session(server, client, adversary, rounds, rng):
    if rounds < 1:
        raise ValueError("a session needs at least one round")
    serials = _Serials()
    outcomes = []
    exhausted = False
    for round_index in range(rounds):
        try:
            outcomes.append(run_round(server, client, adversary, rng, round_index, serials))
        except DatabaseExhausted:
            logger.info("database exhausted after %d rounds", round_index)
            exhausted = True
            break
    statuses = Counter(outcome.status for outcome in outcomes)
    histogram = Counter(record.accepted for record in server.records)
    report = SessionReport(
        rounds_requested=rounds,
        rounds_run=len(outcomes),
        accepted=statuses[RoundStatus.ACCEPTED],
        client_aborts=statuses[RoundStatus.CLIENT_ABORT],
        server_rejects=statuses[RoundStatus.SERVER_REJECT],
        retired=server.retired,
        exhausted=exhausted,
        reuse_histogram={count: histogram[count] for count in sorted(histogram)},
        audit=knowledge_audit(server, adversary, client.device.m),
        outcomes=tuple(outcomes),
    )
    logger.info("session: %d/%d rounds accepted, %d retired", report.accepted, report.rounds_run, report.retired)
    return report


# ---- transcript checks ----

def check_custody(outcomes):
    """Every state serial enters each hook direction at most once."""
    violations = []
    for direction in (SERVER_TO_CLIENT, CLIENT_TO_SERVER):
        seen = Counter()
        for outcome in outcomes:
            for event in outcome.events:
                if event['step'] == 'hook' and event['direction'] == direction:
                    seen.update(event['states_in'])
        violations.extend(f"state {serial} crossed {direction} {count} times"
                          for serial, count in seen.items() if count > 1)
    for outcome in outcomes:
        if outcome.status == RoundStatus.CLIENT_ABORT and any(
                event['direction'] == CLIENT_TO_SERVER for event in outcome.events):
            violations.append(f"round {outcome.round} aborted but second-half states reached the wire")
    return violations


def check_reuse_safety(outcomes):
    """Retired challenges never reappear."""
    retired, violations = set(), []
    for outcome in outcomes:
        if outcome.challenge_index in retired:
            violations.append(f"retired challenge {outcome.challenge_index} reissued in round {outcome.round}")
        if outcome.status != RoundStatus.ACCEPTED:
            retired.add(outcome.challenge_index)
    return violations


def export_transcript(outcomes, path):
    return write_jsonl(path, (event for outcome in outcomes for event in outcome.events))
