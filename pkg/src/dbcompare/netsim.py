"""Deterministic in-memory simulation of authorities, submitters and comparers.

Parties are message-driven state machines.  :func:`party_step` feeds one
envelope (or ``None`` to start) to a party and returns its next state and
whatever it sends.  :func:`run_scenario` wires parties together with one
FIFO queue each and dispatches round-robin until every queue is empty.
Delivery is reliable and in order.

Scenario scripts are line oriented; ``#`` starts a comment and tokens are
split shell-style, so values with spaces can be quoted::

    backend Z101
    authority ted
    authority tomasz
    submitter carol authority=ted value=C55-111-555
    comparer konstantin authority=tomasz value=C55-111-555
    compare carol konstantin

Envelope wire layout (all integers big-endian)::

    u32 length of everything that follows
    8   session id
    u8  message type (0x20 setup-request, 0x21 setup-response,
        0x22 challenge, 0x23 verdict, 0x2F fault)
    u8  sender name length, sender name (UTF-8)
    u8  recipient name length, recipient name (UTF-8)
    ... payload: a length-prefixed protocol message, or UTF-8 text for faults
"""

from __future__ import annotations

import random
import shlex
import struct
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Union

from .errors import BackendMismatch, MalformedEncoding, RealmExhausted, RoleError, ScriptInvalid
from .groups import Group, GroupElement, get_group
from .protocol import (
    AuthorityResponse, Challenge, ComparerToken, IssuanceSession, Message, PrivateKey, Role,
    SetupRequest, SubmitterToken, Verdict, authority_issue_left, authority_issue_right, compare,
    comparer_begin, comparer_finish, decode_message, encode_message, keygen, make_challenge,
    submitter_begin, submitter_finish,
)

SETUP_REQUEST = 0x20
SETUP_RESPONSE = 0x21
CHALLENGE = 0x22
VERDICT = 0x23
FAULT = 0x2F

MSG_TYPES = {
    SETUP_REQUEST: 'setup-request',
    SETUP_RESPONSE: 'setup-response',
    CHALLENGE: 'challenge',
    VERDICT: 'verdict',
    FAULT: 'fault',
}

_SCHEMAS = {
    SETUP_REQUEST: SetupRequest,
    SETUP_RESPONSE: AuthorityResponse,
    CHALLENGE: Challenge,
    VERDICT: Verdict,
}

AUTHORITY = 'authority'
SUBMITTER = Role.SUBMITTER.value
COMPARER = Role.COMPARER.value


@dataclass(frozen=True)
class PartyId:
    name: str
    role: str


@dataclass(frozen=True)
class Envelope:
    session_id: bytes
    sender: str
    recipient: str
    msg_type: int
    payload: bytes

    @property
    def type_name(self) -> str:
        return MSG_TYPES.get(self.msg_type, f'0x{self.msg_type:02x}')


def _name_bytes(name: str) -> bytes:
    raw = name.encode('utf-8')
    if not raw or len(raw) > 255:
        raise ValueError(f'party name must be 1..255 bytes: {name!r}')
    return bytes([len(raw)]) + raw


def encode_envelope(e: Envelope) -> bytes:
    if len(e.session_id) != 8:
        raise ValueError('session id must be 8 bytes')
    if e.msg_type not in MSG_TYPES:
        raise ValueError(f'unknown message type 0x{e.msg_type:02x}')
    body = (e.session_id + bytes([e.msg_type]) + _name_bytes(e.sender)
            + _name_bytes(e.recipient) + e.payload)
    return struct.pack('>I', len(body)) + body


def decode_envelope(data: bytes) -> Envelope:
    data = bytes(data)
    if len(data) < 4 + 8 + 1 + 2:
        raise MalformedEncoding('envelope shorter than its header')
    (length,) = struct.unpack_from('>I', data)
    if length != len(data) - 4:
        raise MalformedEncoding(f'length prefix {length} disagrees with {len(data) - 4} body bytes')
    session_id = data[4:12]
    msg_type = data[12]
    if msg_type not in MSG_TYPES:
        raise MalformedEncoding(f'unknown message type 0x{msg_type:02x}')
    offset = 13
    names = []
    for _ in range(2):
        if offset >= len(data):
            raise MalformedEncoding('truncated party name')
        n = data[offset]
        raw = data[offset + 1:offset + 1 + n]
        if n == 0 or len(raw) != n:
            raise MalformedEncoding('truncated party name')
        try:
            names.append(raw.decode('utf-8'))
        except UnicodeDecodeError:
            raise MalformedEncoding('party name is not UTF-8') from None
        offset += 1 + n
    return Envelope(session_id, names[0], names[1], msg_type, data[offset:])


def decode_payload(e: Envelope) -> Message:
    """Decode an envelope's payload, checking it matches the message type."""
    msg = decode_message(e.payload)
    expected = _SCHEMAS.get(e.msg_type)
    if expected is None or not isinstance(msg, expected):
        raise MalformedEncoding(f'{type(msg).__name__} payload in a {e.type_name} envelope')
    return msg


@dataclass
class AuthorityRealm:
    """An authority's private table from attribute value to secret element.

    A value's secret is drawn the first time it is requested and reused
    afterwards.  Draws are uniform over the elements no other value holds,
    so two values of one realm never share a secret (and never compare
    equal); a realm therefore holds at most ``group.order`` values.
    """
    authority: str
    group: Group
    secrets: dict[str, GroupElement] = field(default_factory=dict)

    def secret_for(self, value: str, rng: random.Random) -> GroupElement:
        secret = self.secrets.get(value)
        if secret is not None:
            return secret
        if len(self.secrets) >= self.group.order:
            raise RealmExhausted(f'{self.group.backend_id} has no unused element for {value!r}; '
                                 f'choose a larger backend')
        used = set(self.secrets.values())
        secret = self.group.random_element(rng)
        while secret in used:
            secret = self.group.random_element(rng)
        self.secrets[value] = secret
        return secret

    def copy(self) -> 'AuthorityRealm':
        return AuthorityRealm(self.authority, self.group, dict(self.secrets))


# party states

@dataclass(frozen=True)
class AuthorityState:
    party: PartyId
    group: Group
    realm: AuthorityRealm
    rng: random.Random


@dataclass(frozen=True)
class SubmitterState:
    party: PartyId
    group: Group
    key: PrivateKey
    authority: str
    attribute: str
    issuance_id: bytes
    targets: tuple[tuple[str, bytes], ...]
    rng: random.Random
    session: Optional[IssuanceSession] = None
    token: Optional[SubmitterToken] = None
    verdicts: Mapping[str, bool] = field(default_factory=dict)
    faults: tuple[str, ...] = ()


@dataclass(frozen=True)
class ComparerState:
    party: PartyId
    group: Group
    key: PrivateKey
    authority: str
    attribute: str
    issuance_id: bytes
    rng: random.Random
    session: Optional[IssuanceSession] = None
    token: Optional[ComparerToken] = None
    deferred: tuple[Envelope, ...] = ()
    answered: tuple[bytes, ...] = ()
    faults: tuple[str, ...] = ()


PartyState = Union[AuthorityState, SubmitterState, ComparerState]


def _send(state, msg_type: int, to: str, session_id: bytes, msg: Message) -> Envelope:
    return Envelope(session_id, state.party.name, to, msg_type, encode_message(msg))


def _fault(state, incoming: Envelope, reason: str) -> Envelope:
    return Envelope(incoming.session_id, state.party.name, incoming.sender, FAULT,
                    reason.encode('utf-8'))


def party_step(state: PartyState, incoming: Optional[Envelope]) -> tuple[PartyState, list[Envelope]]:
    """Advance one party by one protocol step.

    Malformed payloads and unknown sessions are answered with a fault
    envelope and leave the state as it was.  Incoming faults are recorded
    but never answered.
    """
    if incoming is not None:
        if incoming.recipient != state.party.name:
            return state, [_fault(state, incoming, f'SchemaViolation: not addressed to {state.party.name}')]
        if incoming.msg_type == FAULT:
            if isinstance(state, AuthorityState):
                return state, []
            reason = incoming.payload.decode('utf-8', 'replace')
            return replace(state, faults=state.faults + (reason,)), []
        try:
            msg = decode_payload(incoming)
        except MalformedEncoding as exc:
            return state, [_fault(state, incoming, f'SchemaViolation: {exc}')]
    else:
        msg = None
    step = (_authority_step if isinstance(state, AuthorityState)
            else _submitter_step if isinstance(state, SubmitterState) else _comparer_step)
    try:
        return step(state, incoming, msg)
    except (BackendMismatch, RoleError, RealmExhausted) as exc:
        # raised by the protocol checks, before any session is consumed
        return state, [_fault(state, incoming, f'SchemaViolation: {exc}')]


def _authority_step(state: AuthorityState, incoming, msg):
    if incoming is None:
        return state, []
    if incoming.msg_type != SETUP_REQUEST:
        return state, [_fault(state, incoming, f'SchemaViolation: authority got {incoming.type_name}')]
    g = state.group
    if msg.nonce.backend_id != g.backend_id:
        return state, [_fault(state, incoming, f'SchemaViolation: {msg.nonce.backend_id} nonce')]
    realm = state.realm.copy()
    secret = realm.secret_for(msg.attribute, state.rng)
    issue = authority_issue_left if msg.role is Role.SUBMITTER else authority_issue_right
    resp = issue(msg.nonce, secret, g, state.rng)
    out = _send(state, SETUP_RESPONSE, incoming.sender, incoming.session_id, resp)
    return replace(state, realm=realm), [out]


def _submitter_step(state: SubmitterState, incoming, msg):
    if incoming is None:
        if state.session is not None or state.token is not None:
            return state, []
        session, l_r = submitter_begin(state.group, state.rng)
        req = SetupRequest(Role.SUBMITTER, state.attribute, l_r)
        return (replace(state, session=session),
                [_send(state, SETUP_REQUEST, state.authority, state.issuance_id, req)])
    sid = incoming.session_id
    if incoming.msg_type == SETUP_RESPONSE and sid == state.issuance_id and state.token is None:
        if state.session is None:
            return state, [_fault(state, incoming, 'UnknownSession: no issuance in progress')]
        token = submitter_finish(state.session, msg, state.key, state.rng)
        outs = [_send(state, CHALLENGE, comparer, cid, make_challenge(token, state.key, state.rng))
                for comparer, cid in state.targets]
        return replace(state, session=None, token=token), outs
    if incoming.msg_type == VERDICT:
        for comparer, cid in state.targets:
            if cid == sid and comparer == incoming.sender:
                verdicts = dict(state.verdicts)
                verdicts[comparer] = msg.accepted
                return replace(state, verdicts=verdicts), []
    if incoming.msg_type in (SETUP_RESPONSE, VERDICT):
        return state, [_fault(state, incoming, f'UnknownSession: {sid.hex()}')]
    return state, [_fault(state, incoming, f'SchemaViolation: submitter got {incoming.type_name}')]


def _comparer_step(state: ComparerState, incoming, msg):
    if incoming is None:
        if state.session is not None or state.token is not None:
            return state, []
        session, r_l = comparer_begin(state.group, state.rng)
        req = SetupRequest(Role.COMPARER, state.attribute, r_l)
        return (replace(state, session=session),
                [_send(state, SETUP_REQUEST, state.authority, state.issuance_id, req)])
    sid = incoming.session_id
    if incoming.msg_type == SETUP_RESPONSE:
        if sid != state.issuance_id or state.session is None:
            return state, [_fault(state, incoming, f'UnknownSession: {sid.hex()}')]
        token = comparer_finish(state.session, msg, state.key, state.rng)
        held = state.deferred
        state = replace(state, session=None, token=token, deferred=())
        outs: list[Envelope] = []
        for early in held:
            state, more = _comparer_step(state, early, decode_payload(early))
            outs.extend(more)
        return state, outs
    if incoming.msg_type == CHALLENGE:
        if sid in state.answered:
            return state, [_fault(state, incoming, f'UnknownSession: {sid.hex()} already answered')]
        if state.token is None:
            # token not issued yet; answer once it is
            return replace(state, deferred=state.deferred + (incoming,)), []
        if msg.blinded_cipher.backend_id != state.group.backend_id:
            return state, [_fault(state, incoming, f'SchemaViolation: {msg.blinded_cipher.backend_id} challenge')]
        accepted = compare(msg, state.token, state.key)
        out = _send(state, VERDICT, incoming.sender, sid, Verdict(accepted))
        return replace(state, answered=state.answered + (sid,)), [out]
    return state, [_fault(state, incoming, f'SchemaViolation: comparer got {incoming.type_name}')]


# scenarios

@dataclass
class PartySpec:
    name: str
    role: str
    authority: str
    value: str


@dataclass
class Scenario:
    backend: str
    authorities: dict[str, dict[str, GroupElement]] = field(default_factory=dict)
    holders: list[PartySpec] = field(default_factory=list)
    comparisons: list[tuple[str, str]] = field(default_factory=list)

    def validate(self) -> None:
        try:
            group = get_group(self.backend)
        except ValueError as exc:
            raise ScriptInvalid(str(exc)) from None
        names = list(self.authorities) + [p.name for p in self.holders]
        if len(set(names)) != len(names):
            raise ScriptInvalid('party names must be unique')
        for name in names:
            if not name or len(name.encode('utf-8')) > 255:
                raise ScriptInvalid(f'bad party name {name!r}')
        for secrets in self.authorities.values():
            for secret in secrets.values():
                if secret.backend_id != group.backend_id:
                    raise ScriptInvalid(f'realm secret from {secret.backend_id} in a {group.backend_id} scenario')
        roles = {p.name: p.role for p in self.holders}
        for p in self.holders:
            if p.authority not in self.authorities:
                raise ScriptInvalid(f'{p.name} names unknown authority {p.authority!r}')
        for sub, comp in self.comparisons:
            if roles.get(sub) != SUBMITTER:
                raise ScriptInvalid(f'{sub!r} is not a submitter')
            if roles.get(comp) != COMPARER:
                raise ScriptInvalid(f'{comp!r} is not a comparer')


def parse_script(text: str) -> Scenario:
    """Parse the line-oriented scenario language (see the module docstring)."""
    backend = None
    scenario = Scenario(backend='')
    for lineno, line in enumerate(text.splitlines(), 1):
        try:
            words = shlex.split(line, comments=True)
        except ValueError as exc:
            raise ScriptInvalid(f'line {lineno}: {exc}') from None
        if not words:
            continue
        head, args = words[0], words[1:]
        if head == 'backend' and len(args) == 1 and backend is None:
            backend = scenario.backend = args[0]
        elif head == 'authority' and len(args) == 1:
            if args[0] in scenario.authorities:
                raise ScriptInvalid(f'line {lineno}: duplicate authority {args[0]!r}')
            scenario.authorities[args[0]] = {}
        elif head in (SUBMITTER, COMPARER) and len(args) >= 1:
            opts = dict(a.split('=', 1) for a in args[1:] if '=' in a)
            if len(opts) != len(args) - 1 or set(opts) != {'authority', 'value'}:
                raise ScriptInvalid(f'line {lineno}: expected {head} NAME authority=A value=V')
            scenario.holders.append(PartySpec(args[0], head, opts['authority'], opts['value']))
        elif head == 'compare' and len(args) == 2:
            scenario.comparisons.append((args[0], args[1]))
        else:
            raise ScriptInvalid(f'line {lineno}: cannot parse {line.strip()!r}')
    if backend is None:
        raise ScriptInvalid('script does not name a backend')
    scenario.validate()
    return scenario


@dataclass
class Transcript:
    envelopes: list[Envelope]
    verdicts: dict[tuple[str, str], bool]
    states: dict[str, PartyState]
    sessions: dict[tuple[str, str], bytes]

    def to_bytes(self) -> bytes:
        return b''.join(encode_envelope(e) for e in self.envelopes)

    @property
    def faults(self) -> list[Envelope]:
        return [e for e in self.envelopes if e.msg_type == FAULT]


def _session_id(counter: int) -> bytes:
    return counter.to_bytes(8, 'big')


def build_states(scenario: Scenario, seed: int) -> tuple[dict[str, PartyState], dict[tuple[str, str], bytes]]:
    """Initial party states with simulator-assigned session ids."""
    scenario.validate()
    group = get_group(scenario.backend)
    rngs = {}

    def rng_for(name):
        # per-party streams keep one party's draws from shifting another's
        rngs[name] = random.Random(f'{seed}/{name}')
        return rngs[name]

    states: dict[str, PartyState] = {}
    for name, secrets in scenario.authorities.items():
        realm = AuthorityRealm(name, group, dict(secrets))
        states[name] = AuthorityState(PartyId(name, AUTHORITY), group, realm, rng_for(name))
    counter = 0
    issuance = {}
    for p in scenario.holders:
        counter += 1
        issuance[p.name] = _session_id(counter)
    sessions = {}
    targets: dict[str, list] = {p.name: [] for p in scenario.holders}
    for sub, comp in scenario.comparisons:
        counter += 1
        sessions[(sub, comp)] = _session_id(counter)
        targets[sub].append((comp, sessions[(sub, comp)]))
    for p in scenario.holders:
        rng = rng_for(p.name)
        role = Role(p.role)
        key = keygen(group, role, rng)
        if role is Role.SUBMITTER:
            states[p.name] = SubmitterState(PartyId(p.name, SUBMITTER), group, key, p.authority, p.value,
                                            issuance[p.name], tuple(targets[p.name]), rng)
        else:
            states[p.name] = ComparerState(PartyId(p.name, COMPARER), group, key, p.authority, p.value,
                                           issuance[p.name], rng)
    return states, sessions


def run_scenario(script: Union[str, Scenario], seed: int = 0) -> Transcript:
    """Run a scenario to quiescence; deterministic for a given ``seed``."""
    scenario = parse_script(script) if isinstance(script, str) else script
    states, sessions = build_states(scenario, seed)
    order = list(states)
    queues: dict[str, deque] = {name: deque() for name in order}
    log: list[Envelope] = []

    def route(envelopes):
        for e in envelopes:
            log.append(e)
            if e.recipient in queues:
                queues[e.recipient].append(e)

    for name in order:
        states[name], out = party_step(states[name], None)
        route(out)
    while any(queues.values()):
        for name in order:
            if queues[name]:
                states[name], out = party_step(states[name], queues[name].popleft())
                route(out)

    verdicts = {}
    for (sub, comp) in scenario.comparisons:
        state = states[sub]
        if comp in state.verdicts:
            verdicts[(sub, comp)] = state.verdicts[comp]
    return Transcript(log, verdicts, states, sessions)
