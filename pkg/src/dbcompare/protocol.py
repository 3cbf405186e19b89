"""Double blind comparison: token issuance, challenges, comparison, splitting.

Roles: a *submitter* holds a left-encrypted token ``{alpha.a.M, a}`` and
starts comparisons; a *comparer* holds a right-encrypted token
``{M.b.beta, b}`` and answers them; an *authority* owns the secret ``M``.
Neither token holder ever learns ``M``, and the authority cannot link the
stored tokens back to the issuance exchange.

Issuance is three moves per holder::

    submitter -> authority   l_R
    authority -> submitter   {l_R.l_T.M, l_T}
    submitter stores         {alpha.l_L.(l_R.l_T.M), l_L.l_R.l_T}

and the mirror image for the comparer, whose nonces sit to the right of
``M``.  Nothing here calls ``invert``, so every operation runs on sealed
backends.

Optional keyword arguments such as ``authority_nonce=`` pin the value that
would otherwise be drawn from ``rng``; they exist for reproducible test
vectors and should be left alone in real use.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Optional, Union

from .errors import BackendMismatch, MalformedEncoding, RoleError, SessionConsumed
from .groups import Group, GroupElement, RandomSource, as_rng, decode_element_prefix, get_group


class Role(str, enum.Enum):
    SUBMITTER = 'submitter'
    COMPARER = 'comparer'


class SessionState(str, enum.Enum):
    AWAITING_AUTHORITY = 'awaiting-authority'
    COMPLETE = 'complete'


@dataclass(frozen=True)
class PrivateKey:
    key: GroupElement
    role: Role

    def __repr__(self) -> str:
        # keep key material out of logs and tracebacks
        return f'PrivateKey(role={self.role.value}, backend={self.key.backend_id})'


@dataclass(frozen=True)
class SubmitterToken:
    cipher: GroupElement
    tag: GroupElement


@dataclass(frozen=True)
class ComparerToken:
    cipher: GroupElement
    tag: GroupElement


@dataclass(frozen=True)
class Challenge:
    blinded_cipher: GroupElement
    blinded_tag: GroupElement


@dataclass(frozen=True)
class AuthorityResponse:
    cipher: GroupElement
    authority_nonce: GroupElement


@dataclass(eq=False)
class IssuanceSession:
    """Requester-side state between the first and third move.

    Single use: finishing the session marks it complete and any further
    finish attempt raises :class:`SessionConsumed`.
    """
    role: Role
    group: Group
    first_nonce: GroupElement
    state: SessionState = SessionState.AWAITING_AUTHORITY

    def _consume(self, role: Role) -> None:
        if self.role is not role:
            raise RoleError(f'{self.role.value} session finished as {role.value}')
        if self.state is not SessionState.AWAITING_AUTHORITY:
            raise SessionConsumed('issuance session already finished')
        self.state = SessionState.COMPLETE


def _same_backend(*xs: GroupElement) -> Group:
    backend = xs[0].backend_id
    for x in xs[1:]:
        if x.backend_id != backend:
            raise BackendMismatch(f'{x.backend_id} mixed with {backend}')
    return get_group(backend)


def _require_role(key: PrivateKey, role: Role) -> None:
    if key.role is not role:
        raise RoleError(f'{key.role.value} key used where a {role.value} key is required')


def _draw(group: Group, rng, forced: Optional[GroupElement]) -> GroupElement:
    if forced is not None:
        group._check(forced)
        return forced
    return group.random_element(rng)


def keygen(group: Group, role: Role, rng: RandomSource = None) -> PrivateKey:
    return PrivateKey(group.random_element(rng), Role(role))


# issuance


def submitter_begin(group: Group, rng: RandomSource = None, *,
                    request_nonce: Optional[GroupElement] = None) -> tuple[IssuanceSession, GroupElement]:
    """First move for a submitter: pick ``l_R`` and send it to the authority."""
    l_r = _draw(group, rng, request_nonce)
    return IssuanceSession(Role.SUBMITTER, group, l_r), l_r


def comparer_begin(group: Group, rng: RandomSource = None, *,
                   request_nonce: Optional[GroupElement] = None) -> tuple[IssuanceSession, GroupElement]:
    """First move for a comparer: pick ``r_L`` and send it to the authority."""
    r_l = _draw(group, rng, request_nonce)
    return IssuanceSession(Role.COMPARER, group, r_l), r_l


def authority_issue_left(request_nonce: GroupElement, secret: GroupElement, group: Group,
                         rng: RandomSource = None, *,
                         authority_nonce: Optional[GroupElement] = None) -> AuthorityResponse:
    """Authority's reply to a submitter: ``{l_R.l_T.M, l_T}`` with fresh ``l_T``.

    The fresh nonce stops a submitter who knows an inverse of its own
    ``l_R`` from peeling ``M`` out of the reply.
    """
    group._check(request_nonce)
    group._check(secret)
    l_t = _draw(group, rng, authority_nonce)
    return AuthorityResponse(group.product(request_nonce, l_t, secret), l_t)


def authority_issue_right(request_nonce: GroupElement, secret: GroupElement, group: Group,
                          rng: RandomSource = None, *,
                          authority_nonce: Optional[GroupElement] = None) -> AuthorityResponse:
    """Authority's reply to a comparer: ``{M.r_T.r_L, r_T}`` with fresh ``r_T``."""
    group._check(request_nonce)
    group._check(secret)
    r_t = _draw(group, rng, authority_nonce)
    return AuthorityResponse(group.product(secret, r_t, request_nonce), r_t)


def submitter_finish(session: IssuanceSession, resp: AuthorityResponse, key: PrivateKey,
                     rng: RandomSource = None, *,
                     blinding_nonce: Optional[GroupElement] = None) -> SubmitterToken:
    """Third move: blind the reply with ``l_L`` and the private key.

    Returns ``{alpha.l_L.(l_R.l_T.M), l_L.l_R.l_T}``.  The authority never
    sees ``l_L``, so it cannot recognise the stored token later.
    """
    _require_role(key, Role.SUBMITTER)
    group = session.group
    for x in (resp.cipher, resp.authority_nonce, key.key):
        group._check(x)
    l_l = _draw(group, rng, blinding_nonce)
    session._consume(Role.SUBMITTER)
    tag = group.product(l_l, session.first_nonce, resp.authority_nonce)
    cipher = group.product(key.key, l_l, resp.cipher)
    return SubmitterToken(cipher, tag)


def comparer_finish(session: IssuanceSession, resp: AuthorityResponse, key: PrivateKey,
                    rng: RandomSource = None, *,
                    blinding_nonce: Optional[GroupElement] = None) -> ComparerToken:
    """Third move for a comparer: ``{(M.r_T.r_L).r_R.beta, r_T.r_L.r_R}``."""
    _require_role(key, Role.COMPARER)
    group = session.group
    for x in (resp.cipher, resp.authority_nonce, key.key):
        group._check(x)
    r_r = _draw(group, rng, blinding_nonce)
    session._consume(Role.COMPARER)
    tag = group.product(resp.authority_nonce, session.first_nonce, r_r)
    cipher = group.product(resp.cipher, r_r, key.key)
    return ComparerToken(cipher, tag)


def issue_submitter_token(group: Group, secret: GroupElement, key: PrivateKey,
                          rng: RandomSource = None) -> SubmitterToken:
    """Run all three submitter moves locally (authority included)."""
    rng = as_rng(rng)
    session, l_r = submitter_begin(group, rng)
    return submitter_finish(session, authority_issue_left(l_r, secret, group, rng), key, rng)


def issue_comparer_token(group: Group, secret: GroupElement, key: PrivateKey,
                         rng: RandomSource = None) -> ComparerToken:
    rng = as_rng(rng)
    session, r_l = comparer_begin(group, rng)
    return comparer_finish(session, authority_issue_right(r_l, secret, group, rng), key, rng)


# comparison


def make_challenge(token: SubmitterToken, key: PrivateKey, rng: RandomSource = None, *,
                   blind: Optional[GroupElement] = None) -> Challenge:
    """Blind a submitter token for one comparison: ``{r.alpha.a.M, r.alpha.a}``.

    ``r`` is fresh per call and discarded, so two challenges from the same
    token are unlinkable.
    """
    _require_role(key, Role.SUBMITTER)
    group = _same_backend(token.cipher, token.tag, key.key)
    r = _draw(group, rng, blind)
    return Challenge(group.compose(r, token.cipher), group.product(r, key.key, token.tag))


def comparison_values(ch: Challenge, token: ComparerToken, key: PrivateKey) -> tuple[GroupElement, GroupElement]:
    """The two products a comparer checks for equality."""
    _require_role(key, Role.COMPARER)
    group = _same_backend(ch.blinded_cipher, ch.blinded_tag, token.cipher, token.tag, key.key)
    left = group.product(ch.blinded_cipher, token.tag, key.key)
    right = group.compose(ch.blinded_tag, token.cipher)
    return left, right


def compare(ch: Challenge, token: ComparerToken, key: PrivateKey) -> bool:
    """True iff the challenge and the comparer token hide the same secret."""
    left, right = comparison_values(ch, token, key)
    return left == right


def split_submitter_token(token: SubmitterToken, key: PrivateKey, rng: RandomSource = None, *,
                          new_key: Optional[GroupElement] = None,
                          reblind: Optional[GroupElement] = None) -> tuple[PrivateKey, SubmitterToken]:
    """Derive an independently keyed copy of a submitter token.

    With fresh ``r`` and ``s`` the copy is ``{r.s.(alpha.a.M), s.alpha.a}``
    under key ``r``; it matches exactly the comparer tokens the original
    matches.
    """
    _require_role(key, Role.SUBMITTER)
    group = _same_backend(token.cipher, token.tag, key.key)
    rng = as_rng(rng)
    r = _draw(group, rng, new_key)
    s = _draw(group, rng, reblind)
    copy = SubmitterToken(group.product(r, s, token.cipher), group.product(s, key.key, token.tag))
    return PrivateKey(r, Role.SUBMITTER), copy


# wire format

MSG_SUBMITTER_TOKEN = 0x10
MSG_COMPARER_TOKEN = 0x11
MSG_CHALLENGE = 0x12
MSG_AUTHORITY_RESPONSE = 0x13
MSG_SETUP_REQUEST = 0x14
MSG_VERDICT = 0x15
MSG_PRIVATE_KEY = 0x16

_ROLE_CODES = {Role.SUBMITTER: 0, Role.COMPARER: 1}
_ROLES_BY_CODE = {v: k for k, v in _ROLE_CODES.items()}


@dataclass(frozen=True)
class SetupRequest:
    """First issuance move as carried over the wire."""
    role: Role
    attribute: str
    nonce: GroupElement


@dataclass(frozen=True)
class Verdict:
    accepted: bool


Message = Union[SubmitterToken, ComparerToken, Challenge, AuthorityResponse,
                SetupRequest, Verdict, PrivateKey]

_PAIRS = {
    SubmitterToken: (MSG_SUBMITTER_TOKEN, 'cipher', 'tag'),
    ComparerToken: (MSG_COMPARER_TOKEN, 'cipher', 'tag'),
    Challenge: (MSG_CHALLENGE, 'blinded_cipher', 'blinded_tag'),
    AuthorityResponse: (MSG_AUTHORITY_RESPONSE, 'cipher', 'authority_nonce'),
}
_PAIRS_BY_TAG = {tag: (cls, a, b) for cls, (tag, a, b) in _PAIRS.items()}


def _body(msg: Message) -> bytes:
    if type(msg) in _PAIRS:
        tag, first, second = _PAIRS[type(msg)]
        x, y = getattr(msg, first), getattr(msg, second)
        _same_backend(x, y)
        return bytes([tag]) + x.encode() + y.encode()
    if isinstance(msg, SetupRequest):
        attribute = msg.attribute.encode('utf-8')
        if len(attribute) > 0xFFFF:
            raise ValueError('attribute value too long')
        return (struct.pack('>BBH', MSG_SETUP_REQUEST, _ROLE_CODES[msg.role], len(attribute))
                + attribute + msg.nonce.encode())
    if isinstance(msg, Verdict):
        return bytes([MSG_VERDICT, int(msg.accepted)])
    if isinstance(msg, PrivateKey):
        return bytes([MSG_PRIVATE_KEY, _ROLE_CODES[msg.role]]) + msg.key.encode()
    raise TypeError(f'cannot encode {type(msg).__name__}')


def encode_message(msg: Message) -> bytes:
    """Serialize a protocol value: 4-byte big-endian length, then the body."""
    body = _body(msg)
    return struct.pack('>I', len(body)) + body


def _role_from(code: int) -> Role:
    try:
        return _ROLES_BY_CODE[code]
    except KeyError:
        raise MalformedEncoding(f'unknown role code {code}') from None


def decode_message(data: bytes) -> Message:
    """Inverse of :func:`encode_message`; strict about framing."""
    data = bytes(data)
    if len(data) < 5:
        raise MalformedEncoding('message shorter than its header')
    (length,) = struct.unpack_from('>I', data)
    if length != len(data) - 4:
        raise MalformedEncoding(f'length prefix {length} disagrees with body of {len(data) - 4} bytes')
    tag = data[4]
    offset = 5
    if tag in _PAIRS_BY_TAG:
        cls, _, _ = _PAIRS_BY_TAG[tag]
        x, offset = decode_element_prefix(data, offset)
        y, offset = decode_element_prefix(data, offset)
        if x.backend_id != y.backend_id:
            raise MalformedEncoding('message elements from different backends')
        msg: Message = cls(x, y)
    elif tag == MSG_SETUP_REQUEST:
        if len(data) < offset + 3:
            raise MalformedEncoding('truncated setup request')
        role_code, n = struct.unpack_from('>BH', data, offset)
        offset += 3
        raw = data[offset:offset + n]
        if len(raw) != n:
            raise MalformedEncoding('truncated attribute value')
        try:
            attribute = raw.decode('utf-8')
        except UnicodeDecodeError:
            raise MalformedEncoding('attribute value is not UTF-8') from None
        nonce, offset = decode_element_prefix(data, offset + n)
        msg = SetupRequest(_role_from(role_code), attribute, nonce)
    elif tag == MSG_VERDICT:
        if len(data) != 6 or data[5] not in (0, 1):
            raise MalformedEncoding('bad verdict body')
        msg, offset = Verdict(bool(data[5])), 6
    elif tag == MSG_PRIVATE_KEY:
        if len(data) < 6:
            raise MalformedEncoding('truncated private key')
        role = _role_from(data[5])
        key, offset = decode_element_prefix(data, 6)
        msg = PrivateKey(key, role)
    else:
        raise MalformedEncoding(f'unknown message tag 0x{tag:02x}')
    if offset != len(data):
        raise MalformedEncoding(f'{len(data) - offset} trailing bytes after message')
    return msg
