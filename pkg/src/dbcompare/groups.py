"""Finite groups the protocol is generic over.

Three transparent backends are provided, plus a wrapper that seals any of
them by refusing inversion:

    - ``Z{n}``        additive group of residues mod n (abelian)
    - ``Z{p}*``       multiplicative group of units mod a prime p (abelian)
    - ``S{n}``        symmetric group on {0..n-1} (non-abelian for n >= 3)
    - ``sealed-...``  any of the above with ``invert`` disabled

Elements are immutable :class:`GroupElement` values tagged with the id of
their backend.  ``x @ y`` is shorthand for ``compose(x, y)``.

Permutations are stored in one-line notation and composed right to left,
``(p @ q)(i) == p(q(i))``.
"""

from __future__ import annotations

import functools
import itertools
import math
import random
import re
import struct
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterator, Optional, Union

from .errors import BackendMismatch, CapabilityUnavailable, MalformedEncoding

__all__ = [
    'GroupDescriptor', 'GroupElement', 'Group',
    'AdditiveGroup', 'MultiplicativeGroup', 'SymmetricGroup', 'SealedGroup',
    'get_group', 'decode_element', 'decode_element_prefix', 'as_rng',
    'TRANSPARENT', 'SEALED',
]

TRANSPARENT = 'transparent'
SEALED = 'sealed'

TAG_ADDITIVE = 0x01
TAG_MULTIPLICATIVE = 0x02
TAG_PERMUTATION = 0x03
SEALED_BIT = 0x80

_MAX_U32 = 0xFFFFFFFF
_MAX_DEGREE = 0xFFFF

Payload = Union[int, tuple]
RandomSource = Union[None, int, random.Random]


def as_rng(source: RandomSource = None) -> random.Random:
    """Normalize a seed or generator into a ``random.Random``.

    ``None`` gives an OS-backed generator; an int gives a seeded,
    reproducible one; a ``random.Random`` instance is used as is.
    """
    if source is None:
        return random.SystemRandom()
    if isinstance(source, random.Random):
        return source
    if isinstance(source, int):
        return random.Random(source)
    raise TypeError(f'cannot use {type(source).__name__} as a randomness source')


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


@dataclass(frozen=True)
class GroupDescriptor:
    backend_id: str
    order: Optional[int]
    abelian: bool
    capability: str


@dataclass(frozen=True)
class GroupElement:
    """An element of some backend, in canonical form.

    Two elements are equal exactly when their canonical encodings are equal.
    """
    backend_id: str
    payload: Payload

    @property
    def group(self) -> 'Group':
        return get_group(self.backend_id)

    def encode(self) -> bytes:
        return self.group.encode_element(self)

    def __matmul__(self, other: 'GroupElement') -> 'GroupElement':
        return self.group.compose(self, other)

    def __repr__(self) -> str:
        return f'<{self.backend_id}:{self.payload!r}>'


class Group(ABC):
    """Common surface of every backend.

    Subclasses implement the payload-level hooks (``_op``, ``_identity``,
    ``_inverse``, ``_sample``, ...); this class adds backend checks, element
    wrapping and the canonical encoding.
    """

    tag: int
    backend_id: str
    order: int
    abelian: bool
    capability = TRANSPARENT

    @property
    def descriptor(self) -> GroupDescriptor:
        return GroupDescriptor(self.backend_id, self.order, self.abelian, self.capability)

    @property
    def is_sealed(self) -> bool:
        return self.capability == SEALED

    def __repr__(self) -> str:
        return f'{type(self).__name__}({self.backend_id!r})'

    def __eq__(self, other) -> bool:
        return isinstance(other, Group) and other.backend_id == self.backend_id

    def __hash__(self) -> int:
        return hash(self.backend_id)

    # element plumbing

    def _wrap(self, payload: Payload) -> GroupElement:
        return GroupElement(self.backend_id, payload)

    def _check(self, x: GroupElement) -> Payload:
        if not isinstance(x, GroupElement):
            raise TypeError(f'expected GroupElement, got {type(x).__name__}')
        if x.backend_id != self.backend_id:
            raise BackendMismatch(f'{x.backend_id} element used in {self.backend_id}')
        return x.payload

    def element(self, payload) -> GroupElement:
        """Build an element from a raw payload, validating canonical form."""
        canonical = self._normalize(payload)
        if canonical is None:
            raise ValueError(f'{payload!r} is not an element of {self.backend_id}')
        return self._wrap(canonical)

    def contains(self, x: GroupElement) -> bool:
        return isinstance(x, GroupElement) and x.backend_id == self.backend_id

    def elements(self) -> Iterator[GroupElement]:
        """Enumerate every element, in a fixed order."""
        return map(self._wrap, self._iter_payloads())

    # group operations

    def compose(self, x: GroupElement, y: GroupElement) -> GroupElement:
        return self._wrap(self._op(self._check(x), self._check(y)))

    def product(self, *xs: GroupElement) -> GroupElement:
        """Left-to-right composition of any number of elements."""
        acc = self._identity()
        for x in xs:
            acc = self._op(acc, self._check(x))
        return self._wrap(acc)

    def identity(self) -> GroupElement:
        return self._wrap(self._identity())

    def invert(self, x: GroupElement) -> GroupElement:
        return self._wrap(self._inverse(self._check(x)))

    def random_element(self, rng: RandomSource = None) -> GroupElement:
        return self._wrap(self._sample(as_rng(rng)))

    # encoding

    def encode_element(self, x: GroupElement) -> bytes:
        return self._header() + self._encode_payload(self._check(x))

    def decode_element(self, data: bytes) -> GroupElement:
        x = decode_element(data)
        if x.backend_id != self.backend_id:
            raise BackendMismatch(f'{x.backend_id} encoding decoded by {self.backend_id}')
        return x

    # hooks

    @abstractmethod
    def _op(self, p: Payload, q: Payload) -> Payload: ...

    @abstractmethod
    def _identity(self) -> Payload: ...

    @abstractmethod
    def _inverse(self, p: Payload) -> Payload: ...

    @abstractmethod
    def _sample(self, rng: random.Random) -> Payload: ...

    @abstractmethod
    def _normalize(self, payload) -> Optional[Payload]:
        """Return the canonical payload, or None if it is not an element."""

    @abstractmethod
    def _iter_payloads(self) -> Iterator[Payload]: ...

    @abstractmethod
    def _header(self) -> bytes: ...

    @abstractmethod
    def _encode_payload(self, p: Payload) -> bytes: ...

    @abstractmethod
    def _decode_payload(self, data: bytes, offset: int) -> tuple[Payload, int]: ...


class _ResidueGroup(Group):
    modulus: int

    def _header(self) -> bytes:
        return struct.pack('>BI', self.tag, self.modulus)

    def _encode_payload(self, p: int) -> bytes:
        return struct.pack('>I', p)

    def _decode_payload(self, data: bytes, offset: int) -> tuple[int, int]:
        if len(data) < offset + 4:
            raise MalformedEncoding('truncated residue')
        (value,) = struct.unpack_from('>I', data, offset)
        if self._normalize(value) is None:
            raise MalformedEncoding(f'residue {value} out of range for {self.backend_id}')
        return value, offset + 4


class AdditiveGroup(_ResidueGroup):
    """Residues mod n under addition."""

    tag = TAG_ADDITIVE
    abelian = True

    def __init__(self, n: int):
        if not 1 <= n <= _MAX_U32:
            raise ValueError(f'modulus must be in [1, 2**32), got {n}')
        self.modulus = self.order = n
        self.backend_id = f'Z{n}'

    def _op(self, p, q):
        return (p + q) % self.modulus

    def _identity(self):
        return 0

    def _inverse(self, p):
        return -p % self.modulus

    def _sample(self, rng):
        return rng.randrange(self.modulus)

    def _normalize(self, payload):
        if isinstance(payload, int) and not isinstance(payload, bool) and 0 <= payload < self.modulus:
            return payload
        return None

    def _iter_payloads(self):
        return iter(range(self.modulus))


class MultiplicativeGroup(_ResidueGroup):
    """Units mod a prime p under multiplication; order p - 1."""

    tag = TAG_MULTIPLICATIVE
    abelian = True

    def __init__(self, p: int):
        if not (2 <= p <= _MAX_U32 and _is_prime(p)):
            raise ValueError(f'modulus must be a prime below 2**32, got {p}')
        self.modulus = p
        self.order = p - 1
        self.backend_id = f'Z{p}*'

    def _op(self, p, q):
        return p * q % self.modulus

    def _identity(self):
        return 1

    def _inverse(self, p):
        return pow(p, -1, self.modulus)

    def _sample(self, rng):
        while True:
            value = rng.randrange(self.modulus)
            if value:
                return value

    def _normalize(self, payload):
        if isinstance(payload, int) and not isinstance(payload, bool) and 1 <= payload < self.modulus:
            return payload
        return None

    def _iter_payloads(self):
        return iter(range(1, self.modulus))


class SymmetricGroup(Group):
    """Permutations of {0..n-1} in one-line notation, composed right to left."""

    tag = TAG_PERMUTATION

    def __init__(self, degree: int):
        if not 1 <= degree <= _MAX_DEGREE:
            raise ValueError(f'degree must be in [1, 65535], got {degree}')
        self.degree = degree
        self.order = math.factorial(degree)
        self.abelian = degree <= 2
        self.backend_id = f'S{degree}'

    def _op(self, p, q):
        return tuple(p[i] for i in q)

    def _identity(self):
        return tuple(range(self.degree))

    def _inverse(self, p):
        inv = [0] * self.degree
        for i, image in enumerate(p):
            inv[image] = i
        return tuple(inv)

    def _sample(self, rng):
        perm = list(range(self.degree))
        rng.shuffle(perm)  # Fisher-Yates
        return tuple(perm)

    def _normalize(self, payload):
        try:
            perm = tuple(payload)
        except TypeError:
            return None
        if len(perm) != self.degree or sorted(perm) != list(range(self.degree)):
            return None
        if not all(type(v) is int for v in perm):
            return None
        return perm

    def _iter_payloads(self):
        return itertools.permutations(range(self.degree))

    def _header(self) -> bytes:
        return struct.pack('>BH', self.tag, self.degree)

    def _encode_payload(self, p) -> bytes:
        return struct.pack(f'>{self.degree}H', *p)

    def _decode_payload(self, data, offset):
        end = offset + 2 * self.degree
        if len(data) < end:
            raise MalformedEncoding('truncated permutation')
        perm = struct.unpack_from(f'>{self.degree}H', data, offset)
        if sorted(perm) != list(range(self.degree)):
            raise MalformedEncoding(f'{list(perm)} is not a permutation of {self.degree} points')
        return tuple(perm), end


class SealedGroup(Group):
    """Wraps a transparent backend and refuses to invert.

    Everything except ``invert`` is delegated unchanged; the wrapper exists
    so protocol code can be run against a group in which inversion is, by
    fiat, unavailable.
    """

    capability = SEALED

    def __init__(self, inner: Group):
        if inner.is_sealed:
            raise ValueError('backend is already sealed')
        self.inner = inner
        self.tag = inner.tag | SEALED_BIT
        self.order = inner.order
        self.abelian = inner.abelian
        self.backend_id = f'sealed-{inner.backend_id}'

    def _op(self, p, q):
        return self.inner._op(p, q)

    def _identity(self):
        return self.inner._identity()

    def _inverse(self, p):
        raise CapabilityUnavailable(f'{self.backend_id} does not expose inversion')

    def _sample(self, rng):
        return self.inner._sample(rng)

    def _normalize(self, payload):
        return self.inner._normalize(payload)

    def _iter_payloads(self):
        return self.inner._iter_payloads()

    def _header(self) -> bytes:
        header = self.inner._header()
        return bytes([header[0] | SEALED_BIT]) + header[1:]

    def _encode_payload(self, p) -> bytes:
        return self.inner._encode_payload(p)

    def _decode_payload(self, data, offset):
        return self.inner._decode_payload(data, offset)


_BACKEND_RE = re.compile(r'(?P<sealed>sealed-)?(?:Z(?P<n>\d+)(?P<star>\*)?|S(?P<deg>\d+))')


@functools.lru_cache(maxsize=None)
def get_group(backend_id: str) -> Group:
    """Look up (or construct) the backend named by ``backend_id``.

    >>> get_group('Z7').compose(get_group('Z7').element(3), get_group('Z7').element(5))
    <Z7:1>
    """
    m = _BACKEND_RE.fullmatch(backend_id.strip())
    if m is None:
        raise ValueError(f'unknown backend {backend_id!r}')
    if m['deg'] is not None:
        group: Group = SymmetricGroup(int(m['deg']))
    elif m['star']:
        group = MultiplicativeGroup(int(m['n']))
    else:
        group = AdditiveGroup(int(m['n']))
    if m['sealed']:
        group = SealedGroup(group)
    return group


def _parse_header(data: bytes, offset: int) -> tuple[Group, int]:
    if len(data) <= offset:
        raise MalformedEncoding('empty element encoding')
    tag = data[offset]
    base = tag & ~SEALED_BIT
    try:
        if base in (TAG_ADDITIVE, TAG_MULTIPLICATIVE):
            if len(data) < offset + 5:
                raise MalformedEncoding('truncated modulus')
            (n,) = struct.unpack_from('>I', data, offset + 1)
            group: Group = AdditiveGroup(n) if base == TAG_ADDITIVE else MultiplicativeGroup(n)
            offset += 5
        elif base == TAG_PERMUTATION:
            if len(data) < offset + 3:
                raise MalformedEncoding('truncated degree')
            (degree,) = struct.unpack_from('>H', data, offset + 1)
            group = SymmetricGroup(degree)
            offset += 3
        else:
            raise MalformedEncoding(f'unknown element tag 0x{tag:02x}')
    except ValueError as exc:
        if isinstance(exc, MalformedEncoding):
            raise
        raise MalformedEncoding(str(exc)) from None
    if tag & SEALED_BIT:
        group = SealedGroup(group)
    return get_group(group.backend_id), offset


def decode_element_prefix(data: bytes, offset: int = 0) -> tuple[GroupElement, int]:
    """Decode one element starting at ``offset``; return it and the next offset."""
    group, offset = _parse_header(data, offset)
    payload, offset = group._decode_payload(data, offset)
    return group._wrap(payload), offset


def decode_element(data: bytes) -> GroupElement:
    """Inverse of :meth:`Group.encode_element`; rejects trailing bytes."""
    x, end = decode_element_prefix(bytes(data))
    if end != len(data):
        raise MalformedEncoding(f'{len(data) - end} trailing bytes after element')
    return x
