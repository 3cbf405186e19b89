"""Executable versions of the security arguments.

* Oracle reductions between "division is easy" and "inversion is easy".
* Witness constructions: alternative secrets under which an adversary's
  view is byte-for-byte the same while the hidden bit is flipped.
* The cross-authority false-positive experiment.
* A distinguishing-game harness, with an exact (enumerating) variant for
  toy groups.

Nothing here is meant to run against a sealed backend except the
collision experiment; the witnesses need ``invert`` and say so by raising
:class:`CapabilityUnavailable`.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional

from .errors import OracleFailed
from .groups import Group, GroupElement, RandomSource, as_rng
from .protocol import (
    PrivateKey, Role, authority_issue_left, authority_issue_right, compare,
    comparer_begin, comparer_finish, make_challenge, submitter_begin, submitter_finish,
)

LEFT = 'left'
RIGHT = 'right'

WITNESS_CASES = ('T2', 'T3', 'A2', 'B1')
SCENARIOS = WITNESS_CASES + ('open_token_pair',)


# oracles

@dataclass(frozen=True)
class DivisionOracle:
    """Solves ``known @ y == target`` (right) or ``x @ known == target`` (left).

    ``solver(known, target)`` returns the missing factor, or None to decline.
    """
    side: str
    solver: Callable[[GroupElement, GroupElement], Optional[GroupElement]]

    def __call__(self, known, target):
        return self.solver(known, target)


@dataclass(frozen=True)
class InversionOracle:
    solver: Callable[[GroupElement], Optional[GroupElement]]

    def __call__(self, x):
        return self.solver(x)


def perfect_inversion_oracle(group: Group) -> InversionOracle:
    return InversionOracle(group.invert)


def perfect_division_oracle(group: Group, side: str) -> DivisionOracle:
    """Division oracle that cheats by inverting (transparent groups only)."""
    if side == RIGHT:
        return DivisionOracle(RIGHT, lambda known, target: group.compose(group.invert(known), target))
    return DivisionOracle(LEFT, lambda known, target: group.compose(target, group.invert(known)))


def search_division_oracle(group: Group, side: str) -> DivisionOracle:
    """Division by exhaustive search; needs only ``compose``."""
    def solve(known, target):
        for y in group.elements():
            product = group.compose(known, y) if side == RIGHT else group.compose(y, known)
            if product == target:
                return y
        return None
    return DivisionOracle(side, solve)


def division_via_inversion(inv: InversionOracle, side: str,
                           known: GroupElement, target: GroupElement) -> GroupElement:
    """Turn an inversion oracle into a division solver."""
    group = known.group
    known_inv = inv(known)
    if known_inv is None:
        raise OracleFailed('inversion oracle declined')
    if side == RIGHT:
        return group.compose(known_inv, target)
    if side == LEFT:
        return group.compose(target, known_inv)
    raise ValueError(f'side must be {LEFT!r} or {RIGHT!r}')


def inversion_via_division(div: DivisionOracle, x: GroupElement, rng: RandomSource = None, *,
                           mask: Optional[GroupElement] = None) -> GroupElement:
    """Turn a division oracle into an inverter.

    Right oracle: ask for ``y`` with ``(r @ x) @ y == r``; then ``y == x^-1``.
    Left oracle: ask for ``z`` with ``z @ (x @ r) == r``; again ``z == x^-1``.
    The random mask keeps the oracle's input independent of ``x``.
    """
    group = x.group
    r = mask if mask is not None else group.random_element(rng)
    if div.side == RIGHT:
        y = div(group.compose(r, x), r)
    elif div.side == LEFT:
        y = div(group.compose(x, r), r)
    else:
        raise ValueError(f'unknown oracle side {div.side!r}')
    if y is None:
        raise OracleFailed('division oracle declined')
    return y


# witnesses

@dataclass
class WitnessReport:
    case_id: str
    constructed_values: dict[str, GroupElement]
    identities_checked: list[tuple[bytes, bytes, bool]] = field(default_factory=list)
    note: str = ''

    @property
    def passed(self) -> bool:
        return bool(self.identities_checked) and all(eq for _, _, eq in self.identities_checked)

    def check(self, lhs: GroupElement, rhs: GroupElement) -> None:
        a, b = lhs.encode(), rhs.encode()
        self.identities_checked.append((a, b, a == b))


def witness_case_T2(alpha: GroupElement, a: GroupElement, m_i: GroupElement, m_other: GroupElement,
                    *, corrected: bool = True) -> WitnessReport:
    """Key swap that makes a submitter token look like it hides ``m_other``.

    Builds ``alpha' = alpha.a.M_i.M_other^-1.a^-1`` so that
    ``alpha'.a.M_other == alpha.a.M_i``.  With ``corrected=False`` the
    factor ``M_i`` is dropped, which is the form that fails the identity;
    it is kept so the failure can be demonstrated.
    """
    g = alpha.group
    a_inv = g.invert(a)
    if corrected:
        alpha2 = g.product(alpha, a, m_i, g.invert(m_other), a_inv)
        note = ''
    else:
        alpha2 = g.product(alpha, a, g.invert(m_other), a_inv)
        note = 'uncorrected key swap (no M_i factor)'
    report = WitnessReport('T2', {"alpha'": alpha2}, note=note)
    report.check(g.product(alpha2, a, m_other), g.product(alpha, a, m_i))
    return report


def _t3_construction(case_id, alpha, a0, m0, a1, m1) -> WitnessReport:
    g = alpha.group
    alpha2 = g.product(alpha, a1, m1, g.invert(m0), g.invert(a1))
    m2 = g.product(g.invert(a0), g.invert(alpha2), alpha, a0, m0)
    report = WitnessReport(case_id, {"alpha'": alpha2, "M'": m2})
    report.check(g.product(alpha2, a0, m2), g.product(alpha, a0, m0))
    report.check(g.product(alpha2, a1, m0), g.product(alpha, a1, m1))
    return report


def witness_case_T3(alpha, a0, m0, a1, m1) -> WitnessReport:
    """Alternative key and secret making two tokens trade places.

    ``alpha'.a0.M' == alpha.a0.M0`` and ``alpha'.a1.M0 == alpha.a1.M1``.
    """
    return _t3_construction('T3', alpha, a0, m0, a1, m1)


def witness_case_B1(alpha, a0, m0, a1, m1) -> WitnessReport:
    """Same construction as T3, viewed from the comparer's side (also covers A3)."""
    return _t3_construction('B1', alpha, a0, m0, a1, m1)


def witness_case_A2(beta, b, m0, m1) -> WitnessReport:
    """Comparer key swap: ``M1.b.beta' == M0.b.beta``."""
    g = beta.group
    beta2 = g.product(g.invert(b), g.invert(m1), m0, b, beta)
    report = WitnessReport('A2', {"beta'": beta2})
    report.check(g.product(m1, b, beta2), g.product(m0, b, beta))
    return report


def build_witness(case_id: str, instance: Mapping[str, GroupElement]) -> WitnessReport:
    i = instance
    if case_id == 'T2':
        return witness_case_T2(i['alpha'], i['a'], i['M_i'], i['M_other'])
    if case_id == 'T3':
        return witness_case_T3(i['alpha'], i['a0'], i['M0'], i['a1'], i['M1'])
    if case_id == 'B1':
        return witness_case_B1(i['alpha'], i['a0'], i['M0'], i['a1'], i['M1'])
    if case_id == 'A2':
        return witness_case_A2(i['beta'], i['b'], i['M0'], i['M1'])
    raise ValueError(f'unknown witness case {case_id!r}')


_INSTANCE_KEYS = {
    'T2': ('alpha', 'a', 'M_i', 'M_other'),
    'T3': ('alpha', 'a0', 'M0', 'a1', 'M1'),
    'B1': ('alpha', 'a0', 'M0', 'a1', 'M1', 'b', 'beta', 'r'),
    'A2': ('alpha', 'a0', 'M0', 'a1', 'M1', 'b', 'beta'),
}


def random_instance(case_id: str, group: Group, rng: RandomSource = None) -> dict[str, GroupElement]:
    rng = as_rng(rng)
    return {k: group.random_element(rng) for k in _INSTANCE_KEYS[case_id]}


def _left(g, key, tag, m):
    return (g.product(key, tag, m), tag)


def _right(g, m, tag, key):
    return (g.product(m, tag, key), tag)


def _serialize(view: Iterable[GroupElement]) -> bytes:
    return b''.join(x.encode() for x in view)


def adversary_views(case_id: str, instance: Mapping[str, GroupElement],
                    report: Optional[WitnessReport] = None) -> tuple[bytes, bytes]:
    """Serialized adversary view in the real world and in the witness world.

    Each view is computed from its own world's secrets; the worlds disagree
    on which slot the known/matching secret belongs to.
    """
    i = instance
    g = next(iter(i.values())).group
    report = report if report is not None else build_witness(case_id, instance)
    w = report.constructed_values
    if case_id == 'T2':
        # the authority knows both secrets and sees one token
        m0, m1 = i['M_i'], i['M_other']
        real = (m0, m1, *_left(g, i['alpha'], i['a'], i['M_i']))
        alt = (m0, m1, *_left(g, w["alpha'"], i['a'], i['M_other']))
    elif case_id == 'T3':
        # two tokens under one key, plus the secret of slot 0 (real) / slot 1 (alt)
        real = (*_left(g, i['alpha'], i['a0'], i['M0']), *_left(g, i['alpha'], i['a1'], i['M1']), i['M0'])
        n0, n1 = w["M'"], i['M0']
        alt = (*_left(g, w["alpha'"], i['a0'], n0), *_left(g, w["alpha'"], i['a1'], n1), n1)
    elif case_id == 'B1':
        # comparer sees both submitter tokens, its own token and key, and a
        # challenge built from the token that matches
        key, alt_key = i['alpha'], w["alpha'"]
        n0, n1 = w["M'"], i['M0']
        r = i['r']
        # alt-world mask chosen so that r'.alpha'.a1 == r.alpha.a0; it is a
        # bijection of r, so the challenge distribution is unchanged
        r_alt = g.product(r, key, i['a0'], g.invert(i['a1']), g.invert(alt_key))
        real = (*_left(g, key, i['a0'], i['M0']), *_left(g, key, i['a1'], i['M1']),
                *_right(g, i['M0'], i['b'], i['beta']), i['beta'],
                g.product(r, key, i['a0'], i['M0']), g.product(r, key, i['a0']))
        alt = (*_left(g, alt_key, i['a0'], n0), *_left(g, alt_key, i['a1'], n1),
               *_right(g, n1, i['b'], i['beta']), i['beta'],
               g.product(r_alt, alt_key, i['a1'], n1), g.product(r_alt, alt_key, i['a1']))
    elif case_id == 'A2':
        # submitter knows its key, both its tokens and one comparer token
        alpha = i['alpha']
        real = (*_left(g, alpha, i['a0'], i['M0']), *_left(g, alpha, i['a1'], i['M1']),
                *_right(g, i['M0'], i['b'], i['beta']), alpha)
        n0, n1 = i['M1'], i['M0']
        c0, c1 = i['a1'], i['a0']
        alt = (*_left(g, alpha, c1, n1), *_left(g, alpha, c0, n0),
               *_right(g, n0, i['b'], w["beta'"]), alpha)
    else:
        raise ValueError(f'unknown witness case {case_id!r}')
    return _serialize(real), _serialize(alt)


def transcript_equivalence(case_id: str, instance: Mapping[str, GroupElement],
                           report: Optional[WitnessReport] = None) -> bool:
    """True iff the adversary's view is identical in both worlds."""
    real, alt = adversary_views(case_id, instance, report)
    return real == alt


# experiments

def collision_experiment(group: Group, trials: int, rng: RandomSource = None, *,
                         shared_secret: bool = False, trace: Optional[list] = None) -> float:
    """Fraction of cross-authority comparisons that (falsely) accept.

    Each trial issues a submitter token from one authority and a comparer
    token from another, each drawing its secret independently, then runs a
    full comparison.  ``shared_secret=True`` forces both authorities to
    use the same secret.  If ``trace`` is a list, the running accept rate
    after each trial is appended to it.
    """
    rng = as_rng(rng)
    accepted = 0
    for t in range(1, trials + 1):
        m_left = group.random_element(rng)
        m_right = m_left if shared_secret else group.random_element(rng)
        alpha = PrivateKey(group.random_element(rng), Role.SUBMITTER)
        beta = PrivateKey(group.random_element(rng), Role.COMPARER)
        session, l_r = submitter_begin(group, rng)
        p = submitter_finish(session, authority_issue_left(l_r, m_left, group, rng), alpha, rng)
        session, r_l = comparer_begin(group, rng)
        v = comparer_finish(session, authority_issue_right(r_l, m_right, group, rng), beta, rng)
        accepted += compare(make_challenge(p, alpha, rng), v, beta)
        if trace is not None:
            trace.append(accepted / t)
    return accepted / trials if trials else 0.0


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n)


View = tuple
Adversary = Callable[[Mapping[str, object]], int]


def sample_view(scenario: str, group: Group, bit: int, rng: RandomSource = None, *,
                leak_key: bool = False) -> dict[str, object]:
    """Draw one adversary view for the distinguishing game with hidden ``bit``.

    ``leak_key`` hands the adversary the holder's private key as well,
    which breaks the game on purpose (used to check the harness notices).
    """
    rng = as_rng(rng)
    g = group
    rand = lambda: g.random_element(rng)  # noqa: E731
    alpha, a0, a1, m0, m1 = rand(), rand(), rand(), rand(), rand()
    secrets = (m0, m1)
    if scenario == 'T2':
        view = {'M0': m0, 'M1': m1, 'token': _left(g, alpha, a0, secrets[bit])}
    elif scenario == 'T3':
        view = {'token0': _left(g, alpha, a0, m0), 'token1': _left(g, alpha, a1, m1),
                'known': secrets[bit]}
    elif scenario == 'A2':
        b, beta = rand(), rand()
        view = {'token0': _left(g, alpha, a0, m0), 'token1': _left(g, alpha, a1, m1),
                'comparer_token': _right(g, secrets[bit], b, beta), 'alpha': alpha}
    elif scenario == 'B1':
        b, beta, r = rand(), rand(), rand()
        tags = (a0, a1)
        view = {'token0': _left(g, alpha, a0, m0), 'token1': _left(g, alpha, a1, m1),
                'comparer_token': _right(g, secrets[bit], b, beta), 'beta': beta,
                'challenge': (g.product(r, alpha, tags[bit], secrets[bit]),
                              g.product(r, alpha, tags[bit]))}
    elif scenario == 'open_token_pair':
        view = {'M0': m0, 'M1': m1, 'token0': _left(g, alpha, a0, secrets[bit]),
                'token1': _left(g, alpha, a1, secrets[1 - bit])}
    else:
        raise ValueError(f'unknown scenario {scenario!r}')
    if leak_key:
        view['alpha'] = alpha
    return view


def distinguisher_harness(scenario: str, adversary: Adversary, trials: int, group: Group,
                          rng: RandomSource = None, *, leak_key: bool = False) -> float:
    """Empirical ``|Pr(adversary guesses the bit) - 1/2|`` over ``trials`` games."""
    rng = as_rng(rng)
    correct = 0
    for _ in range(trials):
        bit = rng.randrange(2)
        guess = adversary(sample_view(scenario, group, bit, rng, leak_key=leak_key))
        correct += int(guess) == bit
    return abs(correct / trials - 0.5)


_ENUM_ARITY = {'T2': 5, 'T3': 5, 'A2': 7, 'B1': 8, 'open_token_pair': 5}


def _views_for_bit(scenario: str, group: Group, bit: int) -> Counter:
    g = group
    elems = list(g.elements())
    counts: Counter = Counter()
    for combo in itertools.product(elems, repeat=_ENUM_ARITY[scenario]):
        alpha, a0, a1, m0, m1 = combo[:5]
        secrets = (m0, m1)
        if scenario == 'T2':
            view = (m0, m1, *_left(g, alpha, a0, secrets[bit]))
        elif scenario == 'T3':
            view = (*_left(g, alpha, a0, m0), *_left(g, alpha, a1, m1), secrets[bit])
        elif scenario == 'A2':
            b, beta = combo[5:]
            view = (*_left(g, alpha, a0, m0), *_left(g, alpha, a1, m1),
                    *_right(g, secrets[bit], b, beta), alpha)
        elif scenario == 'B1':
            b, beta, r = combo[5:]
            tag = (a0, a1)[bit]
            view = (*_left(g, alpha, a0, m0), *_left(g, alpha, a1, m1),
                    *_right(g, secrets[bit], b, beta), beta,
                    g.product(r, alpha, tag, secrets[bit]), g.product(r, alpha, tag))
        else:
            view = (m0, m1, *_left(g, alpha, a0, secrets[bit]), *_left(g, alpha, a1, secrets[1 - bit]))
        counts[tuple(x.payload for x in view)] += 1
    return counts


def exact_max_advantage(scenario: str, group: Group) -> Fraction:
    """Best advantage of *any* deterministic adversary, computed exactly.

    Enumerates every secret assignment for both values of the hidden bit.
    The optimal adversary answers, per view, whichever bit makes the view
    more likely, so the maximum over all deterministic adversaries is half
    the total-variation distance between the two view distributions.
    Feasible only for tiny groups (|G|**8 assignments for B1).
    """
    zero = _views_for_bit(scenario, group, 0)
    one = _views_for_bit(scenario, group, 1)
    total = sum(zero.values())
    diff = sum(abs(zero[v] - one[v]) for v in zero.keys() | one.keys())
    return Fraction(diff, 4 * total)
