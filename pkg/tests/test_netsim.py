import random

import pytest

from dbcompare import lab
from dbcompare.errors import MalformedEncoding, ScriptInvalid
from dbcompare.groups import get_group
from dbcompare.linkage import bundled_sample
from dbcompare.netsim import (
    CHALLENGE, FAULT, MSG_TYPES, SETUP_REQUEST, SETUP_RESPONSE, VERDICT, AuthorityRealm,
    AuthorityState, ComparerState, Envelope, PartyId, PartySpec, Scenario, SubmitterState,
    decode_envelope, decode_payload, encode_envelope, parse_script, party_step, run_scenario,
)
from dbcompare.protocol import (
    AuthorityResponse, Challenge, ComparerToken, PrivateKey, Role, SetupRequest, Verdict, compare,
    encode_message,
)

SID = bytes.fromhex('0000000000000007')

SAME = """
backend Z101
authority ted
submitter alice authority=ted value=C55-111-555
comparer bob authority=ted value=C55-111-555
comparer dave authority=ted value="Logistics Clerk"
compare alice bob
compare alice dave
"""

CROSS = """
backend Z101
authority ted
authority tomasz
submitter carol authority=ted value=C55-111-555
comparer konstantin authority=tomasz value=C55-111-555
compare carol konstantin
"""


def minimal_payloads():
    g = get_group('Z7')
    e = g.identity()
    return {
        SETUP_REQUEST: encode_message(SetupRequest(Role.SUBMITTER, '', e)),
        SETUP_RESPONSE: encode_message(AuthorityResponse(e, e)),
        CHALLENGE: encode_message(Challenge(e, e)),
        VERDICT: encode_message(Verdict(True)),
        FAULT: b'',
    }


# envelopes


@pytest.mark.parametrize('msg_type', sorted(MSG_TYPES))
def test_envelope_round_trip(msg_type):
    e = Envelope(SID, 'alice', 'ted', msg_type, minimal_payloads()[msg_type])
    data = encode_envelope(e)
    assert decode_envelope(data) == e
    assert encode_envelope(decode_envelope(data)) == data


def test_envelope_byte_layout():
    e = Envelope(SID, 'a', 'bc', VERDICT, b'\x01\x02')
    assert encode_envelope(e).hex() == '00000010' '0000000000000007' '23' '0161' '026263' '0102'


def test_unknown_msg_type():
    data = bytearray(encode_envelope(Envelope(SID, 'a', 'b', VERDICT, b'')))
    data[12] = 0x24
    with pytest.raises(MalformedEncoding):
        decode_envelope(bytes(data))


@pytest.mark.parametrize('delta', [-1, 1, 100])
def test_length_prefix_mismatch(delta):
    data = encode_envelope(Envelope(SID, 'a', 'b', VERDICT, b'xyz'))
    bad = (int.from_bytes(data[:4], 'big') + delta).to_bytes(4, 'big') + data[4:]
    with pytest.raises(MalformedEncoding):
        decode_envelope(bad)


def test_truncated_envelopes():
    data = encode_envelope(Envelope(SID, 'alice', 'bob', VERDICT, b''))
    for cut in range(len(data)):
        with pytest.raises(MalformedEncoding):
            decode_envelope(data[:cut])


def test_payload_schema_checked():
    e = Envelope(SID, 'a', 'b', CHALLENGE, encode_message(Verdict(True)))
    with pytest.raises(MalformedEncoding):
        decode_payload(e)


# single steps


def _z7_comparer(token=None, session=None):
    g = get_group('Z7')
    return ComparerState(PartyId('bob', 'comparer'), g, PrivateKey(g.element(5), Role.COMPARER),
                         'ted', 'x', bytes(8), random.Random(0), token=token, session=session)


def test_submitter_first_move_sends_request():
    g = get_group('Z7')
    state = SubmitterState(PartyId('alice', 'submitter'), g, PrivateKey(g.element(1), Role.SUBMITTER),
                           'ted', 'C55-111-555', bytes(8), (), random.Random(0))
    state2, out = party_step(state, None)
    assert len(out) == 1 and out[0].msg_type == SETUP_REQUEST and out[0].recipient == 'ted'
    req = decode_payload(out[0])
    assert req.role is Role.SUBMITTER and req.attribute == 'C55-111-555'
    assert req.nonce == state2.session.first_nonce
    # a second kick does nothing
    assert party_step(state2, None) == (state2, [])


def test_comparer_answers_running_example():
    g = get_group('Z7')
    state = _z7_comparer(token=ComparerToken(g.element(4), g.element(2)))
    ch = Envelope(SID, 'alice', 'bob', CHALLENGE, encode_message(Challenge(g.element(0), g.element(3))))
    state2, out = party_step(state, ch)
    assert [e.msg_type for e in out] == [VERDICT]
    assert decode_payload(out[0]) == Verdict(True)
    assert out[0].session_id == SID and out[0].recipient == 'alice'
    # a replayed challenge is refused
    _, out = party_step(state2, ch)
    assert out[0].msg_type == FAULT and out[0].payload.startswith(b'UnknownSession')


def test_truncated_payload_gives_fault_and_keeps_state():
    g = get_group('Z7')
    state = _z7_comparer(token=ComparerToken(g.element(4), g.element(2)))
    payload = encode_message(Challenge(g.element(0), g.element(3)))
    ch = Envelope(SID, 'alice', 'bob', CHALLENGE, payload[:-2])
    state2, out = party_step(state, ch)
    assert state2 is state
    assert len(out) == 1 and out[0].msg_type == FAULT and out[0].recipient == 'alice'
    assert out[0].payload.startswith(b'SchemaViolation')


def test_unknown_session_fault():
    g = get_group('Z7')
    state = _z7_comparer()
    resp = Envelope(SID, 'ted', 'bob', SETUP_RESPONSE, encode_message(AuthorityResponse(g.element(1), g.element(1))))
    state2, out = party_step(state, resp)
    assert state2 is state and out[0].payload.startswith(b'UnknownSession')


def test_wrong_backend_response_is_a_fault():
    g = get_group('Z7')
    state, _ = party_step(_z7_comparer(), None)
    z11 = get_group('Z11')
    resp = Envelope(bytes(8), 'ted', 'bob', SETUP_RESPONSE,
                    encode_message(AuthorityResponse(z11.element(1), z11.element(1))))
    state2, out = party_step(state, resp)
    assert state2 is state and out[0].msg_type == FAULT
    assert state2.session.state.value == 'awaiting-authority'


def test_authority_reuses_realm_secret():
    g = get_group('Z101')
    auth = AuthorityState(PartyId('ted', 'authority'), g, AuthorityRealm('ted', g), random.Random(0))
    req = Envelope(SID, 'alice', 'ted', SETUP_REQUEST,
                   encode_message(SetupRequest(Role.SUBMITTER, 'v', g.element(3))))
    auth, _ = party_step(auth, req)
    m = auth.realm.secrets['v']
    auth, out = party_step(auth, req)
    assert auth.realm.secrets == {'v': m}
    resp = decode_payload(out[0])
    assert resp.cipher == g.product(g.element(3), resp.authority_nonce, m)


def test_authority_sends_fault_for_challenge():
    g = get_group('Z7')
    auth = AuthorityState(PartyId('ted', 'authority'), g, AuthorityRealm('ted', g), random.Random(0))
    ch = Envelope(SID, 'alice', 'ted', CHALLENGE, encode_message(Challenge(g.element(0), g.element(3))))
    auth2, out = party_step(auth, ch)
    assert auth2 is auth and out[0].msg_type == FAULT


# scenarios


def test_same_authority_verdicts():
    t = run_scenario(SAME, seed=3)
    assert t.verdicts == {('alice', 'bob'): True, ('alice', 'dave'): False}
    assert not t.faults


@pytest.mark.parametrize('backend', ['Z7', 'S5', 'Z11*', 'sealed-Z101'])
def test_scenarios_on_every_backend(backend):
    t = run_scenario(SAME.replace('Z101', backend), seed=1)
    assert t.verdicts[('alice', 'bob')] is True
    ted = t.states['ted'].realm.secrets
    assert t.verdicts[('alice', 'dave')] == (ted['C55-111-555'] == ted['Logistics Clerk'])


def test_cross_authority_verdict_tracks_secret_equality():
    runs = 2000
    accepted = 0
    for seed in range(runs):
        t = run_scenario(CROSS, seed)
        verdict = t.verdicts[('carol', 'konstantin')]
        m_ted = t.states['ted'].realm.secrets['C55-111-555']
        m_tomasz = t.states['tomasz'].realm.secrets['C55-111-555']
        assert verdict == (m_ted == m_tomasz)
        accepted += verdict
    p = 1 / 101
    assert abs(accepted / runs - p) <= 3 * lab.binomial_sigma(p, runs)


def test_cross_authority_with_preset_equal_secrets():
    g = get_group('Z101')
    m = g.element(42)
    scen = Scenario('Z101', {'ted': {'v': m}, 'tomasz': {'v': m}},
                    [PartySpec('carol', 'submitter', 'ted', 'v'), PartySpec('k', 'comparer', 'tomasz', 'v')],
                    [('carol', 'k')])
    assert run_scenario(scen, 0).verdicts == {('carol', 'k'): True}


def test_deferred_challenge_is_answered():
    # the comparer's issuance is listed last, so the challenge can reach it first
    script = """
    backend S4
    authority ted
    comparer bob authority=ted value=v
    submitter alice authority=ted value=v
    compare alice bob
    """
    t = run_scenario(script, 0)
    assert t.verdicts == {('alice', 'bob'): True}


@pytest.mark.parametrize('script', [SAME, CROSS])
def test_determinism(script):
    for seed in (0, 1, 12345):
        assert run_scenario(script, seed).to_bytes() == run_scenario(script, seed).to_bytes()
    assert run_scenario(script, 0).to_bytes() != run_scenario(script, 1).to_bytes()


def test_bundled_scripts_run():
    for name in ('cross_authority.dbcs', 'same_authority.dbcs'):
        t = run_scenario(bundled_sample(name).read_text(), 0)
        assert not t.faults and t.verdicts


def _by_session(envelopes, msg_type):
    return {e.session_id: e for e in envelopes if e.msg_type == msg_type}


@pytest.mark.parametrize('backend', ['Z101', 'S5'])
def test_verdicts_recomputed_from_envelopes(backend):
    t = run_scenario(SAME.replace('Z101', backend), 7)
    challenges = _by_session(t.envelopes, CHALLENGE)
    verdicts = _by_session(t.envelopes, VERDICT)
    assert len(challenges) == len(verdicts) == 2
    for sid, ch_env in challenges.items():
        comp = t.states[ch_env.recipient]
        expected = compare(decode_payload(ch_env), comp.token, comp.key)
        assert decode_payload(verdicts[sid]).accepted == expected


@pytest.mark.parametrize('backend', ['Z101', 'S5'])
def test_authorities_only_emit_composed_secrets(backend):
    for seed in range(20):
        t = run_scenario(SAME.replace('Z101', backend), seed)
        g = get_group(backend)
        secrets = t.states['ted'].realm.secrets
        requests = _by_session(t.envelopes, SETUP_REQUEST)
        for e in t.envelopes:
            if e.sender != 'ted':
                continue
            assert e.msg_type == SETUP_RESPONSE
            req = decode_payload(requests[e.session_id])
            resp = decode_payload(e)
            m = secrets[req.attribute]
            if req.role is Role.SUBMITTER:
                assert resp.cipher == g.product(req.nonce, resp.authority_nonce, m)
            else:
                assert resp.cipher == g.product(m, resp.authority_nonce, req.nonce)
            # a raw copy of M can only be a coincidence of the composition
            if m.encode() in e.payload:
                assert m in (resp.cipher, resp.authority_nonce)
        for e in t.envelopes:
            if e.sender == 'ted':
                continue
            # nothing a holder sends is derived from M without its own blinding
            msg = decode_payload(e)
            assert not isinstance(msg, AuthorityResponse)


# scripts


@pytest.mark.parametrize('script', [
    'authority ted',                                   # no backend
    'backend Q9',                                      # unknown backend
    'backend Z7\nbackend Z7',                          # two backends
    'backend Z7\nauthority t\nauthority t',            # duplicate authority
    'backend Z7\nsubmitter a authority=nobody value=v',
    'backend Z7\nauthority t\nsubmitter a authority=t',
    'backend Z7\nauthority t\nsubmitter a authority=t value=v\ncompare a a',
    'backend Z7\nauthority t\nsubmitter a authority=t value=v\nsubmitter a authority=t value=w',
    'backend Z7\nfrobnicate',
    'backend Z7\nauthority t\nsubmitter a authority=t value="unterminated',
])
def test_invalid_scripts(script):
    with pytest.raises(ScriptInvalid):
        parse_script(script)


def test_script_grammar_details():
    s = parse_script('# comment\nbackend S3  # trailing\nauthority t\n\n'
                     'comparer "b c" authority=t value="two words"\n')
    assert s.backend == 'S3'
    assert s.holders == [PartySpec('b c', 'comparer', 't', 'two words')]


def test_session_ids_are_constant_per_run():
    t = run_scenario(SAME, 0)
    for (sub, comp), sid in t.sessions.items():
        flow = [e for e in t.envelopes if e.session_id == sid]
        assert [e.msg_type for e in flow] == [CHALLENGE, VERDICT]
        assert {flow[0].sender, flow[0].recipient} == {sub, comp}
