import json
import os
import random

import pytest

from dbcompare.errors import BackendMismatch
from dbcompare.groups import get_group
from dbcompare.netsim import AuthorityRealm
from dbcompare.protocol import Role, issue_comparer_token, issue_submitter_token, keygen
from dbcompare.store import (
    StoreEntry, StoreError, TokenStore, atomic_write_text, load_realm, open_realm, save_realm,
)


def _store(backend='S4', n=3):
    g = get_group(backend)
    rng = random.Random(0)
    store = TokenStore(g)
    for i in range(n):
        role = Role.SUBMITTER if i % 2 == 0 else Role.COMPARER
        key = keygen(g, role, rng)
        issue = issue_submitter_token if role is Role.SUBMITTER else issue_comparer_token
        store.add(StoreEntry(f'e{i}', key, issue(g, g.random_element(rng), key, rng)))
    return store


@pytest.mark.parametrize('backend', ['Z7', 'S4', 'Z11*', 'sealed-Z101'])
def test_store_round_trip(tmp_path, backend):
    store = _store(backend)
    path = tmp_path / 'store.json'
    store.save(path)
    loaded = TokenStore.load(path)
    assert loaded.group == store.group
    assert [(e.label, e.key, e.token) for e in loaded.entries] == [(e.label, e.key, e.token) for e in store.entries]
    assert loaded.to_json() == store.to_json()


def test_store_document_shape(tmp_path):
    doc = json.loads(_store('Z7', 1).to_json())
    assert doc['format'] == 'dbcompare-store' and doc['version'] == 1
    assert doc['backend'] == {'backend_id': 'Z7', 'order': 7, 'abelian': True, 'capability': 'transparent'}
    entry = doc['entries'][0]
    assert entry['role'] == 'submitter'
    assert bytes.fromhex(entry['key'])[:5] == bytes.fromhex('0100000007')
    assert bytes.fromhex(entry['token'])[4] == 0x10


def test_labels_unique():
    store = _store()
    with pytest.raises(StoreError):
        store.add(StoreEntry('e0', store.entries[0].key, store.entries[0].token))
    assert store.fresh_label('e') == 'e-1'


def test_role_and_backend_checked():
    store = _store('Z7')
    sub, comp = store.entries[0], store.entries[1]
    with pytest.raises(StoreError):
        store.add(StoreEntry('x', sub.key, comp.token))
    other = _store('Z11').entries[0]
    with pytest.raises(BackendMismatch):
        store.add(StoreEntry('y', other.key, other.token))


@pytest.mark.parametrize('mutate', [
    lambda d: d.update(version=2),
    lambda d: d.update(format='other'),
    lambda d: d['backend'].update(order=8),
    lambda d: d['entries'][0].update(token='00'),
    lambda d: d['entries'][0].update(role='authority'),
    lambda d: d['entries'].append(dict(d['entries'][0])),
    lambda d: d.pop('entries'),
])
def test_bad_store_files(tmp_path, mutate):
    doc = json.loads(_store('Z7').to_json())
    mutate(doc)
    path = tmp_path / 's.json'
    path.write_text(json.dumps(doc))
    with pytest.raises(StoreError):
        TokenStore.load(path)


def test_not_json(tmp_path):
    path = tmp_path / 's.json'
    path.write_text('{')
    with pytest.raises(StoreError):
        TokenStore.load(path)


def test_open_or_create(tmp_path):
    path = tmp_path / 's.json'
    assert TokenStore.open_or_create(path, get_group('Z7')).entries == []
    _store('Z7').save(path)
    with pytest.raises(BackendMismatch):
        TokenStore.open_or_create(path, get_group('Z11'))


def test_realm_round_trip(tmp_path):
    g = get_group('S3')
    realm = AuthorityRealm('ted', g)
    m = realm.secret_for('C55-111-555', random.Random(1))
    assert realm.secret_for('C55-111-555', random.Random(2)) == m
    path = tmp_path / 'realm.json'
    save_realm(realm, path)
    loaded = load_realm(path)
    assert (loaded.authority, loaded.group, loaded.secrets) == ('ted', g, {'C55-111-555': m})
    assert open_realm(path, g).secrets == realm.secrets
    with pytest.raises(BackendMismatch):
        open_realm(path, get_group('S4'))
    assert open_realm(tmp_path / 'missing.json', g, 'tomasz').authority == 'tomasz'


def test_atomic_write_leaves_target_on_failure(tmp_path, monkeypatch):
    path = tmp_path / 'f.txt'
    path.write_text('old')

    def boom(src, dst):
        raise OSError('disk full')

    monkeypatch.setattr(os, 'replace', boom)
    with pytest.raises(OSError):
        atomic_write_text(path, 'new')
    assert path.read_text() == 'old'
    assert os.listdir(tmp_path) == ['f.txt']
