"""On-disk token stores and authority realms.

Both are small JSON documents; group elements and tokens are embedded as
hex strings of their canonical binary encodings.  Writes go to a temporary
file in the same directory which is then renamed over the target, so a
failed command never leaves a half-written file behind.

Token store::

    {"format": "dbcompare-store", "version": 1,
     "backend": {"backend_id": "Z7", "order": 7, "abelian": true, "capability": "transparent"},
     "entries": [{"label": "...", "role": "submitter" | "comparer",
                  "key": "<hex element>", "token": "<hex token message>"}]}

Realm::

    {"format": "dbcompare-realm", "version": 1, "authority": "ted", "backend": "Z7",
     "secrets": {"<attribute value>": "<hex element>"}}
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Union

from .errors import BackendMismatch, DBCError, MalformedEncoding
from .groups import Group, decode_element, get_group
from .netsim import AuthorityRealm
from .protocol import ComparerToken, PrivateKey, Role, SubmitterToken, decode_message, encode_message

STORE_FORMAT = 'dbcompare-store'
REALM_FORMAT = 'dbcompare-realm'
VERSION = 1

Token = Union[SubmitterToken, ComparerToken]
PathLike = Union[str, os.PathLike]


class StoreError(DBCError):
    """A store or realm file is unreadable or inconsistent."""


def atomic_write_text(path: PathLike, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f'.{path.name}.', suffix='.tmp', dir=path.parent or '.')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8') as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _load_json(path: PathLike, fmt: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as exc:
        raise StoreError(f'{path}: {exc}') from None
    if not isinstance(doc, dict) or doc.get('format') != fmt:
        raise StoreError(f'{path}: not a {fmt} file')
    if doc.get('version') != VERSION:
        raise StoreError(f'{path}: unsupported version {doc.get("version")!r}')
    return doc


@dataclass
class StoreEntry:
    label: str
    key: PrivateKey
    token: Token

    @property
    def role(self) -> Role:
        return self.key.role


@dataclass
class TokenStore:
    group: Group
    entries: list[StoreEntry] = field(default_factory=list)

    def get(self, label: str) -> StoreEntry:
        for entry in self.entries:
            if entry.label == label:
                return entry
        raise StoreError(f'no entry labelled {label!r}')

    def add(self, entry: StoreEntry) -> None:
        if any(e.label == entry.label for e in self.entries):
            raise StoreError(f'label {entry.label!r} already in use')
        for x in (entry.key.key, entry.token.cipher, entry.token.tag):
            if x.backend_id != self.group.backend_id:
                raise BackendMismatch(f'{x.backend_id} entry in a {self.group.backend_id} store')
        expected = SubmitterToken if entry.role is Role.SUBMITTER else ComparerToken
        if not isinstance(entry.token, expected):
            raise StoreError(f'{entry.role.value} key paired with a {type(entry.token).__name__}')
        self.entries.append(entry)

    def fresh_label(self, prefix: str) -> str:
        used = {e.label for e in self.entries}
        n = 1
        while f'{prefix}-{n}' in used:
            n += 1
        return f'{prefix}-{n}'

    def to_json(self) -> str:
        doc = {
            'format': STORE_FORMAT,
            'version': VERSION,
            'backend': asdict(self.group.descriptor),
            'entries': [
                {'label': e.label, 'role': e.role.value, 'key': e.key.key.encode().hex(),
                 'token': encode_message(e.token).hex()}
                for e in self.entries
            ],
        }
        return json.dumps(doc, indent=2) + '\n'

    def save(self, path: PathLike) -> None:
        atomic_write_text(path, self.to_json())

    @classmethod
    def load(cls, path: PathLike) -> 'TokenStore':
        doc = _load_json(path, STORE_FORMAT)
        try:
            group = get_group(doc['backend']['backend_id'])
            if asdict(group.descriptor) != doc['backend']:
                raise StoreError(f'{path}: backend descriptor does not match {group.backend_id}')
            store = cls(group)
            for raw in doc['entries']:
                key = PrivateKey(decode_element(bytes.fromhex(raw['key'])), Role(raw['role']))
                token = decode_message(bytes.fromhex(raw['token']))
                store.add(StoreEntry(raw['label'], key, token))
        except (KeyError, TypeError, ValueError, MalformedEncoding, BackendMismatch) as exc:
            raise StoreError(f'{path}: {exc}') from None
        return store

    @classmethod
    def open_or_create(cls, path: PathLike, group: Group) -> 'TokenStore':
        if not Path(path).exists():
            return cls(group)
        store = cls.load(path)
        if store.group != group:
            raise BackendMismatch(f'{path} holds {store.group.backend_id} tokens, not {group.backend_id}')
        return store


def realm_to_json(realm: AuthorityRealm) -> str:
    doc = {
        'format': REALM_FORMAT,
        'version': VERSION,
        'authority': realm.authority,
        'backend': realm.group.backend_id,
        'secrets': {value: m.encode().hex() for value, m in sorted(realm.secrets.items())},
    }
    return json.dumps(doc, indent=2) + '\n'


def save_realm(realm: AuthorityRealm, path: PathLike) -> None:
    atomic_write_text(path, realm_to_json(realm))


def load_realm(path: PathLike) -> AuthorityRealm:
    doc = _load_json(path, REALM_FORMAT)
    try:
        group = get_group(doc['backend'])
        secrets = {}
        for value, raw in doc['secrets'].items():
            secrets[value] = group.decode_element(bytes.fromhex(raw))
        if len(set(secrets.values())) != len(secrets):
            raise StoreError(f'{path}: two values share one secret')
        return AuthorityRealm(str(doc['authority']), group, secrets)
    except (KeyError, TypeError, ValueError, MalformedEncoding, BackendMismatch) as exc:
        raise StoreError(f'{path}: {exc}') from None


def open_realm(path: PathLike, group: Group, authority: str = 'authority') -> AuthorityRealm:
    """Load a realm, or start an empty one if the file does not exist yet."""
    if not Path(path).exists():
        return AuthorityRealm(authority, group)
    realm = load_realm(path)
    if realm.group != group:
        raise BackendMismatch(f'{path} is a {realm.group.backend_id} realm, not {group.backend_id}')
    return realm
