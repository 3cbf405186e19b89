"""Private record linkage between two CSV tables.

Every left row gets a submitter token and every right row a comparer
token, all for the row's key-column value and all issued by one authority
realm.  Each left/right pair is then compared through the simulator, so
the only thing either side learns is which pairs match.  This is the
all-pairs demo topology: both administrators run in one process.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .errors import DBCError
from .groups import Group
from .netsim import AuthorityRealm, PartySpec, Scenario, run_scenario

AUTHORITY = 'authority'


class LinkageError(DBCError, ValueError):
    """The input tables cannot be joined as requested."""


@dataclass
class Table:
    header: list[str]
    rows: list[dict[str, str]]


@dataclass
class LinkageResult:
    pairs: list[tuple[str, str]]
    sessions: dict[tuple[str, str], str] = field(default_factory=dict)
    comparisons: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator='\n')
        writer.writerow(['left_id', 'right_id', 'session_id'])
        for pair in self.pairs:
            writer.writerow([*pair, self.sessions.get(pair, '')])
        return buf.getvalue()


def read_table(path) -> Table:
    try:
        with open(path, newline='', encoding='utf-8') as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header:
                raise LinkageError(f'{path}: missing header row')
            if len(set(header)) != len(header):
                raise LinkageError(f'{path}: duplicate column names')
            rows = []
            for lineno, record in enumerate(reader, 2):
                if not record:
                    continue
                if len(record) != len(header):
                    raise LinkageError(f'{path}:{lineno}: expected {len(header)} fields, got {len(record)}')
                rows.append(dict(zip(header, record)))
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise LinkageError(f'{path}: {exc}') from None
    return Table(header, rows)


def _row_ids(table: Table, id_column: Optional[str], side: str) -> list[str]:
    if id_column is None:
        return [str(n) for n in range(1, len(table.rows) + 1)]
    if id_column not in table.header:
        raise LinkageError(f'{side} table has no column {id_column!r}')
    ids = [row[id_column] for row in table.rows]
    if len(set(ids)) != len(ids):
        raise LinkageError(f'{side} table has duplicate ids in {id_column!r}')
    return ids


def private_join(left: Table, right: Table, key_column: str, group: Group, *,
                 realm: Optional[AuthorityRealm] = None, seed: int = 0,
                 id_column: Optional[str] = None) -> LinkageResult:
    """Match rows whose key values are equal, using only blinded comparisons.

    ``realm`` (updated in place with any newly drawn secrets) lets repeated
    joins share one authority; otherwise a throwaway realm is used.
    """
    for side, table in (('left', left), ('right', right)):
        if key_column not in table.header:
            raise LinkageError(f'{side} table has no column {key_column!r}')
    left_ids = _row_ids(left, id_column, 'left')
    right_ids = _row_ids(right, id_column, 'right')
    realm = realm if realm is not None else AuthorityRealm(AUTHORITY, group)
    values = {row[key_column] for row in left.rows + right.rows}
    needed = len(values | set(realm.secrets))
    if needed > group.order:
        raise LinkageError(f'{needed} distinct key values but {group.backend_id} has only '
                           f'{group.order} elements; choose a larger backend')

    scenario = Scenario(group.backend_id, {AUTHORITY: dict(realm.secrets)})
    names: dict[str, tuple[str, str]] = {}
    for prefix, ids, table, role in (('L', left_ids, left, 'submitter'),
                                     ('R', right_ids, right, 'comparer')):
        for row_id, row in zip(ids, table.rows):
            name = f'{prefix}:{row_id}'
            names[name] = (prefix, row_id)
            scenario.holders.append(PartySpec(name, role, AUTHORITY, row[key_column]))
    subs = [f'L:{i}' for i in left_ids]
    comps = [f'R:{j}' for j in right_ids]
    scenario.comparisons = [(s, c) for s in subs for c in comps]

    transcript = run_scenario(scenario, seed)
    if transcript.faults:
        raise LinkageError(f'simulation produced {len(transcript.faults)} faults')
    realm.secrets.update(transcript.states[AUTHORITY].realm.secrets)

    pairs = []
    sessions = {}
    for (s, c), accepted in transcript.verdicts.items():
        if accepted:
            pair = (names[s][1], names[c][1])
            pairs.append(pair)
            sessions[pair] = transcript.sessions[(s, c)].hex()
    if len(transcript.verdicts) != len(scenario.comparisons):
        raise LinkageError('some comparisons did not complete')
    pairs.sort()
    return LinkageResult(pairs, sessions, len(scenario.comparisons))


def bundled_sample(name: str) -> Path:
    """Path of a CSV shipped with the package (``personnel.csv``, ``medical.csv``)."""
    return Path(__file__).with_name('data') / name


def private_join_files(left_path, right_path, key_column: str, group: Group,
                       **kwargs) -> LinkageResult:
    return private_join(read_table(left_path), read_table(right_path), key_column, group, **kwargs)


__all__: Sequence[str] = ['Table', 'LinkageResult', 'LinkageError', 'read_table',
                          'private_join', 'private_join_files', 'bundled_sample']
