"""``dbc`` command-line front end.

Exit codes are stable for scripting: 0 success or match, 1 clean
no-match (``compare``) or failed assertion (``experiment``), 2 error.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import experiments
from .errors import DBCError
from .groups import Group, get_group
from .linkage import bundled_sample, private_join_files
from .netsim import encode_envelope, run_scenario
from .protocol import (
    PrivateKey, Role, decode_message, encode_message, issue_comparer_token, issue_submitter_token,
    keygen, make_challenge, compare, split_submitter_token,
)
from .reports import format_report, write_report
from .store import StoreEntry, TokenStore, atomic_write_text, open_realm, save_realm

EXIT_OK = 0
EXIT_NO_MATCH = 1
EXIT_ERROR = 2

# the bundled linkage sample has more distinct keys than Z101 has elements
JOIN_BACKEND = 'S7'

EXAMPLE_BACKENDS = ('Z7', 'Z101', 'Z11*', 'S3', 'S5', 'sealed-Z101')


class CLIError(Exception):
    pass


def _err(msg: str) -> None:
    print(f'dbc: error: {msg}', file=sys.stderr)


def _group(backend_id: str) -> Group:
    try:
        group = get_group(backend_id)
    except ValueError as exc:
        raise CLIError(str(exc)) from None
    if group.order == 1:
        print(f'dbc: warning: {group.backend_id} has one element; every comparison matches',
              file=sys.stderr)
    return group


def _rng(seed: Optional[int]) -> random.Random:
    return random.Random(seed) if seed is not None else random.SystemRandom()


def cmd_backends(args) -> int:
    names = [args.backend] if args.backend else EXAMPLE_BACKENDS
    print('backend_id\torder\tabelian\tcapability')
    for name in names:
        d = _group(name).descriptor
        print(f'{d.backend_id}\t{d.order}\t{str(d.abelian).lower()}\t{d.capability}')
    return EXIT_OK


def cmd_keygen(args) -> int:
    group = _group(args.backend)
    key = keygen(group, Role(args.role), _rng(args.seed))
    print(encode_message(key).hex())
    return EXIT_OK


def _parse_key(text: str, group: Group, role: Role) -> PrivateKey:
    try:
        msg = decode_message(bytes.fromhex(text))
    except (ValueError, DBCError):
        # also accept a bare element encoding
        try:
            return PrivateKey(group.decode_element(bytes.fromhex(text)), role)
        except (ValueError, DBCError) as exc:
            raise CLIError(f'cannot decode key: {exc}') from None
    if not isinstance(msg, PrivateKey) or msg.role is not role:
        raise CLIError(f'key is not a {role.value} key')
    if msg.key.backend_id != group.backend_id:
        raise CLIError(f'key belongs to {msg.key.backend_id}, not {group.backend_id}')
    return msg


def cmd_issue(args) -> int:
    group = _group(args.backend)
    role = Role(args.role)
    rng = _rng(args.seed)
    store = TokenStore.open_or_create(args.store, group)
    realm = open_realm(args.realm, group, args.authority)
    key = _parse_key(args.key, group, role) if args.key else keygen(group, role, rng)
    secret = realm.secret_for(args.value, rng)
    if role is Role.SUBMITTER:
        token = issue_submitter_token(group, secret, key, rng)
    else:
        token = issue_comparer_token(group, secret, key, rng)
    label = args.label or store.fresh_label(role.value)
    store.add(StoreEntry(label, key, token))
    # realm first: a token is useless without the secret it was issued for
    save_realm(realm, args.realm)
    store.save(args.store)
    print(label)
    return EXIT_OK


def cmd_compare(args) -> int:
    left_store = TokenStore.load(args.store)
    right_store = TokenStore.load(args.comparer_store) if args.comparer_store else left_store
    sub = left_store.get(args.submitter)
    comp = right_store.get(args.comparer)
    if sub.role is not Role.SUBMITTER:
        raise CLIError(f'{args.submitter!r} is not a submitter entry')
    if comp.role is not Role.COMPARER:
        raise CLIError(f'{args.comparer!r} is not a comparer entry')
    if left_store.group != right_store.group:
        raise CLIError(f'backend mismatch: {left_store.group.backend_id} vs {right_store.group.backend_id}')
    challenge = make_challenge(sub.token, sub.key, _rng(args.seed))
    matched = compare(challenge, comp.token, comp.key)
    print(f'{args.submitter}\t{args.comparer}\t{"match" if matched else "no-match"}')
    return EXIT_OK if matched else EXIT_NO_MATCH


def cmd_split(args) -> int:
    store = TokenStore.load(args.store)
    parent = store.get(args.label)
    if parent.role is not Role.SUBMITTER:
        raise CLIError(f'{args.label!r} is a {parent.role.value} entry; only submitter tokens split')
    key, token = split_submitter_token(parent.token, parent.key, _rng(args.seed))
    label = args.new_label or store.fresh_label(f'{args.label}.split')
    store.add(StoreEntry(label, key, token))
    store.save(args.store)
    print(label)
    return EXIT_OK


def cmd_join(args) -> int:
    group = _group(args.backend)
    realm = open_realm(args.realm, group) if args.realm else None
    left = args.left or bundled_sample('personnel.csv')
    right = args.right or bundled_sample('medical.csv')
    seed = args.seed if args.seed is not None else random.SystemRandom().randrange(2**32)
    result = private_join_files(left, right, args.key, group, realm=realm, seed=seed,
                                id_column=args.id_column)
    if realm is not None:
        save_realm(realm, args.realm)
    text = result.to_csv()
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    print(f'dbc: {len(result.pairs)} matches from {result.comparisons} comparisons', file=sys.stderr)
    return EXIT_OK


def cmd_experiment(args) -> int:
    group = _group(args.backend)
    running = None
    if args.name == 'collision':
        records, running = experiments.run_collision(group, args.trials, args.seed)
    elif args.name == 'witnesses':
        records = experiments.run_witnesses(group, args.trials, args.seed)
    elif args.name == 'reductions':
        records = experiments.run_reductions()
    else:
        records = experiments.run_distinguisher(group, args.trials, args.seed)
    if args.out:
        fig = write_report(records, args.out, figures=not args.no_figures, running=running,
                           title=f'{args.name} ({group.backend_id})')
        if fig is not None:
            print(f'dbc: figure written to {fig}', file=sys.stderr)
    sys.stdout.write(format_report(records))
    return EXIT_NO_MATCH if any(r.failed for r in records) else EXIT_OK


def cmd_simulate(args) -> int:
    try:
        text = Path(args.script).read_text(encoding='utf-8')
    except OSError as exc:
        raise CLIError(str(exc)) from None
    transcript = run_scenario(text, args.seed)
    if args.out:
        atomic_write_text(args.out, ''.join(encode_envelope(e).hex() + '\n'
                                            for e in transcript.envelopes))
    for e in transcript.envelopes:
        print(f'{e.session_id.hex()}\t{e.sender}\t{e.recipient}\t{e.type_name}\t{len(e.payload)}')
    for (sub, comp), verdict in transcript.verdicts.items():
        print(f'verdict\t{sub}\t{comp}\t{"match" if verdict else "no-match"}')
    return EXIT_ERROR if transcript.faults else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog='dbc', description='Double blind comparison toolkit.')
    sub = p.add_subparsers(dest='command', required=True)

    def common(sp, store=False, backend=True):
        if backend:
            sp.add_argument('--backend', default='Z101', help='group backend id (default: Z101)')
        sp.add_argument('--seed', type=int, default=None, help='seed for reproducible randomness')
        if store:
            sp.add_argument('--store', required=True, help='token store file')

    sp = sub.add_parser('backends', help='describe group backends')
    sp.add_argument('--backend', default=None)
    sp.set_defaults(func=cmd_backends)

    sp = sub.add_parser('keygen', help='print a fresh private key (hex)')
    common(sp)
    sp.add_argument('--role', choices=[r.value for r in Role], required=True)
    sp.set_defaults(func=cmd_keygen)

    sp = sub.add_parser('issue', help='issue a token for an attribute value')
    common(sp, store=True)
    sp.add_argument('--role', choices=[r.value for r in Role], required=True)
    sp.add_argument('--value', required=True, help='attribute value the token certifies')
    sp.add_argument('--realm', required=True, help='authority realm file (created if missing)')
    sp.add_argument('--authority', default='authority', help='authority name for a new realm')
    sp.add_argument('--label', default=None)
    sp.add_argument('--key', default=None, help='hex private key from keygen')
    sp.set_defaults(func=cmd_issue)

    sp = sub.add_parser('compare', help='run one blinded comparison')
    common(sp, store=True, backend=False)
    sp.add_argument('--comparer-store', default=None, help='store holding the comparer entry')
    sp.add_argument('submitter')
    sp.add_argument('comparer')
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser('split', help='derive an independently keyed submitter token')
    common(sp, store=True, backend=False)
    sp.add_argument('label')
    sp.add_argument('--new-label', default=None)
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser('join', help='private record linkage between two CSV files')
    sp.add_argument('--backend', default=JOIN_BACKEND,
                    help=f'group backend id (default: {JOIN_BACKEND}); its order bounds the distinct key count')
    common(sp, backend=False)
    sp.add_argument('left', nargs='?', help='left CSV (default: bundled personnel sample)')
    sp.add_argument('right', nargs='?', help='right CSV (default: bundled medical sample)')
    sp.add_argument('--key', default='service_number', help='join column')
    sp.add_argument('--id-column', default=None, help='row id column (default: row number)')
    sp.add_argument('--realm', default=None)
    sp.add_argument('--out', default=None)
    sp.set_defaults(func=cmd_join)

    sp = sub.add_parser('experiment', help='run a security-lab experiment')
    common(sp)
    sp.add_argument('name', choices=experiments.EXPERIMENTS)
    sp.add_argument('--trials', type=int, default=1000)
    sp.add_argument('--out', default=None, help='report file; a PNG figure is written beside it')
    sp.add_argument('--no-figures', action='store_true')
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser('simulate', help='run a simulator scenario script')
    sp.add_argument('script')
    sp.add_argument('--seed', type=int, default=0)
    sp.add_argument('--out', default=None, help='write the transcript, one hex envelope per line')
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    if getattr(args, 'seed', None) is None and args.command == 'experiment':
        args.seed = 0
    try:
        return args.func(args)
    except (CLIError, DBCError, ValueError, OSError) as exc:
        _err(str(exc))
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
