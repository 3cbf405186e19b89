"""Reference implementations used as independent test oracles.

Nothing here imports the package's arithmetic: residues are plain ints and
permutations are plain tuples, so agreement with the library is evidence
rather than tautology.
"""

from itertools import permutations


def egcd_inverse(x: int, p: int) -> int:
    # extended Euclid, independent of pow(x, -1, p)
    old_r, r, old_s, s = x, p, 1, 0
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
    assert old_r == 1
    return old_s % p


def perm_apply_right_first(p, q):
    """(p.q)(i) = p(q(i)), built through explicit dict lookups."""
    pm = dict(enumerate(p))
    qm = dict(enumerate(q))
    return tuple(pm[qm[i]] for i in range(len(p)))


def s3_table():
    elems = list(permutations(range(3)))
    return {(p, q): perm_apply_right_first(p, q) for p in elems for q in elems}


def equi_join(left_rows, right_rows, key, left_id, right_id):
    """Plaintext nested-loop equi-join returning sorted (left id, right id) pairs."""
    return sorted((l[left_id], r[right_id]) for l in left_rows for r in right_rows
                  if l[key] == r[key])
