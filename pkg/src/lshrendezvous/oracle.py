"""Exact single-slot rendezvous probabilities by exhaustive enumeration.

Deliberately written in plain Python with its own copy of the hop rule, so it
shares no code with the vectorised simulator it is used to check.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import permutations

from .core import ProblemInstance

LSH2_MAX_N = 8
LSH3_MAX_N = 7
ETTR_MAX_N = 6


class ComplexityGuardError(ValueError):
    def __init__(self, what: str, n: int, max_n: int):
        super().__init__(f"{what} enumerates N! cases; N={n} exceeds the limit, use N <= {max_n}")
        self.max_n = max_n


def _guard(what: str, inst: ProblemInstance, max_n: int):
    if inst.n_total > max_n:
        raise ComplexityGuardError(what, inst.n_total, max_n)


def _hop(channels, perm, u, n):
    return min(channels, key=lambda c: (perm[c] - u) % n)


def exact_prob_lsh2(inst: ProblemInstance) -> Fraction:
    """P(both users hop together in one LSH2 slot), over all pi1 and all values of pi2(t)."""
    _guard("exact_prob_lsh2", inst, LSH2_MAX_N)
    n = inst.n_total
    c1, c2 = inst.c1.channels, inst.c2.channels
    hits = total = 0
    for perm in permutations(range(n)):
        for v in range(n):
            hits += _hop(c1, perm, v, n) == _hop(c2, perm, v, n)
            total += 1
    return Fraction(hits, total)


def exact_prob_lsh3(inst: ProblemInstance, drift_nonzero: bool = True) -> Fraction:
    """Single-slot collision probability of LSH3.

    With a nonzero drift the two users read independent hash values; with zero
    drift they read the same one and the answer coincides with LSH2.
    """
    _guard("exact_prob_lsh3", inst, LSH3_MAX_N)
    n = inst.n_total
    c1, c2 = inst.c1.channels, inst.c2.channels
    hits = total = 0
    for perm in permutations(range(n)):
        h1 = [_hop(c1, perm, u, n) for u in range(n)]
        h2 = [_hop(c2, perm, u, n) for u in range(n)]
        if drift_nonzero:
            for a in h1:
                hits += h2.count(a)
            total += n * n
        else:
            hits += sum(a == b for a, b in zip(h1, h2))
            total += n
    return Fraction(hits, total)


def exact_ettr_sync_lsh2(inst: ProblemInstance) -> Fraction:
    """Exact mean TTR of synchronous LSH2 over every (pi1, pi2) pair."""
    _guard("exact_ettr_sync_lsh2", inst, ETTR_MAX_N)
    n = inst.n_total
    c1, c2 = inst.c1.channels, inst.c2.channels
    perms = list(permutations(range(n)))
    total_ttr = 0
    for pi1 in perms:
        meet = {v for v in range(n) if _hop(c1, pi1, v, n) == _hop(c2, pi1, v, n)}
        for pi2 in perms:
            total_ttr += next(t for t in range(n) if pi2[t] in meet) + 1
    return Fraction(total_ttr, len(perms) ** 2)
