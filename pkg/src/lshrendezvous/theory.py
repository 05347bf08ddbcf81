"""Closed-form rendezvous quantities for a channel-set profile (n1, n2, n12)."""

from __future__ import annotations

from dataclasses import dataclass

from .core import InvalidInstanceError, ProblemInstance


@dataclass(frozen=True)
class InstanceProfile:
    n1: int
    n2: int
    n12: int

    def __post_init__(self):
        if min(self.n1, self.n2, self.n12) < 1:
            raise InvalidInstanceError("n1, n2 and n12 must be positive")
        if self.n12 > min(self.n1, self.n2):
            raise InvalidInstanceError("n12 cannot exceed min(n1, n2)")

    @property
    def union(self) -> int:
        return self.n1 + self.n2 - self.n12

    @classmethod
    def of(cls, inst: ProblemInstance) -> "InstanceProfile":
        return cls(inst.n1, inst.n2, inst.n12)


def jaccard(p: InstanceProfile) -> float:
    return p.n12 / p.union


def random_ettr(p: InstanceProfile) -> float:
    return p.n1 * p.n2 / p.n12


def ettr_lower_bound(p: InstanceProfile) -> float:
    """Lower bound on the ETTR of any algorithm when channel labels are local."""
    return (p.n1 * p.n2 + 1) / (p.n12 + 1)


def lsh2_limit_ettr(p: InstanceProfile) -> float:
    return p.union / p.n12


def lsh3_case_terms(p: InstanceProfile) -> tuple[float, float, float]:
    """Per-rendezvous-segment collision probabilities of the asynchronous LSH3 hop.

    Returns the three contributions for one common channel: both hash values
    inside its segment; user 1's value inside it and user 2's value in the
    run of user-1-only segments before it; and the mirror case.
    """
    u = p.union
    both = 2.0 / (u * (u + 1))
    # r/(1-r) with r = (n1-n12)/u simplifies to (n1-n12)/n2
    user1_run = (p.n1 - p.n12) / p.n2 / u**2
    user2_run = (p.n2 - p.n12) / p.n1 / u**2
    return both, user1_run, user2_run


def lsh3_prob_approx(p: InstanceProfile) -> float:
    return p.n12 * sum(lsh3_case_terms(p))


def lsh3_ettr_approx(p: InstanceProfile) -> float:
    return 1.0 / lsh3_prob_approx(p)


def lsh4_ettr_approx(p: InstanceProfile, t0: int, mix: float) -> float:
    if t0 < 1:
        raise ValueError("t0 must be at least 1")
    if not 0.0 <= mix <= 1.0:
        raise ValueError("mixing probability must lie in [0, 1]")
    both_multiset = mix * mix
    return 1.0 / ((1.0 - both_multiset) * p.n12 / (p.n1 * p.n2) + both_multiset * jaccard(p) / t0)


def lsh4_t0_bound(p: InstanceProfile) -> float:
    """Largest multiset size for which LSH4's approximate ETTR still beats random."""
    return p.n1 * p.n2 / p.union
