"""Channel-hopping rules.

The scalar functions (``lsh_hop`` and friends) evaluate one slot literally by
the argmin rule.  ``RingIndex`` answers the same question for whole arrays of
hash values with a binary search and is what the simulator uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ChannelSet, Permutation, PrivateRandomness

KINDS = ("random", "synmac", "lsh", "lsh2", "lsh3", "lsh4")

# private stream names; random, SynMAC patching and LSH4 share the pick stream
PICK = "pick"
COIN = "coin"


@dataclass(frozen=True)
class HopAlgorithm:
    kind: str
    t0: Optional[int] = None
    p: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown algorithm {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.kind == "lsh4":
            if self.t0 is None or self.t0 < 1:
                raise ValueError("lsh4 needs t0 >= 1")
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ValueError("lsh4 needs 0 <= p <= 1")
        elif self.t0 is not None or self.p is not None:
            raise ValueError(f"{self.kind} takes no parameters")

    @classmethod
    def parse(cls, text: str) -> "HopAlgorithm":
        """``random``, ``lsh2``, ``lsh4:20:0.75`` ..."""
        kind, *params = text.strip().lower().split(":")
        if kind == "lsh4":
            if len(params) != 2:
                raise ValueError("lsh4 is written lsh4:T0:p, e.g. lsh4:20:0.75")
            return cls("lsh4", int(params[0]), float(params[1]))
        if params:
            raise ValueError(f"{kind} takes no parameters")
        return cls(kind)

    @property
    def name(self) -> str:
        if self.kind == "lsh4":
            return f"lsh4:{self.t0}:{self.p:g}"
        return self.kind

    @property
    def uses_shared(self) -> bool:
        return self.kind in ("lsh", "lsh2", "lsh3", "lsh4")

    def __str__(self):
        return self.name


def _check_u(u: int, n_total: int):
    if not 0 <= u < n_total:
        raise ValueError(f"hash value {u} outside [0, {n_total - 1}]")


def _argmin_clockwise(keys: np.ndarray, u: int, n_total: int) -> int:
    dist = (keys - u) % n_total
    i = int(np.argmin(dist))
    assert np.count_nonzero(dist == dist[i]) == 1, "tie in clockwise distance"
    return i


def lsh_hop(c: ChannelSet, u: int) -> int:
    _check_u(u, c.n_total)
    return int(c.array[_argmin_clockwise(c.array, u, c.n_total)])


def lsh3_hop(c: ChannelSet, pi1: Permutation, u: int) -> int:
    _check_u(u, c.n_total)
    return int(c.array[_argmin_clockwise(pi1.forward[c.array], u, c.n_total)])


def lsh2_hop(c: ChannelSet, pi1: Permutation, pi2: Permutation, t: int) -> int:
    if not 0 <= t < c.n_total:
        raise ValueError(f"slot {t} outside one LSH2 period [0, {c.n_total - 1}]")
    return lsh3_hop(c, pi1, int(pi2.forward[t]))


@dataclass(frozen=True, eq=False)
class ChannelMultiset:
    """LSH2 hops of the first ``t0`` slots; duplicates are the point."""

    entries: np.ndarray

    @property
    def t0(self) -> int:
        return len(self.entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(int(e) for e in self.entries)


def lsh4_build_multiset(c: ChannelSet, pi1: Permutation, pi2: Permutation, t0: int) -> ChannelMultiset:
    if not 1 <= t0 <= c.n_total:
        raise ValueError(f"t0 must lie in [1, {c.n_total}]")
    entries = RingIndex(c, pi1).hops(pi2.forward[:t0])
    entries.setflags(write=False)
    return ChannelMultiset(entries)


def random_hop(c: ChannelSet, priv: PrivateRandomness, draw_index: int) -> int:
    return int(pick_uniform(c.array, priv.floats(PICK, draw_index)))


def synmac_hop(c: ChannelSet, t: int, priv: PrivateRandomness, draw_index: int) -> int:
    if t < 0:
        raise ValueError("slot index must be non-negative")
    slot = t % c.n_total
    if slot in c:
        return slot
    return random_hop(c, priv, draw_index)


def lsh4_hop(c: ChannelSet, ms: ChannelMultiset, p: float, priv: PrivateRandomness, draw_index: int) -> int:
    coin = priv.floats(COIN, draw_index)
    pick = priv.floats(PICK, draw_index)
    return int(mixed_pick(c.array, ms.entries, p, coin, pick))


# -- vectorised forms ------------------------------------------------------


def pick_uniform(pool: np.ndarray, unit) -> np.ndarray:
    """Element of ``pool`` selected by floats in [0, 1)."""
    return pool[(np.asarray(unit) * len(pool)).astype(np.int64)]


def mixed_pick(c: np.ndarray, ms: np.ndarray, p: float, coin, pick) -> np.ndarray:
    return np.where(np.asarray(coin) < p, pick_uniform(ms, pick), pick_uniform(c, pick))


def synmac_hops(c: ChannelSet, clock: np.ndarray, patch_unit: np.ndarray) -> np.ndarray:
    slots = clock % c.n_total
    member = np.zeros(c.n_total, dtype=bool)
    member[c.array] = True
    return np.where(member[slots], slots, pick_uniform(c.array, patch_unit))


class RingIndex:
    """Nearest-clockwise lookup for one user's (permuted) channel labels.

    The channel with minimal ``(key - u) mod N`` is the one whose key is the
    smallest key >= u, wrapping to the smallest key overall.
    """

    def __init__(self, c: ChannelSet, pi1: Optional[Permutation] = None):
        keys = c.array if pi1 is None else pi1.forward[c.array]
        order = np.argsort(keys)
        self.keys = keys[order]
        self.channels = c.array[order]

    def hops(self, u) -> np.ndarray:
        idx = np.searchsorted(self.keys, u, side="left")
        return self.channels[np.where(idx == len(self.keys), 0, idx)]
