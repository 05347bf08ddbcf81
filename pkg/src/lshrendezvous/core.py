"""Channel sets, problem instances and the counter-based randomness they run on.

Every random quantity in the package is a pure function of ``(seed, stream,
index)``.  Shared randomness (the hash values and the two permutations both
users agree on) and private randomness (per-user picks and coins) are the same
machinery keyed by different seeds.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class InvalidInstanceError(ValueError):
    """Channel sets that cannot form a rendezvous problem."""


class InfeasibleSpecError(ValueError):
    """Instance parameters that no pair of channel sets can satisfy."""


# -- hashing ---------------------------------------------------------------


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps
    with np.errstate(over="ignore"):
        if np.ndim(z) == 0:
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            return z ^ (z >> np.uint64(31))
        z = np.array(z, dtype=np.uint64)
        t = z >> np.uint64(30)
        z ^= t
        z *= _MIX1
        np.right_shift(z, np.uint64(27), out=t)
        z ^= t
        z *= _MIX2
        np.right_shift(z, np.uint64(31), out=t)
        z ^= t
        return z


def _tag_hash(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")


def derive_seed(*parts: object) -> int:
    """Hash an arbitrary tuple of labels and integers into a 64-bit seed."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def seed_stream(seed: int, tag: str, lo: int, hi: int) -> list[int]:
    """Child seeds ``lo..hi-1`` of ``seed``, addressable without the prefix."""
    return hash_values(stream_keys(seed, tag), np.arange(lo, hi)).tolist()


def stream_keys(seeds, tag: str) -> np.ndarray:
    """Per-seed key of the named stream (vectorised over ``seeds``)."""
    if np.ndim(seeds) == 0:
        s = np.uint64(int(seeds) & MASK64)
    else:
        s = np.array([int(v) & MASK64 for v in seeds], dtype=np.uint64)
    return _mix64(s ^ np.uint64(_tag_hash(tag)))


def hash_values(key, index) -> np.ndarray:
    """Raw 64-bit values of a stream at the given indices.

    ``key`` and ``index`` broadcast against each other, so a column of keys
    against a row of indices yields one stream per row.
    """
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(np.asarray(key, dtype=np.uint64) + (idx + np.uint64(1)) * _GAMMA)


def to_unit(v: np.ndarray) -> np.ndarray:
    """Map raw 64-bit values to floats in [0, 1)."""
    return (v >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def to_range(v: np.ndarray, n: int) -> np.ndarray:
    """Map raw 64-bit values to integers in [0, n), n < 2**32."""
    return (((v >> np.uint64(32)) * np.uint64(n)) >> np.uint64(32)).astype(np.int64)


# -- permutations ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Permutation:
    """A bijection of ``{0, ..., size-1}`` stored with its inverse."""

    forward: np.ndarray
    inverse: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.forward.setflags(write=False)
        self.inverse.setflags(write=False)

    @classmethod
    def from_array(cls, forward: Sequence[int]) -> "Permutation":
        fwd = np.array(forward, dtype=np.int64)
        if sorted(fwd.tolist()) != list(range(len(fwd))):
            raise ValueError("not a permutation of 0..size-1")
        return cls(fwd, np.argsort(fwd))

    @classmethod
    def identity(cls, size: int) -> "Permutation":
        return cls.from_array(range(size))

    @property
    def size(self) -> int:
        return len(self.forward)

    def __call__(self, x):
        return self.forward[x]

    def inv(self, y):
        return self.inverse[y]

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.forward, other.forward)

    def __hash__(self):
        return hash(self.forward.tobytes())


def _shuffle_from_keys(keys: np.ndarray) -> np.ndarray:
    # Sorting i.i.d. 64-bit keys is a uniform shuffle.  Ties among N keys have
    # probability about N**2 / 2**65 and are ignored.
    return np.argsort(keys, axis=-1)


class _CounterStream:
    """Stateless, index-addressable random source keyed by a 64-bit seed."""

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._keys: dict[str, np.uint64] = {}

    def _key(self, tag: str) -> np.uint64:
        k = self._keys.get(tag)
        if k is None:
            k = self._keys[tag] = stream_keys(self.seed, tag)
        return k

    def raw(self, tag: str, index) -> np.ndarray:
        return hash_values(self._key(tag), index)

    def floats(self, tag: str, index) -> np.ndarray:
        return to_unit(self.raw(tag, index))

    def integers(self, tag: str, index, n: int) -> np.ndarray:
        return to_range(self.raw(tag, index), n)

    def permutation(self, tag: str, size: int) -> Permutation:
        if size < 1:
            raise ValueError("permutation size must be at least 1")
        fwd = _shuffle_from_keys(self.raw(tag, np.arange(size)))
        return Permutation(fwd, np.argsort(fwd))

    def __repr__(self):
        return f"{type(self).__name__}(seed={self.seed})"


class SharedRandomness(_CounterStream):
    """Randomness both users agree on: the hash values U(t) and the
    permutations pi1, pi2."""

    def uniform(self, t: int, n: int) -> int:
        if t < 0:
            raise ValueError("time index must be non-negative")
        return int(self.integers("U", t, n))

    def uniforms(self, t, n: int) -> np.ndarray:
        return self.integers("U", t, n)


class PrivateRandomness(_CounterStream):
    """Per-user randomness that the other user never sees."""


def make_permutation(rand: _CounterStream, tag: str, size: int) -> Permutation:
    return rand.permutation(tag, size)


def batch_sort_keys(seeds, tag: str, size: int) -> np.ndarray:
    """Per-seed random keys whose argsort is the permutation ``tag``."""
    keys = stream_keys(list(seeds), tag)[:, None]
    return hash_values(keys, np.arange(size)[None, :])


def batch_permutations(seeds, tag: str, size: int) -> np.ndarray:
    """Forward arrays of ``rand.permutation(tag, size)`` for many seeds at once.

    Row ``i`` equals ``SharedRandomness(seeds[i]).permutation(tag, size).forward``.
    """
    return _shuffle_from_keys(batch_sort_keys(seeds, tag, size))


# -- channel sets ----------------------------------------------------------


@dataclass(frozen=True)
class ChannelSet:
    """Available channels of one user, strictly increasing, out of ``n_total``."""

    n_total: int
    channels: tuple[int, ...]

    def __post_init__(self):
        ch = tuple(int(c) for c in self.channels)
        object.__setattr__(self, "channels", ch)
        if not ch:
            raise InvalidInstanceError("channel set is empty")
        if any(b <= a for a, b in zip(ch, ch[1:])):
            raise InvalidInstanceError("channels must be strictly increasing")
        if ch[0] < 0 or ch[-1] >= self.n_total:
            raise InvalidInstanceError(f"channels must lie in [0, {self.n_total - 1}]")

    @classmethod
    def of(cls, n_total: int, channels: Iterable[int]) -> "ChannelSet":
        chs = sorted(int(c) for c in channels)
        if len(set(chs)) != len(chs):
            raise InvalidInstanceError("duplicate channel")
        return cls(n_total, tuple(chs))

    @cached_property
    def array(self) -> np.ndarray:
        a = np.array(self.channels, dtype=np.int64)
        a.setflags(write=False)
        return a

    @cached_property
    def _members(self) -> frozenset:
        return frozenset(self.channels)

    def size(self) -> int:
        return len(self.channels)

    def __len__(self):
        return len(self.channels)

    def __iter__(self):
        return iter(self.channels)

    def __contains__(self, c) -> bool:
        return c in self._members


def intersection_size(c1: ChannelSet, c2: ChannelSet) -> int:
    if c1.n_total != c2.n_total:
        raise InvalidInstanceError(f"channel sets disagree on N ({c1.n_total} vs {c2.n_total})")
    return len(c1._members & c2._members)


@dataclass(frozen=True)
class ProblemInstance:
    n_total: int
    c1: ChannelSet
    c2: ChannelSet

    def __post_init__(self):
        if self.n_total < 2:
            raise InvalidInstanceError("need N >= 2 channels")
        if self.c1.n_total != self.n_total or self.c2.n_total != self.n_total:
            raise InvalidInstanceError("channel sets disagree on N")
        if intersection_size(self.c1, self.c2) == 0:
            raise InvalidInstanceError("the two channel sets share no channel")

    @classmethod
    def of(cls, n_total: int, c1: Iterable[int], c2: Iterable[int]) -> "ProblemInstance":
        return cls(n_total, ChannelSet.of(n_total, c1), ChannelSet.of(n_total, c2))

    @property
    def n1(self) -> int:
        return len(self.c1)

    @property
    def n2(self) -> int:
        return len(self.c2)

    @cached_property
    def n12(self) -> int:
        return intersection_size(self.c1, self.c2)

    @property
    def jaccard(self) -> float:
        return self.n12 / (self.n1 + self.n2 - self.n12)

    def swapped(self) -> "ProblemInstance":
        return ProblemInstance(self.n_total, self.c2, self.c1)

    def to_json(self) -> dict:
        return {"n_total": self.n_total, "c1": list(self.c1.channels), "c2": list(self.c2.channels)}

    @classmethod
    def from_json(cls, doc: dict) -> "ProblemInstance":
        return cls.of(int(doc["n_total"]), doc["c1"], doc["c2"])
