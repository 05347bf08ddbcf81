"""Random problem instances: the uniform experimental setup and contiguous blocks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .core import ChannelSet, InfeasibleSpecError, PrivateRandomness, ProblemInstance

LAYOUTS = ("uniform", "contiguous")


@dataclass(frozen=True)
class InstanceSpec:
    n_total: int
    n1: int
    n2: int
    n12: int
    layout: str = "uniform"

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}")
        if self.n_total < 2:
            raise InfeasibleSpecError(f"N={self.n_total}: need N >= 2")
        if self.n12 < 1:
            raise InfeasibleSpecError(f"n12={self.n12}: need n12 >= 1")
        if self.n12 > min(self.n1, self.n2):
            raise InfeasibleSpecError(f"n12={self.n12} exceeds min(n1, n2)={min(self.n1, self.n2)}")
        if self.n1 + self.n2 - self.n12 > self.n_total:
            raise InfeasibleSpecError(
                f"n1+n2-n12={self.n1 + self.n2 - self.n12} exceeds N={self.n_total}"
            )

    @property
    def jaccard(self) -> float:
        return self.n12 / (self.n1 + self.n2 - self.n12)

    @property
    def key(self) -> tuple:
        return (self.n_total, self.n1, self.n2, self.n12, self.layout)


def gen_uniform(spec: InstanceSpec, rng: PrivateRandomness) -> ProblemInstance:
    """Common channels first, then disjoint private extras for each user."""
    order = rng.permutation("instance", spec.n_total).forward.tolist()
    common = order[: spec.n12]
    a1 = order[spec.n12 : spec.n1]
    a2 = order[spec.n1 : spec.n1 + spec.n2 - spec.n12]
    n = spec.n_total
    return ProblemInstance(n, ChannelSet.of(n, common + a1), ChannelSet.of(n, common + a2))


def gen_contiguous(spec: InstanceSpec, rng: PrivateRandomness, start: Optional[int] = None) -> ProblemInstance:
    """Two cyclic blocks; the second starts where its overlap with the first begins."""
    n = spec.n_total
    if start is None:
        start = int(rng.integers("start", 0, n))
    shift = start + spec.n1 - spec.n12
    c1 = [(start + i) % n for i in range(spec.n1)]
    c2 = [(shift + i) % n for i in range(spec.n2)]
    return ProblemInstance(n, ChannelSet.of(n, c1), ChannelSet.of(n, c2))


def generate(spec: InstanceSpec, rng: PrivateRandomness) -> ProblemInstance:
    if spec.layout == "contiguous":
        return gen_contiguous(spec, rng)
    return gen_uniform(spec, rng)
