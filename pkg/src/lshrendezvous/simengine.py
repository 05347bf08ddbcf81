"""Monte Carlo measurement of time-to-rendezvous.

An experiment runs rendezvous attempts back to back until its slot budget is
spent.  Each attempt draws fresh shared randomness, so completed TTRs are
i.i.d.; private draws and SynMAC's clock follow the experiment-wide slot
counter.  Everything is a pure function of ``(base_seed, spec, experiment
index)``, which is what makes results independent of the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import theory
from .chalgos import COIN, PICK, HopAlgorithm, RingIndex, mixed_pick, pick_uniform, synmac_hops
from .core import (
    PrivateRandomness,
    ProblemInstance,
    SharedRandomness,
    MASK64,
    batch_permutations,
    batch_sort_keys,
    derive_seed,
    hash_values,
    seed_stream,
    stream_keys,
    to_range,
)
from .instances import InstanceSpec, generate

SETTINGS = ("sync", "async")
MEMORYLESS = ("random", "synmac")

CSV_COLUMNS = (
    "setting", "algorithm", "N", "n1", "n2", "n12", "jaccard", "experiments", "slots",
    "ettr_mean", "ettr_ci95", "mttr_mean", "mttr_max", "censored", "theory_ettr",
)


class RendezvousBoundError(AssertionError):
    """A synchronous LSH2 attempt needed more than N slots."""


@dataclass(frozen=True)
class Drift:
    """Clock offset of user 2, drawn once per experiment from [lo, hi]."""

    lo: int
    hi: int

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi:
            raise ValueError("drift range must satisfy 0 <= lo <= hi")

    @classmethod
    def fixed(cls, d: int) -> "Drift":
        return cls(d, d)

    @classmethod
    def parse(cls, text: str) -> "Drift":
        lo, _, hi = text.partition(":")
        return cls(int(lo), int(hi or lo))

    def draw(self, rng: PrivateRandomness) -> int:
        return self.lo + int(rng.integers("drift", 0, self.hi - self.lo + 1))

    def __str__(self):
        return str(self.lo) if self.lo == self.hi else f"{self.lo}:{self.hi}"


@dataclass(frozen=True)
class SimulationConfig:
    setting: str = "sync"
    drift: Drift = Drift(1, 100)
    slots_budget: int = 10_000
    experiments: int = 10_000
    base_seed: int = 0

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"setting must be one of {SETTINGS}")
        if self.slots_budget < 1 or self.experiments < 1:
            raise ValueError("slots_budget and experiments must be at least 1")


# -- single attempt --------------------------------------------------------


class _Attempt:
    """Hop sequences of both users for one attempt's worth of shared state."""

    def __init__(self, inst, alg, shared, priv1, priv2, drift, start_slot):
        self.alg = alg
        self.n = inst.n_total
        self.sets = (inst.c1, inst.c2)
        self.privs = (priv1, priv2)
        self.offsets = (0, drift)
        self.start = start_slot
        self.shared = shared
        kind = alg.kind
        pi1 = shared.permutation("pi1", self.n) if kind in ("lsh2", "lsh3", "lsh4") else None
        self.pi2 = shared.permutation("pi2", self.n) if kind in ("lsh2", "lsh4") else None
        if kind in ("lsh", "lsh2", "lsh3", "lsh4"):
            self.rings = tuple(RingIndex(c, pi1) for c in self.sets)
        if kind == "lsh4":
            head = self.pi2.forward[: alg.t0]
            self.multisets = tuple(r.hops(head) for r in self.rings)

    def hops(self, user: int, t: np.ndarray) -> np.ndarray:
        """Channels of ``user`` (0 or 1) at attempt-local slots ``t``."""
        tau = t + self.offsets[user]
        c = self.sets[user]
        kind = self.alg.kind
        if kind == "lsh":
            return self.rings[user].hops(self.shared.uniforms(tau, self.n))
        if kind == "lsh3":
            return self.rings[user].hops(self.shared.uniforms(tau, self.n))
        if kind == "lsh2":
            # one LSH2 period is N slots; later slots repeat it
            return self.rings[user].hops(self.pi2.forward[tau % self.n])
        clock = tau + self.start
        priv = self.privs[user]
        if kind == "random":
            return pick_uniform(c.array, priv.floats(PICK, clock))
        if kind == "synmac":
            return synmac_hops(c, clock, priv.floats(PICK, clock))
        return mixed_pick(c.array, self.multisets[user], self.alg.p,
                          priv.floats(COIN, clock), priv.floats(PICK, clock))


def _check_alg(inst: ProblemInstance, alg: HopAlgorithm):
    if alg.kind == "lsh4" and alg.t0 > inst.n_total:
        raise ValueError(f"lsh4 t0={alg.t0} exceeds N={inst.n_total}")


def _check_setting(cfg: SimulationConfig, drift: int):
    if drift < 0:
        raise ValueError("drift must be non-negative")
    if cfg.setting == "sync" and drift != 0:
        raise ValueError("synchronous setting requires drift 0")


def run_attempt(
    inst: ProblemInstance,
    alg: HopAlgorithm,
    cfg: SimulationConfig,
    shared: SharedRandomness,
    priv1: PrivateRandomness,
    priv2: PrivateRandomness,
    drift: int = 0,
    start_slot: int = 0,
    budget: Optional[int] = None,
) -> Optional[int]:
    """TTR of one attempt, or ``None`` when it is censored by the budget."""
    _check_setting(cfg, drift)
    _check_alg(inst, alg)
    budget = cfg.slots_budget if budget is None else budget
    att = _Attempt(inst, alg, shared, priv1, priv2, drift, start_slot)
    chunk = inst.n_total if alg.kind == "lsh2" else 32
    t = 0
    ttr = None
    while t < budget:
        ts = np.arange(t, min(t + chunk, budget))
        hit = np.flatnonzero(att.hops(0, ts) == att.hops(1, ts))
        if hit.size:
            ttr = int(ts[hit[0]]) + 1
            break
        t = int(ts[-1]) + 1
        chunk *= 2
    if alg.kind == "lsh2" and drift == 0:
        _check_lsh2_bound(ttr, budget, inst.n_total)
    return ttr


# Tally of synchronous LSH2 attempts checked against the N-slot bound in this process.
LSH2_BOUND_AUDIT = {"attempts": 0, "max_ttr_over_n": 0.0}


def _check_lsh2_bound(ttr: Optional[int], budget: int, n: int):
    if ttr is not None:
        LSH2_BOUND_AUDIT["attempts"] += 1
        LSH2_BOUND_AUDIT["max_ttr_over_n"] = max(LSH2_BOUND_AUDIT["max_ttr_over_n"], ttr / n)
    if (ttr is None and budget >= n) or (ttr is not None and ttr > n):
        raise RendezvousBoundError(f"LSH2 synchronous attempt exceeded N={n} slots")


# -- experiments -----------------------------------------------------------


@dataclass
class ExperimentStats:
    ttrs: np.ndarray
    censored: int
    drift: int = 0

    @property
    def all_censored(self) -> bool:
        return len(self.ttrs) == 0

    @property
    def ettr(self) -> float:
        return float(np.mean(self.ttrs)) if len(self.ttrs) else math.nan

    @property
    def mttr(self) -> int:
        return int(np.max(self.ttrs)) if len(self.ttrs) else 0


Source = Union[ProblemInstance, InstanceSpec]


def _source_key(source: Source) -> tuple:
    if isinstance(source, InstanceSpec):
        return ("spec",) + source.key
    return ("instance", source.n_total, source.c1.channels, source.c2.channels)


def experiment_setup(source: Source, cfg: SimulationConfig, experiment_index: int):
    """Instance, drift and private streams of one experiment."""
    key = _source_key(source)
    base = cfg.base_seed
    if isinstance(source, InstanceSpec):
        inst = generate(source, PrivateRandomness(derive_seed(base, "instance", key, experiment_index)))
    else:
        inst = source
    drift = 0
    if cfg.setting == "async":
        drift = cfg.drift.draw(PrivateRandomness(derive_seed(base, "drift", key, experiment_index)))
    priv1 = PrivateRandomness(derive_seed(base, "user1", key, experiment_index))
    priv2 = PrivateRandomness(derive_seed(base, "user2", key, experiment_index))
    return key, inst, drift, priv1, priv2


# -- batched attempts ------------------------------------------------------
#
# The reference path above evaluates one attempt at a time.  The functions
# below evaluate many attempts of one experiment at once and must agree with
# it bit for bit: same seeds, same streams, same hop rule.

_MAX_CELLS = 1 << 22


def _hop_table(keys: np.ndarray, labels: np.ndarray, n: int) -> np.ndarray:
    """``table[a, v]`` = label of the first ring position >= ``v`` (cyclically)
    among ``keys[a]``.

    ``keys[a, i]`` is the (permuted) ring position carrying ``labels[i]``.
    Built by repeating each label over the run of hash values it captures.
    """
    k, m = keys.shape
    order = np.argsort(keys, axis=1)
    sk = np.take_along_axis(keys, order, axis=1)
    runs = np.empty((k, m + 1), dtype=np.int64)
    runs[:, 0] = sk[:, 0] + 1
    runs[:, 1:m] = np.diff(sk, axis=1)
    runs[:, m] = n - 1 - sk[:, -1]
    vals = labels[order]
    vals = np.concatenate([vals, vals[:, :1]], axis=1)
    return np.repeat(vals.ravel(), runs.ravel()).reshape(k, n)


def _attempt_tables(inst: ProblemInstance, alg: HopAlgorithm, seeds: Sequence[int]):
    n = inst.n_total
    if alg.kind == "lsh":
        keys = [c.array[None, :] for c in (inst.c1, inst.c2)]
    else:
        pi1 = batch_permutations(seeds, "pi1", n)
        keys = [pi1[:, c.array] for c in (inst.c1, inst.c2)]
    return [_hop_table(kk, c.array, n) for kk, c in zip(keys, (inst.c1, inst.c2))]


def _sync_collision_mask(inst: ProblemInstance, seeds: Sequence[int]) -> np.ndarray:
    """``mask[a, v]``: both users pick the same channel for hash value ``v``.

    That happens exactly when the first channel of the union clockwise from
    ``v`` is a common one.
    """
    union = np.union1d(inst.c1.array, inst.c2.array)
    common = np.isin(union, inst.c2.array) & np.isin(union, inst.c1.array)
    pi1 = batch_permutations(seeds, "pi1", inst.n_total)
    return _hop_table(pi1[:, union], common, inst.n_total)


def batch_ttrs(
    inst: ProblemInstance,
    alg: HopAlgorithm,
    seeds: Sequence[int],
    drifts,
    cap: int,
) -> np.ndarray:
    """TTRs of independent attempts with the given shared seeds; 0 if none within ``cap``.

    Valid for the hash-driven rules (lsh, lsh2, lsh3), whose attempts do not
    depend on the experiment clock.
    """
    if alg.kind not in ("lsh", "lsh2", "lsh3"):
        raise ValueError(f"{alg.kind} attempts depend on private clocks; not batchable")
    n = inst.n_total
    k = len(seeds)
    drifts = np.broadcast_to(np.asarray(drifts, dtype=np.int64), (k,))
    if alg.kind == "lsh2":
        keys2 = batch_sort_keys(seeds, "pi2", n)
        if not drifts.any():
            # pi2 = argsort(keys2), so the first slot whose hash value hits the
            # collision set is the rank of the set's smallest key
            masked = np.where(_sync_collision_mask(inst, seeds), keys2, np.uint64(MASK64))
            first = masked.min(axis=1)
            ttr = (keys2 < first[:, None]).sum(axis=1) + 1
            return np.where(ttr <= cap, ttr, 0)
        pi2 = np.argsort(keys2, axis=1)
    tab1, tab2 = _attempt_tables(inst, alg, seeds)
    shared_table = tab1.shape[0] == 1
    ukeys = stream_keys(list(seeds), "U") if alg.kind != "lsh2" else None
    ttr = np.zeros(k, dtype=np.int64)
    open_ = np.arange(k)
    t0 = 0
    chunk = n if alg.kind == "lsh2" else 64
    while open_.size and t0 < cap:
        width = max(1, min(chunk, cap - t0, _MAX_CELLS // open_.size))
        ts = np.arange(t0, t0 + width)[None, :]
        d = drifts[open_][:, None]
        if alg.kind == "lsh2":
            rows = pi2[open_]
            v1 = np.take_along_axis(rows, np.broadcast_to(ts % n, (open_.size, width)), axis=1)
            v2 = np.take_along_axis(rows, (ts + d) % n, axis=1)
        else:
            kk = ukeys[open_][:, None]
            v1 = to_range(hash_values(kk, ts), n)
            v2 = to_range(hash_values(kk, ts + d), n)
        if shared_table:
            h1, h2 = tab1[0][v1], tab2[0][v2]
        else:
            h1 = np.take_along_axis(tab1[open_], v1, axis=1)
            h2 = np.take_along_axis(tab2[open_], v2, axis=1)
        hit = h1 == h2
        found = hit.any(axis=1)
        ttr[open_[found]] = t0 + hit[found].argmax(axis=1) + 1
        open_ = open_[~found]
        t0 += width
        chunk *= 2
    return ttr


def _lsh4_attempts(inst, alg, seeds, drift, priv1, priv2, start, budget, ttrs) -> bool:
    """Run LSH4 attempts from slot ``start``; returns True once the budget censors one."""
    tab1, tab2 = _attempt_tables(inst, alg, seeds)
    head = batch_permutations(seeds, "pi2", inst.n_total)[:, : alg.t0]
    ms1 = np.take_along_axis(tab1, head, axis=1)
    ms2 = np.take_along_axis(tab2, head, axis=1)
    g = np.arange(start, budget)
    lanes = []
    for priv, c, off in ((priv1, inst.c1, 0), (priv2, inst.c2, drift)):
        pick = priv.floats(PICK, g + off)
        lanes.append((priv.floats(COIN, g + off) < alg.p,
                      (pick * alg.t0).astype(np.int64),
                      pick_uniform(c.array, pick)))
    (use1, mi1, full1), (use2, mi2, full2) = lanes
    pos = 0  # offset of the current attempt's first slot within g
    for a in range(len(seeds)):
        lo, width = pos, 64
        while True:
            hi = min(lo + width, len(g))
            h1 = np.where(use1[lo:hi], ms1[a][mi1[lo:hi]], full1[lo:hi])
            h2 = np.where(use2[lo:hi], ms2[a][mi2[lo:hi]], full2[lo:hi])
            hit = np.flatnonzero(h1 == h2)
            if hit.size:
                break
            if hi == len(g):
                return True
            lo, width = hi, 2 * width
        ttr = lo + int(hit[0]) + 1 - pos
        ttrs.append(ttr)
        pos += ttr
        if pos == len(g):
            return False
    return False


def run_experiment(
    source: Source,
    alg: HopAlgorithm,
    cfg: SimulationConfig,
    experiment_index: int,
    vectorized: bool = True,
) -> ExperimentStats:
    key, inst, drift, priv1, priv2 = experiment_setup(source, cfg, experiment_index)
    _check_alg(inst, alg)
    budget = cfg.slots_budget

    exp_seed = derive_seed(cfg.base_seed, "shared", key, experiment_index)

    ttrs: list[int] = []
    censored = 0
    if not vectorized:
        start = 0
        while start < budget:
            (seed,) = seed_stream(exp_seed, "attempt", len(ttrs), len(ttrs) + 1)
            ttr = run_attempt(inst, alg, cfg, SharedRandomness(seed),
                              priv1, priv2, drift, start, budget - start)
            if ttr is None:
                censored = 1
                break
            ttrs.append(ttr)
            start += ttr
    elif alg.kind in MEMORYLESS:
        # no per-attempt state: hop the whole budget once and cut at collisions
        att = _Attempt(inst, alg, None, priv1, priv2, drift, 0)
        ts = np.arange(budget)
        hits = np.flatnonzero(att.hops(0, ts) == att.hops(1, ts)) + 1
        ttrs = np.diff(hits, prepend=0).tolist()
        censored = 0 if hits.size and hits[-1] == budget else 1
    else:
        start = 0
        batch = 32
        while start < budget:
            remaining = budget - start
            if ttrs:
                batch = int(min(4096, max(8, 1.25 * remaining * len(ttrs) / start + 4)))
            batch = min(batch, remaining)
            seeds = seed_stream(exp_seed, "attempt", len(ttrs), len(ttrs) + batch)
            if alg.kind == "lsh4":
                stop = _lsh4_attempts(inst, alg, seeds, drift, priv1, priv2, start, budget, ttrs)
                start = int(sum(ttrs))
                if stop:
                    censored = 1
                    break
                continue
            for ttr in batch_ttrs(inst, alg, seeds, drift, remaining).tolist():
                if alg.kind == "lsh2" and drift == 0:
                    _check_lsh2_bound(ttr or None, budget - start, inst.n_total)
                if ttr == 0 or ttr > budget - start:
                    censored = 1
                    break
                ttrs.append(ttr)
                start += ttr
                if start == budget:
                    break
            if censored:
                break
    return ExperimentStats(np.array(ttrs, dtype=np.int64), censored, drift)


# -- sweeps ----------------------------------------------------------------


def theory_ettr(alg: HopAlgorithm, setting: str, prof: theory.InstanceProfile) -> float:
    """Closed-form ETTR matching ``alg`` in ``setting``; NaN where none exists."""
    kind = alg.kind
    if kind == "random":
        return theory.random_ettr(prof)
    if kind == "lsh4":
        return theory.lsh4_ettr_approx(prof, alg.t0, alg.p)
    if setting == "sync" and kind in ("lsh", "lsh2", "lsh3"):
        return theory.lsh2_limit_ettr(prof)
    if setting == "async" and kind in ("lsh", "lsh3"):
        return theory.lsh3_ettr_approx(prof)
    return math.nan


@dataclass
class SweepRow:
    setting: str
    algorithm: str
    N: int
    n1: int
    n2: int
    n12: int
    jaccard: float
    experiments: int
    slots: int
    ettr_mean: float
    ettr_ci95: float
    mttr_mean: float
    mttr_max: int
    censored: int
    theory_ettr: float


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.6f}"
    return str(v)


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        def clean(d):
            return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}

        return json.dumps([clean(asdict(r)) for r in self.rows], indent=2) + "\n"


def _experiment_block(source, alg, cfg, lo, hi):
    out = []
    for e in range(lo, hi):
        s = run_experiment(source, alg, cfg, e)
        out.append((s.ettr, s.mttr, s.censored))
    return out


def _summarise(spec, alg, cfg, per_exp) -> SweepRow:
    arr = np.array([(e, m) for e, m, _ in per_exp if not math.isnan(e)], dtype=float).reshape(-1, 2)
    ettrs, mttrs = arr[:, 0], arr[:, 1]
    k = len(ettrs)
    prof = theory.InstanceProfile(spec.n1, spec.n2, spec.n12)
    return SweepRow(
        setting=cfg.setting,
        algorithm=alg.name,
        N=spec.n_total,
        n1=spec.n1,
        n2=spec.n2,
        n12=spec.n12,
        jaccard=spec.jaccard,
        experiments=cfg.experiments,
        slots=cfg.slots_budget,
        ettr_mean=float(ettrs.mean()) if k else math.nan,
        ettr_ci95=float(1.96 * ettrs.std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan,
        mttr_mean=float(mttrs.mean()) if k else math.nan,
        mttr_max=int(mttrs.max()) if k else 0,
        censored=int(sum(c for _, _, c in per_exp)),
        theory_ettr=theory_ettr(alg, cfg.setting, prof),
    )


def run_sweep(
    specs: Sequence[InstanceSpec],
    algs: Sequence[HopAlgorithm],
    cfg: SimulationConfig,
    threads: int = 1,
) -> SweepResult:
    """One row per (algorithm, spec), algorithm-major."""
    jobs = [(alg, spec) for alg in algs for spec in specs]
    n_exp = cfg.experiments
    if threads <= 1:
        per_job = [_experiment_block(spec, alg, cfg, 0, n_exp) for alg, spec in jobs]
    else:
        step = max(1, -(-n_exp // (4 * threads)))
        blocks = [(i, lo, min(lo + step, n_exp)) for i in range(len(jobs)) for lo in range(0, n_exp, step)]
        per_job = [[] for _ in jobs]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_experiment_block, jobs[i][1], jobs[i][0], cfg, lo, hi) for i, lo, hi in blocks]
            for (i, _, _), fut in zip(blocks, futures):
                per_job[i].extend(fut.result())
    return SweepResult([_summarise(spec, alg, cfg, res) for (alg, spec), res in zip(jobs, per_job)])


def estimate_prob(
    inst: ProblemInstance,
    alg: HopAlgorithm,
    cfg: SimulationConfig,
    samples: int,
    vectorized: bool = True,
) -> float:
    """Fraction of single-slot trials, each with fresh randomness, in which both users collide."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    key = _source_key(inst)
    base = cfg.base_seed
    seeds = seed_stream(derive_seed(base, "trial", key), "shared", 0, samples)
    drifts = np.zeros(samples, dtype=np.int64)
    if cfg.setting == "async":
        span = cfg.drift.hi - cfg.drift.lo + 1
        rng = PrivateRandomness(derive_seed(base, "trial-drift", key))
        drifts = cfg.drift.lo + rng.integers("drift", np.arange(samples), span)
    if vectorized and alg.kind in ("lsh", "lsh2", "lsh3"):
        step = max(1, _MAX_CELLS // (4 * inst.n_total))
        hits = sum(
            int(np.count_nonzero(batch_ttrs(inst, alg, seeds[i : i + step], drifts[i : i + step], 1)))
            for i in range(0, samples, step)
        )
        return hits / samples
    privs1 = seed_stream(derive_seed(base, "trial", key), "user1", 0, samples)
    privs2 = seed_stream(derive_seed(base, "trial", key), "user2", 0, samples)
    ts = np.zeros(1, dtype=np.int64)
    hits = 0
    for k in range(samples):
        att = _Attempt(inst, alg, SharedRandomness(seeds[k]), PrivateRandomness(privs1[k]),
                       PrivateRandomness(privs2[k]), int(drifts[k]), 0)
        hits += int(att.hops(0, ts)[0] == att.hops(1, ts)[0])
    return hits / samples
