"""Command line: ``lshrendezvous sim|theory|oracle|replay``.

Exit codes: 0 success, 1 a checked identity failed, 2 usage error,
3 infeasible instance, 4 enumeration too large.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import __version__, oracle, theory
from .chalgos import HopAlgorithm
from .core import InfeasibleSpecError, InvalidInstanceError, ProblemInstance
from .instances import LAYOUTS, InstanceSpec
from .simengine import Drift, SimulationConfig, estimate_prob, run_sweep

EXIT_FAILED, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_GUARD = 1, 2, 3, 4

THEORY_COLUMNS = (
    "n1", "n2", "n12", "jaccard", "random_ettr", "lower_bound", "lsh2_limit",
    "lsh3_approx_prob", "lsh3_approx_ettr", "lsh4_approx_ettr", "t0_bound",
)

FULL_SCALE = {"experiments": 10_000, "slots": 10_000}


class UsageError(Exception):
    pass


def parse_range(text: str) -> list[int]:
    """``lo:hi[:step]``, inclusive of ``hi``."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise UsageError(f"bad range {text!r}; expected lo:hi[:step]")
    lo, hi, step = int(parts[0]), int(parts[1]), int(parts[2]) if len(parts) == 3 else 1
    if step < 1:
        raise UsageError("range step must be positive")
    return list(range(lo, hi + 1, step))


def parse_algs(names: list[str], t0: int, ps: list[float]) -> list[HopAlgorithm]:
    algs = []
    for name in (n for group in names for n in group.split(",") if n):
        try:
            if name.strip().lower() == "lsh4":
                algs.extend(HopAlgorithm("lsh4", t0, p) for p in ps)
            else:
                algs.append(HopAlgorithm.parse(name))
        except ValueError as err:
            raise UsageError(str(err)) from None
    return algs


def default_seed() -> int:
    return int(os.environ.get("RENDEZVOUS_SEED", "0"))


# -- subcommands -----------------------------------------------------------


def cmd_sim(args) -> tuple[str, dict]:
    if args.paper_scale:
        args.experiments, args.slots = FULL_SCALE["experiments"], FULL_SCALE["slots"]
    n12s = parse_range(args.n12_sweep) if args.n12_sweep else [args.n12]
    if n12s == [None]:
        raise UsageError("give --n12 or --n12-sweep")
    algs = parse_algs(args.alg or ["random"], args.t0, args.p)
    specs = [InstanceSpec(args.N, args.n1, args.n2, k, args.layout) for k in n12s]
    drift = Drift.parse(args.drift)
    cfg = SimulationConfig(args.setting, drift, args.slots, args.experiments, args.seed)
    result = run_sweep(specs, algs, cfg, threads=args.threads)
    text = result.to_json() if args.format == "json" else result.to_csv()
    config = {
        "setting": cfg.setting, "drift": str(drift), "slots": cfg.slots_budget,
        "experiments": cfg.experiments, "N": args.N, "n1": args.n1, "n2": args.n2,
        "n12": n12s, "layout": args.layout, "algorithms": [a.name for a in algs],
    }
    return text, config


def theory_row(prof: theory.InstanceProfile, t0: int, mix: float) -> list:
    return [
        prof.n1, prof.n2, prof.n12, theory.jaccard(prof), theory.random_ettr(prof),
        theory.ettr_lower_bound(prof), theory.lsh2_limit_ettr(prof), theory.lsh3_prob_approx(prof),
        theory.lsh3_ettr_approx(prof), theory.lsh4_ettr_approx(prof, t0, mix), theory.lsh4_t0_bound(prof),
    ]


def cmd_theory(args) -> tuple[str, dict]:
    profiles = []
    for text in args.profile or []:
        try:
            n1, n2, n12 = (int(x) for x in text.split(","))
        except ValueError:
            raise UsageError(f"bad profile {text!r}; expected n1,n2,n12") from None
        profiles.append((n1, n2, n12))
    if args.n12_sweep:
        if args.n1 is None or args.n2 is None:
            raise UsageError("--n12-sweep needs --n1 and --n2")
        profiles.extend((args.n1, args.n2, k) for k in parse_range(args.n12_sweep))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(THEORY_COLUMNS)
    for n1, n2, n12 in profiles:
        prof = theory.InstanceProfile(n1, n2, n12)
        w.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in theory_row(prof, args.t0, args.p)])
    return buf.getvalue(), {"profiles": profiles, "t0": args.t0, "p": args.p}


def _verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def _mc_line(label: str, exact: Fraction, est: float, samples: int) -> tuple[str, bool]:
    sigma = math.sqrt(float(exact) * (1 - float(exact)) / samples)
    ok = abs(est - float(exact)) <= 3 * sigma + 1e-12
    return f"{label}: montecarlo={est:.6f} samples={samples} 3sigma={3 * sigma:.6f} {_verdict(ok)}", ok


def cmd_oracle(args) -> tuple[str, dict]:
    c1 = [int(x) for x in args.c1.split(",")]
    c2 = [int(x) for x in args.c2.split(",")]
    inst = ProblemInstance.of(args.N, c1, c2)
    prof = theory.InstanceProfile.of(inst)
    j = Fraction(inst.n12, inst.n1 + inst.n2 - inst.n12)
    lines, ok = [], True
    if args.alg == "lsh2":
        exact = oracle.exact_prob_lsh2(inst)
        good = exact == j
        ok &= good
        lines.append(f"exact={exact} jaccard={j} {_verdict(good)}")
        lines.append(f"float={float(exact):.6f} approx={theory.jaccard(prof):.6f}")
        cfg = SimulationConfig("sync", base_seed=args.seed)
        line, good = _mc_line("lsh2 sync", exact, estimate_prob(inst, HopAlgorithm("lsh2"), cfg, args.samples), args.samples)
        ok &= good
        lines.append(line)
        if inst.n_total <= oracle.ETTR_MAX_N:
            ettr = oracle.exact_ettr_sync_lsh2(inst)
            good = 1 <= ettr <= inst.n_total
            ok &= good
            lines.append(f"ettr_exact={ettr} ({float(ettr):.6f}) bound=[1,{inst.n_total}] "
                         f"limit={theory.lsh2_limit_ettr(prof):.6f} {_verdict(good)}")
    else:
        exact = oracle.exact_prob_lsh3(inst, drift_nonzero=True)
        lines.append(f"exact={exact} float={float(exact):.6f} approx={theory.lsh3_prob_approx(prof):.6f}")
        cfg = SimulationConfig("async", Drift(1, 100), base_seed=args.seed)
        line, good = _mc_line("lsh3 async", exact, estimate_prob(inst, HopAlgorithm("lsh3"), cfg, args.samples), args.samples)
        ok &= good
        lines.append(line)
    args.failed = not ok
    return "\n".join(lines) + "\n", {"N": args.N, "c1": c1, "c2": c2, "alg": args.alg, "samples": args.samples}


# -- plumbing --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lshrendezvous", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="base seed (default $RENDEZVOUS_SEED or 0)")
        sp.add_argument("--out", type=Path, help="write output here instead of stdout")
        sp.add_argument("--manifest", type=Path, help="manifest path (default: OUT.manifest.json, else stderr)")

    s = sub.add_parser("sim", help="Monte Carlo ETTR/MTTR sweep, CSV or JSON")
    common(s)
    s.add_argument("--setting", choices=("sync", "async"), default="sync")
    s.add_argument("--alg", action="append", help="random, synmac, lsh, lsh2, lsh3, lsh4[:T0:p]; repeatable")
    s.add_argument("--t0", type=int, default=20, help="LSH4 multiset size for a bare 'lsh4'")
    s.add_argument("--p", type=lambda t: [float(x) for x in t.split(",")], default=[0.5],
                   help="LSH4 mixing probabilities for a bare 'lsh4', comma separated")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--n1", type=int, required=True)
    s.add_argument("--n2", type=int, required=True)
    s.add_argument("--n12", type=int)
    s.add_argument("--n12-sweep", help="lo:hi[:step]")
    s.add_argument("--layout", choices=LAYOUTS, default="uniform")
    s.add_argument("--experiments", type=int, default=500)
    s.add_argument("--slots", type=int, default=2000)
    s.add_argument("--paper-scale", action="store_true", help="10,000 experiments x 10,000 slots")
    s.add_argument("--drift", default="1:100", help="clock drift d or lo:hi (async only)")
    s.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=cmd_sim)

    t = sub.add_parser("theory", help="closed-form values over a profile grid")
    common(t)
    t.add_argument("--profile", action="append", help="n1,n2,n12; repeatable")
    t.add_argument("--n1", type=int)
    t.add_argument("--n2", type=int)
    t.add_argument("--n12-sweep", help="lo:hi[:step]")
    t.add_argument("--t0", type=int, default=20)
    t.add_argument("--p", type=float, default=0.5)
    t.set_defaults(func=cmd_theory)

    o = sub.add_parser("oracle", help="exact vs approximate vs Monte Carlo collision probability")
    common(o)
    o.add_argument("--N", type=int, required=True)
    o.add_argument("--c1", required=True, help="comma-separated channels")
    o.add_argument("--c2", required=True, help="comma-separated channels")
    o.add_argument("--alg", choices=("lsh2", "lsh3"), default="lsh2")
    o.add_argument("--samples", type=int, default=20_000)
    o.set_defaults(func=cmd_oracle)

    r = sub.add_parser("replay", help="rerun a manifest and check the output is byte-identical")
    r.add_argument("manifest", type=Path)
    r.add_argument("--out", type=Path, help="also write the regenerated output here")
    r.set_defaults(func=None)
    return p


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def run(argv: list[str]) -> tuple[int, str, dict]:
    """Parse and execute; returns (exit code, output text, manifest)."""
    args = build_parser().parse_args(argv)
    if args.seed is None:
        args.seed = default_seed()
    started = time.time()
    try:
        text, config = args.func(args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE, "", {}
    except oracle.ComplexityGuardError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_GUARD, "", {}
    except (InfeasibleSpecError, InvalidInstanceError) as err:
        print(f"error: infeasible instance: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE, "", {}
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE, "", {}
    manifest = {
        "tool": "lshrendezvous",
        "version": __version__,
        "command": args.command,
        "argv": argv + ["--seed", str(args.seed)],
        "seed": args.seed,
        "config": config,
        "wall_clock_seconds": round(time.time() - started, 3),
        "output_sha256": _sha256(text),
    }
    return (EXIT_FAILED if getattr(args, "failed", False) else 0), text, manifest


def _strip_out(argv: list[str]) -> list[str]:
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
        elif a in ("--out", "--manifest"):
            skip = True
        elif not a.startswith(("--out=", "--manifest=")):
            out.append(a)
    return out


def replay(path: Path, out: Path | None) -> int:
    manifest = json.loads(path.read_text())
    code, text, _ = run(_strip_out(manifest["argv"]))
    if out is not None:
        out.write_text(text)
    same = _sha256(text) == manifest["output_sha256"]
    print(f"replay {'matches' if same else 'DIFFERS from'} {path}", file=sys.stderr)
    return code if same else EXIT_FAILED


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:1] == ["replay"]:
        args = build_parser().parse_args(argv)
        return replay(args.manifest, args.out)
    code, text, manifest = run(argv)
    if not manifest:
        return code
    args = build_parser().parse_args(argv)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    target = args.manifest or (args.out.with_name(args.out.name + ".manifest.json") if args.out else None)
    if target:
        target.write_text(json.dumps(manifest, indent=2) + "\n")
    else:
        sys.stderr.write("manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
