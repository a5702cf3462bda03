"""Command line: compute, pilot, verify, and the worker/merge pair for shared-disk runs."""

from __future__ import annotations

import argparse
import logging
import math
import os
import random
import sys
import time
from pathlib import Path
from typing import List, Optional

from . import engine
from .engine import (ComputationFailed, Options, choose_points, compute_modular_polynomial,
                     evaluate_row, holdout_check, interpolation_phase, pilot_run, plan_size)
from .modfunc import FunctionFamily, family_profile
from .numerics import FormatError, log2_abs
from .qexp import oracle_modular_polynomial, random_prime, reduce_mod
from .storage import (JobManifest, load_manifest, read_modpoly, read_row, row_path,
                      save_manifest, split_ranges, write_modpoly, write_row)

log = logging.getLogger("modpoly")

ORACLE_FAMILIES = ("classical", "canonical")


def _family_args(p: argparse.ArgumentParser):
    p.add_argument("--family", required=True,
                   choices=["classical", "canonical", "atkin", "schlaefli", "eta2quotient"])
    p.add_argument("--level", type=int, required=True, help="prime level ell")
    p.add_argument("--r", type=int, help="Hecke prime of the atkin family (default: smallest admissible)")
    p.add_argument("--p1", type=int, help="first prime of the eta2quotient family")
    p.add_argument("--p2", type=int, help="second prime of the eta2quotient family")


def _engine_args(p: argparse.ArgumentParser):
    p.add_argument("--threads", type=int, default=None, help="evaluation processes (default: all cores)")
    p.add_argument("--safety", type=float, default=1.3, help="pilot height multiplier in [1.1, 2]")
    p.add_argument("--precision-override", type=int, default=None, help="skip the pilot, use this many bits")
    p.add_argument("--deg-j-override", type=int, default=None, help="degree in the base function")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--sparse", dest="sparse", action="store_true", default=None,
                   help="interpolate only admissible Schlaefli exponents (default for that family)")
    g.add_argument("--dense", dest="sparse", action="store_false", help="interpolate every base power")


def _family(args) -> FunctionFamily:
    kw = {}
    if args.family == "atkin" and args.r is not None:
        kw["r"] = args.r
    if args.family == "eta2quotient":
        if args.p1 is None or args.p2 is None:
            raise ValueError("eta2quotient needs --p1 and --p2")
        kw.update(p1=args.p1, p2=args.p2)
    return FunctionFamily(args.family, args.level, **kw)


def _options(args) -> Options:
    return Options(safety=args.safety, threads=args.threads, precision_override=args.precision_override,
                   deg_j_override=args.deg_j_override, sparse=args.sparse,
                   progress=lambda m: log.info(m))


def _job_dir(args) -> Path:
    return Path(args.dir or os.environ.get("MODPOLY_DIR") or ".")


def _default_out(fam: FunctionFamily) -> str:
    extra = "".join(f"_{k}{v}" for k, v in sorted(fam.params().items()))
    return f"phi_{fam.kind}_{fam.ell}{extra}.mp"


def _fmt_time(t) -> str:
    return "-" if t is None else f"{t:.2f} s"


# --- subcommands ---------------------------------------------------------------

def cmd_compute(args) -> int:
    fam = _family(args)
    t0 = time.perf_counter()
    poly = compute_modular_polynomial(fam, _options(args))
    r = poly.report
    out = args.out or _default_out(fam)
    write_modpoly(poly, out)
    print(f"{fam.label()}: degX {poly.deg_X}, degJ {poly.deg_j}, height {poly.height} bits")
    print(f"pilot height {r.get('pilot_height')}, precision {r.get('precision')} bits, "
          f"attempts {len(r.get('attempts', []))}")
    print(f"time for pilot {_fmt_time(r.get('time_pilot'))}, evaluation {_fmt_time(r.get('time_evaluation'))}, "
          f"interpolation {_fmt_time(r.get('time_interpolation'))}, total {time.perf_counter() - t0:.2f} s")
    if "holdout_log2_residual" in r:
        print(f"holdout residual 2^{r['holdout_log2_residual']:.1f} at {r['holdout_precision']} bits")
    print(f"written to {out}")
    return 0


def _degree_for(fam: FunctionFamily, args) -> int:
    d = args.deg_j_override
    if d is None:
        d = family_profile(fam).deg_j_known
    if d is None:
        raise ValueError(f"the degree is not known for the {fam.kind} family; pass --deg-j-override")
    return d


def cmd_pilot(args) -> int:
    fam = _family(args)
    opts = _options(args)
    est = pilot_run(fam, _degree_for(fam, args), args.safety, opts.use_sparse(fam), opts.workers())
    print(f"{fam.label()}: pilot height {est.pilot_height} bits, production precision "
          f"{est.production_precision} bits")
    return 0


def cmd_verify(args) -> int:
    poly = read_modpoly(args.file)
    fam = poly.family
    ok = True
    if fam.kind in ORACLE_FAMILIES and not args.residual:
        rng = random.Random(args.seed)
        terms = poly.all_terms()
        for _ in range(args.primes):
            p = random_prime(62, rng)
            oracle = oracle_modular_polynomial(fam.kind, fam.ell, p).coeffs
            mine = reduce_mod(terms, p)
            for key in sorted(set(mine) | set(oracle), reverse=True):
                if mine.get(key, 0) != oracle.get(key, 0):
                    print(f"FAIL mod {p}: coefficient (r,s) = {key} is {mine.get(key, 0)}, "
                          f"oracle has {oracle.get(key, 0)}")
                    return 1
            print(f"ok mod {p}")
        return 0
    if fam.kind == "schlaefli":
        admissible = engine.schlaefli_sparsity_filter(fam.ell)
        bad = [k for k in poly.all_terms() if not admissible(*k)]
        if bad:
            print(f"FAIL: inadmissible exponent {bad[0]}")
            ok = False
        if not poly.is_symmetric():
            print("FAIL: polynomial is not symmetric")
            ok = False
    P = math.ceil(poly.height * 1.3) + engine.GUARD + 64
    passed, res, Ph = holdout_check(poly, P)
    print(f"holdout residual 2^{log2_abs(res):.1f} at {Ph} bits: {'ok' if passed else 'FAIL'}")
    return 0 if ok and passed else 1


def _manifest_for(args) -> JobManifest:
    """The job's manifest, created from the flags if the directory has none."""
    directory = _job_dir(args)
    existing = load_manifest(directory)
    fam = _family(args) if args.family else None
    if fam is None:
        if existing is None:
            raise ValueError(f"no manifest in {directory}; pass the family flags")
        return existing
    opts = _options(args)
    sparse = opts.use_sparse(fam)
    deg_j = _degree_for(fam, args)
    P = args.precision_override
    if P is None:
        P = pilot_run(fam, deg_j, args.safety, sparse, 1).production_precision
    n = plan_size(fam, deg_j, sparse)
    m = JobManifest(fam.kind, fam.ell, fam.params(), deg_j, P, sparse, args.safety, n,
                    split_ranges(n, args.workers), str(directory))
    on_disk = save_manifest(m)
    if not on_disk.same_job(m):
        raise ValueError(f"{directory} holds a manifest for a different job")
    return on_disk


def _plan(m: JobManifest):
    return choose_points(m.family, m.deg_j, m.precision, m.safety, m.sparse)


def _valid_row(path, k, plan) -> bool:
    try:
        row, P = read_row(path)
    except (OSError, FormatError, ArithmeticError):
        return False
    return row.k == k and P == plan.precision and row.point == plan.points[k]


def cmd_worker(args) -> int:
    m = _manifest_for(args)
    if not 0 <= args.index < len(m.ranges):
        raise ValueError(f"worker index must lie in 0..{len(m.ranges) - 1}")
    plan = _plan(m)
    lo, hi = m.ranges[args.index]
    done = 0
    for k in range(lo, hi):
        path = row_path(m.directory, k)
        if _valid_row(path, k, plan):
            continue
        row = evaluate_row(m.family, k, plan.points[k], plan.precision)
        write_row(m.directory, row, plan.precision)
        done += 1
    print(f"worker {args.index}: rows {lo}..{hi - 1}, {done} evaluated, {hi - lo - done} already present")
    return 0


def cmd_merge(args) -> int:
    m = _manifest_for(args)
    plan = _plan(m)
    rows, missing = [], []
    for k in range(m.npoints):
        path = row_path(m.directory, k)
        if not _valid_row(path, k, plan):
            missing.append(k)
            continue
        rows.append(read_row(path)[0])
    if missing:
        print(f"missing or corrupt rows: {' '.join(map(str, missing))}", file=sys.stderr)
        return 1
    t0 = time.perf_counter()
    poly = interpolation_phase(plan, rows)
    t1 = time.perf_counter()
    passed, res, Ph = holdout_check(poly, plan.precision)
    if not passed:
        print(f"holdout residual 2^{log2_abs(res):.1f} too large; rerun with a higher --precision-override",
              file=sys.stderr)
        return 1
    out = args.out or str(Path(m.directory) / _default_out(m.family))
    write_modpoly(poly, out)
    print(f"{m.family.label()}: degX {poly.deg_X}, degJ {poly.deg_j}, height {poly.height} bits, "
          f"precision {plan.precision}, time for interpolation {t1 - t0:.2f} s")
    print(f"written to {out}")
    return 0


# --- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modpoly", description="Exact modular polynomials by "
                                 "evaluation and interpolation.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="compute a modular polynomial")
    _family_args(p)
    _engine_args(p)
    p.add_argument("--out", help="output file (MODPOLY v1)")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("pilot", help="estimate the height with a 100-bit run")
    _family_args(p)
    _engine_args(p)
    p.set_defaults(func=cmd_pilot)

    p = sub.add_parser("verify", help="check a polynomial file")
    p.add_argument("file")
    p.add_argument("--primes", type=int, default=5, help="random 62-bit primes for the oracle check")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--residual", action="store_true", help="holdout residual check only")
    p.set_defaults(func=cmd_verify)

    for name, func, helptext in (("worker", cmd_worker, "evaluate one range of points into row files"),
                                 ("merge", cmd_merge, "interpolate the row files of a job")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--family", choices=["classical", "canonical", "atkin", "schlaefli", "eta2quotient"],
                       help="job flags; needed only to create the manifest")
        p.add_argument("--level", type=int)
        p.add_argument("--r", type=int)
        p.add_argument("--p1", type=int)
        p.add_argument("--p2", type=int)
        _engine_args(p)
        p.add_argument("--dir", help="job directory (default: $MODPOLY_DIR or .)")
        p.add_argument("--workers", type=int, default=1, help="number of ranges in a new manifest")
        if name == "worker":
            p.add_argument("--index", type=int, default=0, help="which range to evaluate")
        else:
            p.add_argument("--out", help="output file (default: inside the job directory)")
        p.set_defaults(func=func)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    if getattr(args, "family", None) and getattr(args, "level", None) is None:
        print("error: --level is required with --family", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValueError, FormatError, ComputationFailed, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
