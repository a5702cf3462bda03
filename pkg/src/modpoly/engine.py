"""Evaluation and interpolation driver.

The polynomial is recovered from its values at points ``z_k`` on the
imaginary axis: for each point all conjugates ``f(M z_k)`` are evaluated and
multiplied out into a monic polynomial in X, whose coefficients ``c_r(z_k)``
are then interpolated as polynomials in the base value ``j(z_k)`` (or the
Weber or double eta quotient value) and rounded to integers.
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import gmpy2
from gmpy2 import mpc, mpfr

from .cosets import coset_system
from .modfunc import (FunctionFamily, base_value, evaluate_conjugate,
                      family_profile, j_invariant)
from .numerics import log2_abs, working_precision
from .polyfloat import DegenerateNodesError, NewtonInterpolator, poly_from_roots

log = logging.getLogger(__name__)

PILOT_PRECISION = 100
GUARD = 32
ROUNDING_TOLERANCE = 0.25
FIRST_DEGREE_GUESS = 8
MAX_PRECISION_DOUBLINGS = 4
MAX_DEGREE_DOUBLINGS = 8
# a rounding failure at a guessed degree may also mean the guess is too low,
# so fewer precision doublings are spent before the degree is doubled
GUESSED_PRECISION_DOUBLINGS = 2


class RoundingFailure(ArithmeticError):
    """Interpolated coefficients are not close enough to integers."""

    def __init__(self, msg, worst=None):
        super().__init__(msg)
        self.worst = worst


class PrecisionTooLow(ArithmeticError):
    """A value that must be real came out with a sizeable imaginary part."""


class DegreeGuessTooLow(ArithmeticError):
    """The highest guessed power of the base function has a nonzero coefficient."""


class FamilyInconsistency(ArithmeticError):
    """A coefficient the family forces to vanish came out nonzero."""


class DegeneratePlanError(ValueError):
    """No set of pairwise distinct interpolation nodes was found."""


class ComputationFailed(RuntimeError):
    """Retry budget exhausted."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or []


# --- data --------------------------------------------------------------------

@dataclass
class InterpolationPlan:
    family: FunctionFamily
    deg_j: int
    points: list  # purely imaginary z_k
    nodes: list  # base values: exact ints for j, reals otherwise
    precision: int
    safety: float = 1.3
    sparse: bool = False

    def __post_init__(self):
        if len(self.points) != len(self.nodes):
            raise ValueError("points and nodes differ in length")
        if len(self.points) != plan_size(self.family, self.deg_j, self.sparse):
            raise ValueError("wrong number of points for this degree")


@dataclass
class EvalRow:
    k: int
    point: mpc
    values: list  # c_1 .. c_degX as reals

    def __post_init__(self):
        if not all(gmpy2.is_finite(v) for v in self.values):
            raise PrecisionTooLow(f"row {self.k} has non-finite entries")


@dataclass
class BivariatePolynomial:
    """Monic in X; ``coeffs[(i, k)]`` multiplies X^i B^k, B the base function.

    The leading coefficient of X^deg_X is 1 and is not stored.
    """

    family: FunctionFamily
    deg_X: int
    deg_j: int
    coeffs: Dict[Tuple[int, int], int]
    report: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def height(self) -> int:
        m = max((abs(c) for c in self.coeffs.values()), default=1)
        return (max(m, 1) - 1).bit_length()

    def all_terms(self) -> Dict[Tuple[int, int], int]:
        out = dict(self.coeffs)
        out[(self.deg_X, 0)] = out.get((self.deg_X, 0), 0) + 1
        return {key: c for key, c in out.items() if c}

    def is_symmetric(self) -> bool:
        t = self.all_terms()
        return all(t.get((k, i), 0) == c for (i, k), c in t.items())


@dataclass(frozen=True)
class HeightEstimate:
    pilot_height: int
    production_precision: int


@dataclass
class Options:
    safety: float = 1.3
    threads: Optional[int] = None
    precision_override: Optional[int] = None
    deg_j_override: Optional[int] = None
    sparse: Optional[bool] = None  # None: on for the Schlaefli family
    holdout: bool = True
    progress: Optional[Callable[[str], None]] = None

    def workers(self) -> int:
        return self.threads or os.cpu_count() or 1

    def use_sparse(self, family: FunctionFamily) -> bool:
        if self.sparse is None:
            return family.kind == "schlaefli"
        return self.sparse


def production_precision(pilot_height: int, safety: float) -> int:
    return math.ceil(pilot_height * safety) + GUARD


# --- point selection ---------------------------------------------------------

def plan_size(family: FunctionFamily, deg_j: int, sparse: bool = False) -> int:
    if sparse:
        return deg_j // 24 + 1
    return deg_j + 1


def _j_on_axis(y, P: int) -> mpfr:
    with working_precision(P + 16):
        v = j_invariant(mpc(0, y), P)
    return v.real


def solve_j_node(target: int, P: int) -> mpfr:
    """The y >= 1 with j(i y) = target, for an integer target > 1728."""
    if target <= 1728:
        raise ValueError("nodes must exceed 1728")
    # j(iy) is increasing for y >= 1 and close to exp(2 pi y) + 744
    with working_precision(64):
        lo, hi = mpfr(1), mpfr(1) + gmpy2.log(mpfr(target)) / (2 * gmpy2.const_pi())
        if _j_on_axis(hi, 64) < target:
            raise RuntimeError(f"cannot bracket node {target}")
        for _ in range(40):
            mid = (lo + hi) / 2
            if _j_on_axis(mid, 64) < target:
                lo = mid
            else:
                hi = mid
        y = (lo + hi) / 2
    # Newton with a central difference, doubling the precision each step
    final = P + 32
    prec = 64
    while True:
        prec = min(2 * prec, final)
        for _ in range(8 if prec == final else 1):
            with working_precision(prec + 16):
                y = mpfr(y)
                h = mpfr(2) ** (-(prec // 3))
                f0 = _j_on_axis(y, prec) - target
                d = (_j_on_axis(y + h, prec) - _j_on_axis(y - h, prec)) / (2 * h)
                step = f0 / d
                y = y - step
            if prec < final or abs(step) < mpfr(2) ** (-(final + 8)):
                break
        if prec == final:
            break
    with working_precision(final):
        return mpfr(y)


def choose_point(family: FunctionFamily, k: int, deg_j: int, P: int,
                 sparse: bool = False, shift: int = 0):
    """Point ``z_k`` and its node; deterministic in its arguments."""
    if family.base == "j":
        target = 1729 + k
        y = solve_j_node(target, P)
        return mpc(0, y, precision=P + 32), target
    n = plan_size(family, deg_j, sparse)
    # shift > 0 moves the whole grid after a node collision
    with working_precision(P + 32):
        y = 1 + (k + mpfr(shift) / (shift + 3)) / n
        z = mpc(0, y)
    b = base_value(family, z, P + 16)
    if abs(b.imag) > mpfr(2) ** (-(P // 2)) * max(abs(b), 1):
        raise PrecisionTooLow(f"base value at grid point {k} is not real")
    with working_precision(P):
        node = mpfr(b.real)
        if sparse:
            node = node ** 24
    return z, node


def choose_points(family: FunctionFamily, deg_j: int, P: int,
                  safety: float = 1.3, sparse: bool = False) -> InterpolationPlan:
    if deg_j < 0:
        raise ValueError("degree must be non-negative")
    if sparse and family.kind != "schlaefli":
        raise ValueError("the sparse path exists only for the Schlaefli family")
    n = plan_size(family, deg_j, sparse)
    for shift in range(4):
        pts = [choose_point(family, k, deg_j, P, sparse, shift) for k in range(n)]
        points = [p for p, _ in pts]
        nodes = [b for _, b in pts]
        if family.base == "j" or _distinct(nodes, P):
            return InterpolationPlan(family, deg_j, points, nodes, P, safety, sparse)
        log.info("node collision, shifting grid (attempt %d)", shift + 1)
    raise DegeneratePlanError("base values collide on every grid tried")


def _distinct(nodes, P: int) -> bool:
    with working_precision(P):
        eps = mpfr(2) ** (-(P // 2))
        s = sorted(nodes)
        return all(b - a > eps * max(abs(a), 1) for a, b in zip(s, s[1:]))


# --- evaluation --------------------------------------------------------------

def _is_real(v: mpc, P: int) -> bool:
    return abs(v.imag) <= mpfr(2) ** (-(P // 2)) * max(abs(v), 1)


def conjugate_values(family: FunctionFamily, z, P: int) -> list:
    """All values f(M_nu z) for a purely imaginary ``z``.

    Translations nu and ell - nu give complex conjugate values, so only half
    of them are evaluated.  Self-conjugate values are checked to be real.
    """
    reps = coset_system(family).reps
    ell = family.ell
    vals = [None] * len(reps)
    for nu in range(ell):
        mirror = (ell - nu) % ell
        if mirror < nu:
            continue
        v = evaluate_conjugate(family, reps[nu], z, P)
        if mirror == nu:
            if not _is_real(v, P):
                raise PrecisionTooLow(f"conjugate {nu} should be real, imag {v.imag}")
            v = mpc(v.real, 0, precision=P)
            vals[nu] = v
        else:
            vals[nu] = v
            with working_precision(max(v.precision)):
                vals[mirror] = v.conjugate()
    for idx in range(ell, len(reps)):
        v = evaluate_conjugate(family, reps[idx], z, P)
        if not _is_real(v, P):
            raise PrecisionTooLow(f"conjugate {idx} should be real, imag {v.imag}")
        vals[idx] = mpc(v.real, 0, precision=P)
    return vals


def evaluate_row(family: FunctionFamily, k: int, z, P: int) -> EvalRow:
    """c_1(z), ..., c_degX(z): coefficients of X^(degX-1), ..., X^0."""
    roots = conjugate_values(family, z, P)
    poly = poly_from_roots(roots, P, realize=True)
    n = len(roots)
    with working_precision(P):
        values = [mpfr(poly.coeffs[n - r]) for r in range(1, n + 1)]
    return EvalRow(k, z, values)


def _row_task(args):
    return evaluate_row(*args)


def evaluation_phase(plan: InterpolationPlan, threads: int = 1,
                     indices: Optional[Sequence[int]] = None) -> List[EvalRow]:
    """Rows for all points (or the given indices), in index order."""
    if indices is None:
        indices = range(len(plan.points))
    tasks = [(plan.family, k, plan.points[k], plan.precision) for k in indices]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(_row_task, tasks))
    return [_row_task(t) for t in tasks]


# --- interpolation -----------------------------------------------------------

def schlaefli_sparsity_filter(ell: int) -> Callable[[int, int], bool]:
    """Predicate on (base power i, X power k): ell i + k = ell + 1 mod 24."""
    if math.gcd(ell, 24) != 1:
        raise ValueError("level must be prime to 24")

    def admissible(i: int, k: int) -> bool:
        return (ell * i + k - ell - 1) % 24 == 0

    return admissible


def _sparse_offset(ell: int, xpow: int) -> int:
    """Smallest base power admissible next to X^xpow."""
    return ((ell + 1 - xpow) * pow(ell, -1, 24)) % 24


def node_shift(plan: InterpolationPlan) -> int:
    """Integer subtracted from the nodes before interpolating.

    Interpolating at nodes clustered far from 0 loses about d log2|node| bits
    in the monomial conversion and hides the size of the rows from the pilot.
    In t = B - shift the recovered coefficients are still integers, and an
    exact Taylor shift restores powers of B.  For j the nodes become 1..d+1.
    """
    if plan.family.base == "j":
        return 1728
    mid = sorted(plan.nodes)[len(plan.nodes) // 2]
    return int(gmpy2.rint(mid))


def interpolate_columns(plan: InterpolationPlan, rows: Sequence[EvalRow]):
    """Floating-point coefficient columns, one per X power below deg_X.

    Returns ``{xpow: [(power, value), ...]}`` with powers of the shifted
    interpolation variable (``B - shift``, or ``B^24 - shift`` when sparse).
    """
    rows = sorted(rows, key=lambda r: r.k)
    if [r.k for r in rows] != list(range(len(plan.points))):
        raise ValueError("incomplete row set")
    deg_X = len(rows[0].values)
    P = plan.precision
    shift = node_shift(plan)
    with working_precision(P):
        nodes = [b - shift for b in plan.nodes]
    interp = NewtonInterpolator(nodes, P)
    out = {}
    for r in range(1, deg_X + 1):
        xpow = deg_X - r
        vals = [row.values[r - 1] for row in rows]
        if plan.sparse:
            i0 = _sparse_offset(plan.family.ell, xpow)
            with working_precision(P):
                # c(f) = f^i0 * C(f^24); nodes are f^24, recover f itself
                vals = [v / gmpy2.root(u, 24) ** i0 for v, u in zip(vals, plan.nodes)]
        out[xpow] = list(enumerate(interp(vals).coeffs))
    return out


def round_columns(cols, P: int):
    """Nearest integers; returns (coeffs, worst residual, where).

    A value too large to carry 8 fractional bits at precision P counts as a
    failed rounding: its float is integral but says nothing.
    """
    coeffs = {}
    worst, worst_at = mpfr(0), None
    limit = P - 8
    with working_precision(P):
        for xpow, col in cols.items():
            for bpow, c in col:
                rc = gmpy2.rint(c)
                err = abs(c - rc)
                if rc and log2_abs(c) > limit:
                    err = mpfr("inf")
                if err > worst:
                    worst, worst_at = err, (xpow, bpow)
                if rc:
                    coeffs[(xpow, bpow)] = int(rc)
    return coeffs, worst, worst_at


def taylor_shift(coeffs: Dict[Tuple[int, int], int], a: int) -> Dict[Tuple[int, int], int]:
    """Exact substitution B -> B - a in every X column."""
    if not a:
        return dict(coeffs)
    cols: Dict[int, Dict[int, int]] = {}
    for (i, k), c in coeffs.items():
        cols.setdefault(i, {})[k] = c
    out = {}
    for i, col in cols.items():
        n = max(col)
        poly = [0] * (n + 1)
        # Horner in (B - a)
        for k in range(n, -1, -1):
            nxt = [0] * (n + 1)
            for m, v in enumerate(poly[:n]):
                nxt[m + 1] += v
                nxt[m] -= a * v
            nxt[0] += col.get(k, 0)
            poly = nxt
        out.update({(i, k): v for k, v in enumerate(poly) if v})
    return out


def to_base_powers(plan: InterpolationPlan, coeffs: Dict[Tuple[int, int], int]):
    """Undo the node shift and, on the sparse path, the substitution u = B^24."""
    coeffs = taylor_shift(coeffs, node_shift(plan))
    if not plan.sparse:
        return coeffs
    ell = plan.family.ell
    return {(x, _sparse_offset(ell, x) + 24 * t): c for (x, t), c in coeffs.items()}


def interpolation_phase(plan: InterpolationPlan, rows: Sequence[EvalRow],
                        check_top: bool = False) -> BivariatePolynomial:
    """Interpolate, round and assemble the exact polynomial.

    With ``check_top`` the highest interpolated base power must vanish in
    every column, which certifies that the degree guess was large enough.
    """
    fam = plan.family
    cols = interpolate_columns(plan, rows)
    deg_X = len(cols)
    coeffs, worst, worst_at = round_columns(cols, plan.precision)
    if worst >= ROUNDING_TOLERANCE:
        raise RoundingFailure(
            f"rounding residual {float(worst):.3g} at (X^{worst_at[0]}, B^{worst_at[1]})",
            worst=float(worst))
    if check_top:
        top = len(plan.nodes) - 1
        if any(coeffs.get((xpow, top)) for xpow in cols):
            raise DegreeGuessTooLow("top guessed coefficient does not vanish")
    coeffs = to_base_powers(plan, coeffs)
    if fam.kind == "schlaefli":
        ok = schlaefli_sparsity_filter(fam.ell)
        bad = [key for key in coeffs if not ok(key[1], key[0])]
        if bad:
            raise FamilyInconsistency(f"nonzero coefficient at inadmissible exponents {bad[0]}")
    deg_j = max([k for _, k in coeffs] + [0])
    return BivariatePolynomial(fam, deg_X, deg_j, coeffs,
                               report={"precision": plan.precision,
                                       "rounding_log2_residual": log2_abs(worst)})


# --- pilot and holdout -------------------------------------------------------

def pilot_run(family: FunctionFamily, deg_j: Optional[int] = None, safety: float = 1.3,
              sparse: bool = False, threads: int = 1) -> HeightEstimate:
    """Run the pipeline at 100 bits and read off the coefficient size."""
    if deg_j is None:
        deg_j = family_profile(family).deg_j_known
        if deg_j is None:
            raise ValueError("the degree in the base function is not known for this family")
    plan = choose_points(family, deg_j, PILOT_PRECISION, safety, sparse)
    rows = evaluation_phase(plan, threads)
    cols = interpolate_columns(plan, rows)
    biggest = max((log2_abs(c) for col in cols.values() for _, c in col),
                  default=0.0)
    # the same coefficients after rounding and shifting back to powers of j
    shifted = to_base_powers(plan, round_columns(cols, PILOT_PRECISION)[0])
    if shifted:
        biggest = max(biggest, math.log2(max(abs(c) for c in shifted.values())))
    h = max(0, math.ceil(biggest))
    return HeightEstimate(h, production_precision(h, safety))


def holdout_point(P: int) -> mpc:
    with working_precision(P + 32):
        return mpc(0, 1 + 1 / (8 * gmpy2.const_pi()))


def _columns_at(poly: BivariatePolynomial, B, P: int):
    """Column polynomials C_a(B) and their absolute norms sum |c| |B|^k."""
    terms = poly.all_terms()
    with working_precision(P):
        absB = abs(B)
        cols = [mpc(0)] * (poly.deg_X + 1)
        norms = [mpfr(0)] * (poly.deg_X + 1)
        for (i, k), c in terms.items():
            cols[i] += c * B ** k
            norms[i] += abs(c) * absB ** k
    return cols, norms


def _residuals(poly: BivariatePolynomial, fvals, B, P: int):
    cols, norms = _columns_at(poly, B, P)
    out = []
    with working_precision(P):
        for f in fvals:
            val, nrm = mpc(0), mpfr(0)
            af = abs(f)
            for a in range(poly.deg_X, -1, -1):
                val = val * f + cols[a]
                nrm = nrm * af + norms[a]
            out.append((abs(val), nrm))
    return out


def holdout_precision(poly: BivariatePolynomial, P: int) -> int:
    """Precision at which a +-1 change of any coefficient is visible.

    A change of c_{a,k} moves the residual at conjugate nu by
    |f_nu^a B^k| / N_nu; the precision is chosen so that even the smallest
    such ratio stays far above 2^(-P/4).
    """
    fam = poly.family
    z = holdout_point(64)
    fvals = [evaluate_conjugate(fam, M, z, 64) for M in coset_system(fam)]
    B = base_value(fam, z, 64)
    lb = log2_abs(B)
    bits = []
    for _, nrm in _residuals(poly, fvals, B, 64):
        bits.append(log2_abs(nrm))
    worst = min(
        nb + poly.deg_X * max(0.0, -log2_abs(f)) + poly.deg_j * max(0.0, -lb)
        for nb, f in zip(bits, fvals)
    )
    return max(P, 4 * (math.ceil(worst) + 16) + 64)


def holdout_residual(family: FunctionFamily, poly: BivariatePolynomial, P: int) -> mpfr:
    """max over conjugates of |Phi(f(M z*), B(z*))| / norm at a fresh point z*."""
    z = holdout_point(P)
    fvals = [evaluate_conjugate(family, M, z, P) for M in coset_system(family)]
    B = base_value(family, z, P)
    with working_precision(P):
        return max(v / n for v, n in _residuals(poly, fvals, B, P))


def holdout_check(poly: BivariatePolynomial, P: int):
    """(passed, residual, precision used)."""
    Ph = holdout_precision(poly, P)
    res = holdout_residual(poly.family, poly, Ph)
    with working_precision(Ph):
        ok = res < mpfr(2) ** (-(Ph // 4))
    return ok, res, Ph


# --- driver ------------------------------------------------------------------

def _say(options: Options, msg: str):
    log.info(msg)
    if options.progress:
        options.progress(msg)


def _run_at_degree(family: FunctionFamily, deg_j: int, options: Options, guessed: bool):
    """Pilot, production and holdout for one degree; returns the polynomial."""
    threads = options.workers()
    sparse = options.use_sparse(family)
    report = {"deg_j_guess": deg_j, "attempts": [], "sparse": sparse}
    t0 = time.perf_counter()
    if options.precision_override:
        P = options.precision_override
        report["pilot_height"] = None
    else:
        est = pilot_run(family, deg_j, options.safety, sparse, threads)
        P = est.production_precision
        report["pilot_height"] = est.pilot_height
        _say(options, f"pilot: height ~{est.pilot_height} bits, precision {P}")
    report["time_pilot"] = time.perf_counter() - t0
    doublings = GUESSED_PRECISION_DOUBLINGS if guessed else MAX_PRECISION_DOUBLINGS
    for attempt in range(doublings + 1):
        t1 = time.perf_counter()
        try:
            plan = choose_points(family, deg_j, P, options.safety, sparse)
            rows = evaluation_phase(plan, threads)
            t2 = time.perf_counter()
            poly = interpolation_phase(plan, rows, check_top=guessed)
            t3 = time.perf_counter()
        except DegreeGuessTooLow as exc:
            report["attempts"].append((P, str(exc)))
            _say(options, f"degree {deg_j}: {exc}")
            break
        except (RoundingFailure, PrecisionTooLow, DegenerateNodesError) as exc:
            report["attempts"].append((P, str(exc)))
            _say(options, f"precision {P}: {exc}")
            P *= 2
            continue
        report["attempts"].append((P, "ok"))
        report["time_evaluation"] = t2 - t1
        report["time_interpolation"] = t3 - t2
        if options.holdout:
            ok, res, Ph = holdout_check(poly, P)
            report["holdout_log2_residual"] = log2_abs(res)
            report["holdout_precision"] = Ph
            if not ok:
                msg = f"holdout residual 2^{log2_abs(res):.1f} above 2^-{Ph // 4}"
                report["attempts"][-1] = (P, msg)
                _say(options, f"precision {P}: {msg}")
                P *= 2
                continue
        report["precision"] = P
        poly.report.update(report)
        return poly
    raise ComputationFailed(f"no success at degree {deg_j}", report["attempts"])


def compute_modular_polynomial(family: FunctionFamily, options: Optional[Options] = None) -> BivariatePolynomial:
    """The exact modular polynomial of ``family``."""
    options = options or Options()
    if not 1.1 <= options.safety <= 2:
        raise ValueError("safety factor must lie in [1.1, 2]")
    known = options.deg_j_override
    if known is None:
        known = family_profile(family).deg_j_known
    if known is not None:
        return _run_at_degree(family, known, options, guessed=False)
    d = FIRST_DEGREE_GUESS
    diagnostics = []
    for _ in range(MAX_DEGREE_DOUBLINGS + 1):
        _say(options, f"trying degree {d} in the base function")
        try:
            poly = _run_at_degree(family, d, options, guessed=True)
            poly.report["degree_guesses"] = diagnostics + [(d, "ok")]
            return poly
        except ComputationFailed as exc:
            diagnostics.append((d, exc.diagnostics))
        d *= 2
    raise ComputationFailed("degree guesses exhausted", diagnostics)
