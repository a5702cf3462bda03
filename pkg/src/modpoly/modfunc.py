"""Numerical evaluation of eta-based modular functions.

Everything goes through Dedekind's eta: the argument is first moved into the
fundamental domain with the two transformation laws, and then the sparse
pentagonal series is summed.  Families of modular functions are described by
:class:`FunctionFamily`; :func:`evaluate_conjugate` gives the value of the
family's function at ``M z`` for a unimodular ``M``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import gmpy2
from gmpy2 import mpc, mpfr

from .numerics import root_of_unity, working_precision

GUARD_BITS = 24

KINDS = ("classical", "canonical", "atkin", "schlaefli", "eta2quotient")

# Levels for which the double eta quotient is a Hauptmodul of X_0^+(N).
HAUPTMODUL_LEVELS = (35, 39)


class ReductionError(RuntimeError):
    """Argument reduction did not terminate; the input is not in the upper half plane."""


def _is_prime(n) -> bool:
    return n is not None and n >= 2 and bool(gmpy2.is_prime(n))


@dataclass(frozen=True)
class FunctionFamily:
    """Which modular function is used, together with its level parameters."""

    kind: str
    ell: int
    r: Optional[int] = None
    p1: Optional[int] = None
    p2: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family {self.kind!r}")
        if not _is_prime(self.ell):
            raise ValueError(f"level {self.ell} is not prime")
        if self.kind == "schlaefli" and math.gcd(self.ell, 48) != 1:
            raise ValueError("Schlaefli level must be prime to 48")
        if self.kind == "atkin":
            if self.r is None:
                object.__setattr__(self, "r", select_hecke_prime(self.ell))
            if not atkin_pair_ok(self.ell, self.r):
                raise ValueError(f"r={self.r} is not admissible for level {self.ell}")
        if self.kind == "eta2quotient":
            p1, p2 = self.p1, self.p2
            if not (_is_prime(p1) and _is_prime(p2)) or p1 == p2:
                raise ValueError("eta2quotient needs two distinct primes p1, p2")
            if ((p1 - 1) * (p2 - 1)) % 24:
                raise ValueError("24 must divide (p1-1)(p2-1)")
            if p1 * p2 not in HAUPTMODUL_LEVELS:
                raise ValueError(
                    f"N={p1 * p2}: only N in {HAUPTMODUL_LEVELS} give a Hauptmodul"
                )
            if (p1 * p2) % self.ell == 0:
                raise ValueError("level must be prime to N")

    @property
    def s(self) -> int:
        """Exponent 12/gcd(12, ell-1) of the canonical family."""
        return 12 // math.gcd(12, self.ell - 1)

    @property
    def N(self) -> int:
        return self.p1 * self.p2 if self.kind == "eta2quotient" else 1

    @property
    def exponent_s_w(self) -> int:
        if self.kind != "eta2quotient":
            return 1
        return 24 // math.gcd(24, (self.p1 - 1) * (self.p2 - 1))

    @property
    def base(self) -> str:
        return {"schlaefli": "weber", "eta2quotient": "eta2quotient"}.get(self.kind, "j")

    def params(self) -> dict:
        if self.kind == "atkin":
            return {"r": self.r}
        if self.kind == "eta2quotient":
            return {"p1": self.p1, "p2": self.p2}
        return {}

    def label(self) -> str:
        extra = "".join(f" {k}={v}" for k, v in self.params().items())
        return f"{self.kind} ell={self.ell}{extra}"


@dataclass(frozen=True)
class FamilyProfile:
    deg_X: int
    deg_j_known: Optional[int]
    v: Optional[Fraction]
    v_inf: Optional[Fraction]
    base: str


def family_profile(fam: FunctionFamily) -> FamilyProfile:
    ell = fam.ell
    if fam.kind == "classical":
        v, v_inf = Fraction(-1, ell), Fraction(-ell)
    elif fam.kind == "canonical":
        v = Fraction(-fam.s * (ell - 1), 12 * ell)
        v_inf = Fraction(fam.s * (ell - 1), 12)
    else:
        return FamilyProfile(ell + 1, None, None, None, fam.base)
    d = ell * abs(v) + max(0, -v_inf)
    assert d.denominator == 1
    return FamilyProfile(ell + 1, int(d), v, v_inf, fam.base)


def atkin_pair_ok(ell: int, r: int) -> bool:
    return (
        _is_prime(r)
        and r >= 5
        and r != ell
        and ((r - 1) * (ell + 1)) % 24 == 0
        and gmpy2.legendre(r, ell) == 1
        and gmpy2.legendre(ell, r) == 1
    )


def select_hecke_prime(ell: int) -> int:
    """Smallest admissible Hecke prime r for the Atkin function of level ``ell``."""
    if not _is_prime(ell) or ell in (2, 3):
        raise ValueError("level must be a prime >= 5")
    r = 5
    while not atkin_pair_ok(ell, r):
        r = int(gmpy2.next_prime(r))
    return r


# --- eta ---------------------------------------------------------------------

def reduce_to_fundamental_domain(z, P: int):
    """Move ``z`` into the fundamental domain.

    Returns ``(z', mult)`` with ``eta(z) = mult * eta(z')``.  Translations are
    accumulated as a power of exp(i*pi/12), inversions as a running product of
    principal square roots.
    """
    Pw = P + GUARD_BITS
    with working_precision(Pw):
        z = mpc(z)
        if not z.imag > 0:
            raise ValueError("argument must lie in the upper half plane")
        max_steps = 64 + 8 * math.ceil(math.log2(1 + 1 / float(max(z.imag, mpfr(2) ** -1000))))
        slack = 1 - mpfr(2) ** (-(P // 2))
        turns = 0
        mult = mpc(1)
        for _ in range(max_steps):
            n = int(gmpy2.rint(z.real))
            if n:
                z = z - n
                turns += n
            if gmpy2.norm(z) < slack:
                w = -1 / z
                # eta(-1/w) = sqrt(-i w) eta(w)
                mult *= gmpy2.sqrt(mpc(0, -1) * w)
                z = w
            else:
                break
        else:
            raise ReductionError(f"no reduction after {max_steps} steps")
        mult *= root_of_unity(24, Pw, turns % 24)
        return z, mult


def pentagonal_sum(q, P: int):
    """sum_{n in Z} (-1)^n q^{n(3n-1)/2}, truncated once terms drop below 2^-(P+8).

    Returns the sum and the number of pentagonal index pairs used.
    """
    with working_precision(P + 8):
        q = mpc(q)
        tol = mpfr(2) ** (-(P + 8))
        total = mpc(1)
        q3 = q * q * q
        a = q  # q^{n(3n-1)/2}, n = 1
        qn = q  # q^n
        step = q3 * q  # q^{3n+1}
        n = 1
        while True:
            b = a * qn  # q^{n(3n+1)/2}
            t = a + b
            total = total - t if n & 1 else total + t
            if abs(a) < tol:
                break
            a *= step
            qn *= q
            step *= q3
            n += 1
        return total, n


def eta(z, P: int) -> mpc:
    """Dedekind eta at precision ``P``."""
    Pw = P + GUARD_BITS
    zr, mult = reduce_to_fundamental_domain(z, P)
    with working_precision(Pw):
        two_pi_i = 2 * gmpy2.const_pi() * mpc(0, 1)
        q24 = gmpy2.exp(two_pi_i * zr / 24)
        q = q24 ** 24
        s, _ = pentagonal_sum(q, Pw)
        return mpc(mult * q24 * s, precision=P)


def w_quotient(z, ell: int, P: int) -> mpc:
    """eta(z/ell) / eta(z)."""
    with working_precision(P + GUARD_BITS):
        z = mpc(z)
        return eta(z / ell, P + 8) / eta(z, P + 8)


def j_invariant(z, P: int) -> mpc:
    """Klein's j via (w^24 + 16)^3 / w^24 with w = eta(z/2)/eta(z)."""
    Pw = P + GUARD_BITS
    with working_precision(Pw):
        z = mpc(z)
        x = (eta(z / 2, Pw) / eta(z, Pw)) ** 24
        return mpc((x + 16) ** 3 / x, precision=P)


def weber_f(z, P: int) -> mpc:
    """Weber's f = zeta_48^-1 eta((z+1)/2) / eta(z)."""
    Pw = P + GUARD_BITS
    with working_precision(Pw):
        z = mpc(z)
        ratio = eta((z + 1) / 2, Pw) / eta(z, Pw)
        return mpc(ratio * root_of_unity(48, Pw, -1), precision=P)


def double_eta_quotient(z, p1: int, p2: int, P: int, power: int = 1) -> mpc:
    """eta(z/p1) eta(z/p2) / (eta(z) eta(z/(p1 p2))), raised to ``power``."""
    Pw = P + GUARD_BITS
    with working_precision(Pw):
        z = mpc(z)
        num = eta(z / p1, Pw) * eta(z / p2, Pw)
        den = eta(z, Pw) * eta(z / (p1 * p2), Pw)
        return mpc((num / den) ** power, precision=P)


def _eta_eta_ell(w, ell: int, P: int) -> mpc:
    return eta(w, P) * eta(ell * w, P)


def hecke_atkin_value(ell: int, r: int, z, P: int) -> mpc:
    """f_{ell,r}(-1/z) with f_{ell,r} = T_r(eta eta_ell) / (eta eta_ell).

    Uses 2r + 4 eta evaluations.
    """
    Pw = P + GUARD_BITS + r.bit_length()
    with working_precision(Pw):
        u = -1 / mpc(z)
        acc = mpc(0)
        for nu in range(r):
            acc += _eta_eta_ell((u + 24 * nu) / r, ell, Pw)
        acc = acc / r + _eta_eta_ell(r * u, ell, Pw)
        return mpc(acc / _eta_eta_ell(u, ell, Pw), precision=P)


def evaluate_conjugate(fam: FunctionFamily, M, z, P: int) -> mpc:
    """Value of the family's function at ``M z``.

    ``M`` is any integer matrix ``(a, b, c, d)`` of determinant 1.
    """
    a, b, c, d = M
    with working_precision(P + GUARD_BITS):
        z = mpc(z)
        w = (a * z + b) / (c * z + d)
    ell = fam.ell
    if fam.kind == "classical":
        return j_invariant(_div(w, ell, P), P)
    if fam.kind == "canonical":
        with working_precision(P + GUARD_BITS):
            return mpc(w_quotient(w, ell, P + 16) ** (2 * fam.s), precision=P)
    if fam.kind == "atkin":
        return hecke_atkin_value(ell, fam.r, w, P)
    if fam.kind == "schlaefli":
        return weber_f(_div(w, ell, P), P)
    return double_eta_quotient(_div(w, ell, P), fam.p1, fam.p2, P, fam.exponent_s_w)


def _div(w, n: int, P: int) -> mpc:
    with working_precision(P + GUARD_BITS):
        return mpc(w) / n


def base_value(fam: FunctionFamily, z, P: int) -> mpc:
    """The function whose powers the coefficients are polynomials in."""
    if fam.base == "j":
        return j_invariant(z, P)
    if fam.base == "weber":
        return weber_f(z, P)
    return double_eta_quotient(z, fam.p1, fam.p2, P, fam.exponent_s_w)
