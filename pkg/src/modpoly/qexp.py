"""Exact modular polynomials mod p from q-expansions.

An independent check on the floating-point engine for the classical and
canonical families.  The conjugates f(z + nu) are never formed: the power
sums over them are read off the expansion of f^r by keeping the integral
exponents.  Newton's identities turn power sums into elementary symmetric
functions, the last conjugate f_inf is multiplied in, and every coefficient
is recognised as a polynomial in j by peeling off leading terms.

All series live on one exponent lattice: an exponent is an integer numerator
over ``den`` (24 ell for the families here).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import gmpy2


class TruncationError(ArithmeticError):
    """A series is not known far enough for the requested result."""


class RecognitionError(ArithmeticError):
    """A coefficient series is not a polynomial in j."""


class ModulusTooSmall(ValueError):
    """The prime does not exceed the level."""


@dataclass
class SeriesModP:
    """sum_i coeffs[i] q^((val + i step) / den) mod p, known below ``val + len*step``.

    Leading zeros are stripped on construction; the known range is kept.
    """

    p: int
    den: int
    val: int
    step: int
    coeffs: List[int] = field(default_factory=list)

    def __post_init__(self):
        c = [x % self.p for x in self.coeffs]
        k = 0
        while k < len(c) and c[k] == 0:
            k += 1
        self.val += k * self.step
        self.coeffs = c[k:]

    @property
    def known(self) -> int:
        """Exclusive upper bound (numerator) of the exponents known."""
        return self.val + len(self.coeffs) * self.step

    def is_zero(self) -> bool:
        return not self.coeffs

    def coeff(self, num: int) -> int:
        """Coefficient of q^(num/den)."""
        if num >= self.known:
            raise TruncationError(f"exponent {num}/{self.den} beyond known range")
        off = num - self.val
        if off < 0 or off % self.step:
            return 0
        return self.coeffs[off // self.step]

    def items(self):
        for i, c in enumerate(self.coeffs):
            if c:
                yield self.val + i * self.step, c

    def truncate(self, known: int) -> "SeriesModP":
        n = max(0, -(-(known - self.val) // self.step))
        return SeriesModP(self.p, self.den, self.val, self.step, self.coeffs[:n])

    def restep(self, step: int) -> "SeriesModP":
        if self.step % step:
            raise ValueError("new step must divide the old one")
        m = self.step // step
        out = [0] * (len(self.coeffs) * m)
        out[::m] = self.coeffs
        return SeriesModP(self.p, self.den, self.val, step, out)

    def scale(self, num: int, denom: int = 1) -> "SeriesModP":
        """Substitute q -> q^(num/denom), i.e. z -> (num/denom) z."""
        if (self.val * num) % denom or (self.step * num) % denom:
            raise ValueError("scaled exponents leave the lattice")
        return SeriesModP(self.p, self.den, self.val * num // denom,
                          self.step * num // denom, self.coeffs)

    def _align(self, other):
        if self.p != other.p or self.den != other.den:
            raise ValueError("series over different rings")
        g = math.gcd(self.step, other.step)
        a = self if self.step == g else self.restep(g)
        b = other if other.step == g else other.restep(g)
        if (a.val - b.val) % g:
            g2 = math.gcd(g, abs(a.val - b.val))
            a, b = a.restep(g2), b.restep(g2)
        return a, b

    def __add__(self, other):
        a, b = self._align(other)
        known = min(a.known, b.known)
        lo = min(a.val, b.val)
        n = max(0, (known - lo) // a.step)
        out = [0] * n
        for s in (a, b):
            off = (s.val - lo) // a.step
            for i, c in enumerate(s.coeffs[:max(0, n - off)]):
                out[off + i] += c
        return SeriesModP(self.p, self.den, lo, a.step, out)

    def __neg__(self):
        return SeriesModP(self.p, self.den, self.val, self.step, [-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-other)

    def scalar(self, c: int) -> "SeriesModP":
        return SeriesModP(self.p, self.den, self.val, self.step, [c * x for x in self.coeffs])

    def __mul__(self, other):
        if isinstance(other, int):
            return self.scalar(other)
        a, b = self._align(other)
        if a.step != b.step:
            raise ValueError("misaligned series")
        # an empty series has val == known, so this also covers zeros
        known = min(a.known + b.val, b.known + a.val)
        val = a.val + b.val
        n = max(0, (known - val) // a.step)
        return SeriesModP(self.p, self.den, val, a.step, _mul_trunc(a.coeffs, b.coeffs, n, self.p))

    def inverse(self) -> "SeriesModP":
        if self.is_zero():
            raise ZeroDivisionError("inverse of a series with no known nonzero term")
        p, c = self.p, self.coeffs
        n = len(c)
        inv0 = pow(c[0], -1, p)
        out = [inv0] + [0] * (n - 1)
        for k in range(1, n):
            acc = 0
            for i in range(1, k + 1):
                acc += c[i] * out[k - i]
            out[k] = (-acc * inv0) % p
        return SeriesModP(p, self.den, -self.val, self.step, out)

    def __truediv__(self, other):
        return self * other.inverse()

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        # 1, known as far as self so the product length is unchanged
        result = SeriesModP(self.p, self.den, 0, self.step, [1] + [0] * (len(self.coeffs) - 1))
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def decimate(self, step: int) -> "SeriesModP":
        """Keep only exponents whose numerator is divisible by ``step``."""
        if step % self.step:
            raise ValueError("decimation step must be a multiple of the series step")
        lo = -(-self.val // step) * step
        n = max(0, -(-(self.known - lo) // step))
        return SeriesModP(self.p, self.den, lo, step, [self.coeff(lo + i * step) for i in range(n)])


def _mul_trunc(a: Sequence[int], b: Sequence[int], n: int, p: int) -> List[int]:
    """First n coefficients of a*b mod p."""
    out = [0] * n
    for i in range(min(n, len(a))):
        x = a[i]
        if not x:
            continue
        lim = min(n - i, len(b))
        for k in range(lim):
            out[i + k] += x * b[k]
    return [c % p for c in out]


# --- standard expansions -----------------------------------------------------

def eta_series(terms: int, p: int, den: int = 24) -> SeriesModP:
    """q^(1/24) sum (-1)^n q^(n(3n-1)/2), ``terms`` powers of q known."""
    if terms < 1:
        raise ValueError("need at least one term")
    if den % 24:
        raise ValueError("lattice must contain 1/24")
    c = [0] * terms
    n = 0
    while True:
        a, b = n * (3 * n - 1) // 2, n * (3 * n + 1) // 2
        if a >= terms:
            break
        sign = -1 if n & 1 else 1
        c[a] += sign
        if n and b < terms:
            c[b] += sign
        n += 1
    return SeriesModP(p, den, den // 24, den, c)


def _sigma3(n: int) -> int:
    s = 0
    d = 1
    while d * d <= n:
        if n % d == 0:
            s += d ** 3
            if d * d != n:
                s += (n // d) ** 3
        d += 1
    return s


def j_series(terms: int, p: int, den: int = 24) -> SeriesModP:
    """j = E4^3 / Delta with powers q^-1 .. q^(terms-2) known."""
    if p <= 3:
        raise ModulusTooSmall("j needs p > 3")
    e4 = SeriesModP(p, den, 0, den, [1] + [240 * _sigma3(n) for n in range(1, terms)])
    delta = eta_series(terms, p, den) ** 24
    return e4 ** 3 / delta


# --- Newton sums and symmetric functions ------------------------------------

def newton_sums(f: SeriesModP, ell: int, count: int) -> List[SeriesModP]:
    """s_r = sum over nu < ell of f(z + nu)^r for r = 1..count.

    ``f`` is a series in q^(1/ell); the sum over the translates keeps the
    integral exponents and multiplies them by ell.
    """
    unit = f.den
    sums = []
    power = None
    for r in range(1, count + 1):
        power = f if power is None else power * f
        sums.append(power.decimate(unit).scalar(ell))
    return sums


def newton_to_elementary(sums: Sequence[SeriesModP], ell: int) -> List[SeriesModP]:
    """e_1, .., e_n from s_1, .., s_n via r e_r = sum_k (-1)^(k-1) e_(r-k) s_k.

    With this sign convention the e_r are the elementary symmetric functions,
    and prod (X - x_i) = sum_r (-1)^r e_r X^(n-r).
    """
    if not sums:
        return []
    p = sums[0].p
    if p <= len(sums):
        raise ModulusTooSmall(f"p = {p} does not exceed {len(sums)}")
    one = SeriesModP(p, sums[0].den, 0, sums[0].step, [1] + [0] * (len(sums[0].coeffs) * 4))
    es = [one]
    for r in range(1, len(sums) + 1):
        acc = None
        for k in range(1, r + 1):
            term = es[r - k] * sums[k - 1]
            if k % 2 == 0:
                term = -term
            acc = term if acc is None else acc + term
        es.append(acc.scalar(pow(r, -1, p)))
    return es[1:]


def recognize_in_j(c: SeriesModP, jpow: Sequence[SeriesModP], check_to: int = 0) -> List[int]:
    """Coefficients a_k with c = sum a_k j^k, lowest power first.

    ``jpow[k]`` is the expansion of j^k.  Leading terms q^-k are peeled off
    one at a time; the remainder must vanish at every exponent up to
    ``check_to`` (in units of q).
    """
    unit = c.den
    out = [0] * len(jpow)
    rem = c
    while not rem.is_zero() and rem.val <= 0:
        if rem.val % unit:
            raise RecognitionError(f"non-integral exponent {rem.val}/{unit}")
        k = -rem.val // unit
        if k >= len(jpow):
            raise RecognitionError(f"pole of order {k} exceeds the available powers of j")
        a = rem.coeffs[0]
        out[k] = (out[k] + a) % c.p
        rem = rem - jpow[k].scalar(a)
    # everything below check_to must have cancelled
    if rem.known <= check_to * unit:
        raise TruncationError("series too short to check the remainder")
    if not rem.is_zero() and rem.val <= check_to * unit:
        raise RecognitionError(f"nonzero remainder at exponent {rem.val}/{unit}")
    return out


# --- assembly ----------------------------------------------------------------

@dataclass
class OracleResult:
    p: int
    deg_X: int
    deg_j: int
    coeffs: Dict[Tuple[int, int], int]  # (X power, j power) -> residue, leading 1 included


def _family_series(kind: str, ell: int, p: int, qterms: int):
    """f on the q^(1/ell) lattice, f_inf, and the j-degree."""
    den = 24 * ell
    if kind == "classical":
        j = j_series(qterms * ell + 2, p, den)
        f = j.scale(1, ell)
        f_inf = j_series(qterms + ell + 2, p, den).scale(ell)
        deg_j = ell + 1
    elif kind == "canonical":
        s = 12 // math.gcd(12, ell - 1)
        eta = eta_series(qterms * ell + 2 * s, p, den)
        w = eta.scale(1, ell) / eta
        f = w ** (2 * s)
        eta2 = eta_series(qterms + 2 * s * ell, p, den)
        f_inf = (eta2.scale(ell) / eta2) ** (2 * s) * pow(ell, s, p)
        deg_j = s * (ell - 1) // 12
    else:
        raise ValueError(f"no q-expansion oracle for the {kind} family")
    return f, f_inf, deg_j


def oracle_modular_polynomial(kind: str, ell: int, p: int, margin: int = 3) -> OracleResult:
    """Phi mod p for the classical or canonical family of level ``ell``."""
    if not gmpy2.is_prime(p) or p <= max(ell, 3):
        raise ModulusTooSmall(f"need a prime p > max(ell, 3), got {p}")
    qterms = 2 * ell + margin + 8
    for _ in range(6):
        try:
            return _oracle(kind, ell, p, margin, qterms)
        except TruncationError:
            qterms *= 2
    raise TruncationError("could not reach the required series length")


def _oracle(kind, ell, p, margin, qterms) -> OracleResult:
    f, f_inf, deg_j = _family_series(kind, ell, p, qterms)
    unit = f.den
    sums = newton_sums(f, ell, ell)
    es = newton_to_elementary(sums, ell)
    # prod over translates: X^ell + sum (-1)^r e_r X^(ell-r); times (X - f_inf)
    js = j_series(deg_j + margin + 3, p, unit)
    jpow = [SeriesModP(p, unit, 0, unit, [1] + [0] * (deg_j + margin + 2))]
    for _ in range(deg_j):
        jpow.append(jpow[-1] * js)
    coeffs = {(ell + 1, 0): 1}
    prev = None  # e_(r-1), with e_0 = 1
    for r in range(1, ell + 2):
        e_r = es[r - 1] if r <= ell else None
        if prev is None:
            term = e_r + f_inf
        elif e_r is None:
            term = f_inf * prev
        else:
            term = e_r + f_inf * prev
        if r % 2:
            term = -term
        poly = recognize_in_j(term.truncate((margin + 1) * unit), jpow, check_to=margin)
        for k, a in enumerate(poly):
            if a:
                coeffs[(ell + 1 - r, k)] = a
        prev = e_r
    return OracleResult(p, ell + 1, deg_j, coeffs)


# --- primes and lifting ------------------------------------------------------

def random_prime(bits: int = 62, rng: Optional[random.Random] = None) -> int:
    rng = rng or random.Random()
    while True:
        p = int(gmpy2.next_prime(rng.getrandbits(bits) | (1 << (bits - 1))))
        if p.bit_length() == bits:
            return p


def crt_lift(residues: Sequence[int], primes: Sequence[int]) -> int:
    """The integer of least absolute value with the given residues."""
    x, m = 0, 1
    for r, p in zip(residues, primes):
        t = ((r - x) * pow(m, -1, p)) % p
        x += m * t
        m *= p
    return x - m if x > m // 2 else x


def reduce_mod(coeffs: Dict[Tuple[int, int], int], p: int) -> Dict[Tuple[int, int], int]:
    """Integer coefficients mod p, zero residues dropped."""
    return {k: c % p for k, c in coeffs.items() if c % p}
