"""Multiprecision real and complex kernels.

Values are plain ``gmpy2.mpfr`` / ``gmpy2.mpc`` objects; each carries its own
precision.  Every function that rounds takes the working precision ``P`` (bits)
as an explicit argument and evaluates inside a local gmpy2 context, so no
global precision state leaks between callers.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from typing import Iterator, Union

import gmpy2
from gmpy2 import mpc, mpfr, mpz

BigReal = mpfr
BigComplex = mpc
Number = Union[int, mpz, mpfr, mpc]

MIN_PRECISION = 32


class RangeError(ArithmeticError):
    """Result does not fit the exponent range of the backend."""


class FormatError(ValueError):
    """Malformed serialized number record."""


@contextmanager
def working_precision(P: int) -> Iterator[gmpy2.context]:
    """Context in which every gmpy2 operation rounds to ``P`` bits."""
    with gmpy2.context(gmpy2.get_context(), precision=P) as ctx:
        yield ctx


def real(x, P: int) -> mpfr:
    """Round ``x`` (int, str, float or mpfr) to a real of precision ``P``."""
    return mpfr(x, P)


def cplx(re, im=0, P: int = 53) -> mpc:
    return mpc(mpfr(re, P), mpfr(im, P), precision=P)


def pi(P: int) -> mpfr:
    with working_precision(P):
        return gmpy2.const_pi()


def _check_finite(z: mpc, what: str) -> mpc:
    if not (gmpy2.is_finite(z.real) and gmpy2.is_finite(z.imag)):
        raise RangeError(f"{what}: result outside the exponent range")
    return z


def exp_complex(z, P: int) -> mpc:
    """``e**z`` at precision ``P``."""
    if P < MIN_PRECISION:
        raise ValueError(f"precision {P} below minimum {MIN_PRECISION}")
    with working_precision(P + 8):
        w = gmpy2.exp(mpc(z))
    _check_finite(w, "exp_complex")
    return mpc(w, precision=P)


def root_of_unity(n: int, P: int, k: int = 1) -> mpc:
    """``exp(2*pi*i*k/n)`` at precision ``P``; exact for the four axis points."""
    if n < 1:
        raise ValueError("order must be positive")
    k %= n
    if (4 * k) % n == 0:
        quarter = (4 * k) // n
        re, im = ((1, 0), (0, 1), (-1, 0), (0, -1))[quarter]
        return mpc(re, im, precision=P)
    with working_precision(P + 16):
        angle = 2 * gmpy2.const_pi() * k / n
        s, c = gmpy2.sin_cos(angle)
    return mpc(c, s, precision=P)


def complex_sqrt_principal(z, P: int) -> mpc:
    """Principal square root (real part >= 0)."""
    if z == 0:
        raise ValueError("square root of zero requested")
    with working_precision(P + 8):
        w = gmpy2.sqrt(z if isinstance(z, mpc) else mpc(z))
    return mpc(w, precision=P)


def rel_error(approx, exact) -> mpfr:
    """|approx - exact| / |exact| (absolute error when ``exact`` is zero)."""
    P = max(_prec_of(approx), _prec_of(exact)) + 16
    with working_precision(P):
        d = abs(mpc(approx) - mpc(exact))
        e = abs(mpc(exact))
        return d / e if e != 0 else d


def _prec_of(x) -> int:
    if isinstance(x, mpc):
        return max(x.precision)
    if isinstance(x, mpfr):
        return x.precision
    return 64


def log2_abs(x) -> float:
    """log2 |x| as a float; ``-inf`` for zero.  Safe for huge exponents."""
    x = abs(mpc(x)) if isinstance(x, mpc) else abs(mpfr(x))
    if x == 0:
        return float("-inf")
    m, e = mpfr(x).as_mantissa_exp()
    m = int(m)
    shift = m.bit_length() - 53
    if shift > 0:
        m >>= shift
        e += shift
    return math.log2(m) + int(e)


# --- bit-exact text records -------------------------------------------------

def format_real(x: mpfr) -> str:
    """``R <precision> <sign> <hex-mantissa> <exp2>`` with value sign*m*2**exp2."""
    if not isinstance(x, mpfr):
        raise TypeError("format_real expects an mpfr")
    if not gmpy2.is_finite(x):
        raise FormatError("cannot serialize a non-finite value")
    if x == 0:
        return f"R {x.precision} 0 0 0"
    m, e = x.as_mantissa_exp()
    sign = -1 if m < 0 else 1
    m = abs(int(m))
    tz = (m & -m).bit_length() - 1
    m >>= tz
    e = int(e) + tz
    return f"R {x.precision} {sign} {m:x} {e}"


def parse_real(line: str) -> mpfr:
    parts = line.split()
    if len(parts) != 5 or parts[0] != "R":
        raise FormatError(f"bad real record: {line!r}")
    try:
        prec, sign, mant, e = int(parts[1]), int(parts[2]), int(parts[3], 16), int(parts[4])
    except ValueError as exc:
        raise FormatError(f"bad real record: {line!r}") from exc
    if sign not in (-1, 0, 1) or prec < 2 or mant.bit_length() > prec:
        raise FormatError(f"bad real record: {line!r}")
    if sign == 0:
        if mant != 0:
            raise FormatError(f"bad real record: {line!r}")
        return mpfr(0, prec)
    with working_precision(prec):
        return gmpy2.mul_2exp(mpfr(sign * mant, prec), e)


def format_complex(z: mpc) -> str:
    """A ``C`` line followed by the real and imaginary ``R`` records."""
    return "\n".join(("C", format_real(z.real), format_real(z.imag)))


def parse_complex(lines) -> mpc:
    lines = list(lines)
    if len(lines) != 3 or lines[0].strip() != "C":
        raise FormatError("bad complex record")
    re, im = parse_real(lines[1]), parse_real(lines[2])
    return mpc(re, im, precision=(re.precision, im.precision))
