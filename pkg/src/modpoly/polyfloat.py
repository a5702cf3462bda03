"""Dense polynomials over multiprecision reals and complexes.

Coefficients are stored low degree first.  Products go through a radix-2
complex FFT above a size threshold; monic polynomials are rebuilt from their
roots with a balanced product tree; interpolation uses divided differences.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import gmpy2
from gmpy2 import mpc, mpfr

from .numerics import root_of_unity, working_precision

# crossover measured with equal-length real operands at 200 and 3000 bits
FFT_THRESHOLD = 128


class DegenerateNodesError(ValueError):
    """Two interpolation nodes coincide to working precision."""


@dataclass
class FloatPoly:
    coeffs: list = field(default_factory=list)
    precision: int = 53

    def __post_init__(self):
        c = self.coeffs
        while c and c[-1] == 0:
            c.pop()

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __call__(self, x):
        return poly_eval(self, x)

    def is_real(self) -> bool:
        return all(isinstance(c, mpfr) or (isinstance(c, mpc) and c.imag == 0) for c in self.coeffs)

    def real_part(self) -> "FloatPoly":
        return FloatPoly([mpc(c).real for c in self.coeffs], self.precision)


def poly_eval(f: FloatPoly, x, P: int | None = None):
    """Horner evaluation."""
    P = P or f.precision
    with working_precision(P):
        acc = mpc(0) if isinstance(x, mpc) else mpfr(0)
        for c in reversed(f.coeffs):
            acc = acc * x + c
        return acc


# --- multiplication ----------------------------------------------------------

def schoolbook_multiply(a: Sequence, b: Sequence, P: int) -> list:
    if not a or not b:
        return []
    with working_precision(P):
        out = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x == 0:
                continue
            for k, y in enumerate(b):
                out[i + k] += x * y
        # skipped zero rows leave plain ints behind
        cplx = any(isinstance(c, mpc) for c in out)
        return [c if not isinstance(c, int) else (mpc(c) if cplx else mpfr(c)) for c in out]


_twiddle_lock = threading.Lock()
_twiddles: Dict[Tuple[int, int], list] = {}


def _twiddle_table(n: int, P: int) -> list:
    """exp(-2 pi i k / n) for k < n/2, shared per (size, precision)."""
    key = (n, P)
    tab = _twiddles.get(key)
    if tab is None:
        with _twiddle_lock:
            tab = _twiddles.get(key)
            if tab is None:
                tab = [root_of_unity(n, P, -k) for k in range(n // 2)]
                _twiddles[key] = tab
    return tab


def _fft(vals: list, tab: list, invert: bool) -> list:
    """Iterative radix-2 transform; ``tab`` holds the twiddles of the full size."""
    n = len(vals)
    a = list(vals)
    j = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        if i < j:
            a[i], a[j] = a[j], a[i]
    length = 2
    while length <= n:
        half = length // 2
        stride = n // length
        for start in range(0, n, length):
            for k in range(half):
                w = tab[k * stride]
                if invert:
                    w = w.conjugate()
                u = a[start + k]
                v = a[start + k + half] * w
                a[start + k] = u + v
                a[start + k + half] = u - v
        length <<= 1
    return a


def fft_multiply(a: FloatPoly, b: FloatPoly, P: int, threshold: int = FFT_THRESHOLD) -> FloatPoly:
    """Product of two polynomials, schoolbook below ``threshold`` terms."""
    if a.is_zero() or b.is_zero():
        return FloatPoly([], P)
    if min(len(a.coeffs), len(b.coeffs)) < threshold:
        return FloatPoly(schoolbook_multiply(a.coeffs, b.coeffs, P), P)
    return FloatPoly(_fft_product(a.coeffs, b.coeffs, P), P)


def _fft_product(a: Sequence, b: Sequence, P: int) -> list:
    m = len(a) + len(b) - 1
    n = 1
    while n < m:
        n <<= 1
    # a few extra bits absorb the log(n) growth of the rounding error
    Pw = P + 2 * n.bit_length() + 8
    real = all(not isinstance(x, mpc) for x in a) and all(not isinstance(x, mpc) for x in b)
    tab = _twiddle_table(n, Pw)
    with working_precision(Pw):
        fa = _fft([mpc(x) for x in a] + [mpc(0)] * (n - len(a)), tab, False)
        fb = _fft([mpc(x) for x in b] + [mpc(0)] * (n - len(b)), tab, False)
        prod = _fft([x * y for x, y in zip(fa, fb)], tab, True)
    with working_precision(P):
        if real:
            return [mpfr(c.real) / n for c in prod[:m]]
        return [mpc(c) / n for c in prod[:m]]


# --- product tree ------------------------------------------------------------

def _pair_conjugates(roots: Sequence[mpc], P: int):
    """Split ``roots`` into real roots and representatives of conjugate pairs.

    A root is treated as real if its imaginary part is below 2^(-P/2) times
    its magnitude.  Raises ValueError if the non-real roots do not pair up.
    """
    eps = mpfr(2) ** (-(P // 2))
    reals, upper, lower = [], [], []
    for z in roots:
        z = z if isinstance(z, mpc) else mpc(z, precision=P)
        scale = max(abs(z), mpfr(1))
        if abs(z.imag) <= eps * scale:
            reals.append(z.real)
        elif z.imag > 0:
            upper.append(z)
        else:
            lower.append(z)
    if len(upper) != len(lower):
        raise ValueError("roots are not closed under conjugation")
    used = [False] * len(lower)
    for z in upper:
        best, err = None, None
        for i, w in enumerate(lower):
            if used[i]:
                continue
            e = abs(z - w.conjugate())
            if err is None or e < err:
                best, err = i, e
        if err > eps * max(abs(z), mpfr(1)):
            raise ValueError("roots are not closed under conjugation")
        used[best] = True
    return reals, upper


def poly_from_roots(roots: Sequence, P: int, realize: bool = False,
                    threshold: int = FFT_THRESHOLD) -> FloatPoly:
    """Monic polynomial prod (X - r) by a balanced product tree.

    With ``realize`` the roots must be closed under complex conjugation; each
    pair is folded into the real quadratic X^2 - 2 Re(r) X + |r|^2 first, so
    the whole product runs in real arithmetic.
    """
    if not roots:
        raise ValueError("empty root list")
    with working_precision(P):
        if realize:
            reals, pairs = _pair_conjugates(roots, P)
            leaves = [[-x, mpfr(1)] for x in reals]
            leaves += [[gmpy2.norm(z), -2 * z.real, mpfr(1)] for z in pairs]
        else:
            leaves = [[-mpc(z), mpc(1)] for z in roots]
    while len(leaves) > 1:
        nxt = []
        for i in range(0, len(leaves) - 1, 2):
            a, b = leaves[i], leaves[i + 1]
            if min(len(a), len(b)) < threshold:
                nxt.append(schoolbook_multiply(a, b, P))
            else:
                nxt.append(_fft_product(a, b, P))
        if len(leaves) % 2:
            nxt.append(leaves[-1])
        leaves = nxt
    return FloatPoly(leaves[0], P)


# --- interpolation -----------------------------------------------------------

class NewtonInterpolator:
    """Divided-difference interpolation on a fixed node set.

    The node differences are inverted once, so interpolating many value
    vectors on the same nodes costs only multiplications.
    """

    def __init__(self, nodes: Sequence, P: int):
        if not nodes:
            raise ValueError("no interpolation nodes")
        self.P = P
        with working_precision(P):
            self.nodes = [mpfr(x) for x in nodes]
            n = len(self.nodes)
            eps = mpfr(2) ** (-(P // 2))
            # inv[k][i] = 1 / (x_{i+k} - x_i), k = 1..n-1
            self.inv = [None]
            for k in range(1, n):
                row = []
                for i in range(n - k):
                    d = self.nodes[i + k] - self.nodes[i]
                    scale = max(abs(self.nodes[i]), mpfr(1))
                    if abs(d) <= eps * scale:
                        raise DegenerateNodesError(f"nodes {i} and {i + k} coincide")
                    row.append(1 / d)
                self.inv.append(row)

    def divided_differences(self, values: Sequence) -> list:
        n = len(self.nodes)
        if len(values) != n:
            raise ValueError("values and nodes differ in length")
        with working_precision(self.P):
            col = [mpfr(v) for v in values]
            out = [col[0]]
            for k in range(1, n):
                inv = self.inv[k]
                col = [(col[i + 1] - col[i]) * inv[i] for i in range(n - k)]
                out.append(col[0])
            return out

    def __call__(self, values: Sequence) -> FloatPoly:
        dd = self.divided_differences(values)
        x = self.nodes
        with working_precision(self.P):
            # Horner in the Newton basis: p = dd[n-1]; p = p (X - x_k) + dd[k]
            p = [dd[-1]]
            for k in range(len(dd) - 2, -1, -1):
                xk = x[k]
                q = [mpfr(0)] * (len(p) + 1)
                for i, c in enumerate(p):
                    q[i + 1] += c
                    q[i] -= c * xk
                q[0] += dd[k]
                p = q
        return FloatPoly(p, self.P)


def interpolate_newton(nodes: Sequence, values: Sequence, P: int) -> FloatPoly:
    """Polynomial of degree < len(nodes) through the given points."""
    if len(nodes) != len(values):
        raise ValueError("values and nodes differ in length")
    return NewtonInterpolator(nodes, P)(values)
