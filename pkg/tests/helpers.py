"""Shared fixtures data and a cache of computed polynomials."""

import random

import mpmath

from modpoly.engine import Options, compute_modular_polynomial
from modpoly.modfunc import FunctionFamily

_cache = {}


def family(kind, ell, **kw):
    if kind == "eta2quotient":
        kw = {"p1": 3, "p2": 13, **kw}
    return FunctionFamily(kind, ell, **kw)


def store(poly):
    f = poly.family
    _cache[(f.kind, f.ell, tuple(sorted(f.params().items())))] = poly
    return poly


def computed(kind, ell, **kw):
    """Polynomial for the family, computed once per session."""
    fam = family(kind, ell, **kw)
    key = (fam.kind, fam.ell, tuple(sorted(fam.params().items())))
    if key not in _cache:
        _cache[key] = compute_modular_polynomial(fam, Options(threads=1))
    return _cache[key]


def rng(seed=0):
    return random.Random(seed)


# --- independent numerical oracle built on mpmath ----------------------------

def mp_weber(z):
    return mpmath.eta((z + 1) / 2) / mpmath.eta(z) * mpmath.exp(-2j * mpmath.pi / 48)


def mp_w313(z):
    e = mpmath.eta
    return e(z / 3) * e(z / 13) / (e(z) * e(z / 39))


def mp_eval(poly, x, y):
    """sum c_(i,k) x^i y^k."""
    return mpmath.fsum(mpmath.mpf(c) * x ** i * y ** k for (i, k), c in poly.all_terms().items())


def mp_scale(poly, x, y):
    return mpmath.fsum(abs(mpmath.mpf(c) * x ** i * y ** k) for (i, k), c in poly.all_terms().items())


# --- the generalised Schlaefli polynomials for eta(z/3)eta(z/13)/(eta(z)eta(z/39)) ----
# Terms are (power of g, power of f, coefficient), g(z) = f(z/ell).

def _sym(c, *pairs):
    out = []
    for a, b in pairs:
        out.append((a, b, c))
    return out


W313_PHI2 = [(3, 0, 1), (0, 3, 1), (2, 2, -1), (1, 1, -1),
             # printed as 2(g^2 f + f g^2); the symmetric reading 2(g^2 f + g f^2) is used
             (2, 1, 2), (1, 2, 2)]

W313_PHI5 = (
    [(6, 0, 1), (0, 6, 1), (5, 5, -1), (1, 1, -1), (3, 3, 35)]
    + _sym(5, (5, 4), (4, 5), (5, 1), (1, 5), (2, 1), (1, 2))
    # printed as "- g^3 f^2 g^2 f^3"; read as - g^3 f^2 - g^2 f^3
    + _sym(-5, (4, 3), (3, 4), (3, 2), (2, 3))
    + _sym(-10, (5, 2), (2, 5), (4, 1), (1, 4))
    + _sym(10, (4, 4), (4, 2), (2, 4), (2, 2))
)

W313_PHI7 = (
    [(8, 0, 1), (0, 8, 1), (7, 7, -1), (1, 1, -1)]
    + _sym(7, (7, 6), (6, 7), (6, 4), (4, 6), (6, 2), (2, 6))
    + _sym(-7, (7, 5), (5, 7))
    + _sym(7, (4, 2), (2, 4), (2, 1), (1, 2))
    + _sym(-7, (3, 1), (1, 3))
    + _sym(-14, (7, 1), (1, 7))
    + _sym(14, (5, 4), (4, 5), (5, 3), (3, 5), (4, 3), (3, 4))
    + _sym(-21, (7, 4), (4, 7), (6, 5), (5, 6))
    + _sym(21, (7, 3), (3, 7), (6, 3), (3, 6))
    + _sym(21, (5, 2), (2, 5), (5, 1), (1, 5))
    + _sym(-21, (4, 1), (1, 4), (3, 2), (2, 3))
    + _sym(42, (6, 6), (2, 2))
    + [(4, 4, -182)]
)

W313_FIXTURES = {2: W313_PHI2, 5: W313_PHI5, 7: W313_PHI7}


def fixture_terms(ell):
    """(X power, base power) -> coefficient; the fixtures are symmetric so orientation is moot."""
    out = {}
    for a, b, c in W313_FIXTURES[ell]:
        out[(a, b)] = out.get((a, b), 0) + c
    return out
