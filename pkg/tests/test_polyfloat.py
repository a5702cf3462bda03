import random
import threading

import pytest
from gmpy2 import mpc, mpfr
from hypothesis import given, settings
from hypothesis import strategies as st

from modpoly.numerics import working_precision
from modpoly.polyfloat import (DegenerateNodesError, FloatPoly, NewtonInterpolator, _twiddle_table,
                               fft_multiply, interpolate_newton, poly_eval, poly_from_roots,
                               schoolbook_multiply)

pytestmark = pytest.mark.property

int_coeffs = st.lists(st.integers(min_value=-10 ** 12, max_value=10 ** 12), min_size=1, max_size=300)


def exact_product(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for k, y in enumerate(b):
            out[i + k] += x * y
    return out


@given(int_coeffs, int_coeffs)
@settings(max_examples=25, deadline=None)
def test_fft_matches_exact_product(a, b):
    P = 200
    fa = FloatPoly([mpfr(x, P) for x in a], P)
    fb = FloatPoly([mpfr(x, P) for x in b], P)
    got = fft_multiply(fa, fb, P, threshold=1)
    ref = exact_product(a, b)
    while ref and ref[-1] == 0:
        ref.pop()
    assert len(got.coeffs) == len(ref)
    scale = max(1, max(abs(x) for x in a)) * max(1, max(abs(x) for x in b)) * (len(a) + len(b))
    with working_precision(P):
        assert all(abs(g - r) <= scale * mpfr(2) ** -170 for g, r in zip(got.coeffs, ref))


def test_fft_equals_schoolbook_complex():
    rng = random.Random(3)
    P = 300
    with working_precision(P):
        a = [mpc(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(150)]
        b = [mpc(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(140)]
    f = fft_multiply(FloatPoly(a, P), FloatPoly(b, P), P, threshold=1).coeffs
    s = schoolbook_multiply(a, b, P)
    with working_precision(P):
        assert max(abs(x - y) for x, y in zip(f, s)) < mpfr(2) ** -280


def test_poly_from_roots_small():
    P = 100
    with working_precision(P):
        p = poly_from_roots([mpc(1), mpc(-1)], P)
        assert [abs(c) for c in p.coeffs] == [1, 0, 1]
        q = poly_from_roots([mpc(0, 1), mpc(0, -1)], P, realize=True)
    assert q.is_real() and q.coeffs == [1, 0, 1]


@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(1, 50)), min_size=1, max_size=40),
       st.lists(st.integers(-50, 50), max_size=20))
@settings(max_examples=25, deadline=None)
def test_realized_product_matches_plain(pairs, reals):
    P = 250
    with working_precision(P):
        roots = [mpc(x) for x in reals]
        for x, y in pairs:
            roots += [mpc(x, y), mpc(x, -y)]
        random.Random(len(roots)).shuffle(roots)
    a = poly_from_roots(roots, P, realize=True, threshold=8)
    b = poly_from_roots(roots, P, threshold=8)
    assert a.is_real()
    with working_precision(P):
        scale = max(abs(c) for c in b.coeffs)
        assert all(abs(x - y) <= scale * mpfr(2) ** -200 for x, y in zip(a.coeffs, b.coeffs))


def test_unpaired_roots_rejected():
    with working_precision(100):
        roots = [mpc(1, 1), mpc(2, -1)]
    with pytest.raises(ValueError):
        poly_from_roots(roots, 100, realize=True)


@given(st.lists(st.integers(-10 ** 30, 10 ** 30), min_size=1, max_size=60), st.integers(0, 2000))
@settings(max_examples=25, deadline=None)
def test_interpolation_inverts_evaluation(coeffs, start):
    P = 1200
    f = FloatPoly([mpfr(c, P) for c in coeffs], P)
    nodes = [mpfr(start + k, P) for k in range(len(coeffs))]
    values = [poly_eval(f, x) for x in nodes]
    g = interpolate_newton(nodes, values, P)
    got = [int(c.__round__()) for c in g.coeffs] + [0] * (len(coeffs) - len(g.coeffs))
    assert got == coeffs


def test_interpolator_reuses_nodes():
    P = 200
    nodes = [mpfr(k, P) for k in range(5)]
    it = NewtonInterpolator(nodes, P)
    for shift in range(3):
        vals = [mpfr((k + shift) ** 2, P) for k in range(5)]
        assert [round(float(c)) for c in it(vals).coeffs] == [shift ** 2, 2 * shift, 1]


def test_linear_interpolation():
    p = interpolate_newton([0, 1, 2], [1, 3, 5], 100)
    assert [float(c) for c in p.coeffs] == [1.0, 2.0]


def test_degenerate_nodes():
    with pytest.raises(DegenerateNodesError):
        NewtonInterpolator([mpfr(1, 100), mpfr(1, 100)], 100)


def test_length_mismatch():
    with pytest.raises(ValueError):
        interpolate_newton([1, 2], [1], 100)


def test_twiddle_cache_under_threads():
    out = []
    barrier = threading.Barrier(8)

    def work():
        barrier.wait()
        out.append(_twiddle_table(512, 333))

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(tab is out[0] for tab in out)
    assert len(out[0]) == 256
