import math

import gmpy2
import mpmath
import pytest
from gmpy2 import mpc, mpfr
from hypothesis import given, settings
from hypothesis import strategies as st

from modpoly.cosets import T, coset_system
from modpoly.modfunc import (FunctionFamily, ReductionError, atkin_pair_ok, base_value, eta,
                             evaluate_conjugate, family_profile, hecke_atkin_value, j_invariant,
                             reduce_to_fundamental_domain, select_hecke_prime, weber_f)
from modpoly.numerics import cplx, rel_error, working_precision


def to_mp(z):
    return mpmath.mpc(str(z.real), str(z.imag))


@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=0.02, max_value=3))
@settings(max_examples=30, deadline=None)
def test_eta_against_mpmath(x, y):
    mpmath.mp.prec = 220
    z = cplx(x, y, 200)
    ref = mpmath.eta(mpmath.mpc(x, y))
    assert abs(to_mp(eta(z, 200)) - ref) <= abs(ref) * mpmath.mpf(2) ** -180


def test_eta_at_i():
    # eta(i) = Gamma(1/4) / (2 pi^(3/4))
    mpmath.mp.prec = 320
    ref = mpmath.gamma(mpmath.mpf(1) / 4) / (2 * mpmath.pi ** (mpmath.mpf(3) / 4))
    assert abs(to_mp(eta(mpc(0, 1), 300)) - ref) < mpmath.mpf(2) ** -290


@given(st.floats(min_value=-2, max_value=2), st.floats(min_value=0.05, max_value=2))
@settings(max_examples=20, deadline=None)
def test_eta_inversion_law(x, y):
    z = cplx(x, y, 200)
    with working_precision(200):
        lhs = eta(-1 / z, 200)
        rhs = (mpc(0, -1) * z) ** mpfr("0.5") * eta(z, 200)
    assert rel_error(lhs, rhs) < mpfr(2) ** -180


def test_reduction_lands_in_fundamental_domain():
    z, _ = reduce_to_fundamental_domain(cplx("0.3171", "0.0013", 200), 200)
    assert abs(z) >= 1 - 1e-30 and abs(z.real) <= 0.5 + 1e-30


def test_reduction_rejects_lower_half_plane():
    with pytest.raises(ValueError):
        eta(cplx(0, -1, 100), 100)


def test_j_special_values():
    assert abs(j_invariant(mpc(0, 1), 200) - 1728) < mpfr(2) ** -150
    with working_precision(300):
        rho = cplx("-0.5", gmpy2.sqrt(mpfr(3)) / 2, 300)
    assert abs(j_invariant(rho, 250)) < mpfr(2) ** -150
    # Heegner number 163
    with working_precision(400):
        z = cplx("0.5", gmpy2.sqrt(mpfr(163)) / 2, 400)
    assert rel_error(j_invariant(z, 400), mpc(-640320 ** 3)) < mpfr(2) ** -380


@given(st.floats(min_value=-1, max_value=1), st.floats(min_value=0.3, max_value=2))
@settings(max_examples=15, deadline=None)
def test_j_against_mpmath(x, y):
    mpmath.mp.prec = 220
    z = cplx(x, y, 200)
    ref = 1728 * mpmath.kleinj(mpmath.mpc(x, y))
    assert abs(to_mp(j_invariant(z, 200)) - ref) <= abs(ref) * mpmath.mpf(2) ** -170


def test_weber_relations():
    # f(i) = 2^(1/4) and j = (f^24 - 16)^3 / f^24
    f = weber_f(mpc(0, 1), 200)
    with working_precision(200):
        assert rel_error(f, mpc(mpfr(2) ** mpfr("0.25"))) < mpfr(2) ** -190
    z = cplx("0.21", "1.3", 200)
    with working_precision(200):
        u = weber_f(z, 200) ** 24
        assert rel_error((u - 16) ** 3 / u, j_invariant(z, 200)) < mpfr(2) ** -170


@pytest.mark.parametrize("kind,ell", [("classical", 5), ("canonical", 7), ("atkin", 29),
                                      ("schlaefli", 7), ("eta2quotient", 5)])
def test_conjugate_symmetry_on_imaginary_axis(kind, ell):
    kw = {"p1": 3, "p2": 13} if kind == "eta2quotient" else {}
    fam = FunctionFamily(kind, ell, **kw)
    reps = coset_system(fam)
    z = cplx(0, "1.13", 200)
    step = reps[1].b
    for nu in range(1, ell):
        a = evaluate_conjugate(fam, T(step * nu), z, 200)
        b = evaluate_conjugate(fam, T(step * (ell - nu)), z, 200)
        with working_precision(200):
            assert rel_error(a, b.conjugate()) < mpfr(2) ** -150
    for M in (reps[0], reps[-1]):
        v = evaluate_conjugate(fam, M, z, 200)
        assert abs(v.imag) <= abs(v) * mpfr(2) ** -150


def test_atkin_hecke_sum_against_mpmath():
    mpmath.mp.prec = 200
    ell, r = 29, 5
    z = mpmath.mpc("0.1", "0.9")
    u = -1 / z
    g = lambda w: mpmath.eta(w) * mpmath.eta(ell * w)
    ref = (sum(g((u + 24 * nu) / r) for nu in range(r)) / r + g(r * u)) / g(u)
    got = hecke_atkin_value(ell, r, cplx("0.1", "0.9", 200), 180)
    assert abs(to_mp(got) - ref) <= abs(ref) * mpmath.mpf(2) ** -160


def test_atkin_constant_for_eigenform_levels():
    # eta(z) eta(7z) is a Hecke eigenform, so f_{7,r} does not depend on z
    r = select_hecke_prime(7)
    a = hecke_atkin_value(7, r, cplx("0.1", "0.9", 150), 150)
    b = hecke_atkin_value(7, r, cplx("-0.3", "1.7", 150), 150)
    assert rel_error(a, b) < mpfr(2) ** -130


def test_atkin_admissibility():
    assert select_hecke_prime(29) == 5
    assert atkin_pair_ok(2039, 5)
    assert not atkin_pair_ok(29, 7)
    with pytest.raises(ValueError):
        FunctionFamily("atkin", 29, r=7)


@pytest.mark.parametrize("kw,msg", [
    ({"kind": "schlaefli", "ell": 3}, "prime to 48"),
    ({"kind": "classical", "ell": 15}, "not prime"),
    ({"kind": "eta2quotient", "ell": 2, "p1": 5, "p2": 11}, "24 must divide"),
    ({"kind": "eta2quotient", "ell": 2, "p1": 7, "p2": 13}, "Hauptmodul"),
    ({"kind": "eta2quotient", "ell": 13, "p1": 3, "p2": 13}, "prime to N"),
    ({"kind": "weird", "ell": 5}, "unknown"),
])
def test_family_validation(kw, msg):
    with pytest.raises(ValueError, match=msg):
        FunctionFamily(**kw)


def test_eta2quotient_allowed_levels():
    FunctionFamily("eta2quotient", 2, p1=5, p2=7)
    FunctionFamily("eta2quotient", 2, p1=3, p2=13)


@pytest.mark.parametrize("ell", [2, 3, 5, 7, 11, 13, 53, 97])
def test_classical_degree_law(ell):
    prof = family_profile(FunctionFamily("classical", ell))
    assert prof.deg_X == ell + 1 and prof.deg_j_known == ell + 1


@pytest.mark.parametrize("ell,s,d", [(5, 3, 1), (7, 2, 1), (11, 6, 5), (13, 1, 1)])
def test_canonical_degree_law(ell, s, d):
    fam = FunctionFamily("canonical", ell)
    assert fam.s == s
    assert family_profile(fam).deg_j_known == d == s * (ell - 1) // 12


def test_base_values_are_real_on_axis():
    z = cplx(0, "1.2", 150)
    for fam in (FunctionFamily("classical", 5), FunctionFamily("schlaefli", 5),
                FunctionFamily("eta2quotient", 2, p1=3, p2=13)):
        v = base_value(fam, z, 150)
        assert abs(v.imag) <= abs(v) * mpfr(2) ** -140
