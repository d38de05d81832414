from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from ring_telescope.errors import FactorDegreeExceeded, PoleEncountered
from ring_telescope.exact_arith import (
    RatFun,
    dispersion,
    factor_irreducible,
    get_context,
    integer_roots,
    integer_roots_k,
    k_degree,
    poly_gcd,
    resultant_k,
    shift_substitute,
)

CTX = get_context(("n",))
n_, k_ = CTX.gens
N, K, Z = sympy.symbols("n k z")


def to_sympy(p):
    return sympy.sympify(str(p).replace("^", "**"), locals={"n": N, "k": K, "z": Z})


def from_coeffs(coeffs):
    """Polynomial sum c_ij n^i k^j from a nested list."""
    p = CTX.zero()
    for i, row in enumerate(coeffs):
        for j, c in enumerate(row):
            if c:
                p = p + CTX.const(c) * n_ ** i * k_ ** j
    return p


small_polys = st.lists(st.lists(st.integers(-4, 4), min_size=1, max_size=3), min_size=1, max_size=2).map(from_coeffs)
linear_factors = st.lists(
    st.tuples(st.integers(-3, 3), st.integers(0, 1)), min_size=1, max_size=3
)


def product_of(factors):
    p = CTX.const(1)
    for r, use_n in factors:
        p = p * (k_ + r + (n_ if use_n else 0))
    return p


@given(small_polys, small_polys, small_polys)
def test_gcd_matches_sympy(a, b, c):
    g = poly_gcd(a * c, b * c)
    expected = sympy.gcd(to_sympy(a * c), to_sympy(b * c))
    if expected == 0:
        assert g.is_zero()
    else:
        _, prim = sympy.Poly(expected, N, K).primitive()
        assert sympy.simplify(to_sympy(g) / prim.as_expr()) in (1, -1)


@settings(max_examples=15)
@given(linear_factors, linear_factors)
def test_resultant_matches_sympy(fa, fb):
    a, b = product_of(fa), product_of(fb)
    res, zname = resultant_k(a, b, CTX)
    assert zname == "z"
    expected = sympy.resultant(to_sympy(a), to_sympy(b).subs(K, K + Z), K)
    # flint and sympy may differ by the sign (-1)^(deg a * deg b); only the roots matter
    assert sympy.expand(to_sympy(res) - expected) == 0 or sympy.expand(to_sympy(res) + expected) == 0


@given(linear_factors, linear_factors)
def test_dispersion_brute_force(fa, fb):
    a, b = product_of(fa), product_of(fb)
    roots_a = {(-r, u) for r, u in fa}
    roots_b = {(-r, u) for r, u in fb}
    # b(k+r) vanishes at root_b - r; shared with a when root_a = root_b - r
    shifts = [rb - ra for ra, ua in roots_a for rb, ub in roots_b if ua == ub and rb - ra >= 0]
    assert dispersion(a, b, CTX) == (max(shifts) if shifts else -1)


def test_resultant_recovers_shift_of_binomial_factors():
    # k + n and -k - 2 - n are shift-equivalent with z = 2
    res, zname = resultant_k(-k_ - 2 - n_, k_ + n_, CTX)
    assert integer_roots(res, zname) == {2}


def test_dispersion_examples():
    assert dispersion(k_ * (k_ + 5), k_ + 1, CTX) == 4
    assert dispersion(k_ + n_, k_ + 1, CTX) == -1
    assert dispersion(CTX.const(3), k_, CTX) == -1


@given(linear_factors)
def test_integer_roots_k(fa):
    p = product_of(fa)
    expected = {-r for r, u in fa if not u}
    assert integer_roots_k(p, CTX) == expected


def test_factor_irreducible_matches_sympy():
    p = CTX.const(-6) * (n_ + 1) ** 2 * (k_ + n_) * (k_ ** 2 + n_) * k_
    fac = factor_irreducible(p, CTX)
    assert fac.expand(CTX) == p
    _, sym = sympy.factor_list(to_sympy(p))
    assert sorted(m for _, m in fac.factors if k_degree(_, CTX) >= 0 and not _.is_constant()) == \
        sorted(m for _, m in sym)


def test_factor_degree_cap():
    p = (k_ ** 3 + n_ + 1) * k_
    with pytest.raises(FactorDegreeExceeded):
        factor_irreducible(p, CTX, degree_cap=2)
    assert factor_irreducible(p, CTX, degree_cap=None).expand(CTX) == p


@given(small_polys, st.integers(-5, 5))
def test_shift_substitute(p, r):
    assert sympy.expand(to_sympy(shift_substitute(p, r, CTX)) - to_sympy(p).subs(K, K + r)) == 0


@given(small_polys, small_polys.filter(lambda p: not p.is_zero()), st.integers(-20, 20), st.integers(-20, 20))
def test_ratfun_arithmetic_and_values(a, b, n0, k0):
    r = RatFun(CTX, a, b)
    pt = {"n": Fraction(n0), "k": Fraction(k0)}
    # the reduced form decides where the poles are
    sa, sb = sympy.fraction(sympy.factor(to_sympy(a) / to_sympy(b)))
    bv = Fraction(str(sb.subs({N: n0, K: k0})))
    av = Fraction(str(sa.subs({N: n0, K: k0})))
    if bv == 0:
        with pytest.raises((PoleEncountered, ZeroDivisionError)):
            r.value(pt)
        return
    assert r.value(pt) == av / bv
    s = r * r - r + 2
    assert s.value(pt) == (av / bv) ** 2 - av / bv + 2
    if av:
        assert (r.inverse() * r).is_one()


def test_ratfun_is_reduced_and_normalized():
    r = RatFun(CTX, (k_ + 1) * (n_ - k_), -(k_ + 1) * k_)
    assert r.den.leading_coefficient() > 0
    assert str(r) == "(n - k)/(-k)" or r == RatFun(CTX, k_ - n_, k_)
    assert r.shift(1) == RatFun(CTX, k_ + 1 - n_, k_ + 1)
    assert RatFun.coerce(CTX, Fraction(3, 4)).to_fraction() == Fraction(3, 4)
    assert CTX.ratfun(5).is_number() and CTX.var_rf("n").is_k_free()
