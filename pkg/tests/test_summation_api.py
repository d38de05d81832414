from fractions import Fraction

import pytest

from ring_telescope.errors import NoRecurrenceFound, SingularLeadingCoefficient
from ring_telescope.exact_arith import RatFun, get_context
from ring_telescope.expr import evaluate, parse_expression, to_text
from ring_telescope.summation_api import (
    Compiler,
    Recurrence,
    compile_expression,
    creative_telescope,
    decompile,
    parse_grid,
    solve_first_order_recurrence,
    telescope,
    verify_identity,
)
from ring_telescope.tower import Evaluator, sigma

ALT_INV_SUMMAND = "(-1)^k*Binomial(n,k)^(-1)*Sum(i,0,k-1,Binomial(n,i))"
ALT_INV_LHS = "Sum(k,1,b,(-1)^k*Binomial(n,k)^(-1)*Sum(i,0,k-1,Binomial(n,i)))"
ALT_INV_RHS = ("(-1)^b*(b+1)/((n+2)*Binomial(n,b))*Sum(i,0,b,Binomial(n,i))"
           " + (-1)^b*(-2*b-3)/(4*(n+2)) - 1/(4*(n+2))")
BINOM_HARM_SUMMAND = "Binomial(n,k)*Sum(i,1,k,(-1)^i/i)"
BINOM_HARM_LHS = "Sum(k,0,n,Binomial(n,k)*Sum(i,1,k,(-1)^i/i))"
BINOM_HARM_RHS = "-2^n*Sum(k,1,n,1/(2^k*k))"


def algebraically_equal(a, b, var="k", params=("n",)) -> bool:
    """Compile both expressions into one tower and compare elements."""
    comp = Compiler(var, params)
    ea, eb = comp.compile(a), comp.compile(b)
    return comp.tower.lift(ea) == comp.tower.lift(eb)


def test_partial_sums_of_binomials():
    r = telescope("Sum(i,0,k-1,Binomial(n,i))", "k", ("n",))
    expected = "(1/2)*(-2+2*k-n)*Sum(i,0,k-1,Binomial(n,i)) + (k/2)*Binomial(n,k)"
    assert algebraically_equal(r.G, expected)
    assert not algebraically_equal(r.G, expected + " + 1")
    lhs, rhs = r.identity("b")
    report = verify_identity(lhs, rhs, "n=2..10,b=1..n", names=("n", "b"))
    assert report.ok and report.checked == sum(range(2, 11))


def test_alternating_inverse_binomial_sum():
    r = telescope(ALT_INV_SUMMAND, "k", ("n",))
    assert (sigma(r.g) - r.g - r.f).is_zero()
    ctx = r.constant.ctx
    assert r.constant == RatFun(ctx, ctx.const(-1), ctx.const(4) * (ctx.gen("n") + 2))
    report = verify_identity(ALT_INV_LHS, ALT_INV_RHS, "n=2..12,b=0..n")
    assert report.ok and not report.poles
    lhs, rhs = r.identity("b")
    assert verify_identity(lhs, rhs, "n=2..12,b=0..n", names=("n", "b")).ok


def test_certificate_is_checked_on_sequences():
    r = telescope(ALT_INV_SUMMAND, "k", ("n",))
    env = {"n": Fraction(9)}
    for k0 in range(0, 9):
        lhs = evaluate(r.G, {**env, "k": Fraction(k0 + 1)}) - evaluate(r.G, {**env, "k": Fraction(k0)})
        assert lhs == evaluate(r.summand, {**env, "k": Fraction(k0)})


def test_no_telescoper_for_harmonic_numbers():
    assert telescope("1/k", lower=1) is None
    assert telescope("Binomial(n,k)", "k", ("n",)) is None


def test_simple_telescopers():
    assert to_text(telescope("1").G) == "k"
    r = telescope("k*k!", "k", ())
    assert algebraically_equal(r.G, "k!", params=())
    r = telescope("2^k", "k", ())
    assert algebraically_equal(r.G, "2^k", params=())


def test_creative_telescoping_for_binomial_harmonic_sum():
    res = creative_telescope(BINOM_HARM_SUMMAND)
    rec = res.recurrence
    assert res.order == 2
    ctx = rec.coeffs[0].ctx
    assert rec.coeffs == (ctx.ratfun(-2), ctx.ratfun(1))
    assert str(rec) == "-2*S(n) + S(n + 1) = -1/(n + 1)"
    closed = solve_first_order_recurrence(rec, 0)
    assert to_text(closed) == "-2^n*Sum(j,1,n,1/(j*2^j))"
    assert verify_identity(BINOM_HARM_LHS, BINOM_HARM_RHS, "n=0..15").ok
    assert verify_identity(BINOM_HARM_LHS, closed, "n=0..15").ok


def test_recurrence_holds_numerically():
    rec = creative_telescope(BINOM_HARM_SUMMAND).recurrence
    for m in range(0, 12):
        lhs = sum(c.value({"n": Fraction(m), "k": Fraction(0)}) * rec.value(m + i, {})
                  for i, c in enumerate(rec.coeffs))
        assert lhs == evaluate(rec.rhs, {"n": Fraction(m)})


def test_binomial_theorem_recurrence_and_closed_form():
    rec = creative_telescope("Binomial(n,k)").recurrence
    assert str(rec) == "-2*S(n) + S(n + 1) = 0"
    assert to_text(solve_first_order_recurrence(rec, 1)) == "2^n"


def test_order_limit():
    with pytest.raises(NoRecurrenceFound):
        creative_telescope(BINOM_HARM_SUMMAND, max_order=1)


def test_first_order_solver_cases():
    ctx = get_context((), "n")
    n = ctx.var_rf("n")
    const = Recurrence("n", (ctx.ratfun(-1), ctx.ratfun(1)), parse_expression("0", ()), None)
    assert to_text(solve_first_order_recurrence(const, "c")) == "c"
    fact = Recurrence("n", (-(n + 1), ctx.ratfun(1)), parse_expression("0", ()), None)
    assert to_text(solve_first_order_recurrence(fact, 1)) == "Factorial(n)"
    bad = Recurrence("n", (ctx.ratfun(1), n - 3), parse_expression("0", ()), None)
    with pytest.raises(SingularLeadingCoefficient):
        solve_first_order_recurrence(bad, 1)


def test_verify_reports_poles_and_mismatches():
    report = verify_identity("1/(b-2)", "1/(b-2)", "b=0..4")
    assert report.ok and report.checked == 4 and len(report.poles) == 1
    bad = verify_identity(ALT_INV_LHS, ALT_INV_RHS + " + 1/1000", "n=2..4,b=0..n")
    assert not bad.ok and bad.first_mismatch() is not None
    assert parse_grid("n=2..3,b=0..n")[1][0] == "b"


# compile / decompile round trip ----------------------------------------------------

ROUND_TRIP = [
    "Binomial(n,k)",
    "(-1)^k*Binomial(n,k)^(-1)",
    "Binomial(n+1,k)*Binomial(n,k)",
    "k!*2^k",
    "3^(2*k+1)/(k+1)",
    "Factorial(k+2)/Factorial(k)",
    "Sum(i,0,k-1,Binomial(n,i))",
    "Sum(i,1,k,1/i)",
    "Sum(i,1,k,(-1)^i/i)*Binomial(n,k)",
    "Sum(i,1,k,1/i)^2 - Sum(i,1,k,1/i^2)",
    "Sum(i,0,k,Binomial(n,i))*(-1)^k",
    "Product(j,1,k,(n+j)/j)",
    "(k+n)/(k+1)*Binomial(n,k)",
    "Sum(i,1,k,Sum(j,1,i,1/j)/i)",
    "Sum(i,1,k+2,1/i) - Sum(i,1,k,1/i)",
    "Sum(i,1,k,2^i/i)",
    "Binomial(2*k,k)",
    "(k^2+n)/(k+3)",
    "Sum(i,0,k,i*Binomial(n,i))",
    "(-2)^k*k!/Factorial(k+1)",
]


@pytest.mark.parametrize("text", ROUND_TRIP)
def test_decompile_round_trip(text):
    T, e = compile_expression(text, "k", ("n",))
    back = decompile(e)
    original = parse_expression(text, ("k", "n"))
    # n above the sampled k keeps inverse binomials regular
    for n0 in (9, 12):
        env = {"n": Fraction(n0)}
        ev = Evaluator(T, env)
        for k0 in range(1, 9):
            pt = {**env, "k": Fraction(k0)}
            assert evaluate(back, pt) == evaluate(original, pt)
            assert ev(e, k0) == evaluate(original, pt)
