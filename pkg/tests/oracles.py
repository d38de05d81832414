"""Random instance grammars and independent oracles shared by the property tests.

The oracles never call the solvers: they use plain ``Fraction`` arithmetic and
sympy linear algebra so that they form a second route to every answer.  The
tower grammar only uses the Sigma-extension test to pick admissible summands.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

import sympy

from ring_telescope.exact_arith import RatFun, get_context
from ring_telescope.pt_solver import AdjoinNew, is_sigma_extension_needed
from ring_telescope.tower import PI, ROOT, SIGMA, Evaluator, Generator, Tower, sigma

SAMPLE_POINTS = tuple(range(20, 130))
# ansatz denominator ((k-4)...(k+4))^2
ANSATZ_SHIFTS = tuple(range(-4, 5)) * 2


# ---------------------------------------------------------------------------
# base FPLDE over Q(k)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearRatio:
    """c * prod (k + r) over prod (k + q), kept as plain data."""

    c: Fraction
    num: tuple[int, ...]
    den: tuple[int, ...]

    def __call__(self, k0):
        v = Fraction(self.c)
        for r in self.num:
            v *= k0 + r
        for q in self.den:
            v /= k0 + q
        return v

    def ratfun(self, ctx):
        k = ctx.k
        num, den = ctx.const(self.c.numerator), ctx.const(self.c.denominator)
        for r in self.num:
            num = num * (k + r)
        for q in self.den:
            den = den * (k + q)
        return RatFun(ctx, num, den)


@dataclass(frozen=True)
class PolyOverLinear:
    """(c_0 + c_1 k + c_2 k^2) / prod (k + q)."""

    coeffs: tuple[Fraction, ...]
    den: tuple[int, ...]

    def __call__(self, k0):
        v = sum(c * Fraction(k0) ** i for i, c in enumerate(self.coeffs))
        for q in self.den:
            v /= k0 + q
        return Fraction(v)

    def ratfun(self, ctx):
        k = ctx.k
        num, scale = ctx.zero(), 1
        for c in self.coeffs:
            scale = scale * c.denominator // math.gcd(scale, c.denominator)
        for i, c in enumerate(self.coeffs):
            num = num + ctx.const(int(c * scale)) * k ** i
        den = ctx.const(scale)
        for q in self.den:
            den = den * (k + q)
        return RatFun(ctx, num, den)


@dataclass(frozen=True)
class FpldeInstance:
    a: LinearRatio
    f: tuple
    seed: int

    def problem(self, ctx=None):
        ctx = ctx or get_context(())
        return self.a.ratfun(ctx), [fi.ratfun(ctx) for fi in self.f]


def _small_fraction(rng):
    return Fraction(rng.randint(-3, 3), rng.choice((1, 1, 1, 2)))


def random_fplde(seed: int) -> FpldeInstance:
    """a = c (k+r..)/(k+q..) and f_i = poly/(k+q..), with a planted solution half the time."""
    rng = random.Random(seed)
    c = rng.choice([Fraction(1), Fraction(1), Fraction(-1), Fraction(2), Fraction(1, 2), Fraction(3)])
    nn = rng.randint(0, 2)
    num = tuple(rng.randint(-2, 2) for _ in range(nn))
    den = tuple(rng.randint(-2, 2) for _ in range(rng.randint(max(0, nn - 1), nn)))
    a = LinearRatio(c, num, den)
    d = rng.randint(1, 3)
    fs = []
    for _ in range(d):
        coeffs = tuple(_small_fraction(rng) for _ in range(rng.randint(1, 3)))
        fden = tuple(rng.randint(-1, 2) for _ in range(rng.randint(0, 2)))
        fs.append(PolyOverLinear(coeffs, fden))
    if rng.random() < 0.5:
        g0 = PolyOverLinear(tuple(_small_fraction(rng) for _ in range(rng.randint(1, 3))),
                            tuple(rng.randint(0, 2) for _ in range(rng.randint(0, 1))))
        fs[0] = _Planted(a, g0)
    return FpldeInstance(a, tuple(fs), seed)


@dataclass(frozen=True)
class _Planted:
    """f = sigma(g0) - a*g0."""

    a: LinearRatio
    g0: PolyOverLinear

    def __call__(self, k0):
        return self.g0(k0 + 1) - self.a(k0) * self.g0(k0)

    def ratfun(self, ctx):
        g = self.g0.ratfun(ctx)
        return g.shift(1) - self.a.ratfun(ctx) * g


def _ansatz_den(k0):
    v = Fraction(1)
    for j in ANSATZ_SHIFTS:
        v *= k0 + j
    return v


def brute_force_fplde(inst: FpldeInstance, extra_degree: int = 4):
    """Undetermined coefficients for g = p(k)/((k-4)...(k+4))^2, deg p <= 18 + extra_degree.

    The equation is imposed at more integer points than the degree of the
    cleared numerator, which makes it an exact polynomial identity.  Returns
    a sympy nullspace basis in coordinates ``(c_1..c_d, p_0..p_N)``.
    """
    d = len(inst.f)
    N = len(ANSATZ_SHIFTS) + extra_degree
    rows = []
    for k0 in SAMPLE_POINTS:
        D0, D1, a0 = _ansatz_den(k0), _ansatz_den(k0 + 1), inst.a(k0)
        row = [-fi(k0) for fi in inst.f]
        row += [Fraction(k0 + 1) ** m / D1 - a0 * Fraction(k0) ** m / D0 for m in range(N + 1)]
        rows.append([sympy.Rational(x.numerator, x.denominator) for x in row])
    return sympy.Matrix(rows).nullspace(), d, N


def oracle_vector_values(vec, d: int, N: int, points):
    """``(c, g(points))`` for an oracle nullspace vector."""
    c = [Fraction(int(sympy.fraction(x)[0]), int(sympy.fraction(x)[1])) for x in vec[:d]]
    p = [Fraction(int(sympy.fraction(x)[0]), int(sympy.fraction(x)[1])) for x in vec[d:]]
    vals = []
    for k0 in points:
        vals.append(sum(pm * Fraction(k0) ** m for m, pm in enumerate(p)) / _ansatz_den(k0))
    return c + vals


def rank(rows) -> int:
    if not rows:
        return 0
    return sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in r] for r in rows]).rank()


def fits_ansatz(g: RatFun, extra_degree: int = 4) -> bool:
    """True when g = p/((k-4)...(k+4))^2 with deg p within the oracle's bound."""
    ctx = g.ctx
    D = ctx.const(1)
    for j in ANSATZ_SHIFTS:
        D = D * (ctx.k + j)
    content, _ = g.den.factor()
    q, r = divmod(D * int(content), g.den)
    if not r.is_zero():
        return False
    return g.num.total_degree() + q.total_degree() <= len(ANSATZ_SHIFTS) + extra_degree


# ---------------------------------------------------------------------------
# PT towers: one Pi, optional x, one Sigma
# ---------------------------------------------------------------------------

PI_CHOICES = ("2", "-2", "3", "k+1", "(n-k)/(k+1)", "n+k", "1/(k+1)", "(k+1)/(k+n)")
BETA_CHOICES = ("t", "t/(k+1)", "x/(k+1)", "x*t", "1/(k+1)", "k*t", "1/(k+1)^2")


def _pi_multiplier(ctx, choice: str) -> RatFun:
    n, k = ctx.gens
    one = ctx.const(1)
    table = {
        "2": RatFun(ctx, ctx.const(2)),
        "-2": RatFun(ctx, ctx.const(-2)),
        "3": RatFun(ctx, ctx.const(3)),
        "k+1": RatFun(ctx, k + 1),
        "(n-k)/(k+1)": RatFun(ctx, n - k, k + 1),
        "n+k": RatFun(ctx, n + k),
        "1/(k+1)": RatFun(ctx, one, k + 1),
        "(k+1)/(k+n)": RatFun(ctx, k + 1, k + n),
    }
    return table[choice]


def _beta(T: Tower, choice: str):
    ctx = T.ctx
    k = ctx.k
    inv = T.const(RatFun(ctx, ctx.const(1), k + 1))
    t = T.var("t")
    x = T.var("x") if "x" in T.index else T.one()
    table = {
        "t": t,
        "t/(k+1)": t * inv,
        "x/(k+1)": x * inv,
        "x*t": x * t,
        "1/(k+1)": inv,
        "k*t": t.scale(RatFun(ctx, k)),
        "1/(k+1)^2": inv * inv,
    }
    return table[choice]


@dataclass
class PtInstance:
    tower: Tower
    f: list
    planted: bool
    description: str


def random_scalar(rng, ctx) -> RatFun:
    n, k = ctx.gens
    num = ctx.const(rng.randint(-3, 3)) + ctx.const(rng.randint(-2, 2)) * k
    if rng.random() < 0.3:
        num = num + ctx.const(rng.randint(-1, 1)) * n
    den = ctx.const(rng.randint(1, 2))
    if rng.random() < 0.4:
        den = den * (k + rng.randint(1, 3))
    return RatFun(ctx, num, den)


def random_element(rng, T: Tower, max_s: int = 2, allow_neg_t: bool = True):
    """Sum of scalar * t^e * x^w * s^j with deg_s <= max_s."""
    ctx = T.ctx
    e = T.zero()
    for _ in range(rng.randint(1, 4)):
        exps = {"t": rng.choice((-1, 0, 1) if allow_neg_t else (0, 1))}
        if T.root_pos is not None:
            exps["x"] = rng.randint(0, 1)
        exps["s"] = rng.randint(0, max_s)
        e = e + T.monomial(exps, random_scalar(rng, ctx))
    return e


def random_tower(rng) -> Tower:
    ctx = get_context(("n",))
    T = Tower(ctx).extend(Generator("t", PI, h=_pi_multiplier(ctx, rng.choice(PI_CHOICES))))
    if rng.random() < 0.5:
        T = T.extend(Generator("x", ROOT, alpha=ctx.ratfun(-1), order=2))
    choices = list(BETA_CHOICES)
    rng.shuffle(choices)
    for choice in choices + ["1/(k+1)"]:
        beta = _beta(T, choice)
        if isinstance(is_sigma_extension_needed(beta, T), AdjoinNew):
            return T.extend(Generator("s", SIGMA, beta=beta, anchor=(0, 0), expr=choice))
    raise AssertionError("1/(k+1) always needs a Sigma-extension")


def random_pt(seed: int) -> PtInstance:
    rng = random.Random(seed)
    T = random_tower(rng)
    d = rng.randint(1, 2)
    fs = [random_element(rng, T) for _ in range(d)]
    planted = rng.random() < 0.5
    if planted:
        g0 = random_element(rng, T, max_s=2)
        fs[0] = sigma(g0) - g0
    desc = f"{T.render()} | f = {[str(f) for f in fs]}"
    return PtInstance(T, fs, planted, desc)


def sequence_residual_ok(tower: Tower, c, g, fs, params=None, points=range(1, 7)) -> bool:
    """g(k+1) - g(k) = sum c_i f_i(k) checked on evaluated sequences."""
    params = params or {"n": 13}
    ev = Evaluator(tower, params)
    cv = [ci.value({**{p: Fraction(v) for p, v in params.items()}, tower.ctx.var: Fraction(0)}) for ci in c]
    for k0 in points:
        lhs = ev(g, k0 + 1) - ev(g, k0)
        rhs = sum(ci * ev(fi, k0) for ci, fi in zip(cv, fs))
        if lhs != rhs:
            return False
    return True


# ---------------------------------------------------------------------------
# joint PT system on sequences
# ---------------------------------------------------------------------------

JOINT_DEN = (1, 2, 3)


def random_joint_pt(seed: int) -> PtInstance:
    """x-free tower with t in {2^k, 3^k, k!} and one Sigma; d = 2 with one planted sum."""
    rng = random.Random(seed)
    ctx = get_context(("n",))
    T = Tower(ctx).extend(Generator("t", PI, h=_pi_multiplier(ctx, rng.choice(("2", "3", "k+1")))))
    for choice in rng.sample(("t", "t/(k+1)", "1/(k+1)", "k*t"), 4) + ["1/(k+1)"]:
        beta = _beta(T, choice)
        if isinstance(is_sigma_extension_needed(beta, T), AdjoinNew):
            T = T.extend(Generator("s", SIGMA, beta=beta, anchor=(0, 0), expr=choice))
            break
    g0 = T.zero()
    for _ in range(rng.randint(1, 3)):
        coeff = RatFun(ctx, ctx.const(rng.randint(-3, 3)) + ctx.const(rng.randint(-2, 2)) * ctx.k,
                       ctx.k + rng.choice(JOINT_DEN))
        g0 = g0 + T.monomial({"t": rng.choice((0, 1)), "s": rng.randint(0, 1)}, coeff)
    f2 = T.monomial({"t": rng.choice((0, 1)), "s": rng.randint(0, 1)}, random_scalar(rng, ctx))
    return PtInstance(T, [sigma(g0) - g0, f2], True, f"{T.render()} | g0 = {g0} | f2 = {f2}")


def brute_force_pt(inst: PtInstance, n0: int = 13, poly_degree: int = 5, s_degree: int = 2):
    """Joint undetermined-coefficient system for sigma(g) - g = c_1 f_1 + c_2 f_2.

    The ansatz is g = sum p_{e,j}(k)/((k+1)(k+2)(k+3)) t^e s^j over e in
    {-1, 0, 1} and j <= s_degree; all unknowns are solved at once from the
    evaluated sequences at n = n0.  Returns (rows of the solution space as
    ``(c, g(points))``, the points used).
    """
    T, fs = inst.tower, inst.f
    ev = Evaluator(T, {"n": n0})
    monos = [(e, j) for e in (-1, 0, 1) for j in range(s_degree + 1)]
    d = len(fs)
    ncols = d + len(monos) * (poly_degree + 1)
    nrows = 2 * ncols + 10
    points = list(range(1, nrows + 1))

    def den(k0):
        v = Fraction(1)
        for q in JOINT_DEN:
            v *= k0 + q
        return v

    def mono(e, j, k0):
        return ev(T.monomial({"t": e, "s": j}), k0)

    rows = []
    for k0 in points:
        row = [-ev(f, k0) for f in fs]
        for e, j in monos:
            m1, m0 = mono(e, j, k0 + 1) / den(k0 + 1), mono(e, j, k0) / den(k0)
            row += [Fraction(k0 + 1) ** p * m1 - Fraction(k0) ** p * m0 for p in range(poly_degree + 1)]
        rows.append([sympy.Rational(x.numerator, x.denominator) for x in row])
    basis = sympy.Matrix(rows).nullspace()
    sample = points[:40]
    out = []
    for v in basis:
        vals = [Fraction(int(sympy.fraction(x)[0]), int(sympy.fraction(x)[1])) for x in v]
        c = vals[:d]
        gvals = []
        for k0 in sample:
            total = Fraction(0)
            for idx, (e, j) in enumerate(monos):
                coeffs = vals[d + idx * (poly_degree + 1): d + (idx + 1) * (poly_degree + 1)]
                if any(coeffs):
                    total += sum(cp * Fraction(k0) ** p for p, cp in enumerate(coeffs)) / den(k0) * mono(e, j, k0)
            gvals.append(total)
        out.append(c + gvals)
    return out, sample


def fits_joint_ansatz(g, poly_degree: int = 5, s_degree: int = 2) -> bool:
    T = g.tower
    ctx = T.ctx
    D = ctx.const(1)
    for q in JOINT_DEN:
        D = D * (ctx.k + q)
    for exps, c in g.terms.items():
        e = exps[T.index["t"]] if "t" in T.index else 0
        j = exps[T.index["s"]] if "s" in T.index else 0
        if abs(e) > 1 or j > s_degree:
            return False
        content, _ = c.den.factor()
        q, r = divmod(D * int(content), c.den)
        if not r.is_zero() or c.num.degrees()[ctx.kidx] + q.degrees()[ctx.kidx] > poly_degree:
            return False
    return True
