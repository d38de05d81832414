"""Compiling nested sums and products into towers, and the summation drivers.

The drivers follow the usual three steps: build a tower in which the summand
is an element, solve a (parameterized) telescoping problem there, and
translate the certificate back into sums and products.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import (
    NoRecurrenceFound,
    NotAUnit,
    PoleEncountered,
    ScopeError,
    SingularLeadingCoefficient,
    SolverInvariantError,
    UnsupportedExpression,
)
from .exact_arith import DEFAULT_FACTOR_DEGREE_CAP, RatFun, factor_irreducible, get_context, integer_roots_k, k_degree
from .expr import (
    Add,
    Binomial,
    Div,
    Expr,
    Factorial,
    Mul,
    Neg,
    Num,
    Pow,
    Product,
    Sub,
    Sum,
    Sym,
    div,
    evaluate,
    free_symbols,
    mul,
    parse_expression,
    power,
    substitute,
    tidy,
    to_text,
)
from .product_rep import HyperProduct, build_product_representation
from .pt_solver import Telescoper, is_sigma_extension_needed, solve_pt
from .tower import PI, ROOT, SIGMA, Elem, Evaluator, Generator, Tower, sigma_power

_SCAN_LIMIT = 64
_HINTS = {Binomial: "b", Factorial: "f", Pow: "p", Product: "p"}


@dataclass(frozen=True)
class CompileOptions:
    """Knobs of the expression compiler."""

    merge: bool = True
    factor_degree_cap: int | None = DEFAULT_FACTOR_DEGREE_CAP
    max_support: int | None = None


# ---------------------------------------------------------------------------
# rational functions as expressions
# ---------------------------------------------------------------------------

def _sym_power(name: str, e: int) -> Expr:
    return power(Sym(name), e)


def poly_to_expr(p, ctx, rename: dict | None = None) -> tuple[int, Expr]:
    """``(sign, expr)`` with ``p == sign*expr``; the leading displayed term is positive."""
    rename = rename or {}
    names = [rename.get(n, n) for n in ctx.names]
    items = [(tuple(int(x) for x in exps), int(c)) for exps, c in p.to_dict().items()]
    if not items:
        return 1, Num(Fraction(0))
    items.sort(key=lambda t: (-sum(t[0]), tuple(-x for x in t[0])))
    sign = 1 if items[0][1] > 0 else -1
    out = None
    for exps, c in items:
        c *= sign
        parts = [_sym_power(nm, e) for nm, e in zip(names, exps) if e]
        mono = mul(Num(Fraction(abs(c))), *parts)
        if out is None:
            out = mono if c > 0 else Neg(mono)
        elif c > 0:
            out = Add(out, mono)
        else:
            out = Sub(out, mono)
    return sign, out


def _ratfun_parts(r: RatFun, rename: dict | None = None):
    """``(sign, constant, numerator factors, denominator factors)`` of a nonzero RatFun."""
    ctx = r.ctx
    sign = 1
    const = Fraction(1)
    parts = ([], [])
    for idx, poly in enumerate((r.num, r.den)):
        fac = factor_irreducible(poly, ctx, degree_cap=None)
        sign *= fac.unit
        for f, m in fac.factors:
            if f.is_constant():
                v = Fraction(int(f.leading_coefficient())) ** m
                const = const * v if idx == 0 else const / v
                continue
            s, fe = poly_to_expr(f, ctx, rename)
            if s < 0 and m % 2:
                sign = -sign
            parts[idx].append(power(fe, m))
    return sign, const, parts[0], parts[1]


def _assemble(sign, const: Fraction, nums: list, dens: list) -> tuple[int, Expr]:
    numer = mul(Num(Fraction(const.numerator)), *nums)
    denom = mul(Num(Fraction(const.denominator)), *dens)
    return sign, div(numer, denom)


def ratfun_to_expr(r: RatFun, rename: dict | None = None) -> Expr:
    """Factored expression for a rational function.

    Examples
    ========

    >>> from ring_telescope.exact_arith import get_context, RatFun
    >>> from ring_telescope.summation_api import ratfun_to_expr
    >>> ctx = get_context(("n",))
    >>> n, k = ctx.gens
    >>> print(ratfun_to_expr(RatFun(ctx, 2*k + 1, 4*n + 8)))
    (2*k + 1)/(4*(n + 2))
    """
    if r.is_zero():
        return Num(Fraction(0))
    sign, e = _assemble(*_ratfun_parts(r, rename))
    return e if sign > 0 else _negate(e)


def _negate(e: Expr) -> Expr:
    if isinstance(e, Num):
        return Num(-e.value)
    return Neg(e)


def _signed_sum(terms: list[tuple[int, Expr]]) -> Expr:
    out = None
    for s, t in terms:
        if isinstance(t, Neg):
            s, t = -s, t.a
        elif isinstance(t, Num) and t.value < 0:
            s, t = -s, Num(-t.value)
        if isinstance(t, Num) and t.value == 0:
            continue
        if out is None:
            out = t if s > 0 else _negate(t)
        elif s > 0:
            out = Add(out, t)
        else:
            out = Sub(out, t)
    return out if out is not None else Num(Fraction(0))


# ---------------------------------------------------------------------------
# compiler
# ---------------------------------------------------------------------------

def _gamma_ratio(u: int, v: RatFun, kk: RatFun) -> RatFun:
    """Gamma(u*(k+1) + v) / Gamma(u*k + v)."""
    out = kk.ctx.one_rf()
    if u > 0:
        for i in range(u):
            out = out * (kk * u + v + i)
    elif u < 0:
        for i in range(1, -u + 1):
            out = out / (kk * u + v - i)
    return out


class Compiler:
    """Translate expressions in ``var`` into one growing tower.

    Explanation
    ===========

    Subexpressions rational in ``var`` become leaves of K(k).  Binomials,
    factorials, powers with exponent affine in ``var`` and products with a
    rational multiplicand are hypergeometric: their shift quotient goes
    through :func:`build_product_representation`, so shifted variants such as
    ``Binomial(n+1,k)`` reuse existing generators.  A sum is looked up with
    :func:`is_sigma_extension_needed`; a telescoper replaces it by ``g`` plus a
    constant, otherwise a Sigma-generator is appended.  Sums with the same
    body share one generator whatever their bounds.

    Examples
    ========

    >>> from ring_telescope.summation_api import Compiler
    >>> comp = Compiler("k", ("n",))
    >>> f = comp.compile("(-1)^k*Binomial(n,k)^(-1)*Sum(i,0,k-1,Binomial(n,i))")
    >>> print(f)
    b^(-1)*x*s
    >>> print(comp.tower.render())
    k : base : k + 1 : -
    b : pi : ((n - k)/(k + 1))*b : b(0) = 1
    x : root(order=2) : -x : x(0) = 1
    s : sigma : s + b : s(0) = 0
    >>> print(comp.decompile(f))
    (-1)^k*Sum(i,0,k - 1,Binomial(n,i))/Binomial(n,k)
    """

    def __init__(self, var: str = "k", params=(), options: CompileOptions | None = None):
        params = tuple(params)
        if var in params:
            raise ValueError(f"variable {var!r} is also declared as a parameter")
        self.var = var
        self.params = params
        self.ctx = get_context(params, var)
        self.tower = Tower(self.ctx)
        self.options = options or CompileOptions()
        self._cache: dict[Expr, Elem] = {}
        self._sums: dict[str, tuple] = {}

    # public -----------------------------------------------------------------------
    def parse(self, text: str) -> Expr:
        return parse_expression(text, (self.var,) + self.params)

    def compile(self, e) -> Elem:
        if isinstance(e, str):
            e = self.parse(e)
        out = self._compile(e)
        return self.tower.lift(out)

    def decompile(self, e: Elem) -> Expr:
        return decompile(e)

    # internals --------------------------------------------------------------------
    def _kvar(self) -> RatFun:
        return self.ctx.var_rf(self.var)

    def _leaf(self, e: Expr):
        try:
            return evaluate(e, {self.var: self._kvar()}, self.ctx)
        except UnsupportedExpression:
            return None

    def _compile(self, e: Expr) -> Elem:
        hit = self._cache.get(e)
        if hit is not None:
            return self.tower.lift(hit)
        leaf = self._leaf(e)
        if leaf is not None:
            out = self.tower.const(leaf)
        elif isinstance(e, (Add, Sub, Mul)):
            a = self._compile(e.a)
            b = self._compile(e.b)
            a, b = self.tower.lift(a), self.tower.lift(b)
            out = a + b if isinstance(e, Add) else (a - b if isinstance(e, Sub) else a * b)
        elif isinstance(e, Neg):
            out = -self._compile(e.a)
        elif isinstance(e, Div):
            a = self._compile(e.a)
            b = self._compile(e.b)
            try:
                out = self.tower.lift(a).divide_by_unit(self.tower.lift(b))
            except NotAUnit:
                raise UnsupportedExpression(f"denominator {to_text(e.b)} is not invertible in the ring") from None
        elif isinstance(e, Pow):
            out = self._power(e)
        elif isinstance(e, Binomial):
            out = self._hyper(e, self._binomial_ratio(e))
        elif isinstance(e, Factorial):
            a1, a0 = self._affine(e.arg)
            out = self._hyper(e, _gamma_ratio(a1, a0 + 1, self._kvar()))
        elif isinstance(e, Product):
            out = self._hyper(e, self._product_ratio(e))
        elif isinstance(e, Sum):
            out = self._sum(e)
        else:
            raise UnsupportedExpression(f"cannot compile {to_text(e)}")
        self._cache[e] = out
        return self.tower.lift(out)

    def _affine(self, e: Expr) -> tuple[int, RatFun]:
        v = self._leaf(e)
        if v is None:
            raise UnsupportedExpression(f"{to_text(e)} is not affine in {self.var}")
        a1 = v.shift(1) - v
        if not a1.is_number() or a1.to_fraction().denominator != 1:
            raise UnsupportedExpression(f"{to_text(e)} is not affine in {self.var} with integer slope")
        a1i = int(a1.to_fraction())
        a0 = v - self._kvar() * a1i
        if not a0.is_k_free():
            raise UnsupportedExpression(f"{to_text(e)} is not affine in {self.var}")
        return a1i, a0

    def _int_constant(self, e: Expr) -> int | None:
        try:
            v = evaluate(e, {})
        except (ScopeError, UnsupportedExpression, PoleEncountered):
            return None
        return int(v) if v.denominator == 1 else None

    def _power(self, e: Pow) -> Elem:
        m = self._int_constant(e.exp)
        if m is not None:
            base = self._compile(e.base)
            try:
                return base ** m
            except NotAUnit:
                raise UnsupportedExpression(f"{to_text(e.base)} is not invertible in the ring") from None
        if self.var in free_symbols(e.base):
            raise UnsupportedExpression(f"power {to_text(e)} has a base depending on {self.var}")
        a1, _a0 = self._affine(e.exp)
        c = evaluate(e.base, {}, self.ctx)
        if c.is_zero():
            raise UnsupportedExpression(f"zero base in {to_text(e)}")
        return self._hyper(e, c ** a1)

    def _binomial_ratio(self, e: Binomial) -> RatFun:
        a1, a0 = self._affine(e.upper)
        b1, b0 = self._affine(e.lower)
        kk = self._kvar()
        num = _gamma_ratio(a1, a0 + 1, kk)
        den = _gamma_ratio(b1, b0 + 1, kk) * _gamma_ratio(a1 - b1, a0 - b0 + 1, kk)
        return num / den

    def _product_ratio(self, e: Product) -> RatFun:
        if self.var in free_symbols(e.body) - {e.var}:
            raise UnsupportedExpression(f"product body of {to_text(e)} depends on {self.var}")
        if self._int_constant(e.lo) is None:
            raise UnsupportedExpression(f"lower bound of {to_text(e)} must be an integer")
        a1, a0 = self._affine(e.hi)
        if a1 != 1 or not a0.is_number():
            raise UnsupportedExpression(f"upper bound of {to_text(e)} must be {self.var} plus an integer")
        delta = int(a0.to_fraction())
        body = self._leaf(substitute(e.body, {e.var: Sym(self.var)}))
        if body is None:
            raise UnsupportedExpression(f"multiplicand of {to_text(e)} is not rational in {e.var}")
        return body.shift(delta + 1)

    def _hyper(self, e: Expr, rho: RatFun) -> Elem:
        """Element for a term F with F(k+1)/F(k) = rho."""
        if rho.is_zero():
            raise UnsupportedExpression(f"{to_text(e)} has a vanishing shift quotient")
        roots = integer_roots_k(rho.num, self.ctx) | integer_roots_k(rho.den, self.ctx)
        start = max(roots) + 1 if roots else 0
        for k0 in range(start, start + _SCAN_LIMIT):
            try:
                value = evaluate(e, {self.var: k0}, self.ctx)
            except PoleEncountered:
                continue
            if not value.is_zero():
                break
        else:
            raise UnsupportedExpression(f"no starting point found for {to_text(e)}")
        prod = HyperProduct(rho.shift(-1), k0 + 1, _HINTS.get(type(e), "t"))
        before = set(self.tower.names)
        res = build_product_representation([prod], self.tower, merge=self.options.merge,
                                           factor_degree_cap=self.options.factor_degree_cap)
        self.tower = res.tower
        elem = res.elements[0]
        if len(elem.terms) == 1:
            (exps, c), = elem.terms.items()
            hot = [i for i, v in enumerate(exps) if v]
            if c.is_one() and len(hot) == 1 and exps[hot[0]] == 1:
                g = self.tower.gens[hot[0]]
                if g.name not in before and g.kind == PI:
                    g.meta["expr"] = e if value.is_one() else div(e, ratfun_to_expr(value))
        return elem.scale(value)

    def _sum(self, e: Sum) -> Elem:
        if self.var in free_symbols(e.body) - {e.var}:
            raise UnsupportedExpression(f"summand of {to_text(e)} depends on {self.var} (definite sum)")
        lo = self._int_constant(e.lo)
        if lo is None:
            raise UnsupportedExpression(f"lower bound of {to_text(e)} must be an integer")
        a1, a0 = self._affine(e.hi)
        if a1 != 1 or not a0.is_number():
            raise UnsupportedExpression(f"upper bound of {to_text(e)} must be {self.var} plus an integer")
        delta = int(a0.to_fraction())
        body_k = substitute(e.body, {e.var: Sym(self.var)})
        key = to_text(body_k)
        rec = self._sums.get(key)
        if rec is None:
            f = self._compile(body_k)
            beta = sigma_power(f, delta + 1)
            decision = is_sigma_extension_needed(beta, self.tower, self.options.max_support)
            if isinstance(decision, Telescoper):
                g = decision.g
                out = g + self._sum_constant(e, g)
            else:
                name = self.tower.fresh_name("s")
                gen = Generator(name, SIGMA, beta=decision.beta,
                                anchor=self._sum_anchor(e, decision.beta, lo - delta - 1), expr=e)
                self.tower = self.tower.extend(gen)
                out = self.tower.var(name)
            self._sums[key] = (e, lo, delta, out)
            return out
        e0, lo0, delta0, s0 = rec
        shifted = sigma_power(self.tower.lift(s0), delta - delta0)
        if lo == lo0:
            return shifted
        const = evaluate(Sum(e.var, Num(Fraction(lo0)), Num(Fraction(lo - 1)), e.body), {}, self.ctx)
        return shifted - self.tower.const(const)

    def _sum_anchor(self, e: Sum, beta: Elem, first: int) -> tuple:
        """First point from the empty sum on where beta is regular, with the sum's value.

        Unrolling the generator evaluates beta forward from the anchor, so an
        anchor below a pole of beta's representation (e.g. (n-k)/(k+1) at -1)
        would break evaluation although the sum itself is fine there.
        """
        ev = Evaluator(self.tower, {}, symbolic=True)
        for k1 in range(first, first + _SCAN_LIMIT):
            try:
                ev(beta, k1)
                value = evaluate(e, {self.var: k1}, self.ctx)
            except PoleEncountered:
                continue
            return (k1, RatFun.coerce(self.ctx, value))
        return (first, self.ctx.zero_rf())

    def _sum_constant(self, e: Sum, g: Elem) -> RatFun:
        """c with g + c equal to the sum, fixed at the first point where g is defined."""
        ev = Evaluator(self.tower, {}, symbolic=True)
        lo = self._int_constant(e.lo)
        a0 = self._affine(e.hi)[1]
        first = lo - int(a0.to_fraction()) - 1
        for k1 in range(first, first + _SCAN_LIMIT):
            try:
                gv = ev(g, k1)
                sv = evaluate(e, {self.var: k1}, self.ctx)
            except PoleEncountered:
                continue
            return RatFun.coerce(self.ctx, sv) - gv
        raise UnsupportedExpression(f"no evaluation point found for {to_text(e)}")


def compile_expression(e, var: str = "k", params=(), options: CompileOptions | None = None):
    """``(tower, element)`` representing the expression ``e`` (text or tree).

    Examples
    ========

    >>> from ring_telescope.summation_api import compile_expression
    >>> T, b = compile_expression("Binomial(n,k)", "k", ("n",))
    >>> print(T.render())
    k : base : k + 1 : -
    b : pi : ((n - k)/(k + 1))*b : b(0) = 1
    >>> T, e = compile_expression("3/2")
    >>> print(e, T.names)
    3/2 ()
    """
    comp = Compiler(var, params, options)
    elem = comp.compile(e)
    return comp.tower, elem


# ---------------------------------------------------------------------------
# back-translation
# ---------------------------------------------------------------------------

def _bound_name(avoid) -> str:
    if "j" not in avoid:
        return "j"
    i = 1
    while f"j{i}" in avoid:
        i += 1
    return f"j{i}"


def generator_expr(tower: Tower, pos: int) -> Expr:
    """Expression for the sequence modelled by the generator at ``pos``."""
    g = tower.gens[pos]
    if g.expr is not None:
        return g.expr
    if "expr" in g.meta:
        return g.meta["expr"]
    ctx = tower.ctx
    var = Sym(ctx.var)
    k0, v = g.anchor
    v = RatFun.coerce(ctx, v)
    j = _bound_name(set(ctx.names))
    if g.kind == PI and g.h.is_k_free():
        body = Pow(ratfun_to_expr(g.h), var if k0 == 0 else Sub(var, Num(Fraction(k0))))
        return body if v.is_one() else mul(ratfun_to_expr(v), body)
    if g.kind == PI:
        h = ratfun_to_expr(g.h.shift(-1), {ctx.var: j})
        body = Product(j, Num(Fraction(k0 + 1)), var, h)
        return body if v.is_one() else mul(ratfun_to_expr(v), body)
    if g.kind == ROOT:
        shift = var if k0 == 0 else Sub(var, Num(Fraction(k0)))
        body = Pow(ratfun_to_expr(g.alpha), shift)
        return body if v.is_one() else mul(ratfun_to_expr(v), body)
    beta = substitute(decompile(tower.lift(g.beta)), {ctx.var: Sym(j)})
    body = Sum(j, Num(Fraction(k0)), Sub(var, Num(Fraction(1))), beta)
    return body if v.is_zero() else Add(ratfun_to_expr(v), body)


def decompile(e: Elem) -> Expr:
    """Translate a tower element back into the expression language.

    Examples
    ========

    >>> from ring_telescope.summation_api import Compiler, decompile
    >>> comp = Compiler("k", ())
    >>> print(decompile(comp.compile("k")))
    k
    >>> print(decompile(comp.compile("2^k*(k+1)")))
    (k + 1)*2^k
    """
    tower = e.tower
    gexprs = {}
    terms = []
    for exps, c in e.sorted_terms():
        sign, const, nums, dens = _ratfun_parts(c)
        for pos, v in enumerate(exps):
            if not v:
                continue
            if pos not in gexprs:
                gexprs[pos] = generator_expr(tower, pos)
            (nums if v > 0 else dens).append(power(gexprs[pos], abs(v)))
        terms.append(_assemble(sign, const, nums, dens))
    return _signed_sum(terms)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    """Outcome of an exact grid comparison."""

    checked: int = 0
    mismatches: list = field(default_factory=list)
    poles: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.checked > 0 and not self.mismatches

    def first_mismatch(self):
        return self.mismatches[0] if self.mismatches else None

    def __str__(self):
        status = "verified" if self.ok else "NOT verified"
        out = f"{status}: {self.checked} points checked, {len(self.mismatches)} mismatches, {len(self.poles)} poles"
        if self.mismatches:
            pt, l, r = self.mismatches[0]
            where = ", ".join(f"{k}={v}" for k, v in pt.items())
            out += f"; first mismatch at {where}: lhs={l}, rhs={r}"
        return out


def parse_grid(text: str) -> list[tuple[str, Expr, Expr]]:
    """``"n=2..12,b=0..n"`` -> ``[(name, lo, hi), ...]``; bounds may use earlier names."""
    out = []
    names: list[str] = []
    for part in [p.strip() for p in text.split(",") if p.strip()]:
        if "=" not in part or ".." not in part:
            raise ValueError(f"grid entry {part!r} is not of the form name=lo..hi")
        name, rng = part.split("=", 1)
        name = name.strip()
        lo, hi = rng.split("..", 1)
        out.append((name, parse_expression(lo, names), parse_expression(hi, names)))
        names.append(name)
    return out


def _grid_points(grid, fixed: dict):
    def rec(i, env):
        if i == len(grid):
            yield dict(env)
            return
        name, lo, hi = grid[i]
        lo_v = evaluate(lo if isinstance(lo, Expr) else Num(Fraction(lo)), env)
        hi_v = evaluate(hi if isinstance(hi, Expr) else Num(Fraction(hi)), env)
        for v in range(int(lo_v), int(hi_v) + 1):
            env[name] = Fraction(v)
            yield from rec(i + 1, env)
        env.pop(name, None)

    yield from rec(0, dict(fixed))


def verify_identity(lhs, rhs, grid, fixed: dict | None = None, names=None) -> VerificationReport:
    """Compare ``lhs`` and ``rhs`` exactly at every grid point.

    ``grid`` is a list of ``(name, lo, hi)`` (bounds are integers or
    expressions in earlier names) or text accepted by :func:`parse_grid`.
    Poles are recorded per point and do not count as mismatches.

    Examples
    ========

    >>> from ring_telescope.summation_api import verify_identity
    >>> print(verify_identity("Sum(i,1,b,i)", "b*(b+1)/2", "b=0..10"))
    verified: 11 points checked, 0 mismatches, 0 poles
    >>> print(verify_identity("k", "k+1", "k=0..3"))
    NOT verified: 4 points checked, 4 mismatches, 0 poles; first mismatch at k=0: lhs=0, rhs=1
    """
    if isinstance(grid, str):
        grid = parse_grid(grid)
    fixed = {k: Fraction(v) for k, v in (fixed or {}).items()}
    scope = tuple(names) if names is not None else tuple(n for n, _, _ in grid) + tuple(fixed)
    if isinstance(lhs, str):
        lhs = parse_expression(lhs, scope)
    if isinstance(rhs, str):
        rhs = parse_expression(rhs, scope)
    report = VerificationReport()
    for pt in _grid_points(grid, fixed):
        try:
            l = evaluate(lhs, pt)
            r = evaluate(rhs, pt)
        except PoleEncountered as exc:
            report.poles.append((pt, str(exc)))
            continue
        report.checked += 1
        if l != r:
            report.mismatches.append((pt, l, r))
    return report


def _param_samples(params, count: int = 2) -> list[dict]:
    """A few large integer assignments (large so binomials and factorials are generic)."""
    out = []
    for i in range(count):
        out.append({p: Fraction(13 + 7 * i + 3 * j) for j, p in enumerate(params)})
    return out or [{}]


# ---------------------------------------------------------------------------
# telescoping
# ---------------------------------------------------------------------------

def _default_params(e: Expr, var: str, extra=()) -> tuple[str, ...]:
    return tuple(sorted((free_symbols(e) | set(extra)) - {var}))


def _as_expr(e, names) -> Expr:
    return parse_expression(e, tuple(names)) if isinstance(e, str) else e


@dataclass
class TelescopeResult:
    """Certificate G with G(k+1) - G(k) = F(k) and the constant c.

    For every ``b >= lower - 1`` (where both sides are defined)
    ``Sum(k, lower, b, F) = G(b+1) + c``, i.e. ``c = -G(lower)``.
    """

    summand: Expr
    var: str
    params: tuple
    lower: int
    G: Expr
    constant: RatFun
    g: Elem
    f: Elem
    tower: Tower

    def identity(self, upper: str = "b") -> tuple[Expr, Expr]:
        """``(Sum(var, lower, upper, F), G(upper+1) + c)``."""
        if upper in self.params or upper == self.var:
            raise ValueError(f"upper bound name {upper!r} is already used")
        lhs = Sum(self.var, Num(Fraction(self.lower)), Sym(upper), self.summand)
        rhs = tidy(substitute(self.G, {self.var: Add(Sym(upper), Num(Fraction(1)))}))
        if not self.constant.is_zero():
            rhs = _signed_sum([(1, rhs), (1, ratfun_to_expr(self.constant))])
        return lhs, rhs

    def verify(self, upper: str = "b", span: int = 8, samples: list | None = None) -> VerificationReport:
        lhs, rhs = self.identity(upper)
        report = VerificationReport()
        for pt in samples or _param_samples(self.params):
            grid = [(upper, self.lower - 1, self.lower + span)]
            sub = verify_identity(lhs, rhs, grid, fixed=pt, names=(upper,) + self.params)
            report.checked += sub.checked
            report.mismatches += sub.mismatches
            report.poles += sub.poles
        return report


def telescope(summand, var: str = "k", params=None, lower: int = 0,
              options: CompileOptions | None = None) -> TelescopeResult | None:
    """Indefinite summation: G with G(k+1) - G(k) = F(k) in the tower of F, or None.

    Explanation
    ===========

    ``F`` is compiled into a tower, Problem T is solved there as a PT problem
    with d = 1 and ``g`` is translated back.  The returned constant is
    ``-G(lower)`` so that ``Sum(k, lower, b, F) = G(b+1) + c``; if ``G`` has a
    pole at ``lower`` the first regular point above it is used and the
    skipped summands are folded into ``c``.  ``None`` means no telescoper
    exists in the tower (the sum itself then extends the tower).  The result
    re-verifies itself on a small grid.

    Examples
    ========

    >>> from ring_telescope.summation_api import telescope
    >>> r = telescope("Sum(i,0,k-1,Binomial(n,i))", "k", ("n",))
    >>> print(r.G)
    -(n - 2*k + 2)*Sum(i,0,k - 1,Binomial(n,i))/2 + k*Binomial(n,k)/2
    >>> print(telescope("1").G)
    k
    >>> print(telescope("1/k", lower=1))
    None
    """
    params = tuple(params) if params is not None else None
    if isinstance(summand, str):
        if params is None:
            params = _default_params(parse_expression(summand, None), var)
        summand = parse_expression(summand, (var,) + params)
    if params is None:
        params = _default_params(summand, var)
    options = options or CompileOptions()
    comp = Compiler(var, params, options)
    f = comp.compile(summand)
    basis = solve_pt([f], comp.tower, options.max_support)
    sol = next(((c, g) for c, g in basis if not c[0].is_zero()), None)
    if sol is None:
        return None
    g = sol[1].scale(sol[0][0].inverse())
    G = decompile(g)
    constant = _telescope_constant(summand, G, var, comp.ctx, lower)
    res = TelescopeResult(summand, var, params, lower, G, constant, g, f, comp.tower)
    report = res.verify(_fresh_upper(params, var))
    if not report.ok:
        raise SolverInvariantError(f"telescoping certificate failed its own check: {report}")
    return res


def _fresh_upper(params, var) -> str:
    for cand in ("b", "m", "N", "u"):
        if cand not in params and cand != var:
            return cand
    return "upper_"


def _telescope_constant(summand: Expr, G: Expr, var: str, ctx, lower: int) -> RatFun:
    head = ctx.zero_rf()
    for a in range(lower, lower + _SCAN_LIMIT):
        try:
            return head - RatFun.coerce(ctx, evaluate(G, {var: a}, ctx))
        except PoleEncountered:
            head = head + RatFun.coerce(ctx, evaluate(summand, {var: a}, ctx))
    raise UnsupportedExpression("certificate has no regular point near the lower bound")


# ---------------------------------------------------------------------------
# creative telescoping
# ---------------------------------------------------------------------------

@dataclass
class Recurrence:
    """``sum_i coeffs[i]*S(n+i) = rhs`` for ``S(n) = definition``."""

    var: str
    coeffs: tuple
    rhs: Expr
    definition: Expr
    params: tuple = ()

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def coefficient_exprs(self) -> list[Expr]:
        return [ratfun_to_expr(c) for c in self.coeffs]

    def __str__(self):
        terms = []
        n = Sym(self.var)
        for i, c in enumerate(self.coeffs):
            if c.is_zero():
                continue
            arg = to_text(n if i == 0 else Add(n, Num(Fraction(i))))
            sv = Sym(f"S({arg})")
            ce = ratfun_to_expr(c)
            if isinstance(ce, Num) and ce.value == 1:
                terms.append((1, sv))
            elif isinstance(ce, Num) and ce.value == -1:
                terms.append((-1, sv))
            elif isinstance(ce, Num) and ce.value < 0:
                terms.append((-1, mul(Num(-ce.value), sv)))
            elif isinstance(ce, Neg):
                terms.append((-1, Mul(ce.a, sv)))
            else:
                terms.append((1, Mul(ce, sv)))
        return f"{to_text(_signed_sum(terms))} = {to_text(self.rhs)}"

    def value(self, m: int, fixed: dict):
        env = dict(fixed)
        env[self.var] = Fraction(m)
        return evaluate(self.definition, env)


@dataclass
class CreativeTelescopingResult:
    recurrence: Recurrence
    certificate: Expr
    g: Elem
    coefficients: tuple
    tower: Tower
    order: int
    summand: Expr
    var: str


def creative_telescope(summand, n: str = "n", var: str = "k", params=None, lo: int = 0, hi=None,
                       max_order: int = 5, options: CompileOptions | None = None) -> CreativeTelescopingResult:
    """Recurrence in ``n`` for ``S(n) = Sum(k, lo, hi, F(n,k))`` by creative telescoping.

    Explanation
    ===========

    For d = 1, 2, ... the shifted summands F(n+i, k), i < d, are compiled into
    one shared tower and the PT problem is solved.  The first solution with
    some nonzero constant gives ``sigma(g) - g = sum c_i F(n+i, k)``; summing
    over k and correcting for the shifted upper bounds yields
    ``sum c_i S(n+i) = G(hi+1) - G(lo) + boundary terms``.  If G has a pole at
    ``hi+1`` the telescoped range stops earlier and the remaining summands are
    added explicitly.  The right-hand side is simplified by compiling it as a
    sequence in ``n``.  Coefficients are scaled so that the last nonzero one
    is 1, and the recurrence is checked numerically before it is returned.

    Examples
    ========

    >>> from ring_telescope.summation_api import creative_telescope
    >>> r = creative_telescope("Binomial(n,k)*Sum(i,1,k,(-1)^i/i)")
    >>> print(r.recurrence)
    -2*S(n) + S(n + 1) = -1/(n + 1)
    >>> print(creative_telescope("Binomial(n,k)").recurrence)
    -2*S(n) + S(n + 1) = 0
    """
    params = _resolve_params(summand, var, params, extra=(n,))
    if n not in params:
        raise ScopeError(f"recurrence variable {n!r} must be a parameter")
    F = _as_expr(summand, (var,) + params)
    hi_e = Sym(n) if hi is None else _as_expr(hi, params)
    delta = _offset(hi_e, n)
    options = options or CompileOptions()
    for d in range(1, max_order + 1):
        comp = Compiler(var, params, options)
        Fs = [F if i == 0 else substitute(F, {n: Add(Sym(n), Num(Fraction(i)))}) for i in range(d)]
        fs = [comp.compile(Fi) for Fi in Fs]
        basis = solve_pt(fs, comp.tower, options.max_support)
        nontriv = basis.nontrivial()
        if not nontriv:
            continue
        c, g = nontriv[0]
        last = max(i for i, ci in enumerate(c) if not ci.is_zero())
        scale = c[last].inverse()
        c = tuple(ci * scale for ci in c[:last + 1])
        g = g.scale(scale)
        Fs = Fs[:last + 1]
        G = decompile(g)
        rhs = _boundary_rhs(G, Fs, c, comp.ctx, n, var, lo, delta, params)
        rhs = _simplify_in(rhs, n, tuple(p for p in params if p != n), options)
        definition = Sum(var, Num(Fraction(lo)), hi_e, F)
        rec = Recurrence(n, c, rhs, definition, params)
        _check_certificate(Fs, c, G, var, params)
        _check_recurrence(rec, lo, params)
        return CreativeTelescopingResult(rec, G, g, c, comp.tower, d, F, var)
    raise NoRecurrenceFound(max_order)


def _resolve_params(summand, var, params, extra=()):
    if params is not None:
        return tuple(params)
    if isinstance(summand, str):
        return _default_params(parse_expression(summand, None), var, extra)
    return _default_params(summand, var, extra)


def _offset(e: Expr, n: str) -> int:
    """delta with e == n + delta."""
    try:
        v0 = evaluate(e, {n: 0})
        v1 = evaluate(e, {n: 1})
    except (ScopeError, UnsupportedExpression) as exc:
        raise UnsupportedExpression(f"upper bound {to_text(e)} must be {n} plus an integer") from exc
    if v1 - v0 != 1 or v0.denominator != 1:
        raise UnsupportedExpression(f"upper bound {to_text(e)} must be {n} plus an integer")
    return int(v0)


def _shift_n(n: str, r: int) -> Expr:
    if r == 0:
        return Sym(n)
    return Add(Sym(n), Num(Fraction(r))) if r > 0 else Sub(Sym(n), Num(Fraction(-r)))


def _boundary_rhs(G, Fs, c, ctx, n, var, lo, delta, params) -> Expr:
    others = [p for p in params if p != n]
    samples = []
    for i, pt in enumerate(_param_samples(others)):
        for n0 in range(max(lo, 0) + 2, max(lo, 0) + 6):
            q = dict(pt)
            q[n] = Fraction(n0 + 5 * i)
            samples.append(q)
    # telescoped range ends at hi' = n + delta - j, the first j where G(hi'+1) is regular
    for j in range(0, 9):
        try:
            for q in samples:
                env = dict(q)
                env[var] = q[n] + delta + 1 - j
                evaluate(G, env)
            break
        except PoleEncountered:
            continue
    else:
        raise UnsupportedExpression("certificate has poles at every admissible upper boundary")
    # and starts at lo' >= lo, the first point where G is regular
    head_end = lo
    while True:
        try:
            g_lo = RatFun.coerce(ctx, evaluate(G, {var: head_end}, ctx))
            break
        except PoleEncountered:
            head_end += 1
            if head_end > lo + _SCAN_LIMIT:
                raise UnsupportedExpression("certificate has no regular point near the lower bound") from None
    terms = [(1, substitute(G, {var: _shift_n(n, delta + 1 - j)}))]
    if not g_lo.is_zero():
        terms.append((-1, ratfun_to_expr(g_lo)))

    def weighted(ci, Fi, at):
        return mul(ratfun_to_expr(ci), substitute(Fi, {var: at}))

    for i, (ci, Fi) in enumerate(zip(c, Fs)):
        if ci.is_zero():
            continue
        for m in range(lo, head_end):
            terms.append((1, weighted(ci, Fi, Num(Fraction(m)))))
        for r in range(delta - j + 1, delta + 1):
            terms.append((1, weighted(ci, Fi, _shift_n(n, r))))
        for r in range(delta + 1, delta + i + 1):
            terms.append((1, weighted(ci, Fi, _shift_n(n, r))))
    return tidy(_signed_sum(terms))


def _simplify_in(e: Expr, var: str, params: tuple, options: CompileOptions) -> Expr:
    """Canonical form of ``e`` as a sequence in ``var`` (returned unchanged if it does not compile)."""
    try:
        comp = Compiler(var, params, options)
        return decompile(comp.compile(e))
    except (UnsupportedExpression, NotAUnit):
        return e


def _check_certificate(Fs, c, G, var, params):
    for pt in _param_samples(params):
        for k0 in range(0, 6):
            env = dict(pt)
            try:
                env[var] = Fraction(k0 + 1)
                g1 = evaluate(G, env)
                env[var] = Fraction(k0)
                g0 = evaluate(G, env)
                rhs = sum((ci.value(env) * evaluate(Fi, env) for ci, Fi in zip(c, Fs) if not ci.is_zero()),
                          Fraction(0))
            except PoleEncountered:
                continue
            if g1 - g0 != rhs:
                raise SolverInvariantError(f"certificate check failed at {env}")


def _check_recurrence(rec: Recurrence, lo: int, params):
    others = [p for p in params if p != rec.var]
    checked = 0
    for pt in _param_samples(others):
        for n0 in range(max(lo, 0), max(lo, 0) + 6):
            env = dict(pt)
            env[rec.var] = Fraction(n0)
            try:
                lhs = Fraction(0)
                for i, ci in enumerate(rec.coeffs):
                    if not ci.is_zero():
                        cv = ci.value({**env, ci.ctx.var: Fraction(0)})
                        lhs += cv * rec.value(n0 + i, pt)
                rhs = evaluate(rec.rhs, env)
            except PoleEncountered:
                continue
            checked += 1
            if lhs != rhs:
                raise SolverInvariantError(f"recurrence check failed at {env}: {lhs} != {rhs}")
    if not checked:
        raise SolverInvariantError("recurrence could not be checked at any point")


# ---------------------------------------------------------------------------
# first-order recurrences
# ---------------------------------------------------------------------------

def _homogeneous(rho: RatFun, n: str, n0: int, j: str) -> Expr:
    """h with h(n+1) = rho(n) h(n) and h(n0) = 1."""
    if rho.is_one():
        return Num(Fraction(1))
    if rho.is_k_free():
        return Pow(ratfun_to_expr(rho), _shift_n(n, -n0))
    if rho.den.is_one() and k_degree(rho.num, rho.ctx) == 1:
        a = rho - rho.ctx.var_rf(n)
        if a.is_number() and a.to_fraction().denominator == 1:
            a = int(a.to_fraction())
            if n0 - 1 + a >= 0:
                f0 = 1
                for i in range(2, n0 + a):
                    f0 *= i
                return div(Factorial(_shift_n(n, a - 1)), Num(Fraction(f0)))
    body = ratfun_to_expr(rho, {n: j})
    return Product(j, Num(Fraction(n0)), _shift_n(n, -1), body)


def solve_first_order_recurrence(rec: Recurrence, initial, n0: int = 0,
                                 options: CompileOptions | None = None) -> Expr:
    """Closed form of an order-1 recurrence by variation of constants.

    Explanation
    ===========

    With ``c_0 S(n) + c_1 S(n+1) = r(n)``, ``rho = -c_0/c_1`` and ``h`` the
    product solution with ``h(n0) = 1``,
    ``S(n) = h(n)*(S(n0) + Sum(j, n0+1, n, r(j-1)/(c_1(j-1)*h(j))))``.
    The summand is simplified by compiling it as a sequence in ``j``.

    Examples
    ========

    >>> from ring_telescope.summation_api import creative_telescope, solve_first_order_recurrence
    >>> rec = creative_telescope("Binomial(n,k)*Sum(i,1,k,(-1)^i/i)").recurrence
    >>> print(solve_first_order_recurrence(rec, 0))
    -2^n*Sum(j,1,n,1/(j*2^j))
    """
    if rec.order != 1:
        raise ValueError(f"recurrence has order {rec.order}, expected 1")
    n = rec.var
    others = tuple(p for p in rec.params if p != n)
    nctx = get_context(others, n)
    c0, c1 = (ci.convert(nctx) for ci in rec.coeffs)
    if c1.is_zero():
        raise SingularLeadingCoefficient("leading coefficient is zero")
    bad = sorted(r for r in integer_roots_k(c1.num, nctx) if r >= n0)
    if bad:
        raise SingularLeadingCoefficient(f"leading coefficient vanishes at {n}={bad[0]}")
    j = _bound_name(set(nctx.names))
    rho = -c0 / c1
    h = _homogeneous(rho, n, n0, j)
    init = parse_expression(initial, None) if isinstance(initial, str) else (
        initial if isinstance(initial, Expr) else Num(Fraction(initial)))
    r_prev = substitute(rec.rhs, {n: _shift_n(j, -1)})
    c1_prev = ratfun_to_expr(c1.shift(-1), {n: j})
    summand = div(r_prev, mul(c1_prev, substitute(h, {n: Sym(j)})))
    summand = _simplify_in(summand, j, others, options or CompileOptions())
    sign = 1
    if isinstance(summand, Neg):
        sign, summand = -1, summand.a
    if isinstance(summand, Num) and summand.value == 0:
        inner_terms = [(1, init)]
    else:
        s = Sum(j, Num(Fraction(n0 + 1)), Sym(n), summand)
        inner_terms = [(1, init), (sign, s)] if not (isinstance(init, Num) and init.value == 0) else [(sign, s)]
    if len(inner_terms) == 1:
        sg, inner = inner_terms[0]
        out = mul(h, inner)
        return out if sg > 0 else _negate(out)
    return mul(h, _signed_sum(inner_terms))
