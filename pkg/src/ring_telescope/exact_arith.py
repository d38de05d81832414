"""Exact polynomial and rational-function arithmetic over Z[y_1..y_o, k].

Polynomials are ``flint.fmpz_mpoly`` values living in a :class:`Context`
whose variables are the parameters followed by the shift variable.  Rational
functions (:class:`RatFun`) keep a reduced numerator/denominator pair.  The
constant field K = Q(y_1..y_o) is represented by k-free ``RatFun`` values, so
K and K(k) share one type.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import flint

from .errors import FactorDegreeExceeded, PoleEncountered

DEFAULT_FACTOR_DEGREE_CAP = 2


class Context:
    """Variable layout ``(y_1, ..., y_o, k)`` with a deglex term order."""

    def __init__(self, params: tuple[str, ...], var: str = "k"):
        if var in params:
            raise ValueError(f"shift variable {var!r} clashes with a parameter")
        self.params = tuple(params)
        self.var = var
        self.names = self.params + (var,)
        self.flint = flint.fmpz_mpoly_ctx.get(self.names, "deglex")
        self.kidx = len(self.params)
        self.nvars = len(self.names)
        self.gens = self.flint.gens()
        self._shift_maps: dict[int, tuple] = {}

    def __repr__(self):
        return f"Context(params={self.params!r}, var={self.var!r})"

    # polynomial constructors -------------------------------------------------
    def const(self, c) -> flint.fmpz_mpoly:
        return self.flint.constant(int(c))

    def zero(self):
        return self.flint.from_dict({})

    def gen(self, name: str):
        return self.gens[self.names.index(name)]

    @property
    def k(self):
        return self.gens[self.kidx]

    def shift_map(self, r: int) -> tuple:
        m = self._shift_maps.get(r)
        if m is None:
            m = tuple(g + r if i == self.kidx else g for i, g in enumerate(self.gens))
            self._shift_maps[r] = m
        return m

    # rational function constructors -------------------------------------------
    def ratfun(self, value) -> "RatFun":
        return RatFun.coerce(self, value)

    def var_rf(self, name: str) -> "RatFun":
        return RatFun(self, self.gen(name), _reduced=True)

    def one_rf(self) -> "RatFun":
        return RatFun(self, self.const(1), _reduced=True)

    def zero_rf(self) -> "RatFun":
        return RatFun(self, self.zero(), _reduced=True)

    def with_var(self, var: str, params: tuple[str, ...] | None = None) -> "Context":
        return get_context(self.params if params is None else tuple(params), var)


@functools.lru_cache(maxsize=None)
def get_context(params: tuple[str, ...] = (), var: str = "k") -> Context:
    return Context(tuple(params), var)


def _z_context(ctx: Context) -> tuple[flint.fmpz_mpoly_ctx, str]:
    zname = "z"
    while zname in ctx.names:
        zname += "_"
    return flint.fmpz_mpoly_ctx.get(ctx.names + (zname,), "deglex"), zname


# ---------------------------------------------------------------------------
# polynomial helpers
# ---------------------------------------------------------------------------

def k_degree(p, ctx: Context) -> int:
    """Degree in the shift variable; -1 for the zero polynomial."""
    if p.is_zero():
        return -1
    return int(p.degrees()[ctx.kidx])


def k_coeffs(p, ctx: Context) -> dict[int, flint.fmpz_mpoly]:
    """Split ``p`` into k-free coefficients indexed by the power of k."""
    out: dict[int, dict] = {}
    kidx = ctx.kidx
    for exps, c in p.to_dict().items():
        j = int(exps[kidx])
        key = exps[:kidx] + (0,) + exps[kidx + 1:]
        out.setdefault(j, {})[key] = c
    return {j: ctx.flint.from_dict(d) for j, d in out.items()}


def k_content(p, ctx: Context):
    """gcd of the coefficients of ``p`` viewed as a polynomial in k (a k-free polynomial)."""
    g = ctx.zero()
    for c in k_coeffs(p, ctx).values():
        g = c if g.is_zero() else g.gcd(c)
        if g.is_constant() and abs(int(g.leading_coefficient())) == 1:
            break
    return _normalize_sign(g)


def k_primitive(p, ctx: Context):
    """``p`` divided by its k-content; units of K[k] are stripped."""
    if p.is_zero():
        return p
    return _normalize_sign(p / k_content(p, ctx))


def _normalize_sign(p):
    if not p.is_zero() and p.leading_coefficient() < 0:
        return -p
    return p


def poly_gcd(p, q):
    """Greatest common divisor, primitive with positive leading coefficient."""
    if p.is_zero() and q.is_zero():
        return p
    if p.is_zero():
        g = q
    elif q.is_zero():
        g = p
    else:
        g = p.gcd(q)
    content = g.content()
    if content != 1 and content != 0:
        g = g / content
    return _normalize_sign(g)


def shift_substitute(p, r: int, ctx: Context | None = None):
    """Replace k by k+r in a polynomial or a :class:`RatFun`."""
    if isinstance(p, RatFun):
        return p.shift(r)
    if r == 0:
        return p
    if ctx is None:
        raise ValueError("a Context is required to shift a bare polynomial")
    return p.compose(*ctx.shift_map(r))


def resultant_k(a, b, ctx: Context):
    """res_k(a(k), b(k+z)); returns ``(polynomial, variable name of z)``.

    The polynomial lives in a context with variables ``ctx.names + (z,)`` and
    vanishes at z = r exactly when gcd(a(k), b(k+r)) is non-trivial.
    """
    zctx, zname = _z_context(ctx)
    zgens = zctx.gens()
    base = zgens[:-1]
    az = a.compose(*base, ctx=zctx)
    shifted = tuple(g + zgens[-1] if i == ctx.kidx else g for i, g in enumerate(base))
    bz = b.compose(*shifted, ctx=zctx)
    return az.resultant(bz, ctx.var), zname


def integer_roots(p, var: str = "z") -> set[int]:
    """Integer r with p(r) = 0 identically in all other variables.

    Every coefficient (w.r.t. the other variables) is a univariate polynomial in
    ``var``; an integer root must annihilate all of them, i.e. their gcd.
    """
    if p.is_zero():
        raise ValueError("the zero polynomial has every integer as a root")
    names = p.context().names()
    vidx = names.index(var)
    parts: dict[tuple, dict[int, int]] = {}
    for exps, c in p.to_dict().items():
        key = exps[:vidx] + exps[vidx + 1:]
        parts.setdefault(key, {})[int(exps[vidx])] = int(c)
    g = None
    for coeffs in parts.values():
        u = flint.fmpz_poly([coeffs.get(i, 0) for i in range(max(coeffs) + 1)])
        g = u if g is None else g.gcd(u)
        if g.degree() == 0:
            return set()
    roots = set()
    _, factors = g.factor()
    for f, _m in factors:
        if f.degree() == 1:
            c0, c1 = int(f[0]), int(f[1])
            if c0 % c1 == 0:
                roots.add(-c0 // c1)
    return roots


def dispersion(p, q, ctx: Context) -> int:
    """Largest r >= 0 with deg_k gcd(p(k), q(k+r)) > 0, or -1 if there is none."""
    p, q = k_primitive(p, ctx), k_primitive(q, ctx)
    if k_degree(p, ctx) <= 0 or k_degree(q, ctx) <= 0:
        return -1
    res, zname = resultant_k(p, q, ctx)
    roots = [r for r in integer_roots(res, zname) if r >= 0]
    return max(roots) if roots else -1


def integer_roots_k(p, ctx: Context) -> set[int]:
    """Integer roots in k of a polynomial over K (parameters stay symbolic)."""
    p = k_primitive(p, ctx)
    if k_degree(p, ctx) <= 0:
        return set()
    roots = set()
    _, factors = p.factor()
    for f, _m in factors:
        if k_degree(f, ctx) != 1:
            continue
        cs = k_coeffs(f, ctx)
        a, b = cs.get(1), cs.get(0, ctx.zero())
        if not a.is_constant() or not b.is_constant():
            continue
        ai = int(a.leading_coefficient())
        bi = int(b.leading_coefficient()) if not b.is_zero() else 0
        if bi % ai == 0:
            roots.add(-bi // ai)
    return roots


@dataclass(frozen=True)
class Factorization:
    """p = unit * prod(f**m for f, m in factors).

    ``unit`` is +1 or -1; factors are irreducible, primitive and have a positive
    deglex-leading coefficient.  Prime factors of the integer content appear
    as degree-0 factors.
    """

    unit: int
    factors: tuple[tuple[flint.fmpz_mpoly, int], ...]

    def expand(self, ctx: Context):
        out = ctx.const(self.unit)
        for f, m in self.factors:
            out = out * f ** m
        return out


def factor_irreducible(p, ctx: Context, degree_cap: int | None = DEFAULT_FACTOR_DEGREE_CAP) -> Factorization:
    if p.is_zero():
        raise ValueError("cannot factor the zero polynomial")
    content, factors = p.factor()
    unit = 1 if content > 0 else -1
    out: list[tuple] = []
    for prime, m in flint.fmpz(abs(int(content))).factor():
        out.append((ctx.const(int(prime)), int(m)))
    for f, m in factors:
        if f.leading_coefficient() < 0:
            f = -f
            if m % 2:
                unit = -unit
        if degree_cap is not None and k_degree(f, ctx) > degree_cap:
            raise FactorDegreeExceeded(
                f"irreducible factor {f} has degree {k_degree(f, ctx)} in {ctx.var} > cap {degree_cap}"
            )
        out.append((f, int(m)))
    out.sort(key=lambda fm: (f_sort_key(fm[0], ctx), fm[1]))
    return Factorization(unit, tuple(out))


def f_sort_key(f, ctx: Context):
    return (k_degree(f, ctx), f.total_degree(), str(f))


def poly_value(p, point: dict[str, Fraction], ctx: Context) -> Fraction:
    """Evaluate a polynomial at a full numeric point."""
    vals = [point[name] for name in ctx.names]
    if all(isinstance(v, int) or (isinstance(v, Fraction) and v.denominator == 1) for v in vals):
        return Fraction(int(p(*[int(v) for v in vals])))
    total = Fraction(0)
    for exps, c in p.to_dict().items():
        term = Fraction(int(c))
        for v, e in zip(vals, exps):
            if e:
                term *= Fraction(v) ** int(e)
        total += term
    return total


# ---------------------------------------------------------------------------
# rational functions
# ---------------------------------------------------------------------------

class RatFun:
    """Reduced quotient num/den of polynomials; den has a positive leading coefficient."""

    __slots__ = ("ctx", "num", "den")

    def __init__(self, ctx: Context, num, den=None, _reduced: bool = False):
        self.ctx = ctx
        if den is None:
            self.num, self.den = num, ctx.const(1)
            return
        if _reduced:
            self.num, self.den = num, den
            return
        if den.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")
        if num.is_zero():
            self.num, self.den = num, ctx.const(1)
            return
        if not den.is_one():
            g = num.gcd(den)
            if not g.is_one():
                num, den = num / g, den / g
            if den.leading_coefficient() < 0:
                num, den = -num, -den
        self.num, self.den = num, den

    @classmethod
    def coerce(cls, ctx: Context, value) -> "RatFun":
        if isinstance(value, RatFun):
            if value.ctx is not ctx:
                raise ValueError("rational functions from different contexts")
            return value
        if isinstance(value, int):
            return cls(ctx, ctx.const(value), _reduced=True)
        if isinstance(value, Rational):
            value = Fraction(value)
            return cls(ctx, ctx.const(value.numerator), ctx.const(value.denominator), _reduced=True)
        if isinstance(value, flint.fmpz_mpoly):
            return cls(ctx, value, _reduced=True)
        if isinstance(value, flint.fmpz):
            return cls(ctx, ctx.const(int(value)), _reduced=True)
        raise TypeError(f"cannot coerce {type(value).__name__} to RatFun")

    # arithmetic ----------------------------------------------------------------
    def _other(self, other):
        if isinstance(other, RatFun):
            return other
        try:
            return RatFun.coerce(self.ctx, other)
        except TypeError:
            return None

    def __add__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        if o.num.is_zero():
            return self
        if self.num.is_zero():
            return o
        if self.den == o.den:
            return RatFun(self.ctx, self.num + o.num, self.den)
        return RatFun(self.ctx, self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return RatFun(self.ctx, -self.num, self.den, _reduced=True)

    def __sub__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        if self.num.is_zero() or o.num.is_zero():
            return self.ctx.zero_rf()
        if o.den.is_one() and self.den.is_one():
            return RatFun(self.ctx, self.num * o.num, _reduced=True)
        return RatFun(self.ctx, self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def inverse(self) -> "RatFun":
        if self.num.is_zero():
            raise ZeroDivisionError("inverse of zero")
        num, den = self.den, self.num
        if den.leading_coefficient() < 0:
            num, den = -num, -den
        return RatFun(self.ctx, num, den, _reduced=True)

    def __truediv__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        return RatFun(self.ctx, self.num ** e, self.den ** e, _reduced=True)

    def __eq__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return self.num == o.num and self.den == o.den

    def __hash__(self):
        return hash((str(self.num), str(self.den)))

    # predicates ------------------------------------------------------------------
    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_one(self) -> bool:
        return self.num.is_one() and self.den.is_one()

    def is_k_free(self) -> bool:
        return k_degree(self.num, self.ctx) <= 0 and k_degree(self.den, self.ctx) <= 0

    def is_number(self) -> bool:
        return self.num.is_constant() and self.den.is_constant()

    def to_fraction(self) -> Fraction:
        if not self.is_number():
            raise ValueError(f"{self} is not a rational number")
        n = int(self.num.leading_coefficient()) if not self.num.is_zero() else 0
        return Fraction(n, int(self.den.leading_coefficient()))

    # structure -------------------------------------------------------------------
    def shift(self, r: int) -> "RatFun":
        if r == 0:
            return self
        m = self.ctx.shift_map(r)
        num = self.num.compose(*m) if not self.num.is_constant() else self.num
        den = self.den.compose(*m) if not self.den.is_constant() else self.den
        return RatFun(self.ctx, num, den, _reduced=True)

    def k_degrees(self) -> tuple[int, int]:
        return k_degree(self.num, self.ctx), k_degree(self.den, self.ctx)

    def subs(self, values: dict) -> "RatFun":
        """Substitute integers for some variables; the result stays in the same context."""
        vals = {self.ctx.names.index(n): int(v) for n, v in values.items()}
        if not vals:
            return self
        num = self.num.subs(vals)
        den = self.den.subs(vals)
        if den.is_zero():
            raise PoleEncountered(values.get(self.ctx.var), f"denominator of {self} vanishes at {values}")
        return RatFun(self.ctx, num, den)

    def at_k(self, k0: int) -> "RatFun":
        """Value at k = k0 (parameters symbolic); raises PoleEncountered on a pole."""
        vals = {self.ctx.kidx: int(k0)}
        den = self.den.subs(vals) if not self.den.is_constant() else self.den
        if den.is_zero():
            raise PoleEncountered(k0, f"denominator of {self} vanishes at {self.ctx.var}={k0}")
        num = self.num.subs(vals) if not self.num.is_constant() else self.num
        return RatFun(self.ctx, num, den)

    def value(self, point: dict) -> Fraction:
        """Numeric value at a point assigning every variable."""
        d = poly_value(self.den, point, self.ctx)
        if d == 0:
            raise PoleEncountered(point.get(self.ctx.var), f"denominator of {self} vanishes at {point}")
        return poly_value(self.num, point, self.ctx) / d

    def lc_k(self) -> "RatFun":
        """Ratio of the k-leading coefficients of numerator and denominator (an element of K)."""
        if self.is_zero():
            return self
        cn = k_coeffs(self.num, self.ctx)
        cd = k_coeffs(self.den, self.ctx)
        return RatFun(self.ctx, cn[max(cn)], cd[max(cd)])

    def convert(self, target: Context, rename: dict[str, str] | None = None) -> "RatFun":
        """Move to another context, mapping variables by (possibly renamed) name."""
        rename = rename or {}
        images = []
        for name in self.ctx.names:
            tname = rename.get(name, name)
            if tname in target.names:
                images.append(target.gen(tname))
            else:
                images.append(None)
        used = [any(e[i] for e in self.num.to_dict()) or any(e[i] for e in self.den.to_dict())
                for i in range(self.ctx.nvars)]
        for i, img in enumerate(images):
            if img is None:
                if used[i]:
                    raise ValueError(f"variable {self.ctx.names[i]} has no image in {target}")
                images[i] = target.const(0)
        num = self.num.compose(*images, ctx=target.flint)
        den = self.den.compose(*images, ctx=target.flint)
        return RatFun(target, num, den)

    def __repr__(self):
        return f"RatFun({self})"

    def __str__(self):
        if self.den.is_one():
            return str(self.num)
        num = str(self.num)
        if len(self.num.to_dict()) > 1:
            num = f"({num})"
        den = str(self.den)
        if len(self.den.to_dict()) > 1 or not self.den.is_constant():
            den = f"({den})"
        return f"{num}/{den}"
