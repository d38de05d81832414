"""Difference rings K(k)(t_1)...(t_e)[x][s_1]...[s_r] and their elements.

A :class:`Tower` is an ordered list of :class:`Generator` objects over a
:class:`~ring_telescope.exact_arith.Context`.  The automorphism acts as

* ``k -> k + 1`` on the base field,
* ``t -> h*t`` on a Pi-generator (``h`` in K(k)*),
* ``x -> alpha*x`` on the root-of-unity generator, with ``x**order == 1``,
* ``s -> s + beta`` on a Sigma-generator (``beta`` from the levels below).

Elements (:class:`Elem`) are stored flat: a map from exponent tuples (one
entry per generator, Laurent in the Pi-generators, reduced modulo ``order``
in ``x`` and non-negative in the Sigma-generators) to coefficients in K(k).
Denominators are therefore confined to K(k) and Pi-monomials.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any

from .errors import MissingParameter, NotAUnit, PoleEncountered, RingTelescopeError
from .exact_arith import Context, RatFun

PI, ROOT, SIGMA = "pi", "root", "sigma"


@dataclass(frozen=True, eq=False)
class Generator:
    """One extension step.

    ``anchor`` is ``(k0, value)``: the sequence modelled by the generator takes
    ``value`` (an element of K) at ``k = k0``; all other values follow from the
    defining first-order recurrence.  ``expr`` optionally holds an expression
    tree used when translating elements back to sums and products, and
    ``meta`` is free-form bookkeeping (e.g. the shift-class exponent vector of
    a Pi-generator).
    """

    name: str
    kind: str
    h: RatFun | None = None
    alpha: RatFun | None = None
    order: int = 0
    beta: "Elem | None" = None
    anchor: tuple[int, Any] = (0, 1)
    expr: Any = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == PI:
            if self.h is None or self.h.is_zero():
                raise ValueError(f"Pi-generator {self.name} needs a nonzero multiplier")
        elif self.kind == ROOT:
            if self.alpha is None or self.order < 2:
                raise ValueError(f"root generator {self.name} needs alpha and order >= 2")
            if not self.alpha.is_k_free() or not (self.alpha ** self.order).is_one():
                raise ValueError(f"alpha={self.alpha} is not a root of unity of order {self.order}")
            for d in range(1, self.order):
                if self.order % d == 0 and (self.alpha ** d).is_one():
                    raise ValueError(f"alpha={self.alpha} is not primitive of order {self.order}")
        elif self.kind == SIGMA:
            if self.beta is None:
                raise ValueError(f"Sigma-generator {self.name} needs beta")
        else:
            raise ValueError(f"unknown generator kind {self.kind!r}")

    def with_anchor(self, k0: int, value) -> "Generator":
        return replace(self, anchor=(int(k0), value))


_KIND_RANK = {PI: 0, ROOT: 1, SIGMA: 2}


class Tower:
    """An ordered, immutable list of generators over a context.

    The order is: Pi-generators, at most one root-of-unity generator, then
    Sigma-generators.  Extension returns a new tower.
    """

    def __init__(self, ctx: Context, gens: tuple[Generator, ...] = (), classes: tuple = ()):
        self.ctx = ctx
        self.gens = tuple(gens)
        # irreducible shift-class representatives used by the Pi-generators
        self.classes = tuple(classes)
        self.names = tuple(g.name for g in self.gens)
        self.index = {n: i for i, n in enumerate(self.names)}
        if len(self.index) != len(self.gens):
            raise ValueError(f"duplicate generator names in {self.names}")
        for n in self.names:
            if n in ctx.names:
                raise ValueError(f"generator name {n!r} clashes with a variable")
        ranks = [_KIND_RANK[g.kind] for g in self.gens]
        if ranks != sorted(ranks):
            raise ValueError("generators must be ordered Pi, root, Sigma")
        if ranks.count(1) > 1:
            raise ValueError("at most one root-of-unity generator is supported")
        self.pi_pos = tuple(i for i, g in enumerate(self.gens) if g.kind == PI)
        self.sigma_pos = tuple(i for i, g in enumerate(self.gens) if g.kind == SIGMA)
        roots = [i for i, g in enumerate(self.gens) if g.kind == ROOT]
        self.root_pos = roots[0] if roots else None
        self.nzero = (0,) * len(self.gens)
        self._sigma_pow: dict[tuple[int, int], Elem] = {}
        self._sigma_inv_image: dict[int, Elem] = {}
        self._h_pow: dict[tuple[int, int], RatFun] = {}
        self._h_inv_pow: dict[tuple[int, int], RatFun] = {}
        self._lift_maps: dict[int, tuple] = {}

    # construction --------------------------------------------------------------
    def extend(self, gen: Generator) -> "Tower":
        gens = list(self.gens)
        if gen.kind == PI:
            pos = (self.pi_pos[-1] + 1) if self.pi_pos else 0
            gens.insert(pos, gen)
        elif gen.kind == ROOT:
            if self.root_pos is not None:
                raise ValueError("tower already has a root-of-unity generator")
            pos = (self.pi_pos[-1] + 1) if self.pi_pos else 0
            gens.insert(pos, gen)
        else:
            if gen.beta is not None:
                self.lift(gen.beta)
            gens.append(gen)
        return Tower(self.ctx, tuple(gens), self.classes)

    def with_classes(self, classes: tuple) -> "Tower":
        return Tower(self.ctx, self.gens, tuple(classes))

    def replace_generator(self, name: str, gen: Generator) -> "Tower":
        gens = list(self.gens)
        gens[self.index[name]] = gen
        return Tower(self.ctx, tuple(gens), self.classes)

    def prefix_without_sigma(self) -> "Tower":
        return Tower(self.ctx, tuple(g for g in self.gens if g.kind != SIGMA), self.classes)

    def fresh_name(self, base: str, indexed: bool = False) -> str:
        taken = set(self.names) | set(self.ctx.names)
        if base not in taken and not indexed:
            return base
        i = 1
        while f"{base}{i}" in taken:
            i += 1
        return f"{base}{i}"

    # elements ------------------------------------------------------------------
    def const(self, value) -> "Elem":
        c = RatFun.coerce(self.ctx, value)
        if c.is_zero():
            return Elem(self, {})
        return Elem(self, {self.nzero: c})

    def zero(self) -> "Elem":
        return Elem(self, {})

    def one(self) -> "Elem":
        return self.const(1)

    def var(self, name: str) -> "Elem":
        if name in self.index:
            e = list(self.nzero)
            e[self.index[name]] = 1
            return Elem(self, {tuple(e): self.ctx.one_rf()})
        return self.const(self.ctx.var_rf(name))

    def k(self) -> "Elem":
        return self.var(self.ctx.var)

    def monomial(self, exps: dict[str, int] | tuple, coeff=1) -> "Elem":
        if isinstance(exps, dict):
            e = list(self.nzero)
            for n, v in exps.items():
                e[self.index[n]] = v
            exps = tuple(e)
        c = RatFun.coerce(self.ctx, coeff)
        if c.is_zero():
            return self.zero()
        return Elem(self, {self._normalize_exps(tuple(exps)): c})

    def _normalize_exps(self, exps: tuple) -> tuple:
        if self.root_pos is not None:
            o = self.gens[self.root_pos].order
            if not 0 <= exps[self.root_pos] < o:
                e = list(exps)
                e[self.root_pos] %= o
                return tuple(e)
        return exps

    # lifting between towers ------------------------------------------------------
    def contains(self, other: "Tower") -> bool:
        if other is self:
            return True
        if other.ctx is not self.ctx:
            return False
        for g in other.gens:
            i = self.index.get(g.name)
            if i is None or self.gens[i] is not g:
                return False
        return True

    def lift(self, e: "Elem") -> "Elem":
        if e.tower is self:
            return e
        src = e.tower
        m = self._lift_maps.get(id(src))
        if m is None or m[0] is not src:
            if not self.contains(src):
                raise RingTelescopeError(
                    f"element of tower {src.names} cannot be lifted to tower {self.names}"
                )
            m = (src, tuple(self.index[n] for n in src.names))
            self._lift_maps[id(src)] = m
        perm = m[1]
        n = len(self.gens)
        terms = {}
        for exps, c in e.terms.items():
            new = [0] * n
            for i, v in zip(perm, exps):
                new[i] = v
            terms[tuple(new)] = c
        return Elem(self, terms)

    # automorphism data -------------------------------------------------------------
    def h_power(self, pos: int, e: int) -> RatFun:
        key = (pos, e)
        v = self._h_pow.get(key)
        if v is None:
            v = self.gens[pos].h ** e
            self._h_pow[key] = v
        return v

    def h_inv_power(self, pos: int, e: int) -> RatFun:
        """sigma^{-1}(h)**(-e): the factor picked up by t**e under sigma^{-1}."""
        key = (pos, e)
        v = self._h_inv_pow.get(key)
        if v is None:
            v = self.gens[pos].h.shift(-1) ** (-e)
            self._h_inv_pow[key] = v
        return v

    def sigma_image(self, pos: int) -> "Elem":
        return self.sigma_image_power(pos, 1)

    def sigma_image_power(self, pos: int, e: int) -> "Elem":
        key = (pos, e)
        v = self._sigma_pow.get(key)
        if v is None:
            if e == 1:
                v = self.var(self.names[pos]) + self.lift(self.gens[pos].beta)
            else:
                v = self.sigma_image_power(pos, e - 1) * self.sigma_image_power(pos, 1)
            self._sigma_pow[key] = v
        return v

    def sigma_inverse_image(self, pos: int) -> "Elem":
        v = self._sigma_inv_image.get(pos)
        if v is None:
            v = self.var(self.names[pos]) - sigma_inverse(self.lift(self.gens[pos].beta))
            self._sigma_inv_image[pos] = v
        return v

    # rendering -------------------------------------------------------------------
    def render(self) -> str:
        """One line per generator: ``name : kind : sigma-image : anchor``."""
        lines = [f"{self.ctx.var} : base : {self.ctx.var} + 1 : -"]
        for i, g in enumerate(self.gens):
            v = self.var(g.name)
            img = sigma(v)
            kind = g.kind if g.kind != ROOT else f"root(order={g.order})"
            k0, val = g.anchor
            lines.append(f"{g.name} : {kind} : {img} : {g.name}({k0}) = {_fmt_scalar(val)}")
        return "\n".join(lines)

    def __repr__(self):
        return f"Tower(params={self.ctx.params}, var={self.ctx.var!r}, gens={self.names})"


def _fmt_scalar(v) -> str:
    return str(v)


class Elem:
    """A tower element in flat canonical form (see module docstring)."""

    __slots__ = ("tower", "terms")

    def __init__(self, tower: Tower, terms: dict):
        self.tower = tower
        self.terms = terms

    # coercion --------------------------------------------------------------------
    def _pair(self, other):
        if isinstance(other, Elem):
            if other.tower is self.tower:
                return self, other
            if self.tower.contains(other.tower):
                return self, self.tower.lift(other)
            if other.tower.contains(self.tower):
                return other.tower.lift(self), other
            raise RingTelescopeError("elements from incompatible towers")
        try:
            return self, self.tower.const(other)
        except TypeError:
            return None, None

    # ring operations ---------------------------------------------------------------
    def __add__(self, other):
        a, b = self._pair(other)
        if a is None:
            return NotImplemented
        if not b.terms:
            return a
        if not a.terms:
            return b
        terms = dict(a.terms)
        for e, c in b.terms.items():
            old = terms.get(e)
            if old is None:
                terms[e] = c
            else:
                s = old + c
                if s.is_zero():
                    del terms[e]
                else:
                    terms[e] = s
        return Elem(a.tower, terms)

    __radd__ = __add__

    def __neg__(self):
        return Elem(self.tower, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        a, b = self._pair(other)
        if a is None:
            return NotImplemented
        return a + (-b)

    def __rsub__(self, other):
        a, b = self._pair(other)
        if a is None:
            return NotImplemented
        return b + (-a)

    def __mul__(self, other):
        if isinstance(other, RatFun) or not isinstance(other, Elem):
            try:
                c = RatFun.coerce(self.tower.ctx, other)
            except TypeError:
                return NotImplemented
            return self.scale(c)
        a, b = self._pair(other)
        tower = a.tower
        rp = tower.root_pos
        order = tower.gens[rp].order if rp is not None else 0
        terms: dict = {}
        for e1, c1 in a.terms.items():
            for e2, c2 in b.terms.items():
                e = tuple(u + v for u, v in zip(e1, e2))
                if rp is not None and e[rp] >= order:
                    e = e[:rp] + (e[rp] % order,) + e[rp + 1:]
                c = c1 * c2
                old = terms.get(e)
                terms[e] = c if old is None else old + c
        return Elem(tower, {e: c for e, c in terms.items() if not c.is_zero()})

    def __rmul__(self, other):
        return self.__mul__(other)

    def scale(self, c: RatFun) -> "Elem":
        if c.is_zero():
            return self.tower.zero()
        if c.is_one():
            return self
        return Elem(self.tower, {e: v * c for e, v in self.terms.items()})

    def __pow__(self, n: int):
        if n < 0:
            return self.tower.one().divide_by_unit(self) ** (-n)
        out = self.tower.one()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __truediv__(self, other):
        if isinstance(other, Elem):
            return self.divide_by_unit(other)
        c = RatFun.coerce(self.tower.ctx, other)
        return self.scale(c.inverse())

    def divide_by_unit(self, u: "Elem") -> "Elem":
        """self / u for a monomial unit ``u = q * x**m * prod t_j**mu_j``."""
        a, u = self._pair(u)
        if len(u.terms) != 1:
            raise NotAUnit(f"{u} is not a monomial unit")
        (exps, c), = u.terms.items()
        if any(exps[p] for p in a.tower.sigma_pos):
            raise NotAUnit(f"{u} involves a Sigma-generator")
        inv = [-v for v in exps]
        tower = a.tower
        if tower.root_pos is not None:
            inv[tower.root_pos] %= tower.gens[tower.root_pos].order
        return a * Elem(tower, {tuple(inv): c.inverse()})

    def __eq__(self, other):
        a, b = self._pair(other)
        if a is None:
            return NotImplemented
        if a.terms.keys() != b.terms.keys():
            return False
        return all(c == b.terms[e] for e, c in a.terms.items())

    __hash__ = None

    # inspection ------------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_leaf(self) -> bool:
        """Element of K(k) (no generator occurs)."""
        return not self.terms or set(self.terms) == {self.tower.nzero}

    def leaf(self) -> RatFun:
        if not self.terms:
            return self.tower.ctx.zero_rf()
        if not self.is_leaf():
            raise ValueError(f"{self} is not in K(k)")
        return self.terms[self.tower.nzero]

    def degree_in(self, name_or_pos) -> int:
        pos = self.tower.index[name_or_pos] if isinstance(name_or_pos, str) else name_or_pos
        if not self.terms:
            return -1
        return max(e[pos] for e in self.terms)

    def coeff_in(self, name_or_pos, d: int) -> "Elem":
        """Coefficient of gen**d, as an element of the same tower."""
        pos = self.tower.index[name_or_pos] if isinstance(name_or_pos, str) else name_or_pos
        terms = {}
        for e, c in self.terms.items():
            if e[pos] == d:
                terms[e[:pos] + (0,) + e[pos + 1:]] = c
        return Elem(self.tower, terms)

    def is_constant(self) -> bool:
        return sigma(self) == self

    def to_tower(self, tower: Tower) -> "Elem":
        """Restrict to a sub-tower containing every generator that occurs."""
        if tower is self.tower:
            return self
        used = {self.tower.names[i] for e in self.terms for i, v in enumerate(e) if v}
        missing = used - set(tower.names)
        if missing:
            raise RingTelescopeError(f"generators {sorted(missing)} are not in the target tower")
        terms = {}
        for e, c in self.terms.items():
            new = [0] * len(tower.gens)
            for i, v in enumerate(e):
                if v:
                    new[tower.index[self.tower.names[i]]] = v
            terms[tuple(new)] = c
        return Elem(tower, terms)

    def sorted_terms(self) -> list:
        return sorted(self.terms.items(), key=lambda ec: tuple(reversed(ec[0])), reverse=True)

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for exps, c in self.sorted_terms():
            mono = []
            for name, v in zip(self.tower.names, exps):
                if v == 1:
                    mono.append(name)
                elif v:
                    mono.append(f"{name}^{v}" if v > 0 else f"{name}^({v})")
            cs = str(c)
            if not mono:
                parts.append(cs if "+" not in cs[1:] and " - " not in cs else f"({cs})")
            elif c.is_one():
                parts.append("*".join(mono))
            elif (-c).is_one():
                parts.append("-" + "*".join(mono))
            else:
                if "+" in cs or " - " in cs or "/" in cs:
                    cs = f"({cs})"
                parts.append(cs + "*" + "*".join(mono))
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out

    def __repr__(self):
        return f"Elem({self})"


# ---------------------------------------------------------------------------
# the automorphism
# ---------------------------------------------------------------------------

def sigma(e: Elem) -> Elem:
    """Apply the automorphism: k->k+1, t->h t, x->alpha x, s->s+beta."""
    tower = e.tower
    if not e.terms:
        return e
    sp = tower.sigma_pos
    rp = tower.root_pos
    groups: dict[tuple, dict] = {}
    for exps, c in e.terms.items():
        coef = c.shift(1)
        for p in tower.pi_pos:
            if exps[p]:
                coef = coef * tower.h_power(p, exps[p])
        if rp is not None and exps[rp]:
            coef = coef * tower.gens[rp].alpha ** exps[rp]
        sig = tuple(exps[p] for p in sp)
        base = list(exps)
        for p in sp:
            base[p] = 0
        g = groups.setdefault(sig, {})
        base = tuple(base)
        old = g.get(base)
        g[base] = coef if old is None else old + coef
    out = tower.zero()
    for sig, terms in groups.items():
        part = Elem(tower, {b: c for b, c in terms.items() if not c.is_zero()})
        for p, v in zip(sp, sig):
            if v:
                part = part * tower.sigma_image_power(p, v)
        out = out + part
    return out


def sigma_inverse(e: Elem) -> Elem:
    """Exact inverse of :func:`sigma`."""
    tower = e.tower
    if not e.terms:
        return e
    sp = tower.sigma_pos
    rp = tower.root_pos
    out = tower.zero()
    for exps, c in e.terms.items():
        coef = c.shift(-1)
        for p in tower.pi_pos:
            if exps[p]:
                coef = coef * tower.h_inv_power(p, exps[p])
        if rp is not None and exps[rp]:
            coef = coef * tower.gens[rp].alpha ** (-exps[rp])
        base = list(exps)
        for p in sp:
            base[p] = 0
        part = Elem(tower, {tuple(base): coef})
        for p in sp:
            for _ in range(exps[p]):
                part = part * tower.sigma_inverse_image(p)
        out = out + part
    return out


def sigma_power(e: Elem, r: int) -> Elem:
    for _ in range(abs(r)):
        e = sigma(e) if r > 0 else sigma_inverse(e)
    return e


def is_constant(e: Elem) -> bool:
    return e.is_constant()


def divide_by_unit(e: Elem, u: Elem) -> Elem:
    return e.divide_by_unit(u)


# ---------------------------------------------------------------------------
# sequence semantics
# ---------------------------------------------------------------------------

class Evaluator:
    """Evaluate tower elements as sequences in k.

    With every parameter assigned, values are ``Fraction``; otherwise the
    unassigned parameters stay symbolic and values are k-free ``RatFun``
    (integer assignments are substituted).  Generator values are unrolled from
    their anchors and cached.
    """

    def __init__(self, tower: Tower, params: dict | None = None, symbolic: bool = False):
        self.tower = tower
        ctx = tower.ctx
        params = dict(params or {})
        unknown = set(params) - set(ctx.params)
        if unknown:
            raise MissingParameter(f"unknown parameters {sorted(unknown)}")
        missing = [p for p in ctx.params if p not in params]
        if missing and not symbolic:
            raise MissingParameter(f"no value for parameters {missing}")
        self.numeric = not missing
        self.point = {p: Fraction(v) for p, v in params.items()}
        if not self.numeric:
            for p, v in self.point.items():
                if v.denominator != 1:
                    raise MissingParameter("symbolic evaluation needs integer parameter values")
        self._cache: dict[int, dict[int, Any]] = {}
        self._lifted: dict[int, Elem] = {}

    def scalar(self, c, k0: int):
        if not isinstance(c, RatFun):
            c = RatFun.coerce(self.tower.ctx, c)
        if self.numeric:
            pt = dict(self.point)
            pt[self.tower.ctx.var] = Fraction(k0)
            return c.value(pt)
        vals = {p: int(v) for p, v in self.point.items()}
        vals[self.tower.ctx.var] = int(k0)
        return c.subs(vals)

    def _one(self):
        return Fraction(1) if self.numeric else self.tower.ctx.one_rf()

    def _beta(self, pos: int) -> Elem:
        b = self._lifted.get(pos)
        if b is None:
            b = self.tower.lift(self.tower.gens[pos].beta)
            self._lifted[pos] = b
        return b

    def gen_value(self, pos: int, k0: int):
        cache = self._cache.get(pos)
        g = self.tower.gens[pos]
        if cache is None:
            a0, v0 = g.anchor
            cache = {a0: self.scalar(v0, a0)}
            self._cache[pos] = cache
        if k0 in cache:
            return cache[k0]
        start = min(cache, key=lambda j: (abs(j - k0), j))
        step = 1 if k0 > start else -1
        val = cache[start]
        j = start
        while j != k0:
            if step == 1:
                val = self._forward(g, pos, j, val)
            else:
                val = self._backward(g, pos, j, val)
            j += step
            cache[j] = val
        return val

    def _forward(self, g: Generator, pos: int, j: int, val):
        if g.kind == PI:
            return self.scalar(g.h, j) * val
        if g.kind == ROOT:
            return self.scalar(g.alpha, j) * val
        return val + self(self._beta(pos), j)

    def _backward(self, g: Generator, pos: int, j: int, val):
        if g.kind == PI:
            hv = self.scalar(g.h, j - 1)
            if hv == 0:
                raise PoleEncountered(j - 1, f"multiplier of {g.name} vanishes at {j - 1}")
            return val / hv
        if g.kind == ROOT:
            return val / self.scalar(g.alpha, j - 1)
        return val - self(self._beta(pos), j - 1)

    def __call__(self, e: Elem, k0: int):
        if e.tower is not self.tower:
            e = self.tower.lift(e)
        total = Fraction(0) if self.numeric else self.tower.ctx.zero_rf()
        for exps, c in e.terms.items():
            term = self.scalar(c, k0)
            for pos, v in enumerate(exps):
                if v:
                    gv = self.gen_value(pos, k0)
                    if v < 0 and gv == 0:
                        raise PoleEncountered(k0, f"{self.tower.names[pos]} vanishes at {k0}")
                    term = term * gv ** v
            total = total + term
        return total


def eval_at(e: Elem, k0: int, params: dict | None = None):
    """Exact value of ``e`` at ``k = k0`` with every parameter assigned."""
    return Evaluator(e.tower, params)(e, k0)


@dataclass(frozen=True)
class SolutionBasis:
    """Basis vectors ``(c_1..c_d, g)`` of a parameterized solution space."""

    d: int
    vectors: tuple[tuple[tuple[RatFun, ...], Elem], ...]

    def __len__(self):
        return len(self.vectors)

    def __iter__(self):
        return iter(self.vectors)

    def nontrivial(self):
        return [(c, g) for c, g in self.vectors if any(not ci.is_zero() for ci in c)]

    def __str__(self):
        rows = []
        for c, g in self.vectors:
            rows.append("(" + ", ".join([str(ci) for ci in c] + [str(g)]) + ")")
        return "{" + ", ".join(rows) + "}"
