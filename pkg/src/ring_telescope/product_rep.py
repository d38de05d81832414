"""Representation of hypergeometric products by Pi-generators and one root of unity.

Given products ``P(k) = prod_{j=lam}^{k} alpha(j)`` with ``alpha`` in K(k)*,
every multiplicand is factored into irreducible polynomials, the factors are
grouped into shift classes with representatives ``h_1, ..., h_e`` and each
multiplicand is rewritten as

    alpha = (-1)**w * sigma(G)/G * h_1**mu_1 * ... * h_e**mu_e

with ``G`` in K(k)*.  Pi-generators with ``sigma(t) = sigma(h)*t`` (or merged
combinations of them) plus ``x`` with ``sigma(x) = -x`` then give an element
``c * sigma(G) * x**w * prod t**nu`` modelling ``P``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import InvalidProduct, NotRewritable, PoleEncountered, SolverInvariantError
from .exact_arith import (
    DEFAULT_FACTOR_DEGREE_CAP,
    RatFun,
    factor_irreducible,
    integer_roots,
    integer_roots_k,
    k_degree,
    resultant_k,
)
from .linalg import rref
from .tower import PI, ROOT, Elem, Evaluator, Generator, Tower, sigma

_SCAN_LIMIT = 64


@dataclass(frozen=True)
class HyperProduct:
    """``prod_{j=lower}^{k} alpha(j)``."""

    alpha: RatFun
    lower: int = 1
    name_hint: str = "t"


@dataclass(frozen=True)
class ProductRepresentation:
    """Details of how one product was expressed (see module docstring)."""

    product: HyperProduct
    gamma: RatFun
    w: int
    mu: dict            # class index -> exponent
    nu: dict            # generator name -> exponent
    c: RatFun
    element: Elem


class ProductRepResult(tuple):
    """``(tower, elements)`` with the per-product details in ``.details``."""

    def __new__(cls, tower, elements, details):
        obj = super().__new__(cls, (tower, elements))
        obj.details = details
        return obj

    @property
    def tower(self):
        return self[0]

    @property
    def elements(self):
        return self[1]


def shift_equivalent(a, b, ctx):
    """``(r, unit)`` with ``a == unit * sigma**r(b)``, or ``None``.

    Examples
    ========

    >>> from ring_telescope.exact_arith import get_context
    >>> from ring_telescope.product_rep import shift_equivalent
    >>> ctx = get_context(("n",))
    >>> n, k = ctx.gens
    >>> shift_equivalent(k + n, -k - 2 - n, ctx)
    (-2, -1)
    >>> shift_equivalent(k, n + 1, ctx) is None
    True
    """
    da, db = k_degree(a, ctx), k_degree(b, ctx)
    if da != db:
        return None
    if da == 0:
        if a == b:
            return (0, 1)
        if a == -b:
            return (0, -1)
        return None
    res, zname = resultant_k(a, b, ctx)
    if res.is_zero():
        return None
    for r in sorted(integer_roots(res, zname), key=lambda v: (abs(v), v)):
        shifted = b.compose(*ctx.shift_map(r)) if r else b
        if a == shifted:
            return (r, 1)
        if a == -shifted:
            return (r, -1)
    return None


def gamma_for_shift(p, r: int, ctx) -> RatFun:
    """gamma in K(k)* with ``sigma**r(p) == p * sigma(gamma)/gamma``.

    Examples
    ========

    >>> from ring_telescope.exact_arith import get_context
    >>> from ring_telescope.product_rep import gamma_for_shift
    >>> ctx = get_context(("n",))
    >>> n, k = ctx.gens
    >>> print(gamma_for_shift(k + n, 2, ctx))
    n^2 + 2*n*k + k^2 + n + k
    """
    pr = RatFun.coerce(ctx, p)
    g = ctx.one_rf()
    if r >= 0:
        for i in range(r):
            g = g * pr.shift(i)
    else:
        for i in range(1, -r + 1):
            g = g * pr.shift(-i).inverse()
    return g


def _check_valid(prod: HyperProduct, ctx):
    a = prod.alpha
    if a.is_zero():
        raise InvalidProduct("multiplicand is zero")
    for part, what in ((a.num, "zero"), (a.den, "pole")):
        bad = [r for r in integer_roots_k(part, ctx) if r >= prod.lower]
        if bad:
            raise InvalidProduct(
                f"multiplicand {a} has a {what} at {min(bad)} >= lower bound {prod.lower}"
            )


def _class_anchor(h, lower: int, ctx) -> int:
    """k0 with T(k0) = 1 so that T(k) = prod_{j=k0+1}^{k} h(j) never vanishes for k >= k0."""
    roots = integer_roots_k(h, ctx)
    return max([lower] + [r + 1 for r in roots]) - 1


class _State:
    """Mutable working copy of tower + shift classes during one call."""

    def __init__(self, tower: Tower, factor_degree_cap):
        self.tower = tower
        self.ctx = tower.ctx
        self.classes = list(tower.classes)
        self.cap = factor_degree_cap

    def classify(self, f):
        for i, h in enumerate(self.classes):
            se = shift_equivalent(f, h, self.ctx)
            if se is not None:
                return i, se[0], se[1]
        self.classes.append(f)
        return len(self.classes) - 1, 0, 1

    def gen_vectors(self):
        """(name, vector dict) for every Pi-generator."""
        return [(g.name, dict(g.meta.get("vec", {}))) for g in self.tower.gens if g.kind == PI]

    def used_classes(self):
        used = set()
        for _n, v in self.gen_vectors():
            used.update(i for i, e in v.items() if e)
        return used

    def add_pi(self, vec: dict, anchor_k: int, hint: str) -> str:
        ctx = self.ctx
        h = ctx.one_rf()
        for i, e in sorted(vec.items()):
            h = h * RatFun.coerce(ctx, self.classes[i]).shift(1) ** e
        name = self.tower.fresh_name(hint, indexed=hint == "t")
        gen = Generator(name, PI, h=h, anchor=(anchor_k, 1), meta={"vec": dict(vec)})
        self.tower = self.tower.extend(gen).with_classes(tuple(self.classes))
        return name

    def ensure_root(self):
        if self.tower.root_pos is None:
            name = self.tower.fresh_name("x")
            gen = Generator(name, ROOT, alpha=self.ctx.ratfun(-1), order=2, anchor=(0, 1))
            self.tower = self.tower.extend(gen)
        g = self.tower.gens[self.tower.root_pos]
        if not (g.order == 2 and g.alpha == -1):
            raise InvalidProduct("sign factors need a root generator with alpha = -1")
        return g.name


def _solve_lattice(gvecs, mu: dict):
    """Integer nu with sum nu_g * vec_g == mu, or None."""
    if not mu:
        return {}
    coords = sorted(set(mu) | {i for _n, v in gvecs for i in v})
    if not gvecs:
        return None
    rows = []
    for c in coords:
        rows.append([Fraction(v.get(c, 0)) for _n, v in gvecs] + [Fraction(mu.get(c, 0))])
    red, piv = rref(rows, len(gvecs) + 1)
    if piv and piv[-1] == len(gvecs):
        return None
    nu = {}
    for row, p in zip(red, piv):
        val = row[-1]
        if val.denominator != 1:
            return None
        if val:
            nu[gvecs[p][0]] = int(val)
    # independence of generator vectors makes the solution unique; verify anyway
    for c in coords:
        if sum(nu.get(n, 0) * v.get(c, 0) for n, v in gvecs) != mu.get(c, 0):
            return None
    return nu


def _decompose(prod: HyperProduct, state: _State):
    """alpha = sign * sigma(G)/G * prod h_i**mu_i; returns (sign, G, mu)."""
    ctx = state.ctx
    a = prod.alpha
    sign = 1
    gamma = ctx.one_rf()
    mu: dict[int, int] = {}
    for part, s in ((a.num, 1), (a.den, -1)):
        fz = factor_irreducible(part, ctx, state.cap)
        if fz.unit == -1:
            sign = -sign
        for f, m in fz.factors:
            i, r, u = state.classify(f)
            mu[i] = mu.get(i, 0) + s * m
            if u == -1 and m % 2:
                sign = -sign
            if r:
                gamma = gamma * gamma_for_shift(state.classes[i], r, ctx) ** (s * m)
    return sign, gamma, {i: e for i, e in mu.items() if e}


def build_product_representation(products, tower: Tower, merge: bool = False,
                                 factor_degree_cap: int | None = DEFAULT_FACTOR_DEGREE_CAP):
    """Represent hypergeometric products in a (possibly extended) tower.

    Explanation
    ===========

    Each multiplicand is factored, factors are sorted into shift classes
    (new classes get new Pi-generators with ``sigma(t) = sigma(h)*t``) and a
    sign left over after normalization adjoins ``x`` with ``sigma(x) = -x``.
    With ``merge=True`` a product whose classes are all new receives a single
    generator whose multiplier is the whole product of class factors (e.g. one
    generator for a binomial coefficient).  Existing generators are reused, so
    repeated calls grow one tower incrementally.

    Returns ``(tower, elements)``; ``result.details`` holds one
    :class:`ProductRepresentation` per input.  Every element ``E`` satisfies
    ``sigma(E) == sigma(alpha)*E`` and evaluates to ``prod_{j=lower}^{k} alpha(j)``.

    Examples
    ========

    >>> from ring_telescope.exact_arith import get_context, RatFun
    >>> from ring_telescope.tower import Tower
    >>> from ring_telescope.product_rep import HyperProduct, build_product_representation
    >>> ctx = get_context(("n",))
    >>> n, k = ctx.gens
    >>> T, (b,) = build_product_representation(
    ...     [HyperProduct(RatFun(ctx, n - k + 1, k), 1, "b")], Tower(ctx), merge=True)
    >>> print(T.render())
    k : base : k + 1 : -
    b : pi : ((n - k)/(k + 1))*b : b(0) = 1
    >>> print(b)
    b
    """
    state = _State(tower, factor_degree_cap)
    ctx = tower.ctx
    raw = []
    for prod in products:
        if prod.alpha.ctx is not ctx:
            raise InvalidProduct("multiplicand lives in a different context")
        _check_valid(prod, ctx)
        sign, gamma, mu = _decompose(prod, state)
        before = set(state.tower.names)
        used = state.used_classes()
        fresh = {i: e for i, e in mu.items() if i not in used}
        old = {i: e for i, e in mu.items() if i in used}
        nu = _solve_lattice(state.gen_vectors(), old)
        if nu is None:
            _saturate(state, old, prod.lower)
            nu = _solve_lattice(state.gen_vectors(), old)
            if nu is None:
                raise NotRewritable(f"exponents {old} are not in the generator lattice")
        if fresh:
            g = 0
            for e in fresh.values():
                g = math.gcd(g, e)
            vec = {i: e // g for i, e in fresh.items()}
            if merge and any(abs(e) == 1 for e in vec.values()):
                anchor = max(_class_anchor(state.classes[i], prod.lower, ctx) for i in vec)
                name = state.add_pi(vec, anchor, prod.name_hint)
                nu[name] = g
            else:
                for i, e in sorted(fresh.items()):
                    anchor = _class_anchor(state.classes[i], prod.lower, ctx)
                    name = state.add_pi({i: 1}, anchor, "t")
                    nu[name] = e
        w = 0
        if sign == -1:
            state.ensure_root()
            w = 1
        new_names = set(state.tower.names) - before
        raw.append((prod, gamma, w, mu, nu, new_names))
        _fix_constant(state, raw[-1])
    final = state.tower.with_classes(tuple(state.classes))
    elems, details = [], []
    for prod, gamma, w, mu, nu, _new in raw:
        e, c = _element(final, prod, gamma, w, nu)
        if sigma(e) != e.scale(prod.alpha.shift(1)):
            raise SolverInvariantError(f"representation of {prod.alpha} fails sigma(E) = sigma(alpha) E")
        elems.append(e)
        details.append(ProductRepresentation(prod, gamma, w, mu, nu, c, e))
    return ProductRepResult(final, elems, details)


def _saturate(state: _State, old: dict, lower: int):
    """Add unit generators for the non-pivot classes of merged generators."""
    have_units = {next(iter(v)) for _n, v in state.gen_vectors() if len(v) == 1}
    for _name, vec in state.gen_vectors():
        if len(vec) <= 1 or not (set(vec) & set(old)):
            continue
        pivot = min(i for i, e in vec.items() if abs(e) == 1)
        for i in sorted(vec):
            if i != pivot and i not in have_units:
                state.add_pi({i: 1}, _class_anchor(state.classes[i], lower, state.ctx), "t")
                have_units.add(i)


def _raw_monomial(tower: Tower, gamma: RatFun, w: int, nu: dict) -> Elem:
    exps = {n: e for n, e in nu.items() if e}
    if w:
        exps[tower.gens[tower.root_pos].name] = w
    return tower.monomial(exps, gamma.shift(1))


def _scan_constant(tower: Tower, prod: HyperProduct, gamma: RatFun, w: int, nu: dict):
    """c with c * raw(k1) = P(k1) at the first k1 where both are defined and nonzero."""
    ev = Evaluator(tower, {}, symbolic=True)
    raw = _raw_monomial(tower, gamma, w, nu)
    start = prod.lower
    for gname in nu:
        start = max(start, tower.gens[tower.index[gname]].anchor[0])
    value = ev.scalar(1, 0)
    for j in range(prod.lower, start):
        value = value * ev.scalar(prod.alpha, j)
    for k1 in range(start, start + _SCAN_LIMIT):
        value = value * ev.scalar(prod.alpha, k1)
        try:
            rv = ev(raw, k1)
        except PoleEncountered:
            continue
        if rv != 0:
            return RatFun.coerce(tower.ctx, value / rv), k1
    raise InvalidProduct(f"no evaluation point found for the product of {prod.alpha}")


def _fix_constant(state: _State, item):
    """If the product got exactly one new generator with exponent +-1, re-anchor it so c == 1."""
    prod, gamma, w, mu, nu, new_names = item
    cands = [n for n in new_names if state.tower.gens[state.tower.index[n]].kind == PI]
    if len(cands) != 1 or len(nu) != 1 or abs(nu.get(cands[0], 0)) != 1:
        return
    name = cands[0]
    c, _k1 = _scan_constant(state.tower, prod, gamma, w, nu)
    if c.is_one():
        return
    gen = state.tower.gens[state.tower.index[name]]
    k0, v = gen.anchor
    newv = RatFun.coerce(state.ctx, v) * (c if nu[name] == 1 else c.inverse())
    state.tower = state.tower.replace_generator(name, gen.with_anchor(k0, newv))


def _element(tower: Tower, prod, gamma, w, nu):
    c, _k1 = _scan_constant(tower, prod, gamma, w, nu)
    return _raw_monomial(tower, gamma, w, nu).scale(c), c


def merge_pi_generators(tower: Tower, z):
    """Replace the last Pi-generator ``t_e`` by ``t`` with ``sigma(t)/t = prod h_j**z_j``.

    ``z`` is indexed like the Pi-generators of ``tower`` and ``z[-1]`` must be
    nonzero.  Returns ``(new_tower, rewrite)`` where ``rewrite`` maps elements
    of the old tower to the new one, raising :class:`NotRewritable` when an
    exponent of ``t_e`` is not divisible by ``z_e``.  The new generator is
    anchored so that ``t == prod t_j**z_j`` exactly.
    """
    pis = [tower.gens[p] for p in tower.pi_pos]
    z = [int(v) for v in z]
    if not pis:
        raise ValueError("tower has no Pi-generator")
    if len(z) != len(pis) or z[-1] == 0:
        raise ValueError("need one exponent per Pi-generator with a nonzero last entry")
    ctx = tower.ctx
    h = ctx.one_rf()
    vec: dict = {}
    for g, e in zip(pis, z):
        if e:
            h = h * g.h ** e
            for i, v in g.meta.get("vec", {}).items():
                vec[i] = vec.get(i, 0) + e * v
    vec = {i: v for i, v in vec.items() if v}
    k0 = max(g.anchor[0] for g, e in zip(pis, z) if e)
    ev = Evaluator(tower, {}, symbolic=True)
    value = ev.scalar(1, 0)
    for p, e in zip(tower.pi_pos, z):
        if e:
            gv = ev.gen_value(p, k0)
            if e < 0 and gv == 0:
                raise PoleEncountered(k0)
            value = value * gv ** e
    last = pis[-1]
    merged = Generator(last.name, PI, h=h, anchor=(k0, RatFun.coerce(ctx, value)), meta={"vec": vec})
    new = tower.replace_generator(last.name, merged)
    epos = tower.pi_pos[-1]
    ze = z[-1]

    def rewrite(e: Elem) -> Elem:
        e = tower.lift(e)
        terms = {}
        for exps, c in e.terms.items():
            me = exps[epos]
            if me % ze:
                raise NotRewritable(f"exponent {me} of {last.name} is not divisible by {ze}")
            q = me // ze
            new_exps = list(exps)
            for p, zj in zip(tower.pi_pos, z):
                new_exps[p] = exps[p] - zj * q
            new_exps[epos] = q
            terms[tuple(new_exps)] = c
        return Elem(new, terms)

    return new, rewrite
