"""Parameterized telescoping in K(k)(t_1)...(t_e)[x][s_1]...[s_r].

Given ``f_1, ..., f_d`` in the tower, compute a basis of all
``(c_1, ..., c_d, g)`` with constants ``c_i`` and ``sigma(g) - g = sum c_i f_i``.

Sigma-generators are removed outermost first: with the degree bound
``b = max(deg f_i, -1) + 1`` the coefficients of ``g`` are found from the top
power of ``s`` downwards, each step solving a problem one level lower whose
parameters are the coordinates of the previous step's basis.  Without
Sigma-generators the equation splits along the monomials ``x**m * t**mu``
into first-order equations over K(k) that share the constants.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from fractions import Fraction

from .errors import SolverInvariantError, SupportBoundExceeded
from .exact_arith import RatFun, factor_irreducible, k_coeffs, k_degree
from .fplde_base import solve_fplde_raw
from .linalg import rref
from .tower import Elem, SolutionBasis, Tower, sigma

DEFAULT_MAX_SUPPORT = 20
_MAX_CANDIDATES = 200_000


def max_support_cap(explicit: int | None = None) -> int:
    if explicit is not None:
        return explicit
    env = os.environ.get("RING_TELESCOPE_MAX_SUPPORT")
    return int(env) if env else DEFAULT_MAX_SUPPORT


@dataclass(frozen=True)
class PtProblem:
    f: tuple[Elem, ...]
    tower: Tower


@dataclass
class ParamSolutionState:
    """General solution so far: ``(c, g)`` with ``c`` over the original parameters."""

    vectors: list

    @classmethod
    def start(cls, d: int, tower: Tower, ctx):
        one, zero = ctx.one_rf(), ctx.zero_rf()
        vecs = []
        for l in range(d):
            c = tuple(one if i == l else zero for i in range(d))
            vecs.append((c, tower.zero()))
        return cls(vecs)


def thread_bases(state: list, sub_basis: list, ctx, d: int) -> list:
    """Compose a sub-basis over the parameters of ``state`` with ``state`` itself.

    ``state`` is a basis ``[(C_l, g_l)]`` whose coordinates ``kappa`` were the
    parameters of a subproblem; ``sub_basis`` is ``[(kappa_q, h_q)]``.  The result is
    ``[(sum_l kappa_ql C_l, sum_l kappa_ql g_l + h_q)]``.
    """
    out = []
    for kappa, h in sub_basis:
        c = None
        g = h
        for kl, (C, gl) in zip(kappa, state):
            if kl.is_zero():
                continue
            scaled = tuple(kl * ci for ci in C)
            c = scaled if c is None else tuple(a + b for a, b in zip(c, scaled))
            if not gl.is_zero():
                g = g + gl.scale(kl)
        if c is None:
            c = tuple(ctx.zero_rf() for _ in range(d))
        out.append((c, g))
    return out


def _combine(coeffs, elems, tower: Tower) -> Elem:
    out = tower.zero()
    for c, e in zip(coeffs, elems):
        if not c.is_zero() and not e.is_zero():
            out = out + e.scale(c)
    return out


# ---------------------------------------------------------------------------
# Sigma levels
# ---------------------------------------------------------------------------

def sigma_degree_bound(f, s_pos: int) -> int:
    """b = max(deg_s f_i, -1) + 1 (deg 0 = -1)."""
    return max([fi.degree_in(s_pos) for fi in f] + [-1]) + 1


class _Solver:
    def __init__(self, tower: Tower, max_support: int | None):
        self.tower = tower
        self.ctx = tower.ctx
        self.cap = max_support_cap(max_support)
        self._pi_data = None

    # level L: Sigma-generators sigma_pos[:L] may occur
    def solve_level(self, fs: list[Elem], L: int) -> list:
        if L == 0:
            return self.solve_laurent(self.ctx.one_rf(), fs)
        pos = self.tower.sigma_pos[L - 1]
        b = sigma_degree_bound(fs, pos)
        basis = self.sigma_reduce(fs, L, b)
        for c, g in basis:
            if g.degree_in(pos) > b:
                raise SolverInvariantError(f"degree bound {b} violated in {self.tower.names[pos]}")
        return basis

    def sigma_reduce(self, fs: list[Elem], L: int, b: int) -> list:
        pos = self.tower.sigma_pos[L - 1]
        if b == 0:
            return self.solve_level([f.coeff_in(pos, 0) for f in fs], L - 1)
        top = self.solve_level([f.coeff_in(pos, b) for f in fs], L - 1)
        sb = self.tower.monomial({self.tower.names[pos]: b})
        fprime = []
        for C, gamma in top:
            lhs = _combine(C, fs, self.tower)
            term = gamma * sb
            fprime.append(lhs - (sigma(term) - term))
        lower = self.sigma_reduce(fprime, L, b - 1)
        state = [(C, gamma * sb) for C, gamma in top]
        return thread_bases(state, lower, self.ctx, len(fs))

    # no Sigma-generators ---------------------------------------------------------
    def solve_laurent(self, a0: RatFun, fs: list[Elem]) -> list:
        tower = self.tower
        d = len(fs)
        support = set()
        for f in fs:
            support.update(f.terms)
        for e in support:
            if any(e[p] for p in tower.sigma_pos):
                raise SolverInvariantError("Sigma-generator left at the Laurent level")
        cands = self.homogeneous_candidates(a0)
        keys = sorted(support | cands, key=lambda e: (sum(abs(v) for v in e), e))
        state = ParamSolutionState.start(d, tower, self.ctx).vectors
        for key in keys:
            mono = Elem(tower, {key: self.ctx.one_rf()})
            factor = self.monomial_factor(key)  # sigma(P) = factor * P
            rhs = []
            for C, _g in state:
                F = self.ctx.zero_rf()
                for ci, f in zip(C, fs):
                    v = f.terms.get(key)
                    if v is not None and not ci.is_zero():
                        F = F + ci * v
                rhs.append(F / factor)
            sub = solve_fplde_raw(a0 / factor, rhs)
            sub = [(kappa, mono.scale(g)) for kappa, g in sub]
            state = thread_bases(state, sub, self.ctx, d)
        return state

    def monomial_factor(self, key: tuple) -> RatFun:
        tower = self.tower
        out = self.ctx.one_rf()
        for p in tower.pi_pos:
            if key[p]:
                out = out * tower.h_power(p, key[p])
        if tower.root_pos is not None and key[tower.root_pos]:
            out = out * tower.gens[tower.root_pos].alpha ** key[tower.root_pos]
        return out

    # homogeneous support sieve -----------------------------------------------------
    def homogeneous_candidates(self, a0: RatFun) -> set:
        """Monomials P = x**m t**mu for which sigma(g P) = a0 g P may have a solution g in K(k)*.

        Necessary conditions on r = a0 / (alpha**m prod h**mu) = sigma(gamma)/gamma:
        equal degrees of numerator and denominator, leading coefficient ratio 1
        and an integer "index" (coefficient of 1/k in the expansion of r).
        """
        tower = self.tower
        pis = tower.pi_pos
        n = len(pis)
        order = tower.gens[tower.root_pos].order if tower.root_pos is not None else 1
        out = set()
        if n == 0:
            for m in range(order):
                key = self._key(m, ())
                if self._passes(a0, key):
                    out.add(key)
            return out
        data = self._pi_invariants()
        a_deg, a_lc, a_ind = _invariants(a0)
        # linear system rows: sum_j A_j mu_j = b
        rows = []
        rows.append([Fraction(dg) for dg, _lc, _ind in data] + [Fraction(a_deg)])
        lc_facs = [_lc_factor_vector(lc) for _dg, lc, _ind in data]
        a_fac = _lc_factor_vector(a_lc)
        keys = set(a_fac[1])
        for _u, v in lc_facs:
            keys.update(v)
        for q in sorted(keys):
            rows.append([Fraction(v.get(q, 0)) for _u, v in lc_facs] + [Fraction(a_fac[1].get(q, 0))])
        for pt_a, pt_b in _specialization_pairs(self.ctx, [ind for _d, _l, ind in data] + [a_ind]):
            rows.append([Fraction(pt_a[j] - pt_b[j]) for j in range(n)] + [Fraction(pt_a[n] - pt_b[n])])
        red, piv = rref(rows, n + 1)
        if piv and piv[-1] == n:
            return set()
        free = [j for j in range(n) if j not in piv]
        total = (2 * self.cap + 1) ** len(free)
        if total > _MAX_CANDIDATES:
            raise SupportBoundExceeded(
                f"{len(free)} free Laurent exponents with cap {self.cap} give {total} candidates"
            )
        for vals in itertools.product(range(-self.cap, self.cap + 1), repeat=len(free)):
            mu = [Fraction(0)] * n
            for j, v in zip(free, vals):
                mu[j] = Fraction(v)
            ok = True
            for row, p in zip(red, piv):
                val = row[n] - sum(row[j] * mu[j] for j in free)
                if val.denominator == 1 and abs(val) > self.cap and not free:
                    # a forced candidate outside the cap cannot be ruled out
                    raise SupportBoundExceeded(
                        f"Laurent exponent {val} is forced but exceeds the cap {self.cap}"
                    )
                if val.denominator != 1 or abs(val) > self.cap:
                    ok = False
                    break
                mu[p] = val
            if not ok:
                continue
            imu = tuple(int(v) for v in mu)
            for m in range(order):
                key = self._key(m, imu)
                if self._passes(a0, key):
                    out.add(key)
        return out

    def _key(self, m: int, mu: tuple) -> tuple:
        tower = self.tower
        key = list(tower.nzero)
        for p, v in zip(tower.pi_pos, mu):
            key[p] = v
        if tower.root_pos is not None:
            key[tower.root_pos] = m
        return tuple(key)

    def _pi_invariants(self):
        if self._pi_data is None:
            self._pi_data = [_invariants(self.tower.gens[p].h) for p in self.tower.pi_pos]
        return self._pi_data

    def _passes(self, a0: RatFun, key: tuple) -> bool:
        r = a0 / self.monomial_factor(key)
        dn, dd = r.k_degrees()
        if dn != dd:
            return False
        if not r.lc_k().is_one():
            return False
        ind = _index(r)
        if not ind.is_number():
            return False
        return ind.to_fraction().denominator == 1


def _index(r: RatFun) -> RatFun:
    ctx = r.ctx
    cn, cd = k_coeffs(r.num, ctx), k_coeffs(r.den, ctx)
    dn, dd = max(cn), max(cd)
    zero = ctx.zero()
    sub_n = RatFun(ctx, cn.get(dn - 1, zero), cn[dn]) if dn > 0 else ctx.zero_rf()
    sub_d = RatFun(ctx, cd.get(dd - 1, zero), cd[dd]) if dd > 0 else ctx.zero_rf()
    return sub_n - sub_d


def _invariants(h: RatFun):
    dn, dd = h.k_degrees()
    return dn - dd, h.lc_k(), _index(h)


def _lc_factor_vector(lc: RatFun):
    """(sign, {factor key: exponent}) for an element of K*."""
    ctx = lc.ctx
    vec: dict = {}
    sign = 1
    for part, s in ((lc.num, 1), (lc.den, -1)):
        fz = factor_irreducible(part, ctx, None)
        sign *= fz.unit
        for f, m in fz.factors:
            key = str(f)
            vec[key] = vec.get(key, 0) + s * m
    return sign, {q: e for q, e in vec.items() if e}


def _specialization_pairs(ctx, values: list[RatFun]):
    """Pairs of numeric evaluations of ``values`` at distinct parameter points."""
    if not ctx.params or all(v.is_number() for v in values):
        return []
    pts = []
    seeds = [(3, 7, 11, 13), (5, 2, 17, 19), (8, 23, 4, 29), (31, 9, 6, 37), (14, 41, 43, 10)]
    for seed in seeds:
        point = {p: Fraction(seed[i % len(seed)] + 3 * i) for i, p in enumerate(ctx.params)}
        point[ctx.var] = Fraction(0)
        try:
            pts.append([v.value(point) for v in values])
        except Exception:
            continue
    return [(pts[0], p) for p in pts[1:]]


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def _canonical(basis: list, fs: list[Elem], tower: Tower, telescoping: bool) -> list:
    """Reduced echelon form on the c-part; constant solution normalized to 1."""
    ctx = tower.ctx
    d = len(fs)
    if not basis:
        return []
    withc = [(c, g) for c, g in basis if any(not ci.is_zero() for ci in c)]
    without = [(c, g) for c, g in basis if all(ci.is_zero() for ci in c)]
    # echelonize the c-parts (row operations carry g along)
    rows = [list(c) + [g] for c, g in withc]
    out = []
    r = 0
    for col in range(d):
        piv = next((i for i in range(r, len(rows)) if not rows[i][col].is_zero()), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = rows[r][col].inverse()
        rows[r] = [v.scale(inv) if isinstance(v, Elem) else v * inv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and not rows[i][col].is_zero():
                f = rows[i][col]
                rows[i] = [
                    (a - b.scale(f)) if isinstance(a, Elem) else a - f * b
                    for a, b in zip(rows[i], rows[r])
                ]
        r += 1
    if r != len(rows):
        raise SolverInvariantError("dependent parameter vectors in a solution basis")
    const_sol = None
    if telescoping:
        for c, g in without:
            if g.is_leaf() and not g.is_zero() and g.leaf().is_k_free():
                const_sol = g
        if const_sol is not None:
            without = [(c, g) for c, g in without if g is not const_sol]
            without.append((tuple(ctx.zero_rf() for _ in range(d)), tower.one()))
    for row in rows:
        c, g = tuple(row[:d]), row[d]
        if const_sol is not None:
            g = g - _constant_term(g)
        out.append((c, g))
    return out + without


def _constant_term(g: Elem) -> RatFun:
    """The K-constant term of the polynomial part of the generator-free coefficient."""
    c = g.terms.get(g.tower.nzero)
    if c is None:
        return g.tower.ctx.zero_rf()
    return _poly_part_constant(c)


def _poly_part_constant(c: RatFun) -> RatFun:
    """k^0 coefficient of the polynomial part of c over K (exact division in K[k])."""
    ctx = c.ctx
    num = k_coeffs(c.num, ctx)
    den = k_coeffs(c.den, ctx)
    dn, dd = max(num), max(den)
    if dn < dd:
        return ctx.zero_rf()
    # long division in K[k]
    rem = {j: RatFun(ctx, v, _reduced=True) for j, v in num.items()}
    dco = {j: RatFun(ctx, v, _reduced=True) for j, v in den.items()}
    lc = dco[dd]
    quot = {}
    for j in range(dn, dd - 1, -1):
        cj = rem.get(j)
        if cj is None or cj.is_zero():
            continue
        q = cj / lc
        quot[j - dd] = q
        for i, v in dco.items():
            rem[i + j - dd] = rem.get(i + j - dd, ctx.zero_rf()) - q * v
    return quot.get(0, ctx.zero_rf())


def _check_residual(basis, fs, tower, a: RatFun | None = None):
    for c, g in basis:
        lhs = sigma(g) - (g if a is None else g.scale(a))
        rhs = _combine(c, fs, tower)
        if lhs != rhs:
            raise SolverInvariantError(f"residual check failed for c={c}, g={g}")


def solve_pt(prob: PtProblem | list, tower: Tower | None = None, max_support: int | None = None) -> SolutionBasis:
    """Basis of V(f, E) for the tower E.

    Examples
    ========

    >>> from ring_telescope.exact_arith import get_context, RatFun
    >>> from ring_telescope.tower import Tower, Generator, PI, SIGMA
    >>> from ring_telescope.pt_solver import solve_pt
    >>> ctx = get_context(("n",))
    >>> n, k = ctx.gens
    >>> T = Tower(ctx).extend(Generator("b", PI, h=RatFun(ctx, n - k, k + 1)))
    >>> T = T.extend(Generator("s", SIGMA, beta=T.var("b"), anchor=(0, 0)))
    >>> print(solve_pt([T.var("s")], T))
    {(1, ((-n + 2*k - 2)/2)*s + (k/2)*b), (0, 1)}
    """
    if not isinstance(prob, PtProblem):
        prob = PtProblem(tuple(prob), tower)
    tower = prob.tower
    fs = [tower.lift(f) for f in prob.f]
    solver = _Solver(tower, max_support)
    raw = solver.solve_level(fs, len(tower.sigma_pos))
    basis = _canonical(raw, fs, tower, telescoping=True)
    _check_residual(basis, fs, tower)
    if len(basis) > len(fs) + 1:
        raise SolverInvariantError("solution space dimension exceeds d + 1")
    return SolutionBasis(len(fs), tuple(basis))


def solve_fplde_tower(a, f, tower: Tower, max_support: int | None = None) -> SolutionBasis:
    """Basis of V(a, f, F) for a tower F without Sigma-generators and ``a`` in K(k)*."""
    ctx = tower.ctx
    if isinstance(a, Elem):
        if not a.is_leaf() or a.is_zero():
            raise NotImplementedError("only a in K(k)* is supported")
        a = a.leaf()
    a = RatFun.coerce(ctx, a)
    if tower.sigma_pos:
        raise ValueError("tower must not contain Sigma-generators")
    fs = [tower.lift(fi) for fi in f]
    solver = _Solver(tower, max_support)
    raw = solver.solve_laurent(a, fs)
    basis = _canonical(raw, fs, tower, telescoping=a.is_one())
    _check_residual(basis, fs, tower, a)
    return SolutionBasis(len(fs), tuple(basis))


@dataclass(frozen=True)
class Telescoper:
    g: Elem


@dataclass(frozen=True)
class AdjoinNew:
    beta: Elem


def is_sigma_extension_needed(beta: Elem, tower: Tower | None = None, max_support: int | None = None):
    """``Telescoper(g)`` with sigma(g) - g = beta if such g exists in the tower, else ``AdjoinNew``."""
    tower = tower or beta.tower
    basis = solve_pt([beta], tower, max_support)
    for c, g in basis:
        if not c[0].is_zero():
            return Telescoper(g.scale(c[0].inverse()))
    return AdjoinNew(tower.lift(beta))
