"""First-order parameterized linear difference equations over K(k).

Solves ``sigma(g) - a*g = c_1 f_1 + ... + c_d f_d`` for ``g`` in K(k) and
constants ``c_i`` in K by a universal denominator (Abramov), a degree bound
for the numerator and undetermined coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import SolverInvariantError
from .exact_arith import (
    RatFun,
    dispersion,
    k_coeffs,
    k_degree,
    k_primitive,
    poly_gcd,
)
from .linalg import nullspace, rref
from .tower import Elem, SolutionBasis, Tower


@dataclass(frozen=True)
class FpldeProblem:
    a: RatFun
    f: tuple[RatFun, ...]

    def __post_init__(self):
        if self.a.is_zero():
            raise ValueError("a must be nonzero")

    @property
    def d(self) -> int:
        return len(self.f)

    @property
    def ctx(self):
        return self.a.ctx


def _lcm(p, q):
    return p * q / poly_gcd(p, q) if not (p.is_one() or q.is_one()) else (q if p.is_one() else p)


def _cleared(prob: FpldeProblem):
    """Polynomials p1, p0, r_i with p1*sigma(g) + p0*g = sum c_i r_i."""
    ctx = prob.ctx
    A, B = prob.a.num, prob.a.den
    D = ctx.const(1)
    for f in prob.f:
        if not f.is_zero():
            D = _lcm(D, (f * RatFun(ctx, B, _reduced=True)).den)
    p1 = B * D
    p0 = -A * D
    rs = []
    for f in prob.f:
        r = f * RatFun(ctx, p1, _reduced=True)
        if not r.den.is_constant():
            raise SolverInvariantError("right-hand side was not cleared")
        # r.den is an integer or k-free polynomial; keep it as a K-scaling of the unknown c_i
        rs.append(r)
    return p1, p0, rs


def _abramov(p1, p0, ctx):
    A = p1.compose(*ctx.shift_map(-1))
    B = p0
    U = ctx.const(1)
    H = dispersion(A, B, ctx)
    for h in range(H, -1, -1):
        Bh = B.compose(*ctx.shift_map(h)) if h else B
        P = k_primitive(poly_gcd(A, Bh), ctx)
        if k_degree(P, ctx) <= 0:
            continue
        A = A / P
        B = B / (P.compose(*ctx.shift_map(-h)) if h else P)
        for i in range(h + 1):
            U = U * (P.compose(*ctx.shift_map(-i)) if i else P)
    return k_primitive(U, ctx) if k_degree(U, ctx) > 0 else ctx.const(1)


def denominator_bound(prob: FpldeProblem):
    """u in K[k] such that u*g is a polynomial for every solution g.

    Examples
    ========

    >>> from ring_telescope.exact_arith import get_context, RatFun
    >>> from ring_telescope.fplde_base import FpldeProblem, denominator_bound
    >>> ctx = get_context(("n",))
    >>> n, k = ctx.gens
    >>> print(denominator_bound(FpldeProblem(ctx.ratfun(1), (RatFun(ctx, ctx.const(1), k*(k+1)),))))
    k
    """
    p1, p0, _ = _cleared(prob)
    return _abramov(p1, p0, prob.ctx)


def _reduced_equation(prob: FpldeProblem, U):
    """q1*sigma(p) + q0*p = sum c_i R_i for the numerator p of g = p/U."""
    ctx = prob.ctx
    p1, p0, rs = _cleared(prob)
    sU = U.compose(*ctx.shift_map(1)) if not U.is_constant() else U
    L = _lcm(U, sU)
    q1 = p1 * (L / sU)
    q0 = p0 * (L / U)
    Ls = RatFun(ctx, L, _reduced=True)
    R = [r * Ls for r in rs]
    return q1, q0, R


def _degree_bound_from(q1, q0, R, ctx) -> int:
    Rdeg = max([k_degree(r.num, ctx) for r in R if not r.is_zero()], default=-1)
    d1 = k_degree(q1, ctx)
    t = q1 + q0
    if t.is_zero():
        return max(Rdeg - d1 + 1, 0)
    dt = k_degree(t, ctx)
    if dt > d1 - 1:
        return max(Rdeg - dt, -1)
    if dt < d1 - 1:
        return max(Rdeg - d1 + 1, 0)
    ct, c1 = k_coeffs(t, ctx), k_coeffs(q1, ctx)
    ratio = -RatFun(ctx, ct[dt], c1[d1])
    bound = Rdeg - dt
    if ratio.is_number():
        v = ratio.to_fraction()
        if v.denominator == 1 and v >= 0:
            bound = max(bound, int(v))
    return max(bound, -1)


def degree_bound(prob: FpldeProblem, u=None) -> int:
    """Upper bound for deg_k of the numerator p of a solution g = p/u (-1: p = 0)."""
    ctx = prob.ctx
    if u is None:
        u = denominator_bound(prob)
    q1, q0, R = _reduced_equation(prob, u)
    return _degree_bound_from(q1, q0, R, ctx)


def solve_fplde_raw(a: RatFun, fs) -> list[tuple[tuple[RatFun, ...], RatFun]]:
    """Basis of V(a, f, K(k)) as ``[(c, g)]`` with ``g`` in K(k).

    The basis is in reduced echelon form with respect to the coordinates
    ``(c_1, ..., c_d, coefficients of the numerator of g)``; vectors with some
    ``c_i != 0`` come first.
    """
    prob = FpldeProblem(a, tuple(fs))
    ctx = prob.ctx
    d = prob.d
    U = denominator_bound(prob)
    q1, q0, R = _reduced_equation(prob, U)
    N = _degree_bound_from(q1, q0, R, ctx)
    ncols = d + N + 1
    rows: dict[int, list] = {}
    zero = ctx.zero_rf()

    def put(col, poly, scale=None):
        if poly.is_zero():
            return
        for j, c in k_coeffs(poly, ctx).items():
            row = rows.get(j)
            if row is None:
                row = [zero] * ncols
                rows[j] = row
            v = RatFun(ctx, c, _reduced=True)
            if scale is not None:
                v = v * scale
            row[col] = row[col] + v

    for i, r in enumerate(R):
        put(i, -r.num, RatFun(ctx, ctx.const(1), r.den) if not r.den.is_one() else None)
    k = ctx.k
    sk = k + 1
    km, skm = ctx.const(1), ctx.const(1)
    for m in range(N + 1):
        put(d + m, q1 * skm + q0 * km)
        km, skm = km * k, skm * sk
    one = ctx.one_rf()
    basis = nullspace([rows[j] for j in sorted(rows)], ncols, one, zero)
    if basis:
        basis, _ = rref(basis, ncols)
    Ur = RatFun(ctx, U, _reduced=True)
    out = []
    for v in basis:
        c = tuple(v[:d])
        p = ctx.zero_rf()
        km = ctx.one_rf()
        kr = ctx.var_rf(ctx.var)
        for m in range(N + 1):
            if not v[d + m].is_zero():
                p = p + v[d + m] * km
            km = km * kr
        g = p / Ur
        res = g.shift(1) - a * g
        for ci, fi in zip(c, prob.f):
            if not ci.is_zero():
                res = res - ci * fi
        if not res.is_zero():
            raise SolverInvariantError(f"FPLDE residual {res} for a={a}")
        out.append((c, g))
    return out


def solve_fplde_rational(prob: FpldeProblem) -> SolutionBasis:
    """Basis of V(a, f, K(k)) with ``g`` returned as elements of the bare tower K(k).

    Examples
    ========

    >>> from ring_telescope.exact_arith import get_context
    >>> from ring_telescope.fplde_base import FpldeProblem, solve_fplde_rational
    >>> ctx = get_context(("n",))
    >>> print(solve_fplde_rational(FpldeProblem(ctx.ratfun(1), (ctx.ratfun(1),))))
    {(1, k), (0, 1)}
    >>> print(solve_fplde_rational(FpldeProblem(ctx.ratfun(2), (ctx.ratfun(1),))))
    {(1, -1)}
    """
    tower = Tower(prob.ctx)
    vecs = tuple((c, tower.const(g)) for c, g in solve_fplde_raw(prob.a, prob.f))
    return SolutionBasis(prob.d, vecs)
