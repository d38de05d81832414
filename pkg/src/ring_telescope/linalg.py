"""Gauss-Jordan elimination over an exact field.

Entries may be ``Fraction`` values or k-free :class:`~ring_telescope.exact_arith.RatFun`
values (elements of K).  Pivots are taken at the lowest available column and
rows are scanned in order, so results are deterministic.
"""
from __future__ import annotations


def _is_zero(x) -> bool:
    z = getattr(x, "is_zero", None)
    if z is not None:
        return z()
    return x == 0


def rref(rows: list[list], ncols: int) -> tuple[list[list], list[int]]:
    """Reduced row echelon form; returns (nonzero rows, pivot columns)."""
    m = [list(r) for r in rows if not all(_is_zero(v) for v in r)]
    pivots: list[int] = []
    r = 0
    for col in range(ncols):
        if r >= len(m):
            break
        piv = next((i for i in range(r, len(m)) if not _is_zero(m[i][col])), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][col]
        m[r] = [v * inv if not _is_zero(v) else v for v in m[r]]
        for i in range(len(m)):
            if i != r and not _is_zero(m[i][col]):
                f = m[i][col]
                m[i] = [a - f * b if not _is_zero(b) else a for a, b in zip(m[i], m[r])]
        pivots.append(col)
        r += 1
    return m[:r], pivots


def nullspace(rows: list[list], ncols: int, one, zero) -> list[list]:
    """Basis of {v : rows * v = 0}, one vector per free column (value ``one`` there)."""
    red, pivots = rref(rows, ncols)
    pivset = set(pivots)
    basis = []
    for free in range(ncols):
        if free in pivset:
            continue
        v = [zero] * ncols
        v[free] = one
        for row, p in zip(red, pivots):
            if not _is_zero(row[free]):
                v[p] = -row[free]
        basis.append(v)
    return basis


def solve_affine(rows: list[list], rhs: list, ncols: int, zero):
    """One solution of rows * v = rhs (free variables set to zero) or ``None``."""
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    red, pivots = rref(aug, ncols + 1)
    if pivots and pivots[-1] == ncols:
        return None
    v = [zero] * ncols
    for row, p in zip(red, pivots):
        v[p] = row[ncols]
    return v
