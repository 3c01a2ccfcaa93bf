"""Exact rational linear programming (dense two-phase simplex, Bland's rule).

Every coefficient is converted to a Fraction exactly (floats via their binary
expansion), so feasibility answers are decisions about the actual float
system being analyzed, with no tolerance involved.  Bland's pivoting rule
guarantees termination.  This is the final authority behind the reachability
checks; floating-point solvers are only ever used as a pre-screen.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_ZERO = Fraction(0)
_ONE = Fraction(1)


def to_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        return Fraction(float(x))
    return Fraction(x)


@dataclass
class LpResult:
    status: str
    x: list | None
    value: Fraction | None


def _pivot(rows, obj, basis, r, c):
    piv = rows[r][c]
    inv = _ONE / piv
    rows[r] = [v * inv for v in rows[r]]
    for i, row in enumerate(rows):
        if i != r and row[c] != 0:
            f = row[c]
            rows[i] = [a - f * b for a, b in zip(row, rows[r])]
    if obj is not None and obj[c] != 0:
        f = obj[c]
        obj[:] = [a - f * b for a, b in zip(obj, rows[r])]
    basis[r] = c


def _ratio_leave(rows, basis, col):
    """Bland leaving row: min ratio, ties by lowest basis variable index."""
    best = None
    for r, row in enumerate(rows):
        a = row[col]
        if a > 0:
            ratio = row[-1] / a
            if best is None or ratio < best[0] or (ratio == best[0] and basis[r] < basis[best[1]]):
                best = (ratio, r)
    return None if best is None else best[1]


def lp_maximize(A, b, c):
    """maximize c^T x  subject to  A x <= b,  x free.  Exact arithmetic.

    Returns LpResult; on OPTIMAL, ``x`` is a rational optimizer and ``value``
    the optimal objective.  On UNBOUNDED, ``x`` is None.
    """
    A = [[to_fraction(v) for v in row] for row in A]
    b = [to_fraction(v) for v in b]
    c = [to_fraction(v) for v in c]
    m = len(A)
    n = len(c)
    if any(len(row) != n for row in A) or len(b) != m:
        raise ValueError("inconsistent LP dimensions")

    # free x -> z+ - z-: columns [z+ (n) | z- (n) | slack (m) | artificial | rhs]
    n_z = 2 * n
    art_rows = []
    rows = []
    for i in range(m):
        coeffs = A[i]
        rhs = b[i]
        sign = _ONE
        if rhs < 0:
            sign = -_ONE
            rhs = -rhs
        row = [sign * v for v in coeffs] + [-sign * v for v in coeffs]
        slack = [_ZERO] * m
        slack[i] = sign
        rows.append(row + slack + [rhs])
        if sign < 0:
            art_rows.append(i)

    n_art = len(art_rows)
    basis = [0] * m
    for i in range(m):
        if i in art_rows:
            a_col = n_z + m + art_rows.index(i)
        else:
            a_col = None
        rows[i] = rows[i][:-1] + [_ZERO] * n_art + [rows[i][-1]]
        if a_col is not None:
            rows[i][a_col] = _ONE
            basis[i] = a_col
        else:
            basis[i] = n_z + i

    total_cols = n_z + m + n_art + 1

    # phase 1: minimize the artificial total, tracked as the sum of their rows
    if n_art:
        w = [_ZERO] * total_cols
        for i in art_rows:
            w = [a + v for a, v in zip(w, rows[i])]
        for j in range(n_z + m, n_z + m + n_art):
            w[j] = _ZERO
        while True:
            col = next((j for j in range(n_z + m) if w[j] > 0), None)
            if col is None:
                break
            r = _ratio_leave(rows, basis, col)
            if r is None:
                raise RuntimeError("phase-1 simplex found an unbounded ray")
            _pivot(rows, w, basis, r, col)
        if w[-1] != 0:
            return LpResult(INFEASIBLE, None, None)
        # drive leftover artificials out of the basis (or drop redundant rows)
        for r in range(m - 1, -1, -1):
            if basis[r] >= n_z + m:
                col = next((j for j in range(n_z + m) if rows[r][j] != 0), None)
                if col is None:
                    rows.pop(r)
                    basis.pop(r)
                else:
                    _pivot(rows, None, basis, r, col)
        rows = [row[: n_z + m] + [row[-1]] for row in rows]
        total_cols = n_z + m + 1

    # phase 2: maximize c^T x over the remaining tableau
    full_c = c + [-v for v in c] + [_ZERO] * m
    obj = list(full_c) + [_ZERO]
    for r, bv in enumerate(basis):
        if obj[bv] != 0:
            f = obj[bv]
            obj = [a - f * v for a, v in zip(obj, rows[r])]
    while True:
        col = next((j for j in range(n_z + m) if obj[j] > 0), None)
        if col is None:
            break
        r = _ratio_leave(rows, basis, col)
        if r is None:
            return LpResult(UNBOUNDED, None, None)
        _pivot(rows, obj, basis, r, col)

    values = [_ZERO] * (n_z + m)
    for r, bv in enumerate(basis):
        values[bv] = rows[r][-1]
    x = [values[j] - values[n + j] for j in range(n)]
    value = sum(ci * xi for ci, xi in zip(c, x))
    return LpResult(OPTIMAL, x, value)


def feasible_point(A, b, strict=None, slack_cap=1):
    """Exact witness of {x : A x <= b, with < on strict rows}, or None.

    Strict rows are handled by maximizing a shared slack t with
    A_strict x + t <= b_strict, t <= slack_cap; the system is satisfiable
    iff the relaxation is feasible with optimum t > 0.
    """
    m = len(A)
    if m == 0:
        return []
    n = len(A[0])
    if strict is None or not any(strict):
        res = lp_maximize(A, b, [0] * n)
        if res.status == INFEASIBLE:
            return None
        return res.x
    if len(strict) != m:
        raise ValueError("strict flags must match the number of rows")
    A_ext = [list(row) + [(1 if strict[i] else 0)] for i, row in enumerate(A)]
    A_ext.append([0] * n + [1])
    b_ext = list(b) + [slack_cap]
    res = lp_maximize(A_ext, b_ext, [0] * n + [1])
    if res.status == INFEASIBLE:
        return None
    if res.status == UNBOUNDED:
        raise RuntimeError("slack LP cannot be unbounded with a capped slack")
    if res.value <= 0:
        return None
    return res.x[:n]
