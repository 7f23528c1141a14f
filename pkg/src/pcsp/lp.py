"""Exact rational linear programming via two-phase simplex with Bland's rule.

Problems here are tiny (at most a few hundred rows from 2^k predicate
tuples), so a dense Fraction tableau is plenty; what matters is that
optima and certificates are exact rationals, never floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpError(Exception):
    pass


@dataclass
class LpResult:
    status: str
    x: list[Fraction] | None
    objective: Fraction | None


def _pivot(tab: list[list[Fraction]], basis: list[int], row: int, col: int) -> None:
    piv = tab[row][col]
    inv = 1 / piv
    tab[row] = [v * inv for v in tab[row]]
    for r in range(len(tab)):
        if r != row and tab[r][col] != 0:
            f = tab[r][col]
            rr, pr = tab[r], tab[row]
            tab[r] = [a - f * b for a, b in zip(rr, pr)]
    basis[row] = col


def _simplex(tab: list[list[Fraction]], basis: list[int], cost: list[Fraction]) -> str:
    """Minimise cost over the tableau rows (equalities, rhs in last column).

    Bland's rule throughout, so termination is guaranteed.
    """
    m = len(tab)
    n = len(tab[0]) - 1
    # reduced costs: z = cost - cost_B * tab
    z = cost[:]
    obj = Fraction(0)
    for r in range(m):
        cb = cost[basis[r]]
        if cb != 0:
            row = tab[r]
            z = [a - cb * b for a, b in zip(z, row[:n])]
            obj -= cb * row[n]
    while True:
        col = -1
        for j in range(n):
            if z[j] < 0:
                col = j
                break
        if col == -1:
            return OPTIMAL
        row = -1
        best: Fraction | None = None
        for r in range(m):
            a = tab[r][col]
            if a > 0:
                ratio = tab[r][n] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[row]):
                    best = ratio
                    row = r
        if row == -1:
            return UNBOUNDED
        zc = z[col]
        _pivot(tab, basis, row, col)
        prow = tab[row]
        z = [a - zc * b for a, b in zip(z, prow[:n])]
        # z[col] is exactly zero now; keep it that way against drift
        z[col] = Fraction(0)


def solve_standard(
    A: Sequence[Sequence[Fraction | int]],
    b: Sequence[Fraction | int],
    c: Sequence[Fraction | int],
    maximize: bool = False,
) -> LpResult:
    """Solve min (or max) c.x subject to A x = b, x >= 0, exactly."""
    m = len(A)
    n = len(c)
    rows = [[Fraction(v) for v in row] for row in A]
    rhs = [Fraction(v) for v in b]
    cost = [Fraction(v) for v in c]
    if maximize:
        cost = [-v for v in cost]
    for r in range(m):
        if len(rows[r]) != n:
            raise LpError("row length mismatch")
        if rhs[r] < 0:
            rows[r] = [-v for v in rows[r]]
            rhs[r] = -rhs[r]

    # phase 1: artificial basis
    tab = [rows[r] + [Fraction(0)] * m + [rhs[r]] for r in range(m)]
    for r in range(m):
        tab[r][n + r] = Fraction(1)
    basis = [n + r for r in range(m)]
    art_cost = [Fraction(0)] * n + [Fraction(1)] * m
    _simplex(tab, basis, art_cost)
    phase1 = sum(tab[r][-1] for r in range(m) if basis[r] >= n)
    if phase1 > 0:
        return LpResult(INFEASIBLE, None, None)
    # drive remaining artificials out of the basis (degenerate rows)
    for r in range(m):
        if basis[r] >= n:
            col = next((j for j in range(n) if tab[r][j] != 0), None)
            if col is not None:
                _pivot(tab, basis, r, col)
    # drop rows still pinned to artificials (redundant constraints) and artificial columns
    keep = [r for r in range(m) if basis[r] < n]
    tab = [tab[r][:n] + [tab[r][-1]] for r in keep]
    basis = [basis[r] for r in keep]

    status = _simplex(tab, basis, cost)
    if status == UNBOUNDED:
        return LpResult(UNBOUNDED, None, None)
    x = [Fraction(0)] * n
    for r, bcol in enumerate(basis):
        x[bcol] = tab[r][-1]
    obj = sum(ci * xi for ci, xi in zip(cost, x))
    if maximize:
        obj = -obj
    return LpResult(OPTIMAL, x, obj)


@dataclass
class GeneralLp:
    """Small helper to assemble LPs with free variables and inequality rows.

    Internally converts to standard form: free variables are split into
    positive and negative parts, and <=/>= rows get slack columns.
    """

    num_vars: int
    nonneg: set[int]

    def __init__(self, num_vars: int, nonneg: Sequence[int] = ()):
        self.num_vars = num_vars
        self.nonneg = set(nonneg)
        self.rows: list[tuple[list[Fraction], str, Fraction]] = []

    def add(self, coeffs: dict[int, Fraction | int], rel: str, rhs: Fraction | int) -> None:
        if rel not in ("==", "<=", ">="):
            raise LpError(f"bad relation {rel!r}")
        row = [Fraction(0)] * self.num_vars
        for i, v in coeffs.items():
            row[i] = Fraction(v)
        self.rows.append((row, rel, Fraction(rhs)))

    def solve(self, objective: dict[int, Fraction | int], maximize: bool = False) -> LpResult:
        # variable layout: for each original var, one col (nonneg) or two (free split)
        col_of_pos: list[int] = []
        col_of_neg: list[int] = []
        ncols = 0
        for i in range(self.num_vars):
            col_of_pos.append(ncols)
            ncols += 1
            if i in self.nonneg:
                col_of_neg.append(-1)
            else:
                col_of_neg.append(ncols)
                ncols += 1
        slack_cols = sum(1 for _, rel, _ in self.rows if rel != "==")
        total = ncols + slack_cols
        A: list[list[Fraction]] = []
        b: list[Fraction] = []
        s = ncols
        for row, rel, rhs in self.rows:
            out = [Fraction(0)] * total
            for i, v in enumerate(row):
                if v == 0:
                    continue
                out[col_of_pos[i]] = v
                if col_of_neg[i] >= 0:
                    out[col_of_neg[i]] = -v
            if rel == "<=":
                out[s] = Fraction(1)
                s += 1
            elif rel == ">=":
                out[s] = Fraction(-1)
                s += 1
            A.append(out)
            b.append(rhs)
        c = [Fraction(0)] * total
        for i, v in objective.items():
            c[col_of_pos[i]] += Fraction(v)
            if col_of_neg[i] >= 0:
                c[col_of_neg[i]] -= Fraction(v)
        res = solve_standard(A, b, c, maximize=maximize)
        if res.status != OPTIMAL:
            return res
        x = []
        for i in range(self.num_vars):
            v = res.x[col_of_pos[i]]
            if col_of_neg[i] >= 0:
                v -= res.x[col_of_neg[i]]
            x.append(v)
        return LpResult(OPTIMAL, x, res.objective)
