"""Zero-sum matrix games: an exact rational simplex and a HiGHS wrapper.

Convention: the row player maximizes ``x^T A y``, the column player
minimizes it.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

__all__ = ["GameSolution", "solve_game_exact", "solve_game_float", "LPError"]


class LPError(RuntimeError):
    pass


class GameSolution:
    __slots__ = ("value", "row_strategy", "col_strategy")

    def __init__(self, value, row_strategy, col_strategy):
        self.value = value
        self.row_strategy = row_strategy
        self.col_strategy = col_strategy

    def __repr__(self) -> str:
        return f"GameSolution(value={self.value})"


def _simplex_max(T: list[list[Fraction]], basis: list[int], n_vars: int) -> None:
    """Bland-rule primal simplex on a feasible tableau, in place.

    ``T`` has one row per constraint followed by the objective row
    ``z_j - c_j``; the last column is the right-hand side.
    """
    m = len(basis)
    obj = T[m]
    while True:
        enter = next((j for j in range(n_vars) if obj[j] < 0), None)
        if enter is None:
            return
        leave = None
        best = None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            raise LPError("unbounded linear program")
        prow = T[leave]
        p = prow[enter]
        if p != 1:
            prow[:] = [v / p for v in prow]
        for i, row in enumerate(T):
            if i != leave:
                c = row[enter]
                if c != 0:
                    row[:] = [v - c * w for v, w in zip(row, prow)]
        basis[leave] = enter


def solve_game_exact(A) -> GameSolution:
    """Value and optimal strategies of the game ``A`` in exact arithmetic.

    Shifts the payoffs to be positive and solves
    ``max 1^T u  s.t. (A + c) u <= 1, u >= 0`` for the column player;
    the row player's strategy is read off the slack reduced costs.
    """
    A = [[Fraction(v) for v in row] for row in A]
    m, n = len(A), len(A[0])
    shift = 1 - min(min(row) for row in A)
    T = []
    for i in range(m):
        row = [A[i][j] + shift for j in range(n)]
        row += [Fraction(1) if k == i else Fraction(0) for k in range(m)]
        row.append(Fraction(1))
        T.append(row)
    T.append([Fraction(-1)] * n + [Fraction(0)] * m + [Fraction(0)])
    basis = [n + i for i in range(m)]
    _simplex_max(T, basis, n + m)
    total = T[m][-1]  # = 1 / (value + shift)
    u = [Fraction(0)] * n
    for i, b in enumerate(basis):
        if b < n:
            u[b] = T[i][-1]
    y = [T[m][n + i] for i in range(m)]
    value = 1 / total - shift
    return GameSolution(value, [v / total for v in y], [v / total for v in u])


def solve_game_float(A: np.ndarray) -> GameSolution:
    """Game value via HiGHS; the column player's LP with duals for the rows."""
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.hstack([A, -np.ones((m, 1))])
    A_eq = np.zeros((1, n + 1))
    A_eq[0, :n] = 1.0
    bounds = [(0, None)] * n + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(m), A_eq=A_eq, b_eq=[1.0],
                  bounds=bounds, method="highs")
    if res.status != 0:
        raise LPError(f"restricted game LP failed: {res.message}")
    y = np.clip(-np.asarray(res.ineqlin.marginals), 0.0, None)
    if y.sum() <= 0:
        y = np.ones(m)
    x = np.clip(res.x[:n], 0.0, None)
    return GameSolution(float(res.x[-1]), y / y.sum(), x / x.sum())
