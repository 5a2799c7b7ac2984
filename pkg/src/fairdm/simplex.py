"""Dense tableau simplex for small LPs of the form ``max c.x  s.t.  A x <= b, x >= 0`` with ``b >= 0``.

The origin is feasible, so a single phase starting from the slack basis is
enough. Pivoting follows Bland's rule (lowest-index entering column, lowest
basic-variable index among tied ratios), which rules out cycling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-12


class Unbounded(ArithmeticError):
    pass


@dataclass(frozen=True)
class LPSolution:
    x: np.ndarray
    dual: np.ndarray
    value: float
    pivots: int


def maximize(c, A, b, max_pivots: int = 10_000) -> LPSolution:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError(f"shape mismatch: c {c.shape}, A {A.shape}, b {b.shape}")
    if np.any(b < 0):
        raise ValueError("right-hand side must be nonnegative")

    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n : n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[m, :n] = -c
    basis = list(range(n, n + m))

    pivots = 0
    while True:
        entering = next((j for j in range(n + m) if tab[m, j] < -PIVOT_TOL), None)
        if entering is None:
            break
        column = tab[:m, entering]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            raise Unbounded(f"objective unbounded along column {entering}")
        ratios = tab[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        leaving = min(tied, key=lambda r: basis[r])

        tab[leaving] /= tab[leaving, entering]
        for r in range(m + 1):
            if r != leaving and tab[r, entering] != 0.0:
                tab[r] -= tab[r, entering] * tab[leaving]
        basis[leaving] = entering
        pivots += 1
        if pivots > max_pivots:
            raise RuntimeError("simplex exceeded its pivot budget")

    x = np.zeros(n + m)
    x[basis] = tab[:m, -1]
    return LPSolution(x=x[:n], dual=tab[m, n : n + m].copy(), value=float(tab[m, -1]), pivots=pivots)


def maximin(payoff) -> tuple[np.ndarray, float]:
    """Mixed strategy ``p`` maximizing ``min_i (payoff @ p)_i`` for a nonnegative payoff matrix.

    Every row must have a positive entry. Solves the normalized LP
    ``max 1.z  s.t.  payoff.T z <= 1`` whose dual variables, rescaled, are the
    optimal mixture; the game value is the reciprocal of the LP optimum.
    """
    W = np.atleast_2d(np.asarray(payoff, dtype=float))
    if np.any(W < 0):
        raise ValueError("payoff must be nonnegative")
    if np.any(W.max(axis=1) <= 0):
        raise ValueError("every row needs a positive payoff")
    rows, cols = W.shape
    sol = maximize(np.ones(rows), W.T, np.ones(cols))
    y = np.clip(sol.dual, 0.0, None)
    total = y.sum()
    return y / total, 1.0 / sol.value
