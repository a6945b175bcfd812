"""Dense two-phase simplex for tiny linear programs.

Solves  min c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0  and
returns primal optimum, objective, and dual multipliers.  Bland's rule
guarantees termination; instances here are occupancy-measure LPs with at
most a few thousand variables, so a full dense tableau is fine.

Dual conventions: `duals_eq[i]` is the multiplier of equality row i,
`duals_ub[i] >= 0` is the KKT multiplier of inequality row i in the
minimization sense (so the Lagrangian is ``c.x + duals_ub . (A_ub x -
b_ub) + duals_eq . (A_eq x - b_eq)``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-10
COST_TOL = 1e-9


class LpInfeasibleError(ValueError):
    """Raised when no feasible point exists; carries a certificate."""

    def __init__(self, residual: float, certificate: np.ndarray) -> None:
        super().__init__(
            f"LP infeasible: minimal total constraint violation {residual:.3e}"
        )
        self.residual = residual
        # Farkas-style ray: phase-1 duals y with y.b > 0 while y.A <= 0
        self.certificate = certificate


class LpUnboundedError(ValueError):
    pass


@dataclass
class LpSolution:
    x: np.ndarray
    objective: float
    duals_eq: np.ndarray
    duals_ub: np.ndarray
    n_pivots: int


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and abs(T[r, col]) > 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _simplex_iterate(T: np.ndarray, basis: np.ndarray, cost: np.ndarray, n_cols: int) -> int:
    """Minimize cost over the tableau in place; returns pivot count."""
    pivots = 0
    m = T.shape[0]
    while True:
        y = cost[basis] @ T[:, :n_cols]
        reduced = cost[:n_cols] - y
        entering = -1
        for j in range(n_cols):  # Bland: smallest eligible index
            if reduced[j] < -COST_TOL:
                entering = j
                break
        if entering < 0:
            return pivots
        ratios = np.full(m, np.inf)
        col = T[:, entering]
        pos = col > PIVOT_TOL
        ratios[pos] = T[pos, -1] / col[pos]
        if not np.any(np.isfinite(ratios)):
            raise LpUnboundedError("objective unbounded below")
        best = np.min(ratios)
        leaving = -1
        for r in range(m):  # Bland on ties: smallest basis index
            if np.isfinite(ratios[r]) and ratios[r] <= best + PIVOT_TOL:
                if leaving < 0 or basis[r] < basis[leaving]:
                    leaving = r
        _pivot(T, basis, leaving, entering)
        pivots += 1


def solve_lp(
    c: np.ndarray,
    A_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    A_ub: np.ndarray | None = None,
    b_ub: np.ndarray | None = None,
) -> LpSolution:
    c = np.asarray(c, dtype=np.float64)
    n = c.size
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=np.float64)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64)
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=np.float64)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64)
    n_eq, n_ub = A_eq.shape[0], A_ub.shape[0]
    m = n_eq + n_ub

    # columns: [x (n) | slacks (n_ub) | artificials (m)]
    A = np.zeros((m, n + n_ub + m))
    b = np.concatenate([b_eq, b_ub]).astype(np.float64)
    A[:n_eq, :n] = A_eq
    A[n_eq:, :n] = A_ub
    A[n_eq:, n : n + n_ub] = np.eye(n_ub)
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    A[:, n + n_ub :] = np.eye(m)

    T = np.column_stack([A, b])
    basis = np.arange(n + n_ub, n + n_ub + m)

    # phase 1: minimize the sum of artificials
    phase1_cost = np.zeros(n + n_ub + m)
    phase1_cost[n + n_ub :] = 1.0
    pivots = _simplex_iterate(T, basis, phase1_cost, n + n_ub + m)
    residual = float(phase1_cost[basis] @ T[:, -1])
    if residual > 1e-8:
        y = np.linalg.solve(A[:, basis].T, phase1_cost[basis])
        y[flip] *= -1.0
        raise LpInfeasibleError(residual, y)

    # drive lingering artificial basics out (degenerate rows)
    drop_rows: list[int] = []
    for r in range(m):
        if basis[r] >= n + n_ub:
            cand = np.flatnonzero(np.abs(T[r, : n + n_ub]) > PIVOT_TOL)
            if cand.size:
                _pivot(T, basis, r, int(cand[0]))
            else:
                drop_rows.append(r)  # redundant constraint row
    if drop_rows:
        keep = [r for r in range(m) if r not in drop_rows]
        T = T[keep]
        basis = basis[keep]

    # phase 2 on the real objective, artificial columns barred
    phase2_cost = np.zeros(n + n_ub + m)
    phase2_cost[:n] = c
    T2 = T.copy()
    T2[:, n + n_ub : n + n_ub + m] = 0.0  # never re-enter artificials
    pivots += _simplex_iterate(T2, basis, phase2_cost, n + n_ub)

    x_full = np.zeros(n + n_ub + m)
    x_full[basis] = T2[:, -1]
    x = x_full[:n]

    # duals from the final basis on the original (possibly row-flipped) system
    rows_kept = [r for r in range(m) if r not in drop_rows]
    B = A[np.ix_(rows_kept, basis)] if drop_rows else A[:, basis]
    y_kept = np.linalg.solve(B.T, phase2_cost[basis])
    y = np.zeros(m)
    for idx, r in enumerate(rows_kept):
        y[r] = y_kept[idx]
    y[flip] *= -1.0
    # KKT sign: stationarity is c + duals_eq.A_eq + duals_ub.A_ub = 0 on the
    # basic support, hence both multipliers are -y of the simplex solve.
    duals_eq = -y[:n_eq]
    duals_ub = np.maximum(-y[n_eq:], 0.0)
    return LpSolution(
        x=x,
        objective=float(c @ x),
        duals_eq=duals_eq,
        duals_ub=duals_ub,
        n_pivots=pivots,
    )
