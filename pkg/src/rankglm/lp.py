"""Dense two-phase simplex for small linear programs.

Solves ``min c'x  s.t.  A x <= b, x >= 0`` on a full tableau.  Pivots use
Dantzig's most-negative reduced cost and switch to Bland's rule after a run
of degenerate pivots.  On return the basic solution is recomputed from the
original data with a dense solve, so the answer does not carry the
accumulated tableau rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max_iter"


@dataclass
class LPResult:
    x: np.ndarray
    status: str
    nit: int
    basis: np.ndarray


class _Tableau:
    def __init__(self, T: np.ndarray, basis: np.ndarray, tol: float):
        self.T = T
        self.basis = basis
        self.tol = tol
        self.nit = 0

    def pivot(self, r: int, col: int):
        T = self.T
        T[r] /= T[r, col]
        colv = T[:, col].copy()
        colv[r] = 0.0
        T -= np.outer(colv, T[r])
        self.basis[r] = col
        self.nit += 1

    def run(self, allowed: np.ndarray, max_iter: int) -> str:
        """Optimize the objective held in the last row over ``allowed`` columns."""
        T, tol = self.T, self.tol
        degenerate_run = 0
        while self.nit < max_iter:
            red = T[-1, :-1]
            cand = np.flatnonzero(allowed & (red < -tol))
            if cand.size == 0:
                return OPTIMAL
            bland = degenerate_run > 50
            col = int(cand[0]) if bland else int(cand[np.argmin(red[cand])])
            a = T[:-1, col]
            pos = np.flatnonzero(a > tol)
            if pos.size == 0:
                return UNBOUNDED
            ratios = T[pos, -1] / a[pos]
            best = ratios.min()
            ties = pos[ratios <= best + tol * max(1.0, abs(best))]
            r = int(ties[np.argmin(self.basis[ties])])
            degenerate_run = degenerate_run + 1 if T[r, -1] <= tol else 0
            self.pivot(r, col)
        return MAX_ITER


def simplex(c, A_ub, b_ub, max_iter: int = 50_000, tol: float = 1e-11) -> LPResult:
    c = np.asarray(c, dtype=np.float64)
    A = np.asarray(A_ub, dtype=np.float64)
    b = np.asarray(b_ub, dtype=np.float64)
    m, n = A.shape
    # columns: x (n), slacks (m), artificials (one per row with b < 0)
    neg = np.flatnonzero(b < 0)
    n_art = neg.size
    ncol = n + m + n_art
    T = np.zeros((m + 1, ncol + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[neg, : n + m] *= -1.0
    T[neg, -1] *= -1.0
    basis = np.arange(n, n + m)
    for k, r in enumerate(neg):
        T[r, n + m + k] = 1.0
        basis[r] = n + m + k
    tab = _Tableau(T, basis, tol)
    allowed = np.ones(ncol, dtype=bool)

    if n_art:
        # phase I: minimize the sum of artificials
        T[-1, :] = 0.0
        T[-1, n + m :-1] = 1.0
        for r in neg:
            T[-1] -= T[r]
        status = tab.run(allowed, max_iter)
        if status == MAX_ITER:
            return LPResult(np.zeros(n), MAX_ITER, tab.nit, basis)
        if -T[-1, -1] > 1e-9 * max(1.0, np.abs(b).max()):
            return LPResult(np.zeros(n), INFEASIBLE, tab.nit, basis)
        # drive zero-level artificials out of the basis
        for r in range(m):
            if basis[r] >= n + m:
                row = np.abs(T[r, : n + m])
                if row.max() > tol:
                    tab.pivot(r, int(np.argmax(row)))
        allowed[n + m :] = False

    T[-1, :] = 0.0
    T[-1, :n] = c
    for r in range(m):
        if basis[r] < n:
            T[-1] -= c[basis[r]] * T[r]
    status = tab.run(allowed, max_iter)
    x = _polish(A, b, basis, n, m, T)
    return LPResult(x, status, tab.nit, basis.copy())


def _polish(A, b, basis, n, m, T) -> np.ndarray:
    x_full = np.zeros(n + m)
    if np.all(basis < n + m):
        full = np.hstack([A, np.eye(m)])
        try:
            xb = np.linalg.solve(full[:, basis], b)
            x_full[basis] = xb
            if np.all(xb >= -1e-9):
                x_full[basis] = np.maximum(xb, 0.0)
                return x_full[:n]
        except np.linalg.LinAlgError:
            pass
    x_full[:] = 0.0
    for r in range(m):
        if basis[r] < n + m:
            x_full[basis[r]] = T[r, -1]
    return np.maximum(x_full[:n], 0.0)
