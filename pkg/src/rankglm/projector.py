"""Dantzig-type estimate of the nuisance direction.

Given the Hessian ``H`` of the composite likelihood at the first-stage fit
and a target coordinate ``j``, ``w`` minimizes ``||w||_1`` subject to
``||H[j, -j] - w' H[-j, -j]||_inf <= lambda_s``.  The program is written as
an LP in ``w = u - v`` with ``u, v >= 0`` and ``2(d-1)`` inequality rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .lp import INFEASIBLE, OPTIMAL, simplex
from .ranklik import Dataset, pairwise_hessian

__all__ = ["DirectionFit", "HessianCache", "estimate_w", "default_lambda_s", "solve_dantzig", "split_blocks"]


@dataclass
class DirectionFit:
    j: int
    w: np.ndarray
    lambda_s: float
    feasibility_gap: float
    solver_status: str
    lp_iterations: int = 0
    message: str = ""


class HessianCache:
    """Materializes the full Hessian once for repeated targets at one fit."""

    def __init__(self, data: Dataset, beta_hat):
        self.data = data
        self.beta_hat = np.asarray(beta_hat, dtype=np.float64)
        self._H = None

    @property
    def H(self) -> np.ndarray:
        if self._H is None:
            self._H = pairwise_hessian(self.data, self.beta_hat)
        return self._H


def default_lambda_s(n: float, d: int) -> float:
    """Dantzig tuning level ``4 sqrt(log(n d) / n)``."""
    if n < 2 or d < 1:
        raise DataError("default_lambda_s needs n >= 2 and d >= 1")
    return 4.0 * math.sqrt(math.log(n * d) / n)


def split_blocks(H: np.ndarray, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Return the cross row ``H[j, -j]`` and nuisance block ``H[-j, -j]``."""
    rest = np.delete(np.arange(H.shape[0]), j)
    return H[j, rest], H[np.ix_(rest, rest)]


def _gap(a, B, w) -> float:
    return float(np.max(np.abs(a - B.T @ w))) if a.size else 0.0


def solve_dantzig(a: np.ndarray, B: np.ndarray, lambda_s: float) -> tuple[np.ndarray, str, int]:
    """``argmin ||w||_1`` s.t. ``||a - B' w||_inf <= lambda_s``."""
    p = a.shape[0]
    if lambda_s < 0:
        return np.zeros(p), INFEASIBLE, 0
    if p == 0 or np.max(np.abs(a)) <= lambda_s:
        return np.zeros(p), OPTIMAL, 0
    Bt = B.T
    A_ub = np.block([[Bt, -Bt], [-Bt, Bt]])
    b_ub = np.concatenate([a + lambda_s, lambda_s - a])
    res = simplex(np.ones(2 * p), A_ub, b_ub)
    w = res.x[:p] - res.x[p:]
    return w, res.status, res.nit


def estimate_w(
    data: Dataset,
    beta_hat,
    j: int,
    lambda_s: float | None = None,
    cache: HessianCache | None = None,
) -> DirectionFit:
    if data.d < 2:
        raise DataError("a nuisance direction needs d >= 2")
    if not 0 <= j < data.d:
        raise DataError(f"target index {j} out of range")
    if lambda_s is None:
        lambda_s = default_lambda_s(data.n, data.d)
    H = (cache or HessianCache(data, beta_hat)).H
    a, B = split_blocks(H, j)
    w, status, nit = solve_dantzig(a, B, lambda_s)
    gap = _gap(a, B, w)
    msg = ""
    if status == OPTIMAL and gap > lambda_s + 1e-8:
        status, msg = INFEASIBLE, f"returned point violates constraints by {gap - lambda_s:.3g}"
    elif status == INFEASIBLE:
        msg = (
            f"no w satisfies the constraint at lambda_s={lambda_s:.6g}; "
            f"max |H[j,-j]| = {np.max(np.abs(a)):.6g}, max |H[-j,-j]| = {np.max(np.abs(B)):.6g}"
        )
    return DirectionFit(j=j, w=w, lambda_s=float(lambda_s), feasibility_gap=gap, solver_status=status,
                        lp_iterations=nit, message=msg)
