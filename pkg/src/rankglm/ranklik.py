"""Pairwise rank composite likelihood for the semiparametric GLM.

For a sample ``(y_i, x_i)`` the pair kernel is

    R_ij(beta) = exp{-(y_i - y_j) * beta' (x_i - x_j)}

and the composite log-likelihood is ``-C^{-1} sum_{i<j} w_ij log(1 + R_ij)``
with ``C = n(n-1)/2`` and ``w_ij = delta_i * delta_j`` when an observation
indicator is supplied.  The unknown base measure of the response cancels out
of every pair, so nothing here depends on the response distribution.

Everything is expressed through the linear predictor ``eta = X beta`` so the
sums over pairs reduce to ``O(n^2 + n d)`` work:

* gradient  ``X' (A 1) / C``, ``A_ij = sigma(t_ij) (y_i - y_j)`` antisymmetric
* Hessian   ``-X' (diag(V 1) - V) X / C``, ``V_ij = sigma(t)sigma(-t)(y_i-y_j)^2``

where ``t_ij = log R_ij``.  Rows with ``delta == 0`` are dropped before any
arithmetic, so their responses are never read.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _kernels
from ._numerics import logistic, logsumexp
from .errors import DataError, NumericalError

__all__ = [
    "Dataset",
    "PairKernelDiagnostics",
    "PairTerms",
    "pairwise_loglik",
    "pairwise_gradient",
    "pairwise_hessian",
    "hajek_sigma",
    "third_order_loglik",
    "rank_probability_oracle",
    "kernel_diagnostics",
    "ORACLE_MAX_N",
]

ORACLE_MAX_N = 7


@dataclass(frozen=True, eq=False)
class Dataset:
    """Response ``y`` (n,), covariates ``X`` (n, d), optional 0/1 ``delta`` (n,).

    Responses of unobserved rows (``delta == 0``) may hold any value,
    including NaN; they are never read.
    """

    y: np.ndarray
    X: np.ndarray
    delta: np.ndarray | None = None
    columns: tuple[str, ...] | None = None

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        X = np.array(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise DataError(f"X must be 2-dimensional, got shape {X.shape}")
        n, d = X.shape
        if y.shape[0] != n:
            raise DataError(f"y has length {y.shape[0]} but X has {n} rows")
        if n < 2:
            raise DataError("need at least 2 samples")
        if d < 1:
            raise DataError("X needs at least one column")
        delta = None
        if self.delta is not None:
            delta = np.array(self.delta, dtype=np.float64).reshape(-1)
            if delta.shape[0] != n:
                raise DataError(f"delta has length {delta.shape[0]} but X has {n} rows")
            if not np.all((delta == 0.0) | (delta == 1.0)):
                raise DataError("delta entries must be 0 or 1")
            delta = delta.astype(np.int8)
        columns = tuple(self.columns) if self.columns is not None else None
        if columns is not None and len(columns) != d:
            raise DataError(f"{len(columns)} column names for {d} columns")
        if not np.all(np.isfinite(X)):
            raise DataError("X contains NaN or Inf")
        seen = y if delta is None else y[delta == 1]
        if not np.all(np.isfinite(seen)):
            raise DataError("y contains NaN or Inf at observed rows")
        const = np.flatnonzero(np.ptp(X, axis=0) == 0.0)
        if const.size:
            k = int(const[0])
            name = columns[k] if columns is not None else f"column {k}"
            raise DataError(
                f"constant covariate {name!r}: its coefficient is not identifiable "
                "from pairwise differences"
            )
        X.setflags(write=False)
        y.setflags(write=False)
        if delta is not None:
            delta.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "columns", columns)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def n_observed(self) -> int:
        return self.n if self.delta is None else int(self.delta.sum())

    def column_index(self, key: int | str) -> int:
        if isinstance(key, str) and not key.lstrip("-").isdigit():
            if self.columns is None or key not in self.columns:
                raise DataError(f"unknown column {key!r}")
            return self.columns.index(key)
        j = int(key)
        if not 0 <= j < self.d:
            raise DataError(f"column index {j} out of range for d={self.d}")
        return j

    def subset(self, rows: Sequence[int] | np.ndarray) -> "Dataset":
        rows = np.asarray(rows)
        delta = None if self.delta is None else self.delta[rows]
        return _trusted(self.y[rows], self.X[rows], delta, self.columns)

    def with_y(self, y: np.ndarray) -> "Dataset":
        return _trusted(np.asarray(y, dtype=np.float64), self.X, self.delta, self.columns)

    @cached_property
    def pairs(self) -> "PairTerms":
        return PairTerms(self)


def _trusted(y, X, delta, columns) -> Dataset:
    # internal constructor for row subsets: skips the constant-column check,
    # which a small CV fold can trip without the full data being degenerate
    ds = object.__new__(Dataset)
    for name, val in (("y", y), ("X", X), ("delta", delta), ("columns", columns)):
        object.__setattr__(ds, name, val)
    if X.shape[0] != y.shape[0]:
        raise DataError("row mismatch in subset")
    return ds


@dataclass(frozen=True)
class PairKernelDiagnostics:
    M: float
    n_pairs_kept: int
    n_pairs_total: int


class PairTerms:
    """Pair bookkeeping for one dataset, reused across many ``beta`` values.

    Holds the observed rows only; normalizing constants use the full ``n``.
    """

    def __init__(self, data: Dataset):
        if data.delta is None:
            keep = None
            y, X = data.y, data.X
        else:
            keep = np.flatnonzero(data.delta == 1)
            y, X = data.y[keep], data.X[keep]
        m = y.shape[0]
        if m < 2:
            raise DataError(f"need at least 2 observed samples, got {m}")
        self.n_total = data.n
        self.n_obs = m
        self.keep = keep
        self.y = y
        # centering on one row leaves every pairwise difference unchanged and
        # makes the O(n d) forms below exactly invariant to exact column shifts
        self.X = X - X[0]
        self.C = data.n * (data.n - 1) / 2.0
        iu, ju = np.triu_indices(m, 1)
        self.iu, self.ju = iu.astype(np.int64), ju.astype(np.int64)
        self.dy = y[self.iu] - y[self.ju]
        # kernels return sums of softplus(t) - log 2; the log 2 part is added
        # back here, exactly -log 2 per pair at beta = 0 for complete data
        self._base = _kernels.LOG2 * (self.iu.shape[0] / self.C)

    @property
    def n_pairs(self) -> int:
        return self.iu.shape[0]

    def t(self, eta: np.ndarray) -> np.ndarray:
        """log R_ij for each kept pair."""
        return -self.dy * (eta[self.iu] - eta[self.ju])

    def loglik_eta(self, eta: np.ndarray) -> float:
        val = -(self._base + _kernels.pair_value(eta, self.dy, self.iu, self.ju) / self.C)
        if not math.isfinite(val):
            raise NumericalError("non-finite composite likelihood")
        return val

    def _scatter(self, a: np.ndarray) -> np.ndarray:
        # sum_{i<j} a_ij (e_i - e_j)
        m = self.n_obs
        return np.bincount(self.iu, a, minlength=m) - np.bincount(self.ju, a, minlength=m)

    def grad_eta(self, eta: np.ndarray) -> np.ndarray:
        """Gradient of the likelihood with respect to the observed-row predictor."""
        a = logistic(self.t(eta)) * self.dy
        return self._scatter(a) / self.C

    def value_grad_eta(self, eta: np.ndarray) -> tuple[float, np.ndarray]:
        total, g = _kernels.pair_value_grad(eta, self.dy, self.iu, self.ju, self.n_obs)
        val = -(self._base + total / self.C)
        if not math.isfinite(val):
            raise NumericalError("non-finite composite likelihood")
        return val, g / self.C

    def eta(self, beta: np.ndarray) -> np.ndarray:
        return self.X @ beta

    def loglik(self, beta: np.ndarray) -> float:
        return self.loglik_eta(self.eta(beta))

    def gradient(self, beta: np.ndarray) -> np.ndarray:
        return self.X.T @ self.grad_eta(self.eta(beta))

    def hessian_eta(self, eta: np.ndarray, cols: np.ndarray | None = None) -> np.ndarray:
        """Hessian at predictor ``eta``, optionally restricted to ``cols``."""
        X = self.X if cols is None else self.X[:, cols]
        V = _kernels.pair_curvature_matrix(eta, self.dy, self.iu, self.ju, self.n_obs)
        H = -(X.T @ (V.sum(axis=1)[:, None] * X - V @ X)) / self.C
        return 0.5 * (H + H.T)

    def hessian(self, beta: np.ndarray) -> np.ndarray:
        return self.hessian_eta(self.eta(beta))

    def hajek(self, beta: np.ndarray) -> np.ndarray:
        t = self.t(self.eta(beta))
        a = logistic(t) * self.dy
        m = self.n_obs
        A = np.zeros((m, m))
        A[self.iu, self.ju] = a
        A -= A.T
        # G_i = sum_{j != i} A_ij (x_i - x_j) / (n - 1)
        G = (A.sum(axis=1)[:, None] * self.X - A @ self.X) / (self.n_total - 1)
        S = (G.T @ G) / self.n_total
        return 0.5 * (S + S.T)

    def max_kernel(self, chunk: int = 8192) -> float:
        M = 0.0
        for s in range(0, self.n_pairs, chunk):
            iu, ju = self.iu[s : s + chunk], self.ju[s : s + chunk]
            dx = np.abs(self.X[iu] - self.X[ju]).max(axis=1)
            M = max(M, float(np.max(np.abs(self.dy[s : s + chunk]) * dx)))
        return M


def _beta(data: Dataset, beta) -> np.ndarray:
    b = np.asarray(beta, dtype=np.float64).reshape(-1)
    if b.shape[0] != data.d:
        raise DataError(f"beta has length {b.shape[0]}, data has {data.d} columns")
    if not np.all(np.isfinite(b)):
        raise DataError("beta has non-finite entries")
    return b


def pairwise_loglik(data: Dataset, beta) -> float:
    """Composite log-likelihood ``-C^{-1} sum_{i<j} w_ij log(1 + R_ij(beta))``."""
    return data.pairs.loglik(_beta(data, beta))


def pairwise_gradient(data: Dataset, beta) -> np.ndarray:
    return data.pairs.gradient(_beta(data, beta))


def pairwise_hessian(data: Dataset, beta) -> np.ndarray:
    """Hessian of the composite log-likelihood; symmetric negative semidefinite."""
    return data.pairs.hessian(_beta(data, beta))


def hajek_sigma(data: Dataset, beta) -> np.ndarray:
    """Plug-in covariance of the Hajek projection of the score U-statistic.

    ``n^{-1} sum_i g_i g_i'`` with ``g_i = (n-1)^{-1} sum_{j != i} w_ij h_ij``
    and ``h_ij`` the gradient kernel.
    """
    return data.pairs.hajek(_beta(data, beta))


def third_order_loglik(data: Dataset, beta) -> float:
    """Triple-wise chromatography likelihood, ``-C(n,3)^{-1} sum log(1 + Q_ijk)``.

    ``1 + Q_ijk`` sums the six local-rank permutation weights of a triple
    relative to the observed assignment; it is evaluated as a log-sum-exp.
    """
    if data.delta is not None:
        raise DataError("third-order likelihood supports complete data only")
    if data.n < 3:
        raise DataError("third-order likelihood needs n >= 3")
    b = _beta(data, beta)
    eta = (data.X - data.X[0]) @ b
    y = data.y
    i, j, k = (np.asarray(c) for c in zip(*itertools.combinations(range(data.n), 3)))
    ei, ej, ek = eta[i], eta[j], eta[k]
    yi, yj, yk = y[i], y[j], y[k]
    expo = np.stack(
        [
            np.zeros_like(ei),
            -(yi - yj) * (ei - ej),
            -(yj - yk) * (ej - ek),
            -(yi - yk) * (ei - ek),
            ei * (yj - yi) + ej * (yk - yj) + ek * (yi - yk),
            ei * (yk - yi) + ej * (yi - yj) + ek * (yj - yk),
        ]
    )
    # centered on log 6, the value of every triple when all responses tie
    log6 = math.log(6.0)
    total = float(np.sum(logsumexp(expo, axis=0) - log6))
    return -(log6 + total / math.comb(data.n, 3))


def rank_probability_oracle(data: Dataset, beta) -> np.ndarray:
    """Full rank-conditional probabilities by enumerating every permutation.

    Entry ``k`` is the probability that the observed responses were assigned
    to rows as ``itertools.permutations(range(n))[k]`` (identity first),
    given the order statistics and covariates.
    """
    if data.delta is not None:
        raise DataError("rank oracle supports complete data only")
    if data.n > ORACLE_MAX_N:
        raise DataError(f"rank oracle enumerates n! permutations; n={data.n} > {ORACLE_MAX_N}")
    b = _beta(data, beta)
    eta = data.X @ b
    perms = np.array(list(itertools.permutations(range(data.n))))
    scores = data.y[perms] @ eta
    return np.exp(scores - logsumexp(scores))


def kernel_diagnostics(data: Dataset) -> PairKernelDiagnostics:
    """Max over kept pairs of ``||(y_i - y_j)(x_i - x_j)||_inf`` and pair counts."""
    total = data.n * (data.n - 1) // 2
    if data.n_observed < 2:
        return PairKernelDiagnostics(M=0.0, n_pairs_kept=0, n_pairs_total=total)
    pt = data.pairs
    return PairKernelDiagnostics(M=pt.max_kernel(), n_pairs_kept=pt.n_pairs, n_pairs_total=total)
