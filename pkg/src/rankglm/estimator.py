"""Penalized maximum composite likelihood.

Maximizes ``l(beta) - sum_j p_lambda(|beta_j|)`` for the lasso, SCAD and MCP
penalties.  Each weighted-lasso problem is solved either by proximal
Newton ascent (a coordinate-descent solve of the local quadratic model on
the working set, followed by a backtracking sufficient-increase line
search) or by proximal gradient ascent with Barzilai-Borwein trial steps
and the same kind of backtracking test.  Both accept only steps that do not
decrease the objective.  Folded-concave penalties go through local linear approximation (LLA), i.e.
a short sequence of weighted-lasso solves started from the lasso solution.

Each weighted-lasso solve runs on a working set of coordinates and is
certified on the full coordinate set by the KKT conditions before it is
accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .errors import DataError
from .ranklik import Dataset, PairTerms

__all__ = [
    "PenaltyConfig",
    "SolverOptions",
    "FitResult",
    "CVResult",
    "penalty_value",
    "penalty_lla_weight",
    "lambda_max",
    "default_lambda_grid",
    "kkt_residual",
    "fit_penalized",
    "fit_path",
    "cross_validate",
    "fit_cv",
    "make_folds",
]

FAMILIES = ("L1", "SCAD", "MCP")
METHODS = ("newton", "gradient")
_DEFAULT_CONCAVITY = {"L1": None, "SCAD": 3.7, "MCP": 3.0}


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty family, level ``lam`` and concavity (SCAD ``a`` / MCP ``gamma``)."""

    family: str = "L1"
    lam: float = 0.0
    concavity: float | None = None

    def __post_init__(self):
        fam = str(self.family).upper()
        if fam not in FAMILIES:
            raise DataError(f"unknown penalty family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", fam)
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise DataError(f"lambda must be finite and >= 0, got {self.lam}")
        conc = self.concavity if self.concavity is not None else _DEFAULT_CONCAVITY[fam]
        if fam == "SCAD" and not conc > 2:
            raise DataError(f"SCAD needs a > 2, got {conc}")
        if fam == "MCP" and not conc > 1:
            raise DataError(f"MCP needs gamma > 1, got {conc}")
        object.__setattr__(self, "concavity", conc)

    def with_lambda(self, lam: float) -> "PenaltyConfig":
        return PenaltyConfig(self.family, lam, self.concavity)


@dataclass(frozen=True)
class SolverOptions:
    """Solver controls.

    ``step_init`` only applies to ``method="gradient"``; the Newton method
    always tries the full step first.
    """

    max_iter: int = 5000
    tol: float = 1e-6
    step_init: float | None = None
    backtrack_factor: float = 0.5
    lla_rounds: int = 2
    method: str = "newton"

    def __post_init__(self):
        if self.method not in METHODS:
            raise DataError(f"unknown solver method {self.method!r}; expected one of {METHODS}")
        if self.max_iter < 1:
            raise DataError("max_iter must be >= 1")
        if not self.tol > 0:
            raise DataError("tol must be > 0")
        if not 0 < self.backtrack_factor < 1:
            raise DataError("backtrack_factor must lie in (0, 1)")
        if self.lla_rounds < 1:
            raise DataError("lla_rounds must be >= 1")
        if self.step_init is not None and not self.step_init > 0:
            raise DataError("step_init must be > 0")


@dataclass
class FitResult:
    beta: np.ndarray
    objective: float
    iterations: int
    converged: bool
    lambda_used: float
    active_set: list[int]
    kkt: float = math.nan
    last_step: float = math.nan
    objective_trace: list[float] = field(default_factory=list, repr=False)


class CVResult(NamedTuple):
    lambda_best: float
    cv_curve: np.ndarray
    lambda_grid: np.ndarray | None = None


def penalty_value(penalty: PenaltyConfig, t):
    """Penalty ``p_lambda(|t|)``, elementwise."""
    lam, a = penalty.lam, penalty.concavity
    u = np.abs(np.asarray(t, dtype=np.float64))
    if penalty.family == "L1":
        out = lam * u
    elif penalty.family == "SCAD":
        mid = (2 * a * lam * u - u**2 - lam**2) / (2 * (a - 1))
        out = np.where(u <= lam, lam * u, np.where(u <= a * lam, mid, lam**2 * (a + 1) / 2))
    else:
        out = np.where(u <= a * lam, lam * u - u**2 / (2 * a), a * lam**2 / 2)
    return out if out.ndim else float(out)


def penalty_lla_weight(penalty: PenaltyConfig, t):
    """Derivative ``p'_lambda(|t|)`` used as the LLA weight; lies in [0, lambda]."""
    lam, a = penalty.lam, penalty.concavity
    u = np.abs(np.asarray(t, dtype=np.float64))
    if penalty.family == "L1":
        out = np.full_like(u, lam)
    elif penalty.family == "SCAD":
        out = np.where(u <= lam, lam, np.maximum(a * lam - u, 0.0) / (a - 1))
    else:
        out = np.maximum(lam - u / a, 0.0)
    return out if out.ndim else float(out)


def lambda_max(data: Dataset) -> float:
    """Smallest lambda at which zero is the lasso solution."""
    return float(np.max(np.abs(data.pairs.gradient(np.zeros(data.d)))))


def default_lambda_grid(data: Dataset, num: int = 50, ratio: float = 0.01) -> np.ndarray:
    lmax = lambda_max(data)
    if lmax == 0.0:
        return np.array([0.0])
    return np.geomspace(lmax, ratio * lmax, num)


def kkt_residual(grad: np.ndarray, beta: np.ndarray, weights) -> float:
    """Sup-norm violation of the weighted-lasso stationarity conditions."""
    w = np.broadcast_to(np.asarray(weights, dtype=np.float64), beta.shape)
    act = beta != 0
    r_act = np.abs(grad[act] - w[act] * np.sign(beta[act]))
    r_in = np.maximum(np.abs(grad[~act]) - w[~act], 0.0)
    return float(max(r_act.max(initial=0.0), r_in.max(initial=0.0)))


def _soft(z, thr):
    return np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)


def _initial_step(pt: PairTerms) -> float:
    # curvature of each pair is largest at beta = 0, so the beta = 0 Hessian
    # diagonal bounds every coordinate's curvature
    diag = np.zeros(pt.X.shape[1])
    sq = pt.dy**2 / 4.0
    for s in range(0, pt.n_pairs, 8192):
        iu, ju = pt.iu[s : s + 8192], pt.ju[s : s + 8192]
        diag += sq[s : s + 8192] @ (pt.X[iu] - pt.X[ju]) ** 2
    top = float(diag.max()) / pt.C
    return 1.0 / top if top > 0 else 1.0


class _Solver:
    """Weighted-lasso solver bound to one dataset."""

    def __init__(self, data: Dataset, opts: SolverOptions, step: float | None = None):
        self.pt = data.pairs
        self.d = data.d
        self.opts = opts
        self.step0 = opts.step_init or step or _initial_step(self.pt)

    def full_grad(self, beta):
        return self.pt.X.T @ self.pt.grad_eta(self.pt.X @ beta)

    def solve(self, weights: np.ndarray, beta0: np.ndarray, trace: list | None = None):
        opts = self.opts
        X = self.pt.X
        beta = beta0.copy()
        g_full = self.full_grad(beta)
        ws = (beta != 0) | (np.abs(g_full) > weights)
        total_iter = 0
        last = math.inf
        while True:
            idx = np.flatnonzero(ws)
            b_w, it, last = self._inner(X[:, idx], weights[idx], beta[idx], opts.max_iter - total_iter, trace)
            total_iter += it
            beta = np.zeros(self.d)
            beta[idx] = b_w
            g_full = self.full_grad(beta)
            kkt = kkt_residual(g_full, beta, weights)
            viol = (~ws) & (np.abs(g_full) > weights)
            if viol.any() and total_iter < opts.max_iter:
                ws |= viol
                continue
            converged = last <= opts.tol and kkt <= 10 * opts.tol
            if not converged and total_iter < opts.max_iter and last <= opts.tol:
                # small steps but KKT not yet met: tighten by continuing
                b_w, it, last = self._inner(
                    X[:, idx], weights[idx], beta[idx], opts.max_iter - total_iter, trace, tol_scale=0.01
                )
                total_iter += it
                beta = np.zeros(self.d)
                beta[idx] = b_w
                g_full = self.full_grad(beta)
                kkt = kkt_residual(g_full, beta, weights)
                converged = kkt <= 10 * opts.tol
            return beta, total_iter, converged, kkt, last

    def _inner(self, Xw, w, beta, budget, trace, tol_scale=1.0):
        if self.opts.method == "newton":
            return self._inner_newton(Xw, w, beta, budget, trace, tol_scale)
        return self._inner_gradient(Xw, w, beta, budget, trace, tol_scale)

    def _neg_hessian(self, eta, Xw):
        pt = self.pt
        V = _kernels.pair_curvature_matrix(eta, pt.dy, pt.iu, pt.ju, pt.n_obs)
        Q = Xw.T @ (V.sum(axis=1)[:, None] * Xw - V @ Xw) / pt.C
        return 0.5 * (Q + Q.T)

    def _inner_newton(self, Xw, w, beta, budget, trace, tol_scale=1.0):
        pt, opts = self.pt, self.opts
        tol = opts.tol * tol_scale
        if Xw.shape[1] == 0:
            return beta, 0, 0.0
        eta = Xw @ beta
        f, geta = pt.value_grad_eta(eta)
        g = Xw.T @ geta
        F = f - float(w @ np.abs(beta))
        last = math.inf
        it = 0
        while it < budget:
            it += 1
            Q = self._neg_hessian(eta, Xw)
            # tiny ridge keeps the model strictly concave on flat directions
            Q[np.diag_indices_from(Q)] += 1e-10 * max(float(np.max(np.diag(Q))), 1e-300)
            # the model solve only needs to be accurate relative to the step
            cd_tol = 0.01 * max(tol, min(last, 1.0) ** 2)
            target = _kernels.lasso_cd_quadratic(Q, g, beta, w, cd_tol, 10_000)
            D = target - beta
            if not np.any(D):
                last = 0.0
                break
            gain = float(g @ D) - float(w @ (np.abs(target) - np.abs(beta)))
            # below this the objective cannot resolve the change; the model is
            # exact to that order and the full step is taken
            resolvable = gain > 1e-14 * max(1.0, abs(F))
            s = 1.0
            while True:
                cand = beta + s * D
                eta_c = Xw @ cand
                f_c, geta_c = pt.value_grad_eta(eta_c)
                F_c = f_c - float(w @ np.abs(cand))
                if not resolvable or (F_c >= F + 1e-4 * s * gain and F_c >= F):
                    break
                s *= opts.backtrack_factor
                if s < 1e-12:
                    return beta, it, last
            last = s * float(np.max(np.abs(D)))
            beta, eta, f, F = cand, eta_c, f_c, F_c
            g = Xw.T @ geta_c
            if trace is not None:
                trace.append(F)
            if last <= tol:
                break
        return beta, it, last

    def _inner_gradient(self, Xw, w, beta, budget, trace, tol_scale=1.0):
        pt, opts = self.pt, self.opts
        tol = opts.tol * tol_scale
        if Xw.shape[1] == 0:
            return beta, 0, 0.0
        eta = Xw @ beta
        f, geta = pt.value_grad_eta(eta)
        g = Xw.T @ geta
        pen = float(w @ np.abs(beta))
        step = self.step0
        smax = 1e4 * self.step0
        last = math.inf
        it = 0
        while it < budget:
            it += 1
            while True:
                cand = _soft(beta + step * g, step * w)
                diff = cand - beta
                eta_c = Xw @ cand
                f_c, geta_c = pt.value_grad_eta(eta_c)
                # ascent version of the proximal majorization test
                if f_c >= f + g @ diff - (diff @ diff) / (2 * step) - 1e-15 * abs(f):
                    break
                step *= opts.backtrack_factor
                if step < 1e-20:
                    return beta, it, last
            g_c = Xw.T @ geta_c
            pen_c = float(w @ np.abs(cand))
            if trace is not None:
                trace.append(f_c - pen_c)
            last = float(np.max(np.abs(diff))) if diff.size else 0.0
            # Barzilai-Borwein trial step for the next iteration
            yk = g - g_c
            sy = float(diff @ yk)
            step = float(np.clip((diff @ diff) / sy, 1e-3 * self.step0, smax)) if sy > 0 else min(2 * step, smax)
            beta, f, g, pen = cand, f_c, g_c, pen_c
            if last <= tol:
                break
        return beta, it, last


def _objective(pt: PairTerms, beta, penalty: PenaltyConfig) -> float:
    return pt.loglik(beta) - float(np.sum(penalty_value(penalty, beta)))


def fit_penalized(
    data: Dataset,
    penalty: PenaltyConfig,
    opts: SolverOptions | None = None,
    beta0: np.ndarray | None = None,
    standardize: bool = False,
    _solver: _Solver | None = None,
) -> FitResult:
    """Penalized composite-likelihood estimate.

    For SCAD/MCP the first LLA round is the lasso at the same lambda and
    later rounds reweight by ``p'_lambda(|beta|)``; ``lla_rounds=1`` therefore
    returns the lasso solution.  Non-convergence is reported through
    ``converged=False`` rather than raised.
    """
    opts = opts or SolverOptions()
    if standardize:
        sd = data.X.std(axis=0)
        scaled = Dataset(data.y, data.X / sd, data.delta, data.columns)
        b0 = None if beta0 is None else np.asarray(beta0) * sd
        res = fit_penalized(scaled, penalty, opts, b0, standardize=False)
        res.beta = res.beta / sd
        res.objective = _objective(data.pairs, res.beta, penalty)
        return res
    solver = _solver or _Solver(data, opts)
    beta = np.zeros(data.d) if beta0 is None else np.array(beta0, dtype=np.float64)
    trace: list[float] = []
    weights = np.full(data.d, penalty.lam)
    rounds = 1 if penalty.family == "L1" else opts.lla_rounds
    iters = 0
    for r in range(rounds):
        if r > 0:
            new_w = penalty_lla_weight(penalty, beta)
            if np.array_equal(new_w, weights):
                break
            weights = new_w
        beta, it, converged, kkt, last = solver.solve(weights, beta, trace)
        iters += it
    return FitResult(
        beta=beta,
        objective=_objective(data.pairs, beta, penalty),
        iterations=iters,
        converged=bool(converged),
        lambda_used=penalty.lam,
        active_set=[int(j) for j in np.flatnonzero(beta)],
        kkt=kkt,
        last_step=last,
        objective_trace=trace,
    )


def fit_path(
    data: Dataset,
    family: str,
    lambdas: Sequence[float],
    opts: SolverOptions | None = None,
    concavity: float | None = None,
) -> list[FitResult]:
    """Warm-started fits along ``lambdas`` (expected in decreasing order)."""
    opts = opts or SolverOptions()
    solver = _Solver(data, opts)
    beta = np.zeros(data.d)
    out = []
    for lam in lambdas:
        res = fit_penalized(data, PenaltyConfig(family, float(lam), concavity), opts, beta, _solver=solver)
        beta = res.beta
        out.append(res)
    return out


def make_folds(n: int, K: int, seed: int) -> list[np.ndarray]:
    """Seeded random partition of ``range(n)`` into ``K`` folds."""
    if K < 2:
        raise DataError("K must be >= 2")
    perm = np.random.default_rng(seed).permutation(n)
    folds = [np.sort(f) for f in np.array_split(perm, K)]
    if min(len(f) for f in folds) < 2:
        raise DataError(f"n={n} too small for {K} folds of at least 2 samples")
    return folds


def _pair_sum(pt: PairTerms, beta) -> float:
    # total negative log-likelihood over kept pairs, unnormalized
    return -pt.loglik(beta) * pt.C


class _FoldPaths:
    """Warm-started per-fold paths that can be continued to smaller lambdas."""

    def __init__(self, data: Dataset, family: str, K: int, seed: int, opts, concavity,
                 cv_pairs: str = "within"):
        if cv_pairs not in ("touching", "within"):
            raise DataError(f"cv_pairs must be 'touching' or 'within', got {cv_pairs!r}")
        self.full = data.pairs
        self.family = family
        self.opts = opts or SolverOptions()
        self.concavity = concavity
        self.folds = []
        for fold in make_folds(data.n, K, seed):
            sub = data.subset(np.setdiff1d(np.arange(data.n), fold))
            if sub.n_observed < 2:
                raise DataError("a training fold has fewer than 2 observed samples")
            if cv_pairs == "within":
                test = data.subset(fold)
                held = test.pairs.n_pairs if test.n_observed >= 2 else 0
            else:
                test = None
                held = self.full.n_pairs - sub.pairs.n_pairs
            self.folds.append([sub, _Solver(sub, self.opts), np.zeros(data.d), held, test])

    def scores(self, lambdas: np.ndarray) -> np.ndarray:
        """CV losses for decreasing ``lambdas``, continuing from the previous call."""
        cv = np.zeros(len(lambdas))
        for state in self.folds:
            sub, solver, beta, held, test = state
            for k, lam in enumerate(lambdas):
                pen = PenaltyConfig(self.family, float(lam), self.concavity)
                beta = fit_penalized(sub, pen, self.opts, beta, _solver=solver).beta
                if not held:
                    continue
                if test is not None:
                    cv[k] += _pair_sum(test.pairs, beta) / held
                else:
                    cv[k] += (_pair_sum(self.full, beta) - _pair_sum(sub.pairs, beta)) / held
            state[2] = beta
        return cv


def _pick(grid: np.ndarray, cv: np.ndarray) -> float:
    best = cv.min()
    tied = np.flatnonzero(cv <= best + 1e-12 * abs(best))
    return float(grid[tied[np.argmax(grid[tied])]])


def cross_validate(
    data: Dataset,
    penalty_family: str = "L1",
    lambda_grid: Sequence[float] | None = None,
    K: int = 5,
    seed: int = 0,
    opts: SolverOptions | None = None,
    concavity: float | None = None,
    cv_pairs: str = "within",
) -> CVResult:
    """K-fold cross-validation of lambda with the held-out pair loss.

    For fold k the model is fit without the fold's samples.  With
    ``cv_pairs="within"`` the score is the average negative log
    pair-likelihood over pairs with both members in fold k.  With
    ``cv_pairs="touching"`` it averages over every pair with at least one
    member in fold k (full-data loss minus training loss); those cross pairs
    reuse fitted training responses, which rewards overfitting.  Fold scores
    are summed and ties go to the larger lambda.
    """
    grid = default_lambda_grid(data) if lambda_grid is None else np.asarray(lambda_grid, dtype=np.float64)
    if grid.size == 0 or np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise DataError("lambda grid must be nonempty, finite and nonnegative")
    order = np.argsort(-grid, kind="stable")
    cv = np.empty(grid.size)
    cv[order] = _FoldPaths(data, penalty_family, K, seed, opts, concavity, cv_pairs).scores(grid[order])
    return CVResult(_pick(grid, cv), cv, grid)


def fit_cv(
    data: Dataset,
    penalty_family: str = "L1",
    K: int = 5,
    seed: int = 0,
    n_lambda: int = 50,
    lambda_ratio: float = 0.01,
    opts: SolverOptions | None = None,
    concavity: float | None = None,
    lambda_floor: float | None = 1e-4,
    cv_pairs: str = "within",
) -> tuple[FitResult, CVResult]:
    """Select lambda by cross-validation, then refit on the full data.

    When the CV minimum sits at the smallest grid value, the grid is
    continued downward with the same log spacing, ten points at a time,
    until the minimum is interior or ``lambda_floor * lambda_max`` is
    reached (``lambda_floor=None`` disables this).  The refit follows the
    warm-started path from ``lambda_max`` down to the selected value.
    """
    grid = default_lambda_grid(data, n_lambda, lambda_ratio)
    paths = _FoldPaths(data, penalty_family, K, seed, opts, concavity, cv_pairs)
    cv = paths.scores(grid)
    if lambda_floor is not None and grid.size > 1 and grid[-1] > 0:
        ratio = grid[-1] / grid[-2]
        floor = lambda_floor * grid[0] * (1 - 1e-9)
        while _pick(grid, cv) == grid[-1]:
            ext = grid[-1] * ratio ** np.arange(1, 11)
            ext = ext[ext >= floor]
            if ext.size == 0:
                break
            cv = np.concatenate([cv, paths.scores(ext)])
            grid = np.concatenate([grid, ext])
    lam = _pick(grid, cv)
    stop = int(np.flatnonzero(grid == lam)[0])
    fit = fit_path(data, penalty_family, grid[: stop + 1], opts, concavity)[-1]
    return fit, CVResult(lam, cv, grid)
