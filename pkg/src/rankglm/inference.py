"""Directional likelihood inference for one coefficient.

With ``beta_hat = (alpha_hat, gamma_hat)`` and a nuisance direction ``w``,
the directional likelihood is the composite likelihood along the line

    beta(alpha) = beta_hat + (alpha - alpha_hat) * u,   u = (1, -w)

(``u`` placed so its 1 sits at the target coordinate).  Its maximizer,
the DLRT statistic ``2n{l(alpha_P) - l(alpha_0)}``, the Hajek-projection
variance ``sigma^2`` and the partial information ``H_{alpha|gamma}`` give
Wald intervals and a chi-square(1) likelihood ratio test.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ._numerics import chi2_1_ppf, chi2_1_sf, logistic, norm_ppf, norm_sf
from .errors import DataError, DegenerateLikelihoodError
from .projector import DirectionFit, HessianCache, estimate_w
from .ranklik import Dataset, hajek_sigma

__all__ = [
    "InferenceReport",
    "DirectionalPath",
    "directional_loglik",
    "max_directional",
    "dlrt_statistic",
    "plugin_variance",
    "wald_interval",
    "dlrt_test",
    "infer",
    "infer_many",
    "holm_adjust",
]


@dataclass
class InferenceReport:
    j: int
    alpha_hat_p: float
    sigma2_hat: float
    h_partial_hat: float
    lambda_n: float
    scaled_lambda_n: float
    wald_ci: tuple[float, float]
    dlrt_pvalue: float
    wald_pvalue: float
    reject_dlrt: bool
    alpha0: float
    omega: float
    wald_z: float = math.nan
    reject_wald: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        out["wald_ci"] = list(self.wald_ci)
        return out


class DirectionalPath:
    """The composite likelihood restricted to the line through ``beta_hat`` along ``u``."""

    def __init__(self, data: Dataset, beta_hat, w_hat, j: int):
        beta_hat = np.asarray(beta_hat, dtype=np.float64).reshape(-1)
        w_hat = np.asarray(w_hat, dtype=np.float64).reshape(-1)
        if beta_hat.shape[0] != data.d:
            raise DataError(f"beta_hat has length {beta_hat.shape[0]}, data has {data.d} columns")
        if w_hat.shape[0] != data.d - 1:
            raise DataError(f"w_hat must have length d-1={data.d - 1}, got {w_hat.shape[0]}")
        if not 0 <= j < data.d:
            raise DataError(f"target index {j} out of range")
        self.data = data
        self.j = j
        self.beta_hat = beta_hat
        self.alpha_hat = float(beta_hat[j])
        u = np.empty(data.d)
        u[j] = 1.0
        u[np.arange(data.d) != j] = -w_hat
        self.u = u
        pt = data.pairs
        self.pt = pt
        self.eta0 = pt.X @ beta_hat
        q = pt.X @ u
        self.dq = q[pt.iu] - q[pt.ju]

    def beta(self, alpha: float) -> np.ndarray:
        return self.beta_hat + (alpha - self.alpha_hat) * self.u

    def _eta(self, alpha):
        return self.eta0 + (alpha - self.alpha_hat) * (self.pt.X @ self.u)

    def value(self, alpha: float) -> float:
        if alpha == self.alpha_hat:
            return self.pt.loglik_eta(self.eta0)
        return self.pt.loglik_eta(self._eta(alpha))

    def derivatives(self, alpha: float) -> tuple[float, float, float]:
        """Value, first and second derivative in ``alpha``."""
        pt = self.pt
        eta = self.eta0 if alpha == self.alpha_hat else self._eta(alpha)
        t = pt.t(eta)
        val = pt.loglik_eta(eta)
        s = logistic(t)
        d1 = float(np.sum(s * pt.dy * self.dq)) / pt.C
        d2 = -float(np.sum(s * logistic(-t) * (pt.dy * self.dq) ** 2)) / pt.C
        return val, d1, d2


def directional_loglik(data: Dataset, beta_hat, w_hat, j: int, alpha: float) -> float:
    return DirectionalPath(data, beta_hat, w_hat, j).value(float(alpha))


def _maximize(path: DirectionalPath, tol: float = 1e-8, max_iter: int = 200) -> float:
    a0 = path.alpha_hat
    _, g, h = path.derivatives(a0)
    if h == 0.0 and g == 0.0:
        raise DegenerateLikelihoodError(
            f"directional likelihood is flat in coordinate {path.j} (e.g. all responses tied)"
        )
    if abs(g) <= tol * (1 + abs(h)):
        return a0
    # bracket [lo, hi] with l'(lo) > 0 >= l'(hi); concavity makes the root unique
    width = max(1.0, abs(a0))
    sign = 1.0 if g > 0 else -1.0
    inner, outer = a0, a0
    for _ in range(60):
        outer = inner + sign * width
        _, g_out, h_out = path.derivatives(outer)
        if g_out == 0.0 and h_out == 0.0:
            # every pair term has saturated: the likelihood only levels off at infinity
            raise DegenerateLikelihoodError(
                f"directional likelihood has no finite maximizer in coordinate {path.j}"
            )
        if sign * g_out <= 0:
            break
        inner = outer
        width *= 2.0
    else:
        raise DegenerateLikelihoodError(
            f"directional likelihood has no finite maximizer in coordinate {path.j}"
        )
    if g_out == 0.0:
        return outer
    lo, hi = (inner, outer) if sign > 0 else (outer, inner)
    alpha = a0 if lo < a0 < hi else 0.5 * (lo + hi)
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    for _ in range(max_iter):
        _, g, h = path.derivatives(alpha)
        if abs(g) <= tol * (1 + abs(h)):
            return _polish(path, alpha, g, h, lo, hi)
        if g > 0:
            lo = alpha
        else:
            hi = alpha
        step = alpha - g / h if h < 0 else math.nan
        if lo < step < hi:
            alpha = step
        else:
            # golden-section fallback inside the current bracket
            alpha = lo + gr * (hi - lo) if g > 0 else hi - gr * (hi - lo)
        if hi - lo <= 1e-15 * max(1.0, abs(alpha)):
            return alpha
    raise DegenerateLikelihoodError(f"directional maximization did not converge for coordinate {path.j}")


def _polish(path: DirectionalPath, alpha: float, g: float, h: float, lo: float, hi: float) -> float:
    """One extra Newton step once converged, kept only if it shrinks the derivative."""
    if not h < 0 or g == 0.0:
        return alpha
    cand = alpha - g / h
    if not lo <= cand <= hi:
        return alpha
    _, g_c, _ = path.derivatives(cand)
    return cand if abs(g_c) < abs(g) else alpha


def max_directional(data: Dataset, beta_hat, w_hat, j: int) -> float:
    """Maximizer of the directional likelihood (safeguarded Newton)."""
    return _maximize(DirectionalPath(data, beta_hat, w_hat, j))


def _lambda_n(path: DirectionalPath, alpha_p: float, alpha0: float) -> float:
    raw = 2.0 * path.data.n * (path.value(alpha_p) - path.value(alpha0))
    return max(raw, 0.0)


def dlrt_statistic(data: Dataset, beta_hat, w_hat, j: int, alpha0: float) -> float:
    path = DirectionalPath(data, beta_hat, w_hat, j)
    return _lambda_n(path, _maximize(path), float(alpha0))


def plugin_variance(
    data: Dataset, beta_hat, w_hat, j: int, cache: HessianCache | None = None, sigma: np.ndarray | None = None
) -> tuple[float, float]:
    """Plug-in ``sigma^2`` and partial information ``H_{alpha|gamma}``."""
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    w = np.asarray(w_hat, dtype=np.float64)
    H = (cache or HessianCache(data, beta_hat)).H
    S = hajek_sigma(data, beta_hat) if sigma is None else sigma
    rest = np.arange(data.d) != j
    s_aa = S[j, j]
    s_ga = S[rest, j]
    s_gg = S[np.ix_(rest, rest)]
    sigma2 = float(s_aa - 2.0 * w @ s_ga + w @ s_gg @ w)
    sigma2 = max(sigma2, 0.0)
    h_partial = float(-H[j, j] + w @ H[rest, j])
    if not h_partial > 0:
        raise DegenerateLikelihoodError(
            f"partial information for coordinate {j} is {h_partial:.3g} (<= 0); the fit is degenerate"
        )
    return sigma2, h_partial


def wald_interval(alpha_hat_p: float, sigma2_hat: float, h_partial_hat: float, n: int, omega: float):
    if not 0 < omega <= 1:
        raise DataError(f"omega must lie in (0, 1], got {omega}")
    zeta = 2.0 * math.sqrt(sigma2_hat) / h_partial_hat * norm_ppf(1.0 - omega / 2.0)
    half = zeta / math.sqrt(n)
    return (alpha_hat_p - half, alpha_hat_p + half)


def _report(path, alpha_p, sigma2, h_partial, alpha0, omega) -> InferenceReport:
    n = path.data.n
    if not sigma2 > 0:
        raise DegenerateLikelihoodError(f"plug-in variance for coordinate {path.j} is zero")
    lam = _lambda_n(path, alpha_p, alpha0)
    scaled = h_partial * lam / (4.0 * sigma2)
    crit = chi2_1_ppf(1.0 - omega)
    z = math.sqrt(n) * (alpha_p - alpha0) * h_partial / (2.0 * math.sqrt(sigma2))
    wald_p = min(1.0, 2.0 * norm_sf(abs(z)))
    return InferenceReport(
        j=path.j,
        alpha_hat_p=alpha_p,
        sigma2_hat=sigma2,
        h_partial_hat=h_partial,
        lambda_n=lam,
        scaled_lambda_n=scaled,
        wald_ci=wald_interval(alpha_p, sigma2, h_partial, n, omega),
        dlrt_pvalue=chi2_1_sf(scaled),
        wald_pvalue=wald_p,
        reject_dlrt=bool(scaled >= crit),
        alpha0=float(alpha0),
        omega=float(omega),
        wald_z=z,
        reject_wald=bool(wald_p <= omega),
    )


def dlrt_test(
    data: Dataset, beta_hat, w_hat, j: int, alpha0: float = 0.0, omega: float = 0.05,
    cache: HessianCache | None = None, sigma: np.ndarray | None = None,
) -> InferenceReport:
    """Directional likelihood ratio test and Wald interval for ``beta_j = alpha0``."""
    if not 0 < omega <= 1:
        raise DataError(f"omega must lie in (0, 1], got {omega}")
    path = DirectionalPath(data, beta_hat, w_hat, j)
    alpha_p = _maximize(path)
    sigma2, h_partial = plugin_variance(data, beta_hat, w_hat, j, cache, sigma)
    return _report(path, alpha_p, sigma2, h_partial, float(alpha0), omega)


def infer(
    data: Dataset, beta_hat, j: int, alpha0: float = 0.0, omega: float = 0.05,
    lambda_s: float | None = None, cache: HessianCache | None = None, sigma: np.ndarray | None = None,
) -> tuple[InferenceReport, DirectionFit]:
    """Estimate the nuisance direction for ``j`` and run :func:`dlrt_test`."""
    cache = cache or HessianCache(data, beta_hat)
    direction = estimate_w(data, beta_hat, j, lambda_s, cache)
    if direction.solver_status != "optimal":
        raise DegenerateLikelihoodError(
            f"nuisance direction for coordinate {j}: {direction.solver_status} {direction.message}".strip()
        )
    return dlrt_test(data, beta_hat, direction.w, j, alpha0, omega, cache, sigma), direction


def infer_many(
    data: Dataset, beta_hat, targets: Sequence[int], alpha0s: Sequence[float] | float = 0.0,
    omega: float = 0.05, lambda_s: float | None = None,
) -> list[InferenceReport | Exception]:
    """Run :func:`infer` per target; failures are returned in place, not raised."""
    if np.isscalar(alpha0s):
        alpha0s = [float(alpha0s)] * len(targets)
    if len(alpha0s) != len(targets):
        raise DataError("need one alpha0 per target")
    cache = HessianCache(data, beta_hat)
    sigma = hajek_sigma(data, beta_hat)
    out: list[InferenceReport | Exception] = []
    for j, a0 in zip(targets, alpha0s):
        try:
            out.append(infer(data, beta_hat, j, a0, omega, lambda_s, cache, sigma)[0])
        except (DegenerateLikelihoodError, DataError) as exc:
            out.append(exc)
    return out


def holm_adjust(pvalues: Sequence[float]) -> np.ndarray:
    """Holm step-down adjusted p-values."""
    p = np.asarray(pvalues, dtype=np.float64)
    m = p.size
    order = np.argsort(p, kind="stable")
    adj = np.empty(m)
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, min(1.0, (m - rank) * p[idx]))
        adj[idx] = running
    return adj
