"""Monte Carlo harness: data generators, selection mechanisms, type I error and power.

Covariates are Gaussian with Toeplitz covariance ``rho^|i-j|``; the first
``s_true`` coefficients equal ``mu`` and the rest are zero.  Responses come
from a unit-variance linear model or a logistic model.  Each replicate
draws its own independent stream from ``SeedSequence([seed, replicate])``,
so results do not depend on execution order or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import DataError, NumericalError
from .estimator import SolverOptions, fit_cv, fit_path
from .inference import infer
from .projector import default_lambda_s
from .ranklik import Dataset

__all__ = [
    "SimDesign",
    "MissingScenario",
    "ExperimentResult",
    "PipelineConfig",
    "generate",
    "apply_missingness",
    "run_replicate",
    "simulate_records",
    "summarize",
    "run_type1",
    "run_power",
    "power_curve",
    "toeplitz_factor",
    "MODELS",
    "MISSING_KINDS",
]

MODELS = ("linear_gaussian", "logistic")
MISSING_KINDS = ("none", "linear_s1", "linear_s2", "logistic_s1", "logistic_s2")
_MISSING_DEFAULTS = {
    "none": {},
    "linear_s1": {"threshold": 0.0},
    "linear_s2": {"threshold": 0.0, "prob_above": 0.2},
    "logistic_s1": {"base": 0.2, "slope": 0.6},
    "logistic_s2": {"base": 0.2, "slope": 0.8},
}
MAX_FAILURE_FRACTION = 0.02


@dataclass(frozen=True)
class SimDesign:
    model: str = "linear_gaussian"
    n: int = 100
    d: int = 200
    mu: float = 0.0
    rho: float = 0.6
    s_true: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise DataError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.n < 4:
            raise DataError("n must be >= 4")
        if self.d < self.s_true or self.s_true < 0:
            raise DataError("need 0 <= s_true <= d")
        if not -1 < self.rho < 1:
            raise DataError("rho must lie in (-1, 1)")

    @property
    def beta_star(self) -> np.ndarray:
        b = np.zeros(self.d)
        b[: self.s_true] = self.mu
        return b


@dataclass(frozen=True)
class MissingScenario:
    kind: str = "none"
    params: dict = field(default_factory=dict)
    max_retries: int = 20

    def __post_init__(self):
        if self.kind not in MISSING_KINDS:
            raise DataError(f"unknown missingness kind {self.kind!r}; expected one of {MISSING_KINDS}")
        unknown = set(self.params) - set(_MISSING_DEFAULTS[self.kind])
        if unknown:
            raise DataError(f"unknown parameters for {self.kind}: {sorted(unknown)}")

    def param(self, key: str) -> float:
        return float(self.params.get(key, _MISSING_DEFAULTS[self.kind][key]))

    @property
    def family(self) -> str | None:
        if self.kind == "none":
            return None
        return "linear_gaussian" if self.kind.startswith("linear") else "logistic"


@dataclass
class ExperimentResult:
    rejection_rate: float
    replicates: int
    monte_carlo_se: float
    method: str = "dlrt"
    failures: int = 0
    per_replicate: list[dict] | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PipelineConfig:
    """Per-replicate analysis settings.

    ``lambda_mode="cv"`` re-selects lambda by K-fold CV in every replicate;
    ``"fixed"`` uses ``fixed_lambda`` (fast mode for smoke runs).
    """

    penalty: str = "L1"
    K: int = 5
    n_lambda: int = 50
    lambda_ratio: float = 0.01
    lambda_floor: float | None = 1e-4
    cv_pairs: str = "within"
    lambda_mode: str = "cv"
    fixed_lambda: float | None = None
    lambda_s: float | None = None
    solver: SolverOptions = SolverOptions()

    def __post_init__(self):
        if self.lambda_mode not in ("cv", "fixed"):
            raise DataError("lambda_mode must be 'cv' or 'fixed'")
        if self.cv_pairs not in ("within", "touching"):
            raise DataError("cv_pairs must be 'within' or 'touching'")
        if self.lambda_mode == "fixed" and self.fixed_lambda is None:
            raise DataError("lambda_mode='fixed' needs fixed_lambda")


@lru_cache(maxsize=16)
def toeplitz_factor(d: int, rho: float) -> np.ndarray:
    """Lower Cholesky factor of the Toeplitz covariance ``rho^|i-j|``."""
    idx = np.arange(d)
    S = rho ** np.abs(np.subtract.outer(idx, idx))
    L = np.linalg.cholesky(S)
    L.setflags(write=False)
    return L


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def generate(design: SimDesign, stream: int = 0) -> Dataset:
    """Draw one dataset; identical ``(design, stream)`` gives identical data."""
    rng = _rng(design.seed, stream, 0)
    L = toeplitz_factor(design.d, float(design.rho))
    X = rng.standard_normal((design.n, design.d)) @ L.T
    eta = X @ design.beta_star
    if design.model == "linear_gaussian":
        y = eta + rng.standard_normal(design.n)
    else:
        p = 1.0 / (1.0 + np.exp(-eta))
        y = (rng.random(design.n) < p).astype(np.float64)
    return Dataset(y, X)


def _observe_prob(y: np.ndarray, scenario: MissingScenario) -> np.ndarray:
    kind = scenario.kind
    if kind == "linear_s1":
        return (y <= scenario.param("threshold")).astype(np.float64)
    if kind == "linear_s2":
        return np.where(y > scenario.param("threshold"), scenario.param("prob_above"), 1.0)
    return scenario.param("base") + scenario.param("slope") * y


def apply_missingness(data: Dataset, scenario: MissingScenario, seed: int = 0) -> Dataset:
    """Attach an observation indicator drawn from the selection mechanism."""
    if scenario.kind == "none":
        return Dataset(data.y, data.X, np.ones(data.n), data.columns)
    binary = bool(np.all((data.y == 0.0) | (data.y == 1.0)))
    if scenario.family == "logistic" and not binary:
        raise DataError(f"{scenario.kind} needs a binary response")
    prob = _observe_prob(data.y, scenario)
    if np.any((prob < 0) | (prob > 1)):
        raise DataError(f"{scenario.kind} produced selection probabilities outside [0, 1]")
    rng = _rng(seed, 1)
    for _ in range(scenario.max_retries):
        delta = (rng.random(data.n) < prob).astype(np.float64)
        if delta.sum() >= 2:
            return Dataset(data.y, data.X, delta, data.columns)
    raise DataError(f"fewer than 2 observed samples after {scenario.max_retries} draws")


def _select_fit(data: Dataset, cfg: PipelineConfig, seed: int):
    if cfg.lambda_mode == "fixed":
        grid = np.array([cfg.fixed_lambda])
        path = fit_path(data, cfg.penalty, grid, cfg.solver)
        return path[-1]
    fit, _ = fit_cv(data, cfg.penalty, cfg.K, seed, cfg.n_lambda, cfg.lambda_ratio, cfg.solver,
                    lambda_floor=cfg.lambda_floor, cv_pairs=cfg.cv_pairs)
    return fit


def run_replicate(
    design: SimDesign,
    scenario: MissingScenario,
    r: int,
    alpha0: float,
    target_j: int = 0,
    omega: float = 0.05,
    cfg: PipelineConfig = PipelineConfig(),
) -> dict:
    """One full pipeline pass: draw, select, fit, project, test."""
    for attempt in range(scenario.max_retries):
        data = generate(design, stream=r if attempt == 0 else r + (attempt << 32))
        try:
            data = apply_missingness(data, scenario, seed=design.seed * 7919 + r + (attempt << 32))
            break
        except DataError:
            continue
    else:
        raise NumericalError("could not draw a replicate with >= 2 observed samples")
    fit = _select_fit(data, cfg, seed=r)
    lam_s = cfg.lambda_s if cfg.lambda_s is not None else default_lambda_s(data.n, data.d)
    report, direction = infer(data, fit.beta, target_j, alpha0, omega, lam_s)
    return {
        "replicate": r,
        "lambda": fit.lambda_used,
        "converged": fit.converged,
        "n_active": len(fit.active_set),
        "w_l1": float(np.abs(direction.w).sum()),
        "n_observed": data.n_observed,
        "beta_target": float(fit.beta[target_j]),
        "beta_error_l2": float(np.linalg.norm(fit.beta - design.beta_star)),
        **{k: v for k, v in report.to_dict().items() if k not in ("j", "omega")},
    }


def _safe_replicate(args) -> dict:
    fn, design, scenario, r, alpha0, target_j, omega, cfg = args
    try:
        return fn(design, scenario, r, alpha0, target_j, omega, cfg)
    except (NumericalError, DataError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return {"replicate": r, "failed": True, "error": f"{type(exc).__name__}: {exc}"}


def simulate_records(
    design: SimDesign,
    scenario: MissingScenario | None = None,
    alpha0: float = 0.0,
    target_j: int = 0,
    R: int = 500,
    omega: float = 0.05,
    cfg: PipelineConfig = PipelineConfig(),
    n_jobs: int = 1,
    replicate_fn: Callable[..., dict] = run_replicate,
    progress: Callable[[int, int], None] | None = None,
) -> list[dict]:
    """Per-replicate records, in replicate order regardless of ``n_jobs``."""
    if R < 1:
        raise DataError("R must be >= 1")
    scenario = scenario or MissingScenario()
    if scenario.family is not None and scenario.family != design.model:
        raise DataError(f"scenario {scenario.kind} does not match model {design.model}")
    jobs = [(replicate_fn, design, scenario, r, alpha0, target_j, omega, cfg) for r in range(R)]
    if n_jobs == 1:
        out = []
        for k, job in enumerate(jobs):
            out.append(_safe_replicate(job))
            if progress:
                progress(k + 1, R)
        return out
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_safe_replicate, jobs, chunksize=max(1, R // (4 * n_jobs))))


def summarize(records: Sequence[dict], method: str = "dlrt", keep_records: bool = False) -> ExperimentResult:
    """Rejection rate over successful replicates; too many failures is an error."""
    if method not in ("dlrt", "wald"):
        raise DataError("method must be 'dlrt' or 'wald'")
    ok = [rec for rec in records if not rec.get("failed")]
    failures = len(records) - len(ok)
    if failures > 0 and failures >= MAX_FAILURE_FRACTION * len(records):
        errs = sorted({rec["error"] for rec in records if rec.get("failed")})[:3]
        raise NumericalError(f"{failures}/{len(records)} replicates failed: {errs}")
    if not ok:
        raise NumericalError("no successful replicates")
    key = "reject_dlrt" if method == "dlrt" else "reject_wald"
    p = sum(bool(rec[key]) for rec in ok) / len(ok)
    return ExperimentResult(
        rejection_rate=p,
        replicates=len(ok),
        monte_carlo_se=math.sqrt(p * (1 - p) / len(ok)),
        method=method,
        failures=failures,
        per_replicate=list(records) if keep_records else None,
    )


def run_type1(
    design: SimDesign,
    scenario: MissingScenario | None = None,
    alpha0_equals_mu: bool = True,
    target_j: int = 0,
    R: int = 500,
    omega: float = 0.05,
    method: str = "dlrt",
    cfg: PipelineConfig = PipelineConfig(),
    n_jobs: int = 1,
    replicate_fn: Callable[..., dict] = run_replicate,
) -> ExperimentResult:
    """Rejection rate of ``H0: beta_j = mu`` (or ``= 0``) across R replicates."""
    alpha0 = design.mu if alpha0_equals_mu else 0.0
    recs = simulate_records(design, scenario, alpha0, target_j, R, omega, cfg, n_jobs, replicate_fn)
    return summarize(recs, method)


def power_curve(
    design: SimDesign,
    mu_grid: Sequence[float],
    target_j: int = 0,
    R: int = 300,
    omega: float = 0.05,
    method: str = "dlrt",
    scenario: MissingScenario | None = None,
    cfg: PipelineConfig = PipelineConfig(),
    n_jobs: int = 1,
) -> list[ExperimentResult]:
    """Rejection rates of ``H0: beta_j = 0`` as the true signal ``mu`` varies."""
    if len(mu_grid) == 0:
        raise DataError("mu grid must be nonempty")
    return [
        run_type1(replace(design, mu=float(mu)), scenario, False, target_j, R, omega, method, cfg, n_jobs)
        for mu in mu_grid
    ]


def run_power(
    design: SimDesign,
    mu_grid: Sequence[float],
    target_j: int = 0,
    R: int = 300,
    omega: float = 0.05,
    method: str = "dlrt",
    scenario: MissingScenario | None = None,
    cfg: PipelineConfig = PipelineConfig(),
    n_jobs: int = 1,
) -> np.ndarray:
    res = power_curve(design, mu_grid, target_j, R, omega, method, scenario, cfg, n_jobs)
    return np.array([r.rejection_rate for r in res])
