"""Rank composite likelihood fits and single-coefficient tests from CSV files.

    rankglm fit       data.csv [--lambda L | CV options] [--out fit.json]
    rankglm test      data.csv --target x1 --target x2 [--alpha0 0] [--adjust holm]
    rankglm ci        data.csv --target x1 [--omega 0.05]
    rankglm simulate  config.json [--out result.json] [--csv curve.csv]
    rankglm diagnose  data.csv

Exit codes: 0 success, 2 input or validation error, 3 numerical failure.
JSON floats carry 17 significant digits so every value round-trips exactly.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Sequence

import numpy as np

from .errors import DataError, NumericalError
from .estimator import FitResult, PenaltyConfig, SolverOptions, fit_cv, fit_path
from .inference import holm_adjust, infer_many
from .projector import default_lambda_s
from .ranklik import Dataset, kernel_diagnostics
from .simlab import MissingScenario, PipelineConfig, SimDesign, simulate_records, summarize

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

MISSING_TOKENS = frozenset({"", "NA", "NaN", "nan"})


# ---------------------------------------------------------------- CSV input


def read_csv(path: str, y_col: str = "y", delta_col: str | None = None) -> Dataset:
    """Load a dataset; every column other than the response and indicator is a covariate.

    Empty (or NA) cells are allowed only in the response column and only
    without an indicator column; the indicator is then ``1{y present}``.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh, strict=True)
        try:
            header = next(reader, None)
            if header is None:
                raise DataError(f"{path}: empty file (a header row is required)")
            header = [h.strip() for h in header]
            rows = []
            for row in reader:
                if not row:
                    continue
                if len(row) != len(header):
                    raise DataError(
                        f"{path}: line {reader.line_num}: expected {len(header)} fields, got {len(row)}"
                    )
                rows.append((reader.line_num, row))
        except csv.Error as exc:
            raise DataError(f"{path}: line {reader.line_num}: {exc}") from None
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: not valid UTF-8 ({exc.reason})") from None
    dupes = sorted({h for h in header if header.count(h) > 1})
    if dupes:
        raise DataError(f"{path}: duplicate column names {dupes}")
    if y_col not in header:
        raise DataError(f"{path}: response column {y_col!r} not in header {header}")
    if delta_col is not None and delta_col not in header:
        raise DataError(f"{path}: indicator column {delta_col!r} not in header {header}")
    if delta_col == y_col:
        raise DataError("response and indicator must be different columns")
    yi = header.index(y_col)
    di = header.index(delta_col) if delta_col is not None else None
    cov = [k for k in range(len(header)) if k not in (yi, di)]
    if not cov:
        raise DataError(f"{path}: no covariate columns")

    n = len(rows)
    vals = np.empty((n, len(header)))
    for r, (line, row) in enumerate(rows):
        for k, cell in enumerate(row):
            cell = cell.strip()
            if cell in MISSING_TOKENS:
                if k == yi and di is None:
                    vals[r, k] = math.nan
                    continue
                where = "the response column with an indicator column given" if k == yi else "a non-response column"
                raise DataError(f"{path}: line {line}, column {k + 1} ({header[k]!r}): missing value in {where}")
            try:
                vals[r, k] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: line {line}, column {k + 1} ({header[k]!r}): cannot parse {cell!r} as a number"
                ) from None
    y = vals[:, yi]
    if di is not None:
        delta = vals[:, di]
    elif np.isnan(y).any():
        delta = (~np.isnan(y)).astype(np.float64)
    else:
        delta = None
    return Dataset(y, vals[:, cov], delta, tuple(header[k] for k in cov))


# ------------------------------------------------------------- JSON output


def _num(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    return s if any(c in s for c in ".en") else s + ".0"


def to_json(obj: Any, indent: int = 0) -> str:
    """JSON text with floats written to 17 significant digits; NaN/Inf become null."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + to_json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = (f"{inner}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items())
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(payload: Any, out: str | None):
    text = to_json(payload) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def beta_digest(beta: np.ndarray) -> str:
    """SHA-256 of the little-endian float64 bytes of ``beta``."""
    return hashlib.sha256(np.ascontiguousarray(beta, dtype="<f8").tobytes()).hexdigest()


# ---------------------------------------------------------------- configs


def _check_keys(raw: dict, allowed: Sequence[str], where: str):
    if not isinstance(raw, dict):
        raise DataError(f"{where} must be a JSON object")
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise DataError(f"unknown keys in {where}: {unknown}; allowed: {sorted(allowed)}")


def _solver_from(raw: dict | None) -> SolverOptions:
    raw = raw or {}
    _check_keys(raw, [f.name for f in fields(SolverOptions)], "solver")
    try:
        return SolverOptions(**raw)
    except TypeError as exc:
        raise DataError(f"solver: {exc}") from None


@dataclass
class RunConfig:
    """Settings for ``fit``, ``test`` and ``ci``; JSON keys match field names.

    ``lambda`` fixes the penalty level; when it is null the level is chosen
    by ``cv_folds``-fold cross-validation over ``n_lambda`` log-spaced values,
    extended downward toward ``lambda_floor * lambda_max`` while the CV
    minimum sits at the smallest value tried (null disables the extension).
    ``cv_pairs`` picks the held-out pairs that are scored: ``"within"`` a
    fold, or ``"touching"`` it.
    """

    y: str = "y"
    delta: str | None = None
    penalty: str = "L1"
    lam: float | None = None
    concavity: float | None = None
    cv_folds: int = 5
    seed: int = 0
    n_lambda: int = 50
    lambda_ratio: float = 0.01
    lambda_floor: float | None = 1e-4
    cv_pairs: str = "within"
    solver: SolverOptions = field(default_factory=SolverOptions)
    targets: list = field(default_factory=list)
    alpha0: list = field(default_factory=lambda: [0.0])
    omega: float = 0.05
    adjust: str = "none"
    lambda_s: float | None = None

    KEYS = ("y", "delta", "penalty", "lambda", "concavity", "cv_folds", "seed", "n_lambda",
            "lambda_ratio", "lambda_floor", "cv_pairs", "solver", "targets", "alpha0", "omega", "adjust", "lambda_s")

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        _check_keys(raw, cls.KEYS, "config")
        kw = {("lam" if k == "lambda" else k): v for k, v in raw.items()}
        if "solver" in kw:
            kw["solver"] = _solver_from(kw["solver"])
        if "alpha0" in kw and not isinstance(kw["alpha0"], list):
            kw["alpha0"] = [kw["alpha0"]]
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self):
        PenaltyConfig(self.penalty, self.lam or 0.0, self.concavity)
        if self.cv_folds < 2:
            raise DataError("cv_folds must be >= 2")
        if self.n_lambda < 1 or not 0 < self.lambda_ratio < 1:
            raise DataError("n_lambda must be >= 1 and lambda_ratio in (0, 1)")
        if self.lambda_floor is not None and not 0 < self.lambda_floor < 1:
            raise DataError("lambda_floor must be null or in (0, 1)")
        if self.cv_pairs not in ("within", "touching"):
            raise DataError("cv_pairs must be 'within' or 'touching'")
        if not 0 < self.omega <= 1:
            raise DataError(f"omega must lie in (0, 1], got {self.omega}")
        if self.adjust not in ("none", "holm"):
            raise DataError("adjust must be 'none' or 'holm'")
        if self.lambda_s is not None and not self.lambda_s >= 0:
            raise DataError("lambda_s must be >= 0")
        for a in self.alpha0:
            if not isinstance(a, (int, float)) or isinstance(a, bool) or not math.isfinite(a):
                raise DataError(f"alpha0 entries must be finite numbers, got {a!r}")

    def to_dict(self) -> dict:
        d = {("lambda" if k == "lam" else k): v for k, v in asdict(self).items()}
        return {k: d[k] for k in self.KEYS}


SIM_KEYS = ("design", "scenario", "pipeline", "mu_grid", "alpha0", "R", "omega", "target", "method")


@dataclass
class SimConfig:
    """Settings for ``simulate``.

    ``alpha0`` is ``"mu"`` (test the true value: type I error) or ``"zero"``
    (test ``beta_j = 0``: power); one result row is produced per ``mu_grid``
    entry, and ``method`` picks the test reported in the plot CSV.
    """

    design: SimDesign
    scenario: MissingScenario
    pipeline: PipelineConfig
    mu_grid: list
    alpha0: str = "mu"
    R: int = 500
    omega: float = 0.05
    target: int = 0
    method: str = "dlrt"

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        _check_keys(raw, SIM_KEYS, "config")
        design_raw = raw.get("design", {})
        _check_keys(design_raw, [f.name for f in fields(SimDesign)], "design")
        scen_raw = raw.get("scenario", {})
        _check_keys(scen_raw, [f.name for f in fields(MissingScenario)], "scenario")
        pipe_raw = dict(raw.get("pipeline", {}))
        _check_keys(pipe_raw, [f.name for f in fields(PipelineConfig)], "pipeline")
        pipe_raw["solver"] = _solver_from(pipe_raw.get("solver"))
        try:
            design = SimDesign(**design_raw)
            scenario = MissingScenario(**scen_raw)
            pipeline = PipelineConfig(**pipe_raw)
        except TypeError as exc:
            raise DataError(str(exc)) from None
        mu_grid = raw.get("mu_grid", [design.mu])
        if not isinstance(mu_grid, list) or not mu_grid:
            raise DataError("mu_grid must be a nonempty list")
        cfg = cls(design, scenario, pipeline, [float(m) for m in mu_grid],
                  **{k: raw[k] for k in ("alpha0", "R", "omega", "target", "method") if k in raw})
        if cfg.alpha0 not in ("mu", "zero"):
            raise DataError("alpha0 must be 'mu' or 'zero'")
        if cfg.method not in ("dlrt", "wald"):
            raise DataError("method must be 'dlrt' or 'wald'")
        if not isinstance(cfg.R, int) or cfg.R < 1:
            raise DataError("R must be a positive integer")
        if not 0 < cfg.omega <= 1:
            raise DataError("omega must lie in (0, 1]")
        if not 0 <= cfg.target < design.d:
            raise DataError(f"target {cfg.target} out of range for d={design.d}")
        return cfg

    def to_dict(self) -> dict:
        pipe = asdict(self.pipeline)
        return {
            "design": asdict(self.design),
            "scenario": asdict(self.scenario),
            "pipeline": pipe,
            "mu_grid": self.mu_grid,
            "alpha0": self.alpha0,
            "R": self.R,
            "omega": self.omega,
            "target": self.target,
            "method": self.method,
        }


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


# --------------------------------------------------------------- commands


def _run_config(args) -> RunConfig:
    raw = _load_json(args.config) if args.config else {}
    overrides = {
        "y": args.y, "delta": args.delta, "penalty": args.penalty, "lambda": args.lam,
        "concavity": args.concavity, "cv_folds": args.cv_folds, "seed": args.seed,
        "n_lambda": args.n_lambda, "lambda_ratio": args.lambda_ratio,
    }
    for key in ("targets", "alpha0", "omega", "adjust", "lambda_s"):
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    solver = dict(raw.get("solver") or {})
    for key in ("max_iter", "tol", "method"):
        v = getattr(args, f"solver_{key}")
        if v is not None:
            solver[key] = v
    raw["solver"] = solver
    return RunConfig.from_dict(raw)


def _fit(data: Dataset, cfg: RunConfig) -> tuple[FitResult, dict]:
    if cfg.lam is not None:
        fit = fit_path(data, cfg.penalty, [float(cfg.lam)], cfg.solver, cfg.concavity)[-1]
        return fit, {"mode": "fixed"}
    fit, cv = fit_cv(data, cfg.penalty, cfg.cv_folds, cfg.seed, cfg.n_lambda, cfg.lambda_ratio,
                     cfg.solver, cfg.concavity, cfg.lambda_floor, cfg.cv_pairs)
    return fit, {"mode": "cv", "folds": cfg.cv_folds, "seed": cfg.seed, "cv_curve": cv.cv_curve}


def _fit_payload(data: Dataset, fit: FitResult, cfg: RunConfig, selection: dict) -> dict:
    names = data.columns
    return {
        "n": data.n,
        "d": data.d,
        "n_observed": data.n_observed,
        "columns": list(names),
        "penalty": cfg.penalty,
        "concavity": PenaltyConfig(cfg.penalty, 0.0, cfg.concavity).concavity,
        "lambda_used": fit.lambda_used,
        "selection": selection,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "kkt": fit.kkt,
        "objective": fit.objective,
        "active_set": fit.active_set,
        "active_names": [names[j] for j in fit.active_set],
        "beta": fit.beta,
        "beta_sha256": beta_digest(fit.beta),
    }


def cmd_fit(args) -> int:
    cfg = _run_config(args)
    data = read_csv(args.csv, cfg.y, cfg.delta)
    fit, selection = _fit(data, cfg)
    _emit(_fit_payload(data, fit, cfg, selection), args.out)
    if not fit.converged:
        print(f"warning: solver did not converge (kkt={fit.kkt:.3g})", file=sys.stderr)
    return EXIT_OK


def _beta_in(path: str, data: Dataset) -> tuple[np.ndarray, float]:
    raw = _load_json(path)
    if not isinstance(raw, dict) or "beta" not in raw:
        raise DataError(f"{path}: expected a fit JSON object with a 'beta' field")
    beta = np.array([math.nan if v is None else v for v in raw["beta"]], dtype=np.float64)
    if beta.shape != (data.d,):
        raise DataError(f"{path}: beta has length {beta.size}, data has {data.d} covariates")
    if not np.all(np.isfinite(beta)):
        raise DataError(f"{path}: beta has non-finite entries")
    if raw.get("columns") is not None and list(raw["columns"]) != list(data.columns):
        raise DataError(f"{path}: fitted columns do not match the CSV header")
    return beta, float(raw.get("lambda_used", math.nan))


def _table(rows: list[dict], cols: list[tuple[str, str]]) -> str:
    cells = [[h for h, _ in cols]]
    for r in rows:
        line = []
        for _, key in cols:
            v = r.get(key, "")
            if isinstance(v, float):
                v = f"{v:.6g}"
            elif isinstance(v, (list, tuple)):
                v = "[" + ", ".join(f"{x:.6g}" for x in v) + "]"
            line.append(str(v))
        cells.append(line)
    widths = [max(len(c[k]) for c in cells) for k in range(len(cols))]
    return "\n".join("  ".join(c[k].rjust(widths[k]) for k in range(len(cols))) for c in cells)


def _inference(args, kind: str) -> int:
    cfg = _run_config(args)
    data = read_csv(args.csv, cfg.y, cfg.delta)
    if not cfg.targets:
        raise DataError("at least one --target is required")
    targets = [data.column_index(t) for t in cfg.targets]
    alpha0 = cfg.alpha0
    if len(alpha0) == 1:
        alpha0 = alpha0 * len(targets)
    if len(alpha0) != len(targets):
        raise DataError(f"{len(alpha0)} alpha0 values for {len(targets)} targets")
    if args.beta_in:
        beta, lam = _beta_in(args.beta_in, data)
        fit_info = {"source": args.beta_in, "lambda_used": lam}
    else:
        fit, selection = _fit(data, cfg)
        beta = fit.beta
        fit_info = {"lambda_used": fit.lambda_used, "converged": fit.converged, "selection": selection["mode"]}
    lam_s = cfg.lambda_s if cfg.lambda_s is not None else default_lambda_s(data.n, data.d)
    reports = infer_many(data, beta, targets, alpha0, cfg.omega, lam_s)

    ok = [k for k, r in enumerate(reports) if not isinstance(r, Exception)]
    pvals = np.array([reports[k].dlrt_pvalue for k in ok])
    adjusted = holm_adjust(pvals) if cfg.adjust == "holm" else pvals
    rows = []
    for k, (j, rep) in enumerate(zip(targets, reports)):
        base = {"column": data.columns[j], "j": j, "alpha0": alpha0[k]}
        if isinstance(rep, Exception):
            rows.append({**base, "error": f"{type(rep).__name__}: {rep}"})
            continue
        p_adj = float(adjusted[ok.index(k)])
        reject = bool(p_adj <= cfg.omega) if cfg.adjust == "holm" else rep.reject_dlrt
        rows.append({**base, **rep.to_dict(), "p_adjusted": p_adj, "reject": reject})
    payload = {
        "command": kind,
        "n": data.n,
        "d": data.d,
        "n_observed": data.n_observed,
        "omega": cfg.omega,
        "adjust": cfg.adjust,
        "lambda_s": lam_s,
        "fit": fit_info,
        "beta_sha256": beta_digest(beta),
        "results": rows,
    }
    _emit(payload, args.out)
    if kind == "test":
        cols = [("column", "column"), ("alpha0", "alpha0"), ("alpha_hat_p", "alpha_hat_p"),
                ("scaled_lambda_n", "scaled_lambda_n"), ("p_dlrt", "dlrt_pvalue"),
                ("p_adjusted", "p_adjusted"), ("p_wald", "wald_pvalue"), ("reject", "reject"), ("error", "error")]
    else:
        cols = [("column", "column"), ("alpha_hat_p", "alpha_hat_p"), ("wald_ci", "wald_ci"),
                ("sigma2_hat", "sigma2_hat"), ("h_partial_hat", "h_partial_hat"), ("error", "error")]
    print(_table(rows, cols), file=sys.stderr)
    return EXIT_NUMERIC if len(ok) < len(reports) else EXIT_OK


def cmd_test(args) -> int:
    return _inference(args, "test")


def cmd_ci(args) -> int:
    return _inference(args, "ci")


def cmd_simulate(args) -> int:
    cfg = SimConfig.from_dict(_load_json(args.config_path))
    threads = 1 if args.deterministic else max(1, args.threads or os.cpu_count() or 1)
    rows = []
    for mu in cfg.mu_grid:
        design = SimDesign(**{**asdict(cfg.design), "mu": mu})
        a0 = mu if cfg.alpha0 == "mu" else 0.0
        recs = simulate_records(design, cfg.scenario, a0, cfg.target, cfg.R, cfg.omega, cfg.pipeline,
                                n_jobs=threads)
        dl, wa = summarize(recs, "dlrt"), summarize(recs, "wald")
        chosen = dl if cfg.method == "dlrt" else wa
        rows.append({
            "mu": mu,
            "alpha0": a0,
            "replicates": chosen.replicates,
            "failures": chosen.failures,
            "rejection_rate": chosen.rejection_rate,
            "monte_carlo_se": chosen.monte_carlo_se,
            "dlrt_rate": dl.rejection_rate,
            "dlrt_se": dl.monte_carlo_se,
            "wald_rate": wa.rejection_rate,
            "wald_se": wa.monte_carlo_se,
        })
    _emit({"config": cfg.to_dict(), "results": rows}, args.out)
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mu", "power", "se"])
            for r in rows:
                w.writerow([_num(r["mu"]), _num(r["rejection_rate"]), _num(r["monte_carlo_se"])])
    return EXIT_OK


def cmd_diagnose(args) -> int:
    data = read_csv(args.csv, args.y, args.delta)
    diag = kernel_diagnostics(data)
    _emit({"n": data.n, "d": data.d, "n_observed": data.n_observed, **asdict(diag)}, args.out)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _data_flags(p: argparse.ArgumentParser):
    p.add_argument("csv", help="input CSV with a header row")
    p.add_argument("--y", default=None, help="response column (default 'y')")
    p.add_argument("--delta", default=None, help="0/1 observation indicator column")
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")


def _fit_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", default=None, help="JSON run configuration; flags override it")
    p.add_argument("--penalty", choices=["L1", "SCAD", "MCP"], default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="fixed penalty level (skips CV)")
    p.add_argument("--concavity", type=float, default=None, help="SCAD a or MCP gamma")
    p.add_argument("--cv-folds", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="CV fold seed")
    p.add_argument("--n-lambda", type=int, default=None)
    p.add_argument("--lambda-ratio", type=float, default=None)
    p.add_argument("--max-iter", dest="solver_max_iter", type=int, default=None)
    p.add_argument("--tol", dest="solver_tol", type=float, default=None)
    p.add_argument("--solver", dest="solver_method", choices=["newton", "gradient"], default=None)


def _inference_flags(p: argparse.ArgumentParser, with_alpha0: bool):
    p.add_argument("--target", dest="targets", action="append", default=None,
                   help="column name or 0-based index; repeatable")
    if with_alpha0:
        p.add_argument("--alpha0", action="append", type=float, default=None,
                       help="null value; one per target, or one for all")
        p.add_argument("--adjust", choices=["none", "holm"], default=None)
    p.add_argument("--omega", type=float, default=None, help="test level / 1 - coverage")
    p.add_argument("--lambda-s", type=float, default=None, help="Dantzig tuning level")
    p.add_argument("--beta-in", default=None, help="fit JSON whose beta is used instead of refitting")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankglm",
        description=__doc__.split("\n\n")[0],
        epilog="exit codes: 0 success, 2 input or validation error, 3 numerical failure",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="worker processes for simulations (default: available cores)")
    parser.add_argument("--deterministic", action="store_true",
                        help="run sequentially; outputs are identical either way")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="penalized composite-likelihood fit")
    _data_flags(p)
    _fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("test", help="directional likelihood ratio tests")
    _data_flags(p)
    _fit_flags(p)
    _inference_flags(p, with_alpha0=True)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("ci", help="Wald confidence intervals")
    _data_flags(p)
    _fit_flags(p)
    _inference_flags(p, with_alpha0=False)
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("simulate", help="Monte Carlo rejection rates from a JSON config")
    p.add_argument("config_path")
    p.add_argument("--out", default=None, help="result JSON (default stdout)")
    p.add_argument("--csv", default=None, help="plot-ready CSV with columns mu, power, se")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("diagnose", help="pair-kernel diagnostics")
    p.add_argument("csv")
    p.add_argument("--y", default="y")
    p.add_argument("--delta", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
