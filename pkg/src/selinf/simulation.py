"""Monte Carlo study of selective p-values and interval coverage after stepwise AIC.

Each iteration draws a design and a response, runs forward stepwise
selection from the intercept-only model, applies a screening rule and, for
screened iterations, computes selective p-values and intervals for every
selected coefficient.  Iteration ``i`` draws from its own stream seeded by
``(seed, i)``, so results do not depend on worker count or scheduling.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from . import linalg
from .errors import InputError, SelinfError
from .inference import analyze_coefficients
from .io import INTERCEPT_NAME, json_float
from .linalg import Dataset
from .selection import stepwise_forward
from .truncation import coefficient_truncations

logger = logging.getLogger(__name__)

SCREENS = ("all_active_selected_with_extras", "all_active_exactly", "none")
CORRELATIONS = ("independent", "equicorrelated")
POOLED_INACTIVE = "inactive (pooled)"


@dataclass(frozen=True)
class SimulationConfig:
    n: int = 150
    p: int = 5
    snr: float = 1.0
    correlation: str = "independent"
    rho: float = 0.4
    beta_active: tuple = (4.0, -2.0, 1.0, -0.5)
    iterations: int = 1000
    target_screened: Optional[int] = None
    seed: int = 1
    variance_modes: tuple = ("known",)
    screen: str = "all_active_selected_with_extras"
    level: float = 0.95
    criterion: str = "AIC"

    def __post_init__(self):
        k = len(self.beta_active)
        if self.p < k:
            raise InputError(f"p={self.p} is smaller than the number of active covariates ({k})")
        if not self.n > k + 1:
            raise InputError(f"n={self.n} must exceed the number of active covariates plus intercept")
        if self.iterations < 1:
            raise InputError("iterations must be >= 1")
        if self.target_screened is not None and self.target_screened < 1:
            raise InputError("target_screened must be >= 1")
        if not self.snr > 0:
            raise InputError("snr must be positive")
        if self.correlation not in CORRELATIONS:
            raise InputError(f"correlation must be one of {CORRELATIONS}")
        if not 0.0 <= self.rho < 1.0:
            raise InputError("rho must lie in [0, 1)")
        if self.screen not in SCREENS:
            raise InputError(f"screen must be one of {SCREENS}")
        for mode in self.variance_modes:
            if mode not in ("known", "reml_plugin"):
                raise InputError(f"unknown variance mode {mode!r}")
        object.__setattr__(self, "beta_active", tuple(float(b) for b in self.beta_active))
        object.__setattr__(self, "variance_modes", tuple(self.variance_modes))

    @property
    def setting(self) -> str:
        corr = "ind" if self.correlation == "independent" else f"cor{self.rho:g}"
        return f"{corr}_n{self.n}_p{self.p}_snr{self.snr:g}"


def generate_dataset(config: SimulationConfig, iteration: int) -> tuple:
    """Design with intercept, response, true mean and noise sd for one iteration."""
    rng = np.random.default_rng([config.seed, iteration])
    n, p = config.n, config.p
    E = rng.standard_normal((n, p))
    if config.correlation == "equicorrelated" and config.rho > 0:
        g = rng.standard_normal((n, 1))
        Z = math.sqrt(config.rho) * g + math.sqrt(1.0 - config.rho) * E
    else:
        Z = E
    beta = np.asarray(config.beta_active)
    mu = Z[:, : beta.size] @ beta
    sigma = math.sqrt(np.var(mu, ddof=1) / config.snr)
    y = mu + sigma * rng.standard_normal(n)
    X = np.column_stack([np.ones(n), Z])
    names = (INTERCEPT_NAME,) + tuple(f"x{j + 1}" for j in range(p))
    return Dataset(y, X, names), mu, sigma


def _role(config: SimulationConfig, column: int) -> str:
    if column == 0:
        return "intercept"
    return "active" if column <= len(config.beta_active) else "inactive"


def is_screened(config: SimulationConfig, selected) -> bool:
    active = set(range(1, len(config.beta_active) + 1))
    chosen = set(selected) - {0}
    if config.screen == "all_active_selected_with_extras":
        return chosen > active
    if config.screen == "all_active_exactly":
        return chosen == active
    return True


def run_iteration(config: SimulationConfig, iteration: int) -> dict:
    data, mu, sigma = generate_dataset(config, iteration)
    path = stepwise_forward(data, config.criterion, start=(0,), record_events=False)
    out = {
        "iteration": iteration,
        "selected": list(data.subset_names(path.selected)),
        "screened": is_screened(config, path.selected),
        "records": [],
    }
    if not out["screened"]:
        return out
    log = stepwise_forward(data, config.criterion, start=(0,))
    selected = log.selected
    V = linalg.test_vectors(data, selected)
    targets = V.T @ mu
    truncations = coefficient_truncations(log.events, V, data.y)
    for mode in config.variance_modes:
        try:
            results = analyze_coefficients(
                data, log, mode, sigma if mode == "known" else None, config.level, truncations=truncations
            )
        except SelinfError as exc:
            logger.warning("iteration %d (%s): %s", iteration, mode, exc)
            results = []
        for res, target in zip(results, targets):
            rec = {
                "variance_mode": mode,
                "variable": res.name,
                "role": _role(config, res.column),
                "estimate": res.estimate,
                "target": float(target),
                "p_value": None,
                "ci_lower": None,
                "ci_upper": None,
                "covered": None,
                "error": res.error,
            }
            if res.test is not None:
                rec["p_value"] = res.test.p_value
            if res.ci is not None:
                rec["ci_lower"], rec["ci_upper"] = res.ci.lower, res.ci.upper
                rec["covered"] = bool(res.ci.lower <= target <= res.ci.upper)
            out["records"].append(rec)
    return out


def _run_chunk(args) -> list:
    config, start, stop = args
    return [run_iteration(config, i) for i in range(start, stop)]


@dataclass
class VariableSummary:
    variable: str
    role: str
    variance_mode: str
    count: int
    p_values: list = field(repr=False)
    ks_distance: Optional[float] = None
    coverage: Optional[float] = None
    coverage_count: int = 0
    errors: int = 0


@dataclass
class SimulationReport:
    config: SimulationConfig
    iterations_run: int
    screened: int
    summaries: list
    records: list = field(repr=False, default_factory=list)

    @property
    def empty(self) -> bool:
        return self.screened == 0

    def summary(self, variable: str, variance_mode: str = "known") -> VariableSummary:
        for s in self.summaries:
            if s.variable == variable and s.variance_mode == variance_mode:
                return s
        raise KeyError((variable, variance_mode))

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["beta_active"] = list(cfg["beta_active"])
        cfg["variance_modes"] = list(cfg["variance_modes"])
        return {
            "schema": "selinf.simulation/1",
            "setting": self.config.setting,
            "config": cfg,
            "conventions": {
                "sigma2": "empirical variance (ddof=1) of the true linear predictor divided by snr, per replicate",
                "equicorrelation": "x = sqrt(rho) g + sqrt(1 - rho) e with shared standard normal g per row",
                "selection": f"forward stepwise {self.config.criterion} from the intercept-only model over all covariates",
                "target": "projection parameter v'mu of the selected model",
            },
            "iterations_run": self.iterations_run,
            "screened_iterations": self.screened,
            "empty_setting": self.empty,
            "variables": [
                {
                    "variable": s.variable,
                    "role": s.role,
                    "variance_mode": s.variance_mode,
                    "count": s.count,
                    "ks_distance": json_float(s.ks_distance) if s.ks_distance is not None else None,
                    "coverage": s.coverage,
                    "coverage_count": s.coverage_count,
                    "errors": s.errors,
                }
                for s in self.summaries
            ],
        }


def ks_uniform(p_values) -> float:
    """Kolmogorov-Smirnov distance of a sample from U[0, 1]."""
    return float(stats.kstest(np.asarray(p_values, dtype=float), "uniform").statistic)


def _summarize(config: SimulationConfig, iterations: list) -> list:
    groups: dict = {}
    order: list = []
    for it in iterations:
        for rec in it["records"]:
            keys = [(rec["variance_mode"], rec["variable"], rec["role"])]
            if rec["role"] == "inactive":
                keys.append((rec["variance_mode"], POOLED_INACTIVE, "inactive"))
            for key in keys:
                if key not in groups:
                    groups[key] = []
                    order.append(key)
                groups[key].append(rec)
    # stable, readable order: mode, then intercept/active/pooled/inactive, then column number
    rank = {"intercept": 0, "active": 1, "inactive": 3}

    def sort_key(key):
        mode, var, role = key
        pooled = var == POOLED_INACTIVE
        num = int(var[1:]) if var.startswith("x") and var[1:].isdigit() else -1
        return (config.variance_modes.index(mode), 2 if pooled else rank[role], num, var)

    out = []
    for key in sorted(order, key=sort_key):
        mode, var, role = key
        recs = groups[key]
        ps = sorted(r["p_value"] for r in recs if r["p_value"] is not None)
        cov = [r["covered"] for r in recs if r["covered"] is not None]
        out.append(VariableSummary(
            variable=var,
            role=role,
            variance_mode=mode,
            count=len(recs),
            p_values=ps,
            ks_distance=ks_uniform(ps) if ps else None,
            coverage=(sum(cov) / len(cov)) if cov else None,
            coverage_count=len(cov),
            errors=sum(1 for r in recs if r["error"] is not None),
        ))
    return out


def run_simulation(config: SimulationConfig, workers: int = 1, chunk_size: int = 200) -> SimulationReport:
    """Run until ``config.iterations`` are done or ``target_screened`` screened ones are found.

    With a target, exactly the screened iterations with the smallest indices
    are kept, so the report is identical for any ``workers``.
    """
    target = config.target_screened
    done: list = []
    screened = 0
    next_start = 0
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while next_start < config.iterations and (target is None or screened < target):
            batch = []
            for _ in range(max(1, workers)):
                if next_start >= config.iterations:
                    break
                stop = min(next_start + chunk_size, config.iterations)
                batch.append((config, next_start, stop))
                next_start = stop
            chunks = pool.map(_run_chunk, batch) if pool else map(_run_chunk, batch)
            for chunk in chunks:
                done.extend(chunk)
            screened = sum(1 for it in done if it["screened"])
            logger.info("%s: %d iterations, %d screened", config.setting, len(done), screened)
    finally:
        if pool:
            pool.shutdown()
    done.sort(key=lambda it: it["iteration"])
    if target is not None and screened >= target:
        count = 0
        for pos, it in enumerate(done):
            count += it["screened"]
            if count == target:
                done = done[: pos + 1]
                break
    kept = [it for it in done if it["screened"]]
    return SimulationReport(
        config=config,
        iterations_run=len(done),
        screened=len(kept),
        summaries=_summarize(config, kept),
        records=kept,
    )


def stratified_pvalues(report: SimulationReport) -> list:
    """Sorted p-values per (variance mode, selected model, variable)."""
    groups: dict = {}
    for it in report.records:
        model = " ".join(it["selected"])
        for rec in it["records"]:
            if rec["p_value"] is not None:
                key = (rec["variance_mode"], model, rec["variable"], rec["role"])
                groups.setdefault(key, []).append(rec["p_value"])
    return [(key, sorted(ps)) for key, ps in sorted(groups.items())]


def write_report(report: SimulationReport, out_dir, stratify_by_model: bool = False) -> dict:
    """Write summary JSON, plot-ready p-value quantiles and per-record CSV; return the paths.

    ``stratify_by_model`` adds a quantile table split by selected model.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    setting = report.config.setting
    paths = {
        "summary": out / "simulation_summary.json",
        "pvalues": out / "simulation_pvalues.csv",
        "records": out / "simulation_records.csv",
    }
    with paths["summary"].open("w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with paths["pvalues"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["setting", "variance_mode", "variable", "role", "nobs", "rank", "uniform_quantile", "p_value"])
        for s in report.summaries:
            m = len(s.p_values)
            for i, pv in enumerate(s.p_values, start=1):
                w.writerow([setting, s.variance_mode, s.variable, s.role, m, i, repr(i / (m + 1)), repr(pv)])
    with paths["records"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ["iteration", "selected", "variance_mode", "variable", "role", "estimate", "target",
                "p_value", "ci_lower", "ci_upper", "covered", "error"]
        w.writerow(cols)
        for it in report.records:
            sel = " ".join(it["selected"])
            for rec in it["records"]:
                w.writerow([it["iteration"], sel] + ["" if rec[c] is None else rec[c] for c in cols[2:]])
    if stratify_by_model:
        paths["pvalues_by_model"] = out / "simulation_pvalues_by_model.csv"
        with paths["pvalues_by_model"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["setting", "variance_mode", "model", "variable", "role", "nobs", "rank",
                        "uniform_quantile", "p_value"])
            for (mode, model, var, role), ps in stratified_pvalues(report):
                m = len(ps)
                for i, pv in enumerate(ps, start=1):
                    w.writerow([setting, mode, model, var, role, m, i, repr(i / (m + 1)), repr(pv)])
    return {k: str(v) for k, v in paths.items()}
