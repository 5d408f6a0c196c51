"""Command-line interface: ``selinf {fit-select,infer,group-test,simulate}``.

Results are JSON (sorted keys) or CSV, written to ``--out-dir`` or stdout.
Exit codes: 0 success, 2 input/validation error, 3 numerical or
inconsistency error.  Errors are reported on stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .errors import InputError, NumericalError, SelinfError
from .events import EventLog
from .inference import analyze_coefficients, analyze_group
from .io import json_float, load_csv, load_event_log, save_event_log
from .selection import backward_significance_hunting, forward_testing, stepwise_forward
from .simulation import SimulationConfig, run_simulation, write_report

SELECTION_SCHEMA = "selinf.selection/1"
INFERENCE_SCHEMA = "selinf.inference/1"
GROUP_SCHEMA = "selinf.group_test/1"

STRATEGIES = ("aic-forward", "bic-forward", "lrt-forward", "f-forward", "backward-significance")
EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _names_to_indices(data, spec: Optional[str], what: str) -> Optional[list]:
    if spec is None:
        return None
    names = [s.strip() for s in spec.split(",") if s.strip()]
    out = []
    for nm in names:
        try:
            out.append(data.column_index(nm))
        except (KeyError, ValueError, InputError):
            raise InputError(f"{what}: unknown column {nm!r}; available: {list(data.names)}") from None
    return out


def _dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, out_dir: Optional[str], filename: str) -> None:
    if out_dir is None:
        sys.stdout.write(text)
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / filename).write_text(text, encoding="utf-8")


def _load(args):
    return load_csv(args.data, args.response, intercept=args.intercept)


def _default_start(data, args) -> tuple:
    start = _names_to_indices(data, args.start, "--start")
    if start is not None:
        return tuple(start)
    if args.strategy == "backward-significance":
        return tuple(range(data.p))
    return (0,) if args.intercept else ()


def _select(data, args) -> EventLog:
    start = _default_start(data, args)
    scope = _names_to_indices(data, args.scope, "--scope")
    s = args.strategy
    if s in ("aic-forward", "bic-forward"):
        crit = args.criterion or ("AIC" if s == "aic-forward" else "BIC")
        return stepwise_forward(data, crit, start=start, scope=scope)
    if s in ("lrt-forward", "f-forward"):
        return forward_testing(data, "LRT" if s == "lrt-forward" else "F", args.alpha, start=start, scope=scope)
    protect = _names_to_indices(data, args.protect, "--protect")
    if protect is None:
        protect = [0] if args.intercept else []
    return backward_significance_hunting(data, start, args.alpha, protect=protect)


def _selection_doc(data, log: EventLog, args) -> dict:
    return {
        "schema": SELECTION_SCHEMA,
        "strategy": args.strategy,
        "dataset_hash": data.content_hash(),
        "n": data.n,
        "columns": list(data.names),
        "selected": list(data.subset_names(log.selected)),
        "trace": list(log.trace),
        "event_count": len(log.events),
        "event_labels": [ev.label for ev in log.events],
    }


def _obtain_log(data, args) -> EventLog:
    if args.event_log:
        return load_event_log(args.event_log, data)
    if args.strategy:
        return _select(data, args)
    raise InputError("give either --event-log (from fit-select) or --strategy for a one-shot run")


def _variance(args) -> tuple:
    if args.variance == "known":
        if args.sigma is None:
            raise InputError("--variance known requires --sigma")
        return "known", args.sigma
    if args.sigma is not None:
        raise InputError("--sigma cannot be combined with --variance plugin")
    return "reml_plugin", None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_fit_select(args) -> int:
    data = _load(args)
    if not args.strategy:
        raise InputError("--strategy is required")
    log = _select(data, args)
    doc = _selection_doc(data, log, args)
    if args.event_log:
        save_event_log(args.event_log, data, log, meta={"strategy": args.strategy})
        doc["event_log"] = str(args.event_log)
    _emit(_dump_json(doc), args.out_dir, "selection.json")
    return EXIT_OK


INFER_COLUMNS = ("variable", "estimate", "p_value", "ci_lower", "ci_upper", "naive_p_value",
                 "naive_ci_lower", "naive_ci_upper", "truncation", "variance_mode", "error")


def _result_row(res, mode: str) -> dict:
    row = {
        "variable": res.name,
        "estimate": res.estimate,
        "p_value": res.test.p_value if res.test else None,
        "ci_lower": res.ci.lower if res.ci else None,
        "ci_upper": res.ci.upper if res.ci else None,
        "naive_p_value": res.naive_p_value,
        "naive_ci_lower": res.naive_ci.lower,
        "naive_ci_upper": res.naive_ci.upper,
        "truncation": res.test.truncation.to_list() if res.test else None,
        "variance_mode": mode,
        "error": res.error,
    }
    return row


def cmd_infer(args) -> int:
    data = _load(args)
    log = _obtain_log(data, args)
    mode, sigma = _variance(args)
    results = analyze_coefficients(data, log, mode, sigma, args.level)
    rows = [_result_row(r, mode) for r in results]
    if args.format == "json":
        doc = {
            "schema": INFERENCE_SCHEMA,
            "dataset_hash": data.content_hash(),
            "selected": list(data.subset_names(log.selected)),
            "level": args.level,
            "variance_mode": mode,
            "sigma": sigma,
            "coefficients": [
                {k: (json_float(v) if isinstance(v, float) else v) for k, v in row.items()}
                | {"truncation": [[json_float(a), json_float(b)] for a, b in row["truncation"]]
                   if row["truncation"] is not None else None}
                for row in rows
            ],
        }
        _emit(_dump_json(doc), args.out_dir, "inference.json")
    else:
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(INFER_COLUMNS)
        for row in rows:
            cells = []
            for col in INFER_COLUMNS:
                val = row[col]
                if col == "truncation" and val is not None:
                    val = " U ".join(f"[{a!r}, {b!r}]" for a, b in val)
                cells.append("" if val is None else val)
            w.writerow(cells)
        _emit(buf.getvalue(), args.out_dir, "inference.csv")
    return EXIT_OK


def cmd_group_test(args) -> int:
    data = _load(args)
    log = _obtain_log(data, args)
    if args.sigma is None:
        raise InputError("the group test requires --sigma")
    group = _names_to_indices(data, args.group, "--group")
    if not group:
        raise InputError("--group must list at least one column")
    res = analyze_group(data, log, group, args.sigma)
    doc = {
        "schema": GROUP_SCHEMA,
        "dataset_hash": data.content_hash(),
        "selected": list(data.subset_names(log.selected)),
        "group": [data.names[j] for j in group],
        "sigma": args.sigma,
        "T_obs": res.statistic,
        "df": res.df,
        "truncation": [[json_float(a), json_float(b)] for a, b in res.truncation.to_list()],
        "p_value": res.p_value,
    }
    _emit(_dump_json(doc), args.out_dir, "group_test.json")
    return EXIT_OK


def cmd_simulate(args) -> int:
    modes = {"known": ("known",), "plugin": ("reml_plugin",), "both": ("known", "reml_plugin")}[args.variance]
    beta = tuple(float(b) for b in args.beta.split(",")) if args.beta else (4.0, -2.0, 1.0, -0.5)
    config = SimulationConfig(
        n=args.n, p=args.p, snr=args.snr,
        correlation="equicorrelated" if args.correlation == "cor" else "independent",
        rho=args.rho, beta_active=beta, iterations=args.iterations,
        target_screened=args.target_screened, seed=args.seed, variance_modes=modes,
        screen=args.screen, level=args.level,
    )
    report = run_simulation(config, workers=args.workers)
    if args.out_dir is None:
        sys.stdout.write(_dump_json(report.to_dict()))
    else:
        write_report(report, args.out_dir, stratify_by_model=args.stratify_by_model)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="headered numeric CSV")
    p.add_argument("--response", required=True, help="name of the response column")
    p.add_argument("--intercept", action="store_true", help="prepend an intercept column named (Intercept)")
    p.add_argument("--out-dir", default=None, help="write results here instead of stdout")


def _selection_args(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--strategy", choices=STRATEGIES, required=required)
    p.add_argument("--criterion", choices=("AIC", "BIC"), default=None,
                   help="override the criterion of a *-forward stepwise strategy")
    p.add_argument("--alpha", type=float, default=0.05, help="level of the tests in lrt/f/backward strategies")
    p.add_argument("--start", default=None, help="comma-separated start model (column names)")
    p.add_argument("--scope", default=None, help="comma-separated candidate columns for forward strategies")
    p.add_argument("--protect", default=None, help="comma-separated columns never dropped by backward-significance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selinf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-select", help="run a selection procedure and record its events")
    _data_args(p)
    _selection_args(p, required=True)
    p.add_argument("--event-log", default=None, help="write the event log (JSON) to this path")
    p.set_defaults(func=cmd_fit_select)

    p = sub.add_parser("infer", help="selective p-values and intervals for the selected coefficients")
    _data_args(p)
    _selection_args(p, required=False)
    p.add_argument("--event-log", default=None, help="event log from fit-select (else one-shot with --strategy)")
    p.add_argument("--variance", choices=("known", "plugin"), default="plugin")
    p.add_argument("--sigma", type=float, default=None, help="known noise standard deviation")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("group-test", help="selective chi test for a group of selected columns")
    _data_args(p)
    _selection_args(p, required=False)
    p.add_argument("--event-log", default=None)
    p.add_argument("--group", required=True, help="comma-separated column names")
    p.add_argument("--sigma", type=float, default=None, help="known noise standard deviation")
    p.set_defaults(func=cmd_group_test)

    p = sub.add_parser("simulate", help="Monte Carlo uniformity and coverage study")
    p.add_argument("--n", type=int, default=150)
    p.add_argument("--p", type=int, default=5)
    p.add_argument("--snr", type=float, default=1.0)
    p.add_argument("--correlation", choices=("ind", "cor"), default="ind")
    p.add_argument("--rho", type=float, default=0.4)
    p.add_argument("--beta", default=None, help="comma-separated active coefficients (default 4,-2,1,-0.5)")
    p.add_argument("--iterations", type=int, default=1000, help="iteration cap")
    p.add_argument("--target-screened", type=int, default=None, help="stop after this many screened iterations")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--variance", choices=("known", "plugin", "both"), default="both")
    p.add_argument("--screen", choices=("all_active_selected_with_extras", "all_active_exactly", "none"),
                   default="all_active_selected_with_extras")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--stratify-by-model", action="store_true", help="also write p-values split by selected model")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SelinfError as exc:
        code = EXIT_NUMERICAL if isinstance(exc, NumericalError) else EXIT_INPUT
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
        return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
