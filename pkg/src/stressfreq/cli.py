"""Command-line entry point.

Exit codes:
  0  success
  1  unexpected internal error
  2  usage error (unknown flag, bad value, inverted window)
  3  input file not found
  4  schema violation in an input file
  5  infeasible or degenerate request (budget, k, fatigue domain, empty cohort)

Failures print a single JSON line ``{"error": ..., "exit": ..., "message": ...}``
to stderr. Every command that writes files also writes one run manifest.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .budget import FIELDS, solve, validate
from .categories import ALL
from .errors import ToolkitError
from .estimator import extrapolate_observed, fit_all_categories
from .events import build_cohort, emit, ingest
from .simulator import FatigueModel, SimulationConfig, simulate
from .synth import SynthSpec, generate
from .tables import (
    REPORT_COLUMNS,
    read_observed,
    read_points,
    read_report,
    write_plot_data,
    write_points,
    write_report,
    write_report_records,
)


class UsageError(Exception):
    exit_code = 2
    code = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _k_list(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k list {text!r}") from None


def _add_sim_flags(p):
    g = p.add_argument_group("simulation")
    g.add_argument("--days", type=_positive_int, default=1000, help="simulated days per participant")
    g.add_argument("--eta", type=float, default=2.5, help="candidate events per hour")
    g.add_argument("--omega", type=float, default=12.0, help="wear hours per day")
    g.add_argument("--alpha", type=float, default=1.0, help="response rate")
    g.add_argument("--k-values", type=_k_list, default=None, help="comma list of k (default 1..36, feasible only)")
    g.add_argument("--policy", choices=("debiased", "moods-baseline"), default="debiased")
    g.add_argument("--window-start", type=float, default=480.0, help="minutes since midnight")
    g.add_argument("--window-end", type=float, default=1200.0, help="minutes since midnight")
    g.add_argument("--fatigue-b", type=float, default=FatigueModel.b)
    g.add_argument("--fatigue-m", type=float, default=FatigueModel.m)
    g.add_argument("--fatigue-k-ref", type=float, default=FatigueModel.k_ref)
    g.add_argument("--threads", type=_positive_int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="stressfreq",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("budget", help="solve the prompt-budget identity for one unknown")
    for name in FIELDS:
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--manifest", type=Path)

    p = sub.add_parser("synth", help="generate a synthetic event table")
    p.add_argument("--spec", type=Path, help="JSON file of SynthSpec fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("simulate", help="simulate prompted days and write efficiency points")
    p.add_argument("--input", type=Path, required=True, help="event table")
    p.add_argument("--out", type=Path, required=True, help="points file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_sim_flags(p)

    p = sub.add_parser("fit", help="fit saturation curves to a points file")
    p.add_argument("--input", type=Path, required=True, help="points file")
    p.add_argument("--out", type=Path, required=True, help="report file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--observed", type=Path, help="category,observed_per_day table")
    p.add_argument("--wear-hours", type=float, default=7.2)
    p.add_argument("--plot-data", type=Path, help="write (k, y_model, y_simulated) series here")

    p = sub.add_parser("report", help="merge a fit report with observed-rate extrapolation")
    p.add_argument("--fit", type=Path, required=True, help="report written by `fit`")
    p.add_argument("--observed", type=Path, required=True, help="category,observed_per_day table")
    p.add_argument("--wear-hours", type=float, default=7.2)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("pipeline", help="synth/ingest -> simulate -> fit -> report")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--synth-default", action="store_true", help="use the default synthetic cohort")
    src.add_argument("--spec", type=Path, help="synthetic cohort spec (JSON)")
    src.add_argument("--input", type=Path, help="event table")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--observed", type=Path)
    p.add_argument("--wear-hours", type=float, default=7.2)
    _add_sim_flags(p)
    return parser


# --------------------------------------------------------------------------


def _sim_config(args) -> SimulationConfig:
    return SimulationConfig(
        days_per_participant=args.days,
        eta=args.eta,
        omega=args.omega,
        alpha=args.alpha,
        k_values=args.k_values,
        seed=args.seed,
        policy=args.policy,
        fatigue=FatigueModel(args.fatigue_b, args.fatigue_m, args.fatigue_k_ref),
        threads=args.threads,
    )


def _ext(fmt: str) -> str:
    return ".json" if fmt == "json" else ".csv"


def _observed_weekly(path, wear_hours) -> dict:
    if path is None:
        return {}
    return {c: extrapolate_observed(v, wear_hours) for c, v in read_observed(path).items()}


def _simulate_points(events, args, window):
    cohort, summary = build_cohort(events, window)
    print(summary.describe())
    return simulate(cohort, _sim_config(args)), summary


def _write_structured(report, path: Path, fmt: str) -> list[Path]:
    """Write the report in ``fmt`` and, for CSV, a JSON twin next to it."""
    write_report(report, path, fmt)
    out = [path]
    if fmt == "csv":
        twin = path.with_suffix(".json")
        write_report(report, twin, "json")
        out.append(twin)
    return out


def cmd_budget(args, manifest):
    known = {n: getattr(args, n) for n in FIELDS if getattr(args, n) is not None}
    missing = [n for n in FIELDS if n not in known]
    if len(missing) != 1:
        raise UsageError(f"give exactly four of {['--' + f for f in FIELDS]}; missing {missing}")
    unknown = missing[0]
    budget = solve(unknown, **known)
    problems = validate(budget)
    print(f"{unknown} = {getattr(budget, unknown)!r}")
    print(
        "rho={rho!r} eta={eta!r} omega={omega!r} k={k!r} alpha={alpha!r}".format(**budget.as_dict())
        + (" (valid)" if not problems else f" (violations: {problems})")
    )
    print(json.dumps({"solved": unknown, "budget": budget.as_dict(), "violations": problems}))
    manifest["config"] = budget.as_dict()
    return [args.manifest] if args.manifest else None


def cmd_synth(args, manifest):
    spec = SynthSpec.load(args.spec) if args.spec else SynthSpec()
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    emit(generate(spec), args.out, args.format)
    manifest["config"] = asdict(spec)
    manifest["seed"] = spec.seed
    manifest["inputs"] = [str(args.spec)] if args.spec else []
    return [args.out]


def cmd_simulate(args, manifest):
    window = (args.window_start, args.window_end)
    result, summary = _simulate_points(ingest(args.input), args, window)
    write_points(result.points, args.out, args.format)
    manifest["config"] = _config_dict(result.config, window)
    manifest["cohort"] = {"retained": summary.n_retained, "participants": summary.n_participants}
    manifest["seed"] = args.seed
    manifest["inputs"] = [str(args.input)]
    return [args.out]


def cmd_fit(args, manifest):
    series = read_points(args.input)
    report = fit_all_categories(series, _observed_weekly(args.observed, args.wear_hours))
    outputs = _write_structured(report, args.out, args.format)
    if args.plot_data:
        fits = {r.category: r.fit for r in report.rows if r.fit is not None}
        write_plot_data(fits, series, args.plot_data, args.format)
        outputs.append(args.plot_data)
    manifest["inputs"] = [str(args.input)] + ([str(args.observed)] if args.observed else [])
    manifest["config"] = {"wear_hours": args.wear_hours}
    return outputs


def cmd_report(args, manifest):
    rows = read_report(args.fit)
    observed = _observed_weekly(args.observed, args.wear_hours)
    by_label = {("All Stressors" if k == ALL else str(k)): v for k, v in observed.items()}
    for row in rows:
        if row["category"] in by_label:
            row["weekly_observed"] = by_label[row["category"]]
    write_report_records([{c: _coerce(row.get(c)) for c in REPORT_COLUMNS} for row in rows], args.out, args.format)
    manifest["inputs"] = [str(args.fit), str(args.observed)]
    manifest["config"] = {"wear_hours": args.wear_hours}
    return [args.out]


def _coerce(v):
    """Report cells read back from CSV arrive as strings; restore numbers and blanks."""
    if v is None or v == "":
        return None
    if isinstance(v, str):
        low = v.lower()
        if low in ("true", "false"):
            return low == "true"
        try:
            return int(v)
        except ValueError:
            pass
        try:
            return float(v)
        except ValueError:
            return v
    return v


def cmd_pipeline(args, manifest):
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    ext = _ext(args.format)
    outputs = []
    inputs = []
    if args.input:
        events = ingest(args.input)
        inputs.append(str(args.input))
        manifest["source"] = "input"
    else:
        spec = SynthSpec.load(args.spec) if args.spec else SynthSpec()
        spec = replace(spec, seed=args.seed)
        events = generate(spec)
        events_path = out / f"events{ext}"
        emit(events, events_path, args.format)
        outputs.append(events_path)
        manifest["synth"] = asdict(spec)
        manifest["source"] = "synth"
        if args.spec:
            inputs.append(str(args.spec))
    window = (args.window_start, args.window_end)
    result, summary = _simulate_points(events, args, window)
    points_path = out / f"points{ext}"
    write_points(result.points, points_path, args.format)
    outputs.append(points_path)
    series = read_points(points_path)
    report = fit_all_categories(series, _observed_weekly(args.observed, args.wear_hours))
    outputs += _write_structured(report, out / f"report{ext}", args.format)
    fits = {r.category: r.fit for r in report.rows if r.fit is not None}
    plot_path = out / f"plot_data{ext}"
    write_plot_data(fits, series, plot_path, args.format)
    outputs.append(plot_path)
    for row in report.rows:
        S = "-" if row.fit is None else f"{row.fit.S:.3f}"
        a = "-" if row.fit is None else f"{row.fit.a:.3f}"
        wk = "-" if row.weekly_model is None else f"{row.weekly_model:.2f}"
        print(f"{row.label:<28} S={S:>7} a={a:>6} weekly={wk:>7} {row.error}")
    manifest["config"] = _config_dict(result.config, window)
    manifest["cohort"] = {"retained": summary.n_retained, "participants": summary.n_participants}
    manifest["seed"] = args.seed
    manifest["inputs"] = inputs + ([str(args.observed)] if args.observed else [])
    manifest["manifest_path"] = str(out / "manifest.json")
    return outputs


def _config_dict(cfg: SimulationConfig, window) -> dict:
    d = asdict(cfg)
    d["k_values"] = list(cfg.resolved_k_values())
    d["events_per_day"] = cfg.events_per_day
    d["window"] = list(window)
    return d


COMMANDS = {
    "budget": cmd_budget,
    "synth": cmd_synth,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "report": cmd_report,
    "pipeline": cmd_pipeline,
}


def _manifest_path(args, outputs) -> Path | None:
    if args.command == "pipeline":
        return args.out_dir / "manifest.json"
    if args.command == "budget":
        return args.manifest
    primary = Path(outputs[0])
    return primary.with_name(primary.name + ".manifest.json")


def run(argv=None) -> int:
    started = time.perf_counter()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        manifest = {
            "subcommand": args.command,
            "argv": argv,
            "version": __version__,
            "started_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        outputs = COMMANDS[args.command](args, manifest)
        if outputs is not None:
            path = _manifest_path(args, outputs)
            manifest["outputs"] = [str(p) for p in outputs if p != path]
            manifest["duration_s"] = round(time.perf_counter() - started, 3)
            path.write_text(json.dumps(manifest, indent=1, default=str) + "\n", encoding="utf-8")
        return 0
    except (UsageError, ToolkitError) as exc:
        return _fail(exc.code, exc.exit_code, str(exc))
    except FileNotFoundError as exc:
        return _fail("missing_file", 3, f"{exc.filename}: not found")
    except (json.JSONDecodeError, KeyError) as exc:
        return _fail("schema", 4, repr(exc))
    except ValueError as exc:
        return _fail("invalid_value", 2, str(exc))


def _fail(code: str, status: int, message: str) -> int:
    line = json.dumps({"error": code, "exit": status, "message": " ".join(message.split())})
    print(line, file=sys.stderr)
    return status


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
