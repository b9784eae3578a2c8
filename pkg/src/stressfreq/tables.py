"""Reading and writing points files, fit reports and observed-rate tables."""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

from .categories import ALL, CATEGORIES, parse_series_label
from .errors import IngestError, UnknownCategoryError
from .estimator import Report, SaturationFit, evaluate
from .simulator import EfficiencyPoint

POINT_COLUMNS = (
    "k",
    "category",
    "base_efficiency",
    "fatigue_scale",
    "stressors_per_day",
    "n_prompts",
    "n_responses",
)
REPORT_COLUMNS = (
    "category",
    "S",
    "a",
    "weekly_model",
    "weekly_observed",
    "rmse",
    "n_points",
    "converged",
    "note",
)


def fmt_number(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return str(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)


def _write_rows(path, columns: Sequence[str], rows: Iterable[dict], fmt: str, key: str) -> None:
    rows = list(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fmt == "json":
            json.dump({key: rows}, fh, indent=1)
            fh.write("\n")
            return
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] if isinstance(row[c], str) else fmt_number(row[c]) for c in columns])


def _read_rows(path, key: str) -> list[dict]:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith(("{", "[")):
        doc = json.loads(text)
        rows = doc.get(key) if isinstance(doc, dict) else doc
        if not isinstance(rows, list):
            raise IngestError([(1, f"expected a {key!r} list")])
        return rows
    return list(csv.DictReader(text.splitlines()))


def point_rows(points: Sequence[EfficiencyPoint]) -> list[dict]:
    rows = []
    for p in points:
        series = [(ALL, p.base_efficiency, p.stressors_per_day)]
        series += [
            (c.value, p.category_efficiency[c], p.category_stressors_per_day[c]) for c in CATEGORIES
        ]
        for label, eff, spd in series:
            rows.append(
                {
                    "k": p.k,
                    "category": label,
                    "base_efficiency": eff,
                    "fatigue_scale": p.fatigue_scale,
                    "stressors_per_day": spd,
                    "n_prompts": p.prompts_delivered_per_day,
                    "n_responses": p.responses_per_day,
                }
            )
    return rows


def write_points(points: Sequence[EfficiencyPoint], path, fmt: str = "csv") -> None:
    """One row per (k, series); ``n_prompts``/``n_responses`` are per-day means."""
    _write_rows(path, POINT_COLUMNS, point_rows(points), fmt, "points")


def read_points(path) -> dict:
    """Points file to ``{series: [(k, stressors_per_day), ...]}`` in file order."""
    out: dict = defaultdict(list)
    problems = []
    for line, row in enumerate(_read_rows(path, "points"), start=2):
        try:
            label = parse_series_label(str(row["category"]))
            k = float(row["k"])
            y = float(row["stressors_per_day"])
        except UnknownCategoryError as exc:
            problems.append((line, str(exc)))
            continue
        except (KeyError, TypeError, ValueError) as exc:
            problems.append((line, f"malformed points row: {exc!r}"))
            continue
        out[label].append((k, y))
    if problems:
        raise IngestError(problems)
    return dict(out)


def write_report(report: Report, path, fmt: str = "csv") -> None:
    _write_rows(path, REPORT_COLUMNS, report.as_records(), fmt, "rows")


def write_report_records(rows: Sequence[dict], path, fmt: str = "csv") -> None:
    _write_rows(path, REPORT_COLUMNS, rows, fmt, "rows")


def read_report(path) -> list[dict]:
    rows = _read_rows(path, "rows")
    for row in rows:
        if "category" not in row:
            raise IngestError([(1, "report rows need a category column")])
    return rows


def read_observed(path) -> dict:
    """``category,observed_per_day`` table to ``{series: rate}``."""
    out = {}
    problems = []
    for line, row in enumerate(_read_rows(path, "observed"), start=2):
        try:
            out[parse_series_label(str(row["category"]))] = float(row["observed_per_day"])
        except UnknownCategoryError as exc:
            problems.append((line, str(exc)))
        except (KeyError, TypeError, ValueError) as exc:
            problems.append((line, f"malformed observed row: {exc!r}"))
    if problems:
        raise IngestError(problems)
    return out


def write_plot_data(
    fits: dict[str, SaturationFit], series: dict, path, fmt: str = "csv"
) -> None:
    """(k, model value, simulated value) per series for external plotting."""
    rows = []
    for label, pts in series.items():
        fit = fits.get(label)
        for k, y in pts:
            rows.append(
                {
                    "category": "ALL" if label == ALL else str(label),
                    "k": k,
                    "y_model": None if fit is None else evaluate(fit, k),
                    "y_simulated": y,
                }
            )
    _write_rows(path, ("category", "k", "y_model", "y_simulated"), rows, fmt, "series")
