"""Saturating exponential fits of stressors/day against responses/day.

The model is ``y(k) = S * (1 - exp(-a * k))``: ``y(0) = 0``, increasing and
concave for positive ``S`` and ``a``, approaching ``S`` as k grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .categories import ALL, ALL_LABEL, StressorCategory
from .errors import (
    InsufficientPoints,
    NonFiniteInput,
    ToolkitError,
    UnconvergedFit,
)

MAX_ITER = 200
STEP_TOL = 1e-10
LINEAR_LIMIT = 1e-4
DAYS_PER_WEEK = 7
STUDY_DAY_HOURS = 12.0


@dataclass(frozen=True)
class SaturationFit:
    category: StressorCategory | str
    S: float
    a: float
    rmse: float
    n_points: int
    converged: bool
    iterations: int = 0
    note: str = ""

    @property
    def label(self) -> str:
        return ALL_LABEL if self.category == ALL else str(self.category)


def evaluate(fit: SaturationFit, k) -> float | np.ndarray:
    """Expected stressors/day at ``k`` responses/day."""
    k_arr = np.asarray(k, dtype=float)
    y = fit.S * -np.expm1(-fit.a * k_arr)
    return float(y) if y.ndim == 0 else y


def _clean(points) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InsufficientPoints("points must be (k, y) pairs")
    k, y = pts[:, 0], pts[:, 1]
    if not (np.isfinite(k).all() and np.isfinite(y).all()):
        raise NonFiniteInput("points contain NaN or infinite values")
    if (k <= 0).any():
        raise ValueError("k must be positive")
    if (y < 0).any():
        raise ValueError("y must be nonnegative")
    if len(k) < 3 or len(np.unique(k)) < 2:
        raise InsufficientPoints(
            f"need >= 3 points over >= 2 distinct k, got {len(k)} points"
        )
    return k, y


def _initial_guess(k: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    S0 = 1.05 * y.max()
    ks = np.unique(k)
    k1, k2 = ks[0], ks[1]
    y1, y2 = y[k == k1].mean(), y[k == k2].mean()
    # S - y(k) decays like exp(-a k); secant of its log over the two smallest k
    if 0 <= y1 < y2 < S0:
        a0 = math.log((S0 - y1) / (S0 - y2)) / (k2 - k1)
    elif 0 < y1 < S0:
        a0 = -math.log1p(-y1 / S0) / k1
    else:
        a0 = 1.0 / np.median(k)
    return S0, max(a0, 1e-8)


def _residuals(theta: np.ndarray, k: np.ndarray, y: np.ndarray) -> np.ndarray:
    S, a = np.exp(theta)
    return y - S * -np.expm1(-a * k)


def _jacobian(theta: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Jacobian of the model (not the residual) in log-parameters."""
    S, a = np.exp(theta)
    e = np.exp(-a * k)
    return np.column_stack((S * -np.expm1(-a * k), S * a * k * e))


def fit_exponential(points: Iterable[Sequence[float]], category=ALL) -> SaturationFit:
    """Least-squares fit of ``S * (1 - exp(-a k))`` by damped Gauss-Newton.

    Parameters are optimised as ``log S`` and ``log a`` so both stay positive.
    Each Gauss-Newton step is halved until the loss stops increasing.
    Iteration stops once the relative parameter step falls below 1e-10;
    hitting 200 iterations returns ``converged=False``. All-zero data give a
    flagged ``S = 0`` fit instead of an exception.
    """
    k, y = _clean(points)
    n = len(k)
    if not (y > 0).any():
        return SaturationFit(category, 0.0, 0.0, 0.0, n, False, 0, "all-zero data")

    with np.errstate(over="ignore", invalid="ignore"):
        return _gauss_newton(k, y, n, category)


def _gauss_newton(k, y, n, category) -> SaturationFit:
    theta = np.log(_initial_guess(k, y))
    r = _residuals(theta, k, y)
    loss = r @ r
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        J = _jacobian(theta, k)
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        if not np.isfinite(step).all():
            break
        t = 1.0
        while True:
            cand = theta + t * step
            r_new = _residuals(cand, k, y)
            loss_new = r_new @ r_new
            if np.isfinite(loss_new) and loss_new <= loss:
                break
            t *= 0.5
            if t < 1e-12:
                cand = None
                break
        if cand is None:
            # no descent along the Gauss-Newton direction: numerically stationary
            grad = J.T @ r
            scale = np.linalg.norm(J) * max(np.linalg.norm(r), 1e-300)
            converged = bool(np.linalg.norm(grad) <= 1e-6 * scale)
            break
        rel_step = np.max(np.abs(cand - theta))
        theta, r, loss = cand, r_new, loss_new
        if rel_step < STEP_TOL:
            converged = True
            break

    S, a = (float(v) for v in np.exp(theta))
    rmse = math.sqrt(loss / n)
    note = "" if converged else "iteration limit reached or no descent"
    if a * k.max() < LINEAR_LIMIT:
        # curvature invisible over the sampled k: only S*a is identified
        converged = False
        note = "no saturation within sampled k (linear limit)"
    return SaturationFit(category, S, a, rmse, n, converged, it, note)


def sum_squares(S: float, a: float, points) -> float:
    """Sum of squared residuals of the model at (S, a)."""
    k, y = _clean(points)
    r = y - S * -np.expm1(-a * k)
    return float(r @ r)


@dataclass(frozen=True)
class WeeklyProjection:
    category: StressorCategory | str
    weekly_model: float
    weekly_observed: float | None = None


def weekly(fit: SaturationFit, observed: float | None = None) -> WeeklyProjection:
    """Weekly latent frequency ``7 * S`` of a converged fit."""
    if not fit.converged:
        raise UnconvergedFit(f"fit for {fit.label} did not converge")
    return WeeklyProjection(fit.category, DAYS_PER_WEEK * fit.S, observed)


def extrapolate_observed(stressors_per_day: float, wear_hours: float) -> float:
    """Scale an observed daily rate from ``wear_hours`` to a 12-hour day, then to a week."""
    if not wear_hours > 0:
        raise ValueError(f"wear_hours must be positive, got {wear_hours}")
    return stressors_per_day * (STUDY_DAY_HOURS / wear_hours) * DAYS_PER_WEEK


@dataclass
class ReportRow:
    category: StressorCategory | str
    fit: SaturationFit | None
    weekly_model: float | None
    weekly_observed: float | None = None
    error: str = ""

    @property
    def label(self) -> str:
        return ALL_LABEL if self.category == ALL else str(self.category)

    def as_dict(self) -> dict:
        f = self.fit
        return {
            "category": self.label,
            "S": None if f is None else f.S,
            "a": None if f is None else f.a,
            "weekly_model": self.weekly_model,
            "weekly_observed": self.weekly_observed,
            "rmse": None if f is None else f.rmse,
            "n_points": None if f is None else f.n_points,
            "converged": None if f is None else f.converged,
            "note": self.error or ("" if f is None else f.note),
        }


@dataclass
class Report:
    rows: list[ReportRow] = field(default_factory=list)

    def row(self, category) -> ReportRow:
        for r in self.rows:
            if r.category == category:
                return r
        raise KeyError(category)

    def as_records(self) -> list[dict]:
        return [r.as_dict() for r in self.rows]


def _sort_key(row: ReportRow):
    pinned = 2 if row.category == ALL else 1 if row.category == StressorCategory.OTHER else 0
    S = row.fit.S if row.fit is not None and row.fit.converged else -math.inf
    return (pinned, -S, row.label)


def fit_all_categories(
    points_by_category: Mapping[StressorCategory | str, Iterable[Sequence[float]]],
    observed_weekly: Mapping[StressorCategory | str, float] | None = None,
) -> Report:
    """Fit every series and assemble a report sorted by S (descending).

    ``Other`` and the pooled row stay last. A failing series becomes an
    annotated row; the remaining rows are still fitted. The pooled row is
    always present, annotated as missing when no ``ALL`` series was given.
    """
    observed_weekly = observed_weekly or {}
    rows = []
    series = dict(points_by_category)
    series.setdefault(ALL, None)
    for cat, pts in series.items():
        obs = observed_weekly.get(cat)
        if pts is None:
            rows.append(ReportRow(cat, None, None, obs, "no points"))
            continue
        try:
            fit = fit_exponential(pts, category=cat)
        except (ToolkitError, ValueError) as exc:
            rows.append(ReportRow(cat, None, None, obs, str(exc)))
            continue
        wk = DAYS_PER_WEEK * fit.S if fit.converged or fit.S == 0 else None
        rows.append(ReportRow(cat, fit, wk, obs, ""))
    rows.sort(key=_sort_key)
    return Report(rows)
