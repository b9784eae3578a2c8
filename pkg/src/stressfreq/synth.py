"""Synthetic cohorts with known ground truth, and their closed-form curves.

A generated participant holds ``events_per_participant`` rated events whose
likelihoods are strictly increasing in a hidden rank, so bucketing recovers
the intended bucket of every event. Stressor presence in bucket ``j`` is
Bernoulli(``p_j``) and the category follows row ``j`` of the mixture.

:func:`oracle_curve` computes the expected stressors/day at each k without
simulation, and :func:`grid_fit` fits the saturation model to it by
exhaustive search. Neither shares code with the simulator or the
Gauss-Newton fitter they are used to check.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .categories import CATEGORIES, REFERENCE_FITS
from .errors import InfeasibleK, InvalidSpec
from .events import DEFAULT_WINDOW, N_BUCKETS, RatedEvent
from .simulator import FatigueModel, SimulationConfig, fatigue_scale

N_CATEGORIES = len(CATEGORIES)


def default_stressor_probs() -> tuple[float, ...]:
    """Linear ramp from 0.05 in the lowest bucket to 0.95 in the highest."""
    return tuple(0.05 + 0.9 * j / (N_BUCKETS - 1) for j in range(N_BUCKETS))


def default_mixture() -> tuple[tuple[float, ...], ...]:
    """Category shares proportional to the reference saturation values, every bucket alike."""
    weights = np.array([row.S for row in REFERENCE_FITS[:N_CATEGORIES]])
    shares = tuple(float(w) for w in weights / weights.sum())
    return tuple(shares for _ in range(N_BUCKETS))


@dataclass(frozen=True)
class SynthSpec:
    n_participants: int = 68
    events_per_participant: int = 300
    bucket_stressor_probs: tuple[float, ...] = field(default_factory=default_stressor_probs)
    category_mixture: tuple[tuple[float, ...], ...] = field(default_factory=default_mixture)
    seed: int = 0
    window: tuple[float, float] = DEFAULT_WINDOW

    def validate(self) -> None:
        if self.n_participants < 1:
            raise InvalidSpec("n_participants must be >= 1")
        if self.events_per_participant < N_BUCKETS or self.events_per_participant % N_BUCKETS:
            raise InvalidSpec("events_per_participant must be a positive multiple of 20")
        p = np.asarray(self.bucket_stressor_probs, dtype=float)
        if p.shape != (N_BUCKETS,) or not np.isfinite(p).all() or (p < 0).any() or (p > 1).any():
            raise InvalidSpec("bucket_stressor_probs must be 20 probabilities in [0, 1]")
        mix = np.asarray(self.category_mixture, dtype=float)
        if mix.shape != (N_BUCKETS, N_CATEGORIES):
            raise InvalidSpec(f"category_mixture must be {N_BUCKETS} rows of {N_CATEGORIES}")
        if (mix < 0).any() or not np.allclose(mix.sum(axis=1), 1.0, atol=1e-9):
            raise InvalidSpec("category_mixture rows must be nonnegative and sum to 1")
        lo, hi = self.window
        slots = int(round((hi - lo) * 10))
        if not (0 <= lo < hi <= 1440) or slots < self.events_per_participant:
            raise InvalidSpec("window too small to place events at distinct times")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)

    @classmethod
    def from_mapping(cls, doc: dict) -> "SynthSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise InvalidSpec(f"unknown spec fields {sorted(unknown)}")
        kw = dict(doc)
        if "bucket_stressor_probs" in kw:
            kw["bucket_stressor_probs"] = tuple(float(x) for x in kw["bucket_stressor_probs"])
        if "category_mixture" in kw:
            mix = kw["category_mixture"]
            if isinstance(mix, dict):
                # one shared row given as {category label: weight}
                row = [float(mix.get(c.value, 0.0)) for c in CATEGORIES]
                if abs(sum(row) - 1.0) > 1e-9:
                    raise InvalidSpec("category_mixture weights must sum to 1")
                mix = [row] * N_BUCKETS
            kw["category_mixture"] = tuple(tuple(float(x) for x in r) for r in mix)
        if "window" in kw:
            kw["window"] = tuple(float(x) for x in kw["window"])
        spec = cls(**kw)
        spec.validate()
        return spec

    @classmethod
    def load(cls, path) -> "SynthSpec":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"spec file is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise InvalidSpec("spec file must hold a JSON object")
        return cls.from_mapping(doc)


def participant_ids(n: int) -> list[str]:
    width = max(3, len(str(n)))
    return [f"P{i:0{width}d}" for i in range(1, n + 1)]


def _generate_one(spec: SynthSpec, index: int, pid: str) -> list[RatedEvent]:
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(index,)))
    n = spec.events_per_participant
    per_bucket = n // N_BUCKETS
    rank = np.arange(1, n + 1)
    bucket = (rank - 1) // per_bucket
    # person-specific affine scale of an increasing latent score
    offset = rng.normal(0.0, 1.0)
    scale = math.exp(rng.normal(-3.0, 0.3))
    likelihood = offset + scale * (rank - 0.9 * rng.random(n))
    lo, hi = spec.window
    slots = rng.choice(int(round((hi - lo) * 10)), size=n, replace=False)
    times = lo + slots / 10.0
    p = np.asarray(spec.bucket_stressor_probs)[bucket]
    stressed = rng.random(n) < p
    cum = np.cumsum(np.asarray(spec.category_mixture), axis=1)
    u = rng.random(n)
    cat_idx = np.array(
        [min(int(np.searchsorted(cum[b], x, side="right")), N_CATEGORIES - 1) for b, x in zip(bucket, u)]
    )
    out = [
        RatedEvent(
            participant_id=pid,
            time_of_day=float(times[i]),
            likelihood=float(likelihood[i]),
            responded=True,
            category=CATEGORIES[cat_idx[i]] if stressed[i] else None,
        )
        for i in range(n)
    ]
    out.sort(key=lambda ev: ev.time_of_day)
    return out


def generate(spec: SynthSpec = SynthSpec()) -> list[RatedEvent]:
    """Rated events for every synthetic participant, sorted by participant then time."""
    spec.validate()
    events: list[RatedEvent] = []
    for i, pid in enumerate(participant_ids(spec.n_participants)):
        events.extend(_generate_one(spec, i, pid))
    return events


# --------------------------------------------------------------------------
# closed-form expectations


def admitted_mass(rho: float) -> np.ndarray:
    """Fraction of each bucket's percentile range strictly above ``100 * (1 - rho)``."""
    cutoff = 100.0 * (1.0 - rho)
    width = 100.0 / N_BUCKETS
    upper = width * np.arange(1, N_BUCKETS + 1)
    return np.clip((upper - cutoff) / width, 0.0, 1.0)


@dataclass(frozen=True)
class OracleCurve:
    k: np.ndarray
    efficiency: np.ndarray
    category_efficiency: np.ndarray  # shape (len(k), 12)
    fatigue: np.ndarray
    stressors_per_day: np.ndarray
    category_stressors_per_day: np.ndarray
    S_true: float
    a_true: float
    identified: bool
    category_fits: dict = field(default_factory=dict)  # category -> (S, a, identified)


def expected_efficiency(spec: SynthSpec, rho: float) -> tuple[float, np.ndarray]:
    """Expected overall and per-category efficiency at threshold ``rho``."""
    w = admitted_mass(rho)
    p = np.asarray(spec.bucket_stressor_probs, dtype=float)
    mix = np.asarray(spec.category_mixture, dtype=float)
    total = w.sum()
    overall = float((w * p).sum() / total)
    per_cat = (w * p) @ mix / total
    return overall, per_cat


def oracle_curve(
    spec: SynthSpec = SynthSpec(),
    config: SimulationConfig = SimulationConfig(),
    fatigue: FatigueModel | None = None,
    *,
    fit_categories: bool = False,
) -> OracleCurve:
    """Expected (k, stressors/day) of the generator and its exhaustive-search fit."""
    fatigue = fatigue or config.fatigue
    ks = np.array(config.resolved_k_values(), dtype=float)
    cands = config.eta * config.omega
    eff, cat_eff, scale = [], [], []
    for k in ks:
        rho = (k / config.alpha) / cands
        if not (0 < rho <= 1 + 1e-12):
            raise InfeasibleK(f"k={k} needs rho={rho:.6g} outside (0, 1]")
        e, c = expected_efficiency(spec, min(rho, 1.0))
        eff.append(e)
        cat_eff.append(c)
        scale.append(fatigue_scale(k, fatigue))
    eff = np.array(eff)
    cat_eff = np.array(cat_eff)
    scale = np.array(scale)
    y = ks * eff * scale
    y_cat = (ks * scale)[:, None] * cat_eff
    S, a, ok = grid_fit(ks, y)
    fits = {}
    if fit_categories:
        for c in CATEGORIES:
            fits[c] = grid_fit(ks, y_cat[:, c.code]) if y_cat[:, c.code].any() else (0.0, 0.0, False)
    return OracleCurve(ks, eff, cat_eff, scale, y, y_cat, S, a, ok, fits)


def _profile_S(a: float, k: np.ndarray, y: np.ndarray, S_range) -> float:
    phi = -np.expm1(-a * k)
    S = float(phi @ y / (phi @ phi))
    if S_range is not None:
        S = min(max(S, S_range[0]), S_range[1])
    return S


def _sse(a, k, y, S_range) -> float:
    S = _profile_S(a, k, y, S_range)
    r = y - S * -np.expm1(-a * k)
    return float(r @ r)


def grid_fit(
    k,
    y,
    S_range: tuple[float, float] | None = None,
    a_range: tuple[float, float] = (1e-4, 10.0),
    resolution: float = 1e-3,
) -> tuple[float, float, bool]:
    """Least-squares (S, a) by exhaustive search, refined by golden section.

    ``a`` is scanned on a geometric grid of relative step ``resolution``;
    for each ``a`` the best ``S`` is exact (linear least squares, clipped to
    ``S_range``). The best grid cell is then refined by golden-section search
    on ``log a``. ``identified`` is False when the optimum sits on the edge
    of ``a_range``.
    """
    k = np.asarray(k, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = a_range
    n = int(math.ceil(math.log(hi / lo) / math.log1p(resolution))) + 1
    grid = lo * np.exp(np.linspace(0.0, math.log(hi / lo), n))
    phi = -np.expm1(-np.outer(grid, k))
    S = (phi @ y) / np.einsum("ij,ij->i", phi, phi)
    if S_range is not None:
        S = np.clip(S, *S_range)
    sse = ((y[None, :] - S[:, None] * phi) ** 2).sum(axis=1)
    i = int(np.argmin(sse))
    identified = 0 < i < n - 1
    left = math.log(grid[max(i - 1, 0)])
    right = math.log(grid[min(i + 1, n - 1)])
    invphi = (math.sqrt(5) - 1) / 2
    c = right - invphi * (right - left)
    d = left + invphi * (right - left)
    fc = _sse(math.exp(c), k, y, S_range)
    fd = _sse(math.exp(d), k, y, S_range)
    while right - left > 1e-13:
        if fc < fd:
            right, d, fd = d, c, fc
            c = right - invphi * (right - left)
            fc = _sse(math.exp(c), k, y, S_range)
        else:
            left, c, fc = c, d, fd
            d = left + invphi * (right - left)
            fd = _sse(math.exp(d), k, y, S_range)
    a_best = math.exp((left + right) / 2)
    if _sse(a_best, k, y, S_range) > sse[i]:
        a_best = float(grid[i])
    return _profile_S(a_best, k, y, S_range), a_best, identified
