"""Monte Carlo simulation of prompted days.

Each simulated day draws ``events_per_day`` candidate events for a
participant, choosing a likelihood bucket uniformly and then an event
uniformly inside it (with replacement). Under the ``debiased`` policy an
event is prompted when its person-specific percentile lies strictly above
``100 * (1 - rho)``; under ``moods-baseline`` a fixed per-stratum quota is
prompted instead. Prompts are answered with probability ``alpha`` and the
fraction of answers carrying a stressor is the response efficiency.

Random streams are keyed by (seed, participant, k), so results do not
depend on worker count or scheduling.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .budget import solve as solve_budget
from .categories import ALL, CATEGORIES, StressorCategory
from .errors import (
    DegenerateInput,
    EmptyCohort,
    FatigueOutOfDomain,
    InfeasibleBudget,
    InfeasibleK,
)
from .events import N_BUCKETS, ParticipantBuckets

N_CATEGORIES = len(CATEGORIES)
POLICIES = ("debiased", "moods-baseline")
DEFAULT_K_MAX = 36
# slack on the strict percentile comparison so float noise in 100*(1-rho)
# never admits an event sitting exactly on the threshold
THRESHOLD_SLACK = 1e-9

# percentile strata and daily quotas of the original prompting scheme;
# a quota of None prompts every event in the stratum
BASELINE_STRATA = ((0.0, 25.0, 1), (25.0, 75.0, 2), (75.0, 95.0, 3), (95.0, 100.0, None))


@dataclass(frozen=True)
class FatigueModel:
    """Population fixed effects of response efficiency against k."""

    b: float = 0.353
    m: float = -0.007
    k_ref: float = 3.89

    def predictor(self, k: float) -> float:
        return self.b + self.m * k

    @property
    def k_limit(self) -> float:
        """k at which the linear predictor reaches zero (inf if it never does)."""
        return -self.b / self.m if self.m < 0 else math.inf


def fatigue_scale(k: float, model: FatigueModel = FatigueModel()) -> float:
    """Multiplier on base efficiency at ``k`` relative to the reference k.

    ``(b + m*k) / (b + m*k_ref)``; exactly 1 at ``k_ref``.
    """
    num = model.predictor(k)
    den = model.predictor(model.k_ref)
    if num <= 0 or den <= 0:
        raise FatigueOutOfDomain(
            f"fatigue predictor nonpositive at k={k} (b={model.b}, m={model.m}); "
            f"valid for k < {model.k_limit:.4g}"
        )
    if k == model.k_ref:
        return 1.0
    return num / den


@dataclass(frozen=True)
class SimulationConfig:
    days_per_participant: int = 1000
    eta: float = 2.5
    omega: float = 12.0
    alpha: float = 1.0
    # None: integers 1..36 cut at the largest k the budget admits
    k_values: tuple[float, ...] | None = None
    seed: int = 0
    policy: str = "debiased"
    fatigue: FatigueModel = field(default_factory=FatigueModel)
    threads: int = 1

    @property
    def events_per_day(self) -> int:
        return int(round(self.eta * self.omega))

    def resolved_k_values(self) -> tuple[float, ...]:
        if self.k_values is not None:
            return tuple(float(k) for k in self.k_values)
        k_max = min(DEFAULT_K_MAX, math.floor(self.alpha * self.eta * self.omega + 1e-9))
        return tuple(float(k) for k in range(1, k_max + 1))

    def rho(self, k: float) -> float:
        try:
            return solve_budget("rho", k=k, eta=self.eta, omega=self.omega, alpha=self.alpha).rho
        except (InfeasibleBudget, DegenerateInput) as exc:
            raise InfeasibleK(f"k={k}: {exc}") from None

    def validate(self) -> None:
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if self.days_per_participant < 1:
            raise ValueError("days_per_participant must be >= 1")
        if not (0 < self.alpha <= 1):
            raise InfeasibleK(f"alpha={self.alpha} must lie in (0, 1]")
        if self.events_per_day < 1:
            raise ValueError("eta * omega must round to at least one event per day")
        if self.policy == "debiased":
            for k in self.resolved_k_values():
                self.rho(k)
                fatigue_scale(k, self.fatigue)


@dataclass(frozen=True)
class EfficiencyPoint:
    """Cohort- or participant-level outcome at one response frequency."""

    k: float
    prompts_delivered_per_day: float
    responses_per_day: float
    base_efficiency: float
    category_efficiency: dict[StressorCategory, float]
    fatigue_scale: float
    stressors_per_day: float
    category_stressors_per_day: dict[StressorCategory, float]
    n_participants: int = 1

    def series(self, category: StressorCategory | str = ALL) -> tuple[float, float]:
        """(efficiency, stressors/day) for a category or ``ALL``."""
        if category == ALL:
            return self.base_efficiency, self.stressors_per_day
        return self.category_efficiency[category], self.category_stressors_per_day[category]


@dataclass(frozen=True)
class SimulationResult:
    config: SimulationConfig
    points: list[EfficiencyPoint]
    per_participant: dict[str, list[EfficiencyPoint]]


# --------------------------------------------------------------------------
# per-participant arrays


@dataclass(frozen=True)
class _Pool:
    """Flattened bucket contents of one participant."""

    pid: str
    offsets: np.ndarray  # start of each bucket in the flat arrays
    sizes: np.ndarray
    pct: np.ndarray  # percentile per event
    cat: np.ndarray  # category code, -1 for no stressor

    @classmethod
    def from_buckets(cls, pb: ParticipantBuckets) -> "_Pool":
        sizes = np.array(pb.counts, dtype=np.int64)
        offsets = np.r_[0, np.cumsum(sizes)[:-1]].astype(np.int64)
        pct = np.array([p for ps in pb.percentiles for p in ps], dtype=float)
        cat = np.array(
            [ev.category.code if ev.category is not None else -1 for b in pb.buckets for ev in b],
            dtype=np.int64,
        )
        return cls(pb.participant_id, offsets, sizes, pct, cat)


def cell_seed(seed: int, participant_id: str, k: float, policy: str) -> np.random.SeedSequence:
    """Stable seed sequence for one (participant, k) cell.

    Day ``d`` of the cell uses row ``d`` of every array drawn from it.
    """
    digest = hashlib.blake2b(
        f"{participant_id}\x1f{float(k)!r}\x1f{policy}".encode(), digest_size=16
    ).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(words))


def _draw(pool: _Pool, rng: np.random.Generator, shape):
    """Uniform bucket, then uniform event inside it; returns (bucket, flat index)."""
    bucket = rng.integers(0, N_BUCKETS, size=shape)
    within = np.floor(rng.random(shape) * pool.sizes[bucket]).astype(np.int64)
    return bucket, pool.offsets[bucket] + within


def _draw_days(pool: _Pool, rng: np.random.Generator, days: int, per_day: int):
    _, idx = _draw(pool, rng, (days, per_day))
    return pool.pct[idx], pool.cat[idx]


def sample_candidates(pb: ParticipantBuckets, n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` candidate events the way simulated days do.

    Returns the bucket index and the position inside that bucket of each draw.
    """
    pool = _Pool.from_buckets(pb)
    rng = np.random.Generator(np.random.PCG64(cell_seed(seed, pb.participant_id, -1.0, "sample")))
    bucket, idx = _draw(pool, rng, n)
    return bucket, idx - pool.offsets[bucket]


def _tally(k: float, delivered: np.ndarray, answered: np.ndarray, cats: np.ndarray,
           days: int, scale: float) -> EfficiencyPoint:
    n_prompts = int(delivered.sum())
    n_answers = int(answered.sum())
    answered_cats = cats[answered]
    counts = np.bincount(answered_cats[answered_cats >= 0], minlength=N_CATEGORIES)
    if n_answers:
        cat_eff = counts / n_answers
        base = int(counts.sum()) / n_answers
    else:
        cat_eff = np.full(N_CATEGORIES, np.nan)
        base = math.nan
    return EfficiencyPoint(
        k=k,
        prompts_delivered_per_day=n_prompts / days,
        responses_per_day=n_answers / days,
        base_efficiency=base,
        category_efficiency={c: float(cat_eff[c.code]) for c in CATEGORIES},
        fatigue_scale=scale,
        stressors_per_day=k * base * scale,
        category_stressors_per_day={c: k * float(cat_eff[c.code]) * scale for c in CATEGORIES},
    )


def _simulate_debiased_cell(pool: _Pool, k: float, cfg: SimulationConfig) -> EfficiencyPoint:
    rng = np.random.Generator(np.random.PCG64(cell_seed(cfg.seed, pool.pid, k, cfg.policy)))
    days, per_day = cfg.days_per_participant, cfg.events_per_day
    pct, cats = _draw_days(pool, rng, days, per_day)
    answer_u = rng.random((days, per_day))
    cutoff = 100.0 * (1.0 - cfg.rho(k))
    delivered = pct > cutoff + THRESHOLD_SLACK
    answered = delivered & (answer_u < cfg.alpha)
    return _tally(k, delivered, answered, cats, days, fatigue_scale(k, cfg.fatigue))


def baseline_selection(pct: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Mask of prompted events per day under the stratified quota scheme.

    ``pct`` has shape (days, events). Within each stratum a quota of events
    is chosen uniformly at random without replacement; strata holding fewer
    events than their quota prompt all of them.
    """
    days, n = pct.shape
    chosen = np.zeros_like(pct, dtype=bool)
    # random priorities give a uniform choice without replacement per stratum
    priority = rng.random((days, n))
    for lo, hi, quota in BASELINE_STRATA:
        if lo == 0.0:
            member = pct <= hi
        else:
            member = (pct > lo) & (pct <= hi)
        if quota is None:
            chosen |= member
            continue
        pri = np.where(member, priority, np.inf)
        order = np.argsort(pri, axis=1, kind="stable")[:, :quota]
        picked = np.zeros_like(chosen)
        np.put_along_axis(picked, order, True, axis=1)
        chosen |= picked & member
    return chosen


def _simulate_baseline_cell(pool: _Pool, cfg: SimulationConfig) -> EfficiencyPoint:
    rng = np.random.Generator(np.random.PCG64(cell_seed(cfg.seed, pool.pid, 0.0, cfg.policy)))
    days, per_day = cfg.days_per_participant, cfg.events_per_day
    pct, cats = _draw_days(pool, rng, days, per_day)
    delivered = baseline_selection(pct, rng)
    answered = delivered & (rng.random((days, per_day)) < cfg.alpha)
    k = answered.sum() / days
    point = _tally(k, delivered, answered, cats, days, 1.0)
    scale = fatigue_scale(k, cfg.fatigue)
    return replace(
        point,
        fatigue_scale=scale,
        stressors_per_day=point.stressors_per_day * scale,
        category_stressors_per_day={c: v * scale for c, v in point.category_stressors_per_day.items()},
    )


def _cohort_mean(k: float, points: Sequence[EfficiencyPoint]) -> EfficiencyPoint:
    """Average participant points in a fixed order (participants without answers skipped)."""
    valid = [p for p in points if not math.isnan(p.base_efficiency)]
    if not valid:
        raise EmptyCohort(f"no participant answered any prompt at k={k}")

    def mean(values):
        return math.fsum(values) / len(values)

    scale = valid[0].fatigue_scale if len({p.fatigue_scale for p in valid}) == 1 else mean(
        [p.fatigue_scale for p in valid]
    )
    cat_eff = {c: mean([p.category_efficiency[c] for p in valid]) for c in CATEGORIES}
    base = mean([p.base_efficiency for p in valid])
    return EfficiencyPoint(
        k=k,
        prompts_delivered_per_day=mean([p.prompts_delivered_per_day for p in points]),
        responses_per_day=mean([p.responses_per_day for p in points]),
        base_efficiency=base,
        category_efficiency=cat_eff,
        fatigue_scale=scale,
        stressors_per_day=mean([p.stressors_per_day for p in valid]),
        category_stressors_per_day={
            c: mean([p.category_stressors_per_day[c] for p in valid]) for c in CATEGORIES
        },
        n_participants=len(valid),
    )


def _run(cohort: Sequence[ParticipantBuckets], cfg: SimulationConfig, cell, ks):
    if not cohort:
        raise EmptyCohort("cohort is empty")
    cfg.validate()
    pools = [_Pool.from_buckets(pb) for pb in cohort]
    for pb, pool in zip(cohort, pools):
        if (pool.sizes == 0).any():
            raise EmptyCohort(f"participant {pb.participant_id!r} has empty buckets")
    tasks = [(pool, k) for pool in pools for k in ks]
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            results = list(ex.map(lambda t: cell(*t), tasks))
    else:
        results = [cell(*t) for t in tasks]
    per_participant: dict[str, list[EfficiencyPoint]] = {}
    it = iter(results)
    for pool in pools:
        per_participant[pool.pid] = [next(it) for _ in ks]
    points = [
        _cohort_mean(k, [per_participant[pool.pid][i] for pool in pools])
        for i, k in enumerate(ks)
    ]
    return SimulationResult(cfg, points, per_participant)


def simulate(cohort: Sequence[ParticipantBuckets], config: SimulationConfig) -> SimulationResult:
    """Sweep k under the configured policy and return cohort-averaged points.

    With ``policy="moods-baseline"`` this delegates to
    :func:`simulate_moods_baseline` (a single point at the implied k).
    """
    if config.policy == "moods-baseline":
        return simulate_moods_baseline(cohort, config)
    ks = config.resolved_k_values()
    return _run(cohort, config, lambda pool, k: _simulate_debiased_cell(pool, k, config), ks)


def simulate_moods_baseline(
    cohort: Sequence[ParticipantBuckets], config: SimulationConfig
) -> SimulationResult:
    """Simulate the original stratified-quota prompting scheme.

    k is not swept; each participant's k is the realised mean number of
    answered prompts per day, and the cohort point carries their mean.
    """
    cfg = replace(config, policy="moods-baseline")

    def cell(pool, _k):
        return _simulate_baseline_cell(pool, cfg)

    result = _run(cohort, cfg, cell, (0.0,))
    pts = [p[0] for p in result.per_participant.values()]
    k_mean = math.fsum(p.k for p in pts) / len(pts)
    point = replace(result.points[0], k=k_mean)
    return SimulationResult(cfg, [point], result.per_participant)
