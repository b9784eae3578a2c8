"""Estimate latent daily stressor frequency from sparse prompt/response data."""

__version__ = "0.1.0"

from .budget import PromptBudget, solve, validate  # noqa: E402
from .categories import ALL, CATEGORIES, REFERENCE_FITS, StressorCategory  # noqa: E402
from .estimator import (  # noqa: E402
    SaturationFit,
    WeeklyProjection,
    evaluate,
    extrapolate_observed,
    fit_all_categories,
    fit_exponential,
    weekly,
)
from .events import (  # noqa: E402
    ParticipantBuckets,
    RatedEvent,
    bucketize,
    build_cohort,
    eligible_cohort,
    filter_window,
    ingest,
)
from .simulator import (  # noqa: E402
    EfficiencyPoint,
    FatigueModel,
    SimulationConfig,
    fatigue_scale,
    simulate,
    simulate_moods_baseline,
)
from .synth import SynthSpec, generate, grid_fit, oracle_curve  # noqa: E402
