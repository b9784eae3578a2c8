import numpy as np
import pytest

from stressfreq.categories import CATEGORIES
from stressfreq.events import N_BUCKETS, RatedEvent, build_cohort
from stressfreq.synth import SynthSpec, default_stressor_probs, generate

RAMP = np.array(default_stressor_probs())


def exact_events(fractions, per_bucket=20, n_participants=3, categories=None):
    """Events whose stressor share in bucket j is exactly ``fractions[j]``.

    ``per_bucket * fractions[j]`` must be an integer. Stressors cycle through
    ``categories`` (default: Work only).
    """
    categories = categories or [CATEGORIES[0]]
    out = []
    for p in range(n_participants):
        pid = f"X{p:02d}"
        n = 0
        for j, f in enumerate(fractions):
            n_stress = round(per_bucket * f)
            assert abs(n_stress - per_bucket * f) < 1e-9
            for i in range(per_bucket):
                cat = categories[(j + i) % len(categories)] if i < n_stress else None
                out.append(
                    RatedEvent(pid, 480.0 + n * 0.1, float(j * per_bucket + i), True, cat)
                )
                n += 1
    return out


def exact_cohort(fractions, per_bucket=20, n_participants=3, categories=None):
    cohort, summary = build_cohort(exact_events(fractions, per_bucket, n_participants, categories))
    assert summary.n_retained == n_participants
    return cohort


@pytest.fixture(scope="session")
def default_spec():
    return SynthSpec()


@pytest.fixture(scope="session")
def default_cohort(default_spec):
    cohort, summary = build_cohort(generate(default_spec))
    assert summary.n_retained == default_spec.n_participants
    return cohort
