"""Closed stressor taxonomy and the reference saturation table."""

from __future__ import annotations

import enum
from typing import NamedTuple

from .errors import UnknownCategoryError

#: Label used for the pooled "any stressor" series in points files.
ALL = "ALL"
#: Display label of the pooled row in reports.
ALL_LABEL = "All Stressors"


class StressorCategory(str, enum.Enum):
    WORK = "Work"
    HEALTH = "Health, Fatigue, or Pain"
    TRANSPORTATION = "Transportation"
    SCHOOL = "School"
    EMOTIONAL = "Emotional Turmoil"
    SOCIAL = "Social Relationships"
    FAMILY = "Family Issues"
    DECISIONS = "Everyday Decision Making"
    GAMES_SPORTS = "Playing games/sports"
    CHORES = "Chores"
    FINANCIAL = "Financial Problem"
    OTHER = "Other"

    def __str__(self) -> str:
        return self.value

    @property
    def code(self) -> int:
        return CATEGORIES.index(self)


CATEGORIES: tuple[StressorCategory, ...] = tuple(StressorCategory)

_BY_LABEL = {c.value.casefold(): c for c in CATEGORIES}


def parse_category(label: str) -> StressorCategory:
    """Map a label (case-insensitive, surrounding space ignored) to a category."""
    try:
        return _BY_LABEL[label.strip().casefold()]
    except KeyError:
        raise UnknownCategoryError(f"unknown stressor category {label!r}") from None


def parse_series_label(label: str) -> StressorCategory | str:
    """Like :func:`parse_category` but also accepts the pooled series label."""
    if label.strip() in (ALL, ALL_LABEL):
        return ALL
    return parse_category(label)


class ReferenceRow(NamedTuple):
    label: str
    S: float
    a: float
    weekly: float
    observed_weekly: float


# Saturation per day, rate constant, weekly model value and the weekly count
# extrapolated from observations, for the 12 categories and the pooled row.
REFERENCE_FITS: tuple[ReferenceRow, ...] = (
    ReferenceRow("Work", 1.76, 0.12, 12.32, 7.22),
    ReferenceRow("Health, Fatigue, or Pain", 0.59, 0.09, 4.13, 1.92),
    ReferenceRow("Transportation", 0.55, 0.15, 3.85, 2.44),
    ReferenceRow("School", 0.42, 0.12, 2.94, 1.37),
    ReferenceRow("Emotional Turmoil", 0.40, 0.10, 2.80, 1.66),
    ReferenceRow("Social Relationships", 0.39, 0.13, 2.73, 1.84),
    ReferenceRow("Family Issues", 0.22, 0.16, 1.54, 0.98),
    ReferenceRow("Everyday Decision Making", 0.20, 0.20, 1.40, 1.26),
    ReferenceRow("Playing games/sports", 0.12, 0.31, 0.84, 0.87),
    ReferenceRow("Chores", 0.07, 0.17, 0.49, 0.37),
    ReferenceRow("Financial Problem", 0.03, 0.11, 0.21, 0.10),
    ReferenceRow("Other", 0.79, 0.17, 5.53, 3.38),
    ReferenceRow(ALL_LABEL, 5.39, 0.14, 37.73, 23.4),
)
