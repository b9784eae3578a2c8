"""Exception types shared across the toolkit.

Every error carries an ``exit_code`` so the command line can map failures
to distinct process statuses without a lookup table of its own.
"""

from __future__ import annotations


class ToolkitError(ValueError):
    """Base class for all domain errors."""

    exit_code = 1
    code = "error"


class IngestError(ToolkitError):
    """One or more rows of an event table were rejected.

    ``problems`` holds ``(line_number, message)`` pairs, one per bad row.
    """

    exit_code = 4
    code = "schema"

    def __init__(self, problems):
        self.problems = list(problems)
        head = "; ".join(f"line {ln}: {msg}" for ln, msg in self.problems[:5])
        more = len(self.problems) - 5
        if more > 0:
            head += f"; ... {more} more"
        super().__init__(head or "no rows rejected")


class UnknownCategoryError(ToolkitError):
    exit_code = 4
    code = "unknown_category"


class EmptyBucketError(ToolkitError):
    """A participant has no events in some likelihood buckets."""

    exit_code = 5
    code = "empty_bucket"

    def __init__(self, participant_id, empty):
        self.participant_id = participant_id
        self.empty = tuple(empty)
        super().__init__(
            f"participant {participant_id!r} has empty buckets {list(self.empty)}"
        )


class InvalidWindow(ToolkitError):
    exit_code = 2
    code = "invalid_window"


class InfeasibleBudget(ToolkitError):
    exit_code = 5
    code = "infeasible_budget"


class DegenerateInput(ToolkitError):
    exit_code = 5
    code = "degenerate_input"


class EmptyCohort(ToolkitError):
    exit_code = 5
    code = "empty_cohort"


class InfeasibleK(ToolkitError):
    exit_code = 5
    code = "infeasible_k"


class FatigueOutOfDomain(ToolkitError):
    exit_code = 5
    code = "fatigue_out_of_domain"


class InsufficientPoints(ToolkitError):
    exit_code = 5
    code = "insufficient_points"


class NonFiniteInput(ToolkitError):
    exit_code = 5
    code = "non_finite_input"


class UnconvergedFit(ToolkitError):
    exit_code = 5
    code = "unconverged_fit"


class InvalidSpec(ToolkitError):
    exit_code = 4
    code = "invalid_spec"
