"""Prompt-budget identity linking threshold, prompt rate, wear time and responses.

The daily number of prompts that must be delivered to collect ``k``
responses at response rate ``alpha`` is ``k / alpha``. Out of
``eta * omega`` candidate events per day, a percentile threshold ``rho``
admits ``rho * eta * omega`` of them, so::

    rho * eta * omega == k / alpha,   0 < k / alpha <= eta * omega

Any one of the five quantities follows from the other four.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import DegenerateInput, InfeasibleBudget

FIELDS = ("rho", "eta", "omega", "k", "alpha")
REL_TOL = 1e-9


@dataclass(frozen=True)
class PromptBudget:
    rho: float
    eta: float
    omega: float
    k: float
    alpha: float

    @property
    def candidates_per_day(self) -> float:
        return self.eta * self.omega

    @property
    def prompts_per_day(self) -> float:
        return self.k / self.alpha

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def validate(budget: PromptBudget) -> list[str]:
    """Return a description of every violated constraint (empty when valid)."""
    b = budget
    problems = []
    for name in FIELDS:
        v = getattr(b, name)
        if not math.isfinite(v) or v <= 0:
            problems.append(f"{name}={v} must be positive and finite")
    if b.rho > 1:
        problems.append(f"rho={b.rho} exceeds 1")
    if b.alpha > 1:
        problems.append(f"alpha={b.alpha} exceeds 1")
    if problems:
        return problems
    lhs = b.rho * b.eta * b.omega
    rhs = b.k / b.alpha
    if not math.isclose(lhs, rhs, rel_tol=REL_TOL, abs_tol=0.0):
        problems.append(
            f"rho*eta*omega={lhs!r} does not equal k/alpha={rhs!r}"
        )
    if rhs > b.eta * b.omega * (1 + REL_TOL):
        problems.append(
            f"k/alpha={rhs!r} exceeds eta*omega={b.eta * b.omega!r} candidate prompts"
        )
    return problems


def solve(unknown: str, **known: float) -> PromptBudget:
    """Solve for ``unknown`` given the other four fields as keyword arguments.

    >>> solve("rho", eta=2.5, omega=12, alpha=1.0, k=30).rho
    1.0
    """
    if unknown not in FIELDS:
        raise ValueError(f"unknown field {unknown!r}; expected one of {FIELDS}")
    expected = set(FIELDS) - {unknown}
    if set(known) != expected:
        raise ValueError(f"need exactly {sorted(expected)} to solve for {unknown}")
    for name, v in known.items():
        if v is None or not math.isfinite(v) or v <= 0:
            raise DegenerateInput(f"{name}={v} must be positive and finite")
    for name in ("rho", "alpha"):
        if name in known and known[name] > 1:
            raise InfeasibleBudget(f"{name}={known[name]} exceeds 1")

    v = dict(known)
    if unknown == "rho":
        v["rho"] = (v["k"] / v["alpha"]) / (v["eta"] * v["omega"])
    elif unknown == "k":
        v["k"] = v["rho"] * v["alpha"] * v["eta"] * v["omega"]
    elif unknown == "alpha":
        v["alpha"] = v["k"] / (v["rho"] * v["eta"] * v["omega"])
    elif unknown == "eta":
        v["eta"] = (v["k"] / v["alpha"]) / (v["rho"] * v["omega"])
    else:
        v["omega"] = (v["k"] / v["alpha"]) / (v["rho"] * v["eta"])

    solved = v[unknown]
    if unknown in ("rho", "alpha") and solved > 1:
        raise InfeasibleBudget(
            f"solved {unknown}={solved!r} exceeds 1: k/alpha would exceed eta*omega"
        )
    budget = PromptBudget(**v)
    if budget.prompts_per_day > budget.candidates_per_day * (1 + REL_TOL):
        raise InfeasibleBudget(
            f"k/alpha={budget.prompts_per_day!r} exceeds eta*omega={budget.candidates_per_day!r}"
        )
    return budget


def threshold(k: float, eta: float, omega: float, alpha: float = 1.0) -> float:
    """Percentile threshold (fraction of candidates prompted) for ``k`` responses/day."""
    return solve("rho", k=k, eta=eta, omega=omega, alpha=alpha).rho
