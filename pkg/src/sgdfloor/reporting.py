"""Structured pass/fail records pairing empirical quantities with bounds."""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = ["BoundReport", "make_report"]


@dataclass(frozen=True)
class BoundReport:
    """An empirical value checked against a theoretical bound.

    direction "upper" means the empirical value must not exceed the bound;
    "lower" means it must not fall below it.  ``slack`` is the signed margin
    left inside the (tolerance-widened) bound; non-negative iff the verdict
    is "pass".
    """

    bound_name: str
    theoretical: float
    empirical: float
    replications: int
    direction: str
    tol: float
    slack: float
    verdict: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def make_report(bound_name: str, theoretical: float, empirical: float,
                direction: str, replications: int, rel_tol: float = 1e-6,
                abs_slack: float = 0.0, details: dict | None = None) -> BoundReport:
    """Build a report; rel_tol widens the bound, abs_slack adds e.g. 3 SE."""
    if direction not in ("upper", "lower"):
        raise ValueError("direction must be 'upper' or 'lower'")
    if direction == "upper":
        limit = theoretical * (1 + rel_tol) + abs_slack
        slack = limit - empirical
    else:
        limit = theoretical * (1 - rel_tol) - abs_slack
        slack = empirical - limit
    return BoundReport(
        bound_name=bound_name,
        theoretical=theoretical,
        empirical=empirical,
        replications=replications,
        direction=direction,
        tol=rel_tol,
        slack=float(slack),
        verdict="pass" if slack >= 0 else "fail",
        details=details or {},
    )
