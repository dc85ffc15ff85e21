"""Closed-form upper bounds for SGD's best gradient norm, plus harnesses
checking simulated runs against them and the matching-lower-bound ratio."""

from __future__ import annotations

import math

import numpy as np

from .engine import NoiseModel, StepSchedule, run
from .instances import build_aggregation_instance
from .objectives import Objective
from .reporting import BoundReport, make_report

__all__ = [
    "ghadimi_lan_bound",
    "gd_corollary_bound",
    "kappa_bound",
    "remark_tightness_step",
    "tightness_report",
    "empirical_vs_bound",
]


def _validate_steps(L: float, steps) -> np.ndarray:
    steps = np.asarray(steps, dtype=float)
    if steps.ndim != 1 or steps.size < 1:
        raise ValueError("need at least one step (T >= 2)")
    if np.any(steps <= 0) or np.any(L * steps >= 1):
        raise ValueError("every step must lie strictly inside (0, 1/L)")
    return steps


def ghadimi_lan_bound(L: float, delta: float, sigma: float, steps) -> float:
    """min_t E||grad f(x_t)||^2 <= (2 delta + L sigma^2 sum eta^2)
    / sum eta (2 - L eta)."""
    steps = _validate_steps(L, steps)
    num = 2 * delta + L * sigma ** 2 * float(np.sum(steps ** 2))
    den = float(np.sum(steps * (2 - L * steps)))
    return num / den


def gd_corollary_bound(L: float, delta: float, steps) -> float:
    """Noiseless specialization: 4 delta / sum eta (4 - L eta)."""
    steps = _validate_steps(L, steps)
    return 4 * delta / float(np.sum(steps * (4 - L * steps)))


def kappa_bound(L: float, delta: float, sigma: float, steps, kappas) -> float:
    """The free-parameter bound; each kappa_t must lie in
    [1 - L eta_t, 1/(1 - L eta_t)].  Recovers ghadimi_lan_bound at
    kappa = 1 - L eta and the noiseless corollary at sigma = 0, kappa = 1."""
    steps = _validate_steps(L, steps)
    kappas = np.asarray(kappas, dtype=float)
    if kappas.shape != steps.shape:
        raise ValueError("need one kappa per step")
    contr = 1 - L * steps
    band_tol = 1e-12 * (1 + np.abs(kappas))
    if np.any(kappas < contr - band_tol) or np.any(kappas > 1 / contr + band_tol):
        raise ValueError("kappa outside the admissible band "
                         "[1 - L eta, 1/(1 - L eta)]")
    num = 4 * L * delta + float(np.sum(
        L ** 2 * steps ** 2 * (contr + kappas) / contr * sigma ** 2))
    den = 3 * steps.size - float(np.sum(contr * (contr + kappas + 1 / kappas)))
    if den <= 0:
        raise ValueError("non-positive denominator: the bound is vacuous here")
    return num / den


def remark_tightness_step(L: float, delta: float, sigma: float, T: int):
    """The near-optimal constant step sqrt(2 delta / ((T-1) L sigma^2)),
    clamped strictly below 1/L when the formula exceeds it."""
    if T < 2:
        raise ValueError("T must be at least 2")
    if sigma <= 0:
        raise ValueError("sigma must be positive (the step diverges at 0)")
    eta = math.sqrt(2 * delta / ((T - 1) * L * sigma ** 2))
    if eta >= 1 / L:
        return (1 - 1e-6) / L, True
    return eta, False


_RATIO_LIMIT = 2 * math.sqrt(2) * 1.05


def tightness_report(L: float, delta: float, sigma: float, T: int,
                     replications: int = 3, seed: int = 0) -> BoundReport:
    """Sandwich check on the aggregation instance at the near-optimal step:
    gamma^2 <= empirical min grad^2 <= upper bound, ratio <= 2 sqrt(2) * 1.05
    (the ratio is only asserted for T >= 1000, it is an asymptotic claim)."""
    eta, clamped = remark_tightness_step(L, delta, sigma, T)
    steps = np.full(T - 1, eta)
    inst = build_aggregation_instance(L, delta, sigma, T, steps,
                                      np.full(T, 1.0 / T))
    lower = inst.predicted["gamma_sq"]
    upper = ghadimi_lan_bound(L, delta, sigma, steps)
    emp = []
    for r in range(replications):
        traj = inst.simulate(seed=seed + r, record=False)
        emp.append(traj.criteria.min_grad_norm ** 2)
    empirical = float(np.mean(emp))
    ratio = upper / lower
    sandwich_ok = lower * (1 - 1e-9) <= empirical <= upper * (1 + 1e-9)
    ratio_ok = T < 1000 or ratio <= _RATIO_LIMIT
    return BoundReport(
        bound_name="remark_tightness",
        theoretical=upper,
        empirical=empirical,
        replications=replications,
        direction="upper",
        tol=1e-9,
        slack=upper * (1 + 1e-9) - empirical,
        verdict="pass" if (sandwich_ok and ratio_ok) else "fail",
        details={"lower": lower, "ratio": ratio, "ratio_limit": _RATIO_LIMIT,
                 "ratio_asserted": T >= 1000, "sandwich_ok": sandwich_ok,
                 "step": eta, "clamped": clamped},
    )


def empirical_vs_bound(obj: Objective, x1, schedule: StepSchedule,
                       noise: NoiseModel, T: int, replications: int,
                       seed: int = 0, delta: float | None = None) -> BoundReport:
    """Mean over replications of min_t ||grad f(x_t)||^2 against the
    Ghadimi-Lan value; passes iff empirical <= bound + 3 SE."""
    steps = schedule.realized(T)
    if delta is None:
        delta = obj.suboptimality_gap(np.asarray(x1, dtype=float))
    bound = ghadimi_lan_bound(obj.grad_lipschitz, delta, noise.sigma, steps)
    vals = []
    for r in range(replications):
        traj = run(obj, x1, T, schedule, noise.with_seed(seed + r),
                   record=False)
        vals.append(traj.criteria.min_grad_norm ** 2)
    empirical = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(replications)) \
        if replications > 1 else 0.0
    return make_report(
        "ghadimi_lan_empirical", theoretical=bound, empirical=empirical,
        direction="upper", replications=replications, rel_tol=1e-9,
        abs_slack=3 * se,
        details={"standard_error": se, "delta": delta})
