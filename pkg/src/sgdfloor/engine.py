"""SGD simulator: update recurrence, noise sources, step schedules, aggregation.

The update is x_{t+1} = x_t - eta_t (grad f(x_t) + xi_t); the minus sign
follows the recurrence the constructions are built around.  Noise draws come
from a counter-based generator (Philox) keyed per (seed, step), so a
trajectory is replayable step by step and replications are independent.

Adaptive step and aggregation rules never see raw coordinates: they receive
a GramInfo carrying only the pairwise inner products of the iterates and
noisy gradients so far (plus, optionally, exact iterate Hessians for
objectives that expose them).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .objectives import Objective

__all__ = [
    "NoiseModel",
    "StepSchedule",
    "AggregationRule",
    "GramInfo",
    "Criteria",
    "Trajectory",
    "run",
    "aggregate",
    "criteria",
    "mean_criteria",
]

_MAX_SEED = 2 ** 64


@dataclass(frozen=True)
class NoiseModel:
    """Oracle noise xi_t with E[xi_t] = 0 and E||xi_t||^2 = sigma^2."""

    kind: str  # "none" | "gaussian_isotropic" | "rademacher_coordinate"
    sigma: float = 0.0
    seed: int = 0
    dim: int | None = None

    def __post_init__(self):
        if self.kind not in ("none", "gaussian_isotropic", "rademacher_coordinate"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not 0 <= self.seed < _MAX_SEED:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    @staticmethod
    def none() -> "NoiseModel":
        return NoiseModel("none")

    @staticmethod
    def gaussian_isotropic(sigma2: float, seed: int = 0,
                           dim: int | None = None) -> "NoiseModel":
        """Mean-zero Gaussian with covariance (sigma2/d) I_d, so E||xi||^2 = sigma2."""
        return NoiseModel("gaussian_isotropic", math.sqrt(sigma2), seed, dim)

    @staticmethod
    def rademacher_coordinate(sigma: float, seed: int = 0) -> "NoiseModel":
        """xi_t = +/- sigma e_{t+1} with probability 1/2 each; ||xi_t|| = sigma."""
        return NoiseModel("rademacher_coordinate", sigma, seed)

    def with_seed(self, seed: int) -> "NoiseModel":
        return replace(self, seed=seed)

    def _rng(self, t: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=(self.seed << 64) + t))

    def draw(self, t: int, d: int) -> np.ndarray | None:
        """Noise vector for step t (1-based) in dimension d; None when noiseless."""
        if self.kind == "none" or self.sigma == 0.0:
            return None
        if self.kind == "gaussian_isotropic":
            return self._rng(t).normal(0.0, self.sigma / math.sqrt(d), d)
        # rademacher: coordinate t+1, i.e. 0-based index t
        if t >= d:
            raise ValueError(
                f"rademacher noise at step {t} needs dimension > {t}, got {d}")
        xi = np.zeros(d)
        sign = 1.0 if self.rademacher_sign(t) > 0 else -1.0
        xi[t] = sign * self.sigma
        return xi

    def rademacher_sign(self, t: int) -> int:
        return 1 if int(self._rng(t).integers(0, 2)) == 1 else -1


@dataclass(frozen=True)
class GramInfo:
    """Rotation-invariant view of a trajectory prefix.

    ``matrix`` is the Gram matrix of the stacked vectors
    [x_1, ..., x_{n_iterates}, g_1, ..., g_{n_grads}] (inner products
    everywhere, squared norms on the diagonal).  ``hessian_diags`` is only
    present when the objective exposes exact second-order information and the
    caller asked for it.
    """

    matrix: np.ndarray
    n_iterates: int
    n_grads: int
    hessian_diags: tuple | None = None

    def inner_xx(self, i: int, j: int) -> float:
        return float(self.matrix[i, j])

    def inner_xg(self, i: int, j: int) -> float:
        return float(self.matrix[i, self.n_iterates + j])

    def inner_gg(self, i: int, j: int) -> float:
        n = self.n_iterates
        return float(self.matrix[n + i, n + j])

    def norm_x(self, i: int) -> float:
        return math.sqrt(max(self.inner_xx(i, i), 0.0))

    def norm_g(self, i: int) -> float:
        return math.sqrt(max(self.inner_gg(i, i), 0.0))


@dataclass(frozen=True)
class StepSchedule:
    kind: str  # "constant" | "small_steps" | "poly_decay" | "gram_adaptive"
    eta: float | None = None
    steps: tuple | None = None
    a: float | None = None
    b: float | None = None
    theta: float | None = None
    rule: object | None = None
    wants_hessians: bool = False

    @staticmethod
    def constant(eta: float) -> "StepSchedule":
        if eta < 0:
            raise ValueError("step size must be non-negative")
        return StepSchedule("constant", eta=float(eta))

    @staticmethod
    def small_steps(steps) -> "StepSchedule":
        steps = tuple(float(s) for s in steps)
        if any(s < 0 for s in steps):
            raise ValueError("step sizes must be non-negative")
        return StepSchedule("small_steps", steps=steps)

    @staticmethod
    def poly_decay(a: float, b: float, theta: float) -> "StepSchedule":
        """eta_t = a / (b + t^theta)."""
        if a <= 0 or b < 0 or theta < 0:
            raise ValueError("poly decay needs a > 0, b >= 0, theta >= 0")
        return StepSchedule("poly_decay", a=float(a), b=float(b), theta=float(theta))

    @staticmethod
    def gram_adaptive(rule, wants_hessians: bool = False) -> "StepSchedule":
        """rule: GramInfo -> eta; sees the trajectory only through inner products."""
        return StepSchedule("gram_adaptive", rule=rule, wants_hessians=wants_hessians)

    def step_at(self, t: int, gram: GramInfo | None = None) -> float:
        if self.kind == "constant":
            return self.eta
        if self.kind == "small_steps":
            if t > len(self.steps):
                raise ValueError(f"schedule provides {len(self.steps)} steps, "
                                 f"step {t} requested")
            return self.steps[t - 1]
        if self.kind == "poly_decay":
            return self.a / (self.b + t ** self.theta)
        eta = float(self.rule(gram))
        return eta

    def realized(self, T: int) -> np.ndarray:
        """The non-adaptive step sequence eta_1..eta_{T-1}."""
        if self.kind == "gram_adaptive":
            raise ValueError("adaptive schedules are only realized by running")
        return np.array([self.step_at(t) for t in range(1, T)])


@dataclass(frozen=True)
class AggregationRule:
    kind: str  # "none" | "fixed_weights" | "gram_adaptive"
    weights: tuple | None = None
    rule: object | None = None

    @staticmethod
    def none() -> "AggregationRule":
        return AggregationRule("none")

    @staticmethod
    def fixed_weights(weights) -> "AggregationRule":
        weights = tuple(float(w) for w in weights)
        if any(w < 0 for w in weights):
            raise ValueError("aggregation weights must be non-negative")
        return AggregationRule("fixed_weights", weights=weights)

    @staticmethod
    def uniform(T: int) -> "AggregationRule":
        return AggregationRule.fixed_weights([1.0 / T] * T)

    @staticmethod
    def last_iterate(T: int) -> "AggregationRule":
        return AggregationRule.fixed_weights([0.0] * (T - 1) + [1.0])

    @staticmethod
    def gram_adaptive(rule) -> "AggregationRule":
        """rule: GramInfo -> weight vector of length n_iterates."""
        return AggregationRule("gram_adaptive", rule=rule)


@dataclass(frozen=True)
class Criteria:
    min_grad_norm: float
    avg_grad_norm: float
    norm_of_avg_grad: float
    grad_norm_at_out: float | None = None

    def as_dict(self) -> dict:
        return {
            "min_grad_norm": self.min_grad_norm,
            "avg_grad_norm": self.avg_grad_norm,
            "norm_of_avg_grad": self.norm_of_avg_grad,
            "grad_norm_at_out": self.grad_norm_at_out,
        }


@dataclass(frozen=True)
class Trajectory:
    """One SGD run.  Per-iterate arrays are None when run with record=False."""

    T: int
    iterates: np.ndarray | None        # (T, d)
    noisy_grads: np.ndarray | None     # (T-1, d)
    true_grads: np.ndarray | None      # (T, d)
    values: np.ndarray                 # (T,)
    x_out: np.ndarray | None
    realized_steps: np.ndarray         # (T-1,)
    criteria: Criteria
    seed: int


def _gram(xs: list, gs: list, hessians: list | None) -> GramInfo:
    m = np.array(xs + gs)
    return GramInfo(matrix=m @ m.T, n_iterates=len(xs), n_grads=len(gs),
                    hessian_diags=None if hessians is None else tuple(hessians))


def run(obj: Objective, x1, T: int, schedule: StepSchedule, noise: NoiseModel,
        agg: AggregationRule = AggregationRule.none(),
        record: bool = True) -> Trajectory:
    """Simulate T iterates of SGD from x1; deterministic given the noise seed."""
    x1 = np.asarray(x1, dtype=float)
    d = obj.dim
    if x1.shape != (d,):
        raise ValueError(f"x1 must have length {d}, got shape {x1.shape}")
    if T < 1:
        raise ValueError("T must be >= 1")
    if noise.kind == "rademacher_coordinate" and noise.sigma > 0 and d < T:
        raise ValueError(f"rademacher noise needs dimension >= T ({T}), got {d}")
    if noise.dim is not None and noise.dim != d:
        raise ValueError(f"noise was declared for dimension {noise.dim}, "
                         f"objective has dimension {d}")
    if schedule.kind == "small_steps" and len(schedule.steps) < T - 1:
        raise ValueError("small_steps schedule is shorter than T-1")
    gram_needed = schedule.kind == "gram_adaptive" or agg.kind == "gram_adaptive"
    if gram_needed and not record:
        raise ValueError("gram-adaptive rules need record=True (full vectors)")
    wants_hess = schedule.kind == "gram_adaptive" and schedule.wants_hessians

    x = x1.copy()
    xs = [x.copy()] if (record or gram_needed) else None
    gs: list = []
    hessians: list | None = [] if wants_hess else None
    values = np.empty(T)
    steps = np.empty(max(T - 1, 0))
    true_grads = np.empty((T, d)) if record else None
    noisy_grads = np.empty((max(T - 1, 0), d)) if record else None

    # streaming criteria accumulators
    min_gn = math.inf
    sum_gn = 0.0
    sum_grad = np.zeros(d)
    if agg.kind == "fixed_weights":
        w = np.asarray(agg.weights, dtype=float)
        if w.shape != (T,):
            raise ValueError(f"aggregation weights must have length T={T}")
        x_out_acc = w[0] * x
    else:
        w = None
        x_out_acc = None

    for t in range(1, T + 1):
        g_true = obj.gradient(x)
        values[t - 1] = obj.value(x)
        gn = float(np.linalg.norm(g_true))
        min_gn = min(min_gn, gn)
        sum_gn += gn
        sum_grad += g_true
        if record:
            true_grads[t - 1] = g_true
        if wants_hess:
            hessians.append(obj.hessian_diag(x))
        if t == T:
            break
        xi = noise.draw(t, d)
        g_noisy = g_true if xi is None else g_true + xi
        if record:
            noisy_grads[t - 1] = g_noisy
        gs.append(np.asarray(g_noisy))
        if schedule.kind == "gram_adaptive":
            eta = schedule.step_at(t, _gram(xs, gs, hessians))
        else:
            eta = schedule.step_at(t)
        if eta < 0:
            raise ValueError(f"negative step size {eta} at step {t}")
        steps[t - 1] = eta
        x = x - eta * g_noisy
        if xs is not None:
            xs.append(x.copy())
        if x_out_acc is not None:
            x_out_acc = x_out_acc + w[t] * x

    if agg.kind == "none":
        x_out = None
    elif agg.kind == "fixed_weights":
        x_out = x_out_acc
    else:
        zeta = np.asarray(agg.rule(_gram(xs, gs, None)), dtype=float)
        if zeta.shape != (T,):
            raise ValueError("gram-adaptive aggregation must return T weights")
        if np.any(zeta < 0):
            raise ValueError("aggregation weights must be non-negative")
        x_out = zeta @ np.array(xs)

    crit = Criteria(
        min_grad_norm=min_gn,
        avg_grad_norm=sum_gn / T,
        norm_of_avg_grad=float(np.linalg.norm(sum_grad / T)),
        grad_norm_at_out=None if x_out is None
        else float(np.linalg.norm(obj.gradient(x_out))),
    )
    return Trajectory(
        T=T,
        iterates=np.array(xs) if record else None,
        noisy_grads=noisy_grads,
        true_grads=true_grads,
        values=values,
        x_out=x_out,
        realized_steps=steps,
        criteria=crit,
        seed=noise.seed,
    )


def aggregate(traj: Trajectory, agg: AggregationRule) -> np.ndarray:
    """Combine recorded iterates into sum_t zeta_t x_t."""
    if traj.iterates is None:
        raise ValueError("trajectory was run with record=False")
    if agg.kind == "none":
        raise ValueError("aggregation rule 'none' produces no output point")
    if agg.kind == "fixed_weights":
        zeta = np.asarray(agg.weights, dtype=float)
    else:
        xs = [traj.iterates[i] for i in range(traj.T)]
        gs = [traj.noisy_grads[i] for i in range(traj.T - 1)]
        zeta = np.asarray(agg.rule(_gram(xs, gs, None)), dtype=float)
    if zeta.shape != (traj.T,):
        raise ValueError(f"need {traj.T} weights, got {zeta.shape}")
    return zeta @ traj.iterates


def criteria(traj: Trajectory) -> Criteria:
    """The four gradient-norm criteria of a finished trajectory."""
    if traj.true_grads is None:
        return traj.criteria
    norms = np.linalg.norm(traj.true_grads, axis=1)
    return Criteria(
        min_grad_norm=float(norms.min()),
        avg_grad_norm=float(norms.mean()),
        norm_of_avg_grad=float(np.linalg.norm(traj.true_grads.mean(axis=0))),
        grad_norm_at_out=traj.criteria.grad_norm_at_out,
    )


def mean_criteria(trajs) -> Criteria:
    """Monte Carlo estimators of the expected criteria over replications."""
    trajs = list(trajs)
    if not trajs:
        raise ValueError("need at least one trajectory")
    outs = [t.criteria.grad_norm_at_out for t in trajs]
    has_out = all(o is not None for o in outs)
    return Criteria(
        min_grad_norm=float(np.mean([t.criteria.min_grad_norm for t in trajs])),
        avg_grad_norm=float(np.mean([t.criteria.avg_grad_norm for t in trajs])),
        norm_of_avg_grad=float(np.mean([t.criteria.norm_of_avg_grad for t in trajs])),
        grad_norm_at_out=float(np.mean(outs)) if has_out else None,
    )
