"""Smooth interpolation machinery for finite (point, gradient, value) sets.

Given triples {(x_t, g_t, f_t)} and a smoothness level L, this module

* checks the pairwise convex / nonconvex L-smooth interpolability conditions,
* evaluates the bounded interpolating function W(y) (convex case) and
  What(y) (nonconvex case) through a small simplex-constrained QP,
* returns the interpolant's exact global minimizer x_j - g_j / L, and
* computes the feasibility interval of the common value beta that extends a
  gradient-matched point set while keeping the nonconvex conditions intact.

The QP is solved by accelerated projected gradient with exact Euclidean
projection onto the unit simplex; an active-set polish of the support guess
closes the last digits so the KKT residual target 1e-10 * scale is reached
even on degenerate faces.  W's gradient uses the envelope relation
grad W(y) = L (y - sum_t alpha*_t (x_t - g_t / L)), which is validated
against finite differences in the test suite rather than trusted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "InterpolationSet",
    "CheckResult",
    "SimplexQpSolution",
    "InterpolantEval",
    "BetaRange",
    "QpToleranceError",
    "check_convex_interpolable",
    "check_nonconvex_interpolable",
    "eval_bounded_interpolant",
    "global_min_of_interpolant",
    "beta_range",
    "project_simplex",
    "solve_simplex_qp",
]


class QpToleranceError(RuntimeError):
    """The simplex QP did not reach its KKT tolerance within the budget."""


@dataclass(frozen=True)
class InterpolationSet:
    """Triples (x_t, g_t, f_t) plus the smoothness constant L > 0."""

    xs: np.ndarray  # (T, d)
    gs: np.ndarray  # (T, d)
    fs: np.ndarray  # (T,)
    L: float

    def __post_init__(self):
        xs = np.atleast_2d(np.asarray(self.xs, dtype=float))
        gs = np.atleast_2d(np.asarray(self.gs, dtype=float))
        fs = np.atleast_1d(np.asarray(self.fs, dtype=float))
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "gs", gs)
        object.__setattr__(self, "fs", fs)
        if xs.shape != gs.shape or xs.shape[0] != fs.shape[0] or fs.size == 0:
            raise ValueError("xs, gs must be (T, d) and fs (T,), all non-empty")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def size(self) -> int:
        return self.fs.size

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    @property
    def scale(self) -> float:
        return 1.0 + float(np.max(np.abs(self.fs))) + \
            float(np.max(np.sum(self.gs ** 2, axis=1))) / self.L

    def floor_values(self) -> np.ndarray:
        """c_t = f_t - ||g_t||^2 / (2L); min over t is the interpolant's infimum."""
        return self.fs - np.sum(self.gs ** 2, axis=1) / (2 * self.L)


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    violations: tuple  # of (i, j, slack) with slack < -tol
    min_slack: float

    def __bool__(self) -> bool:
        return self.ok


def _pair_slacks(S: InterpolationSet, nonconvex: bool) -> np.ndarray:
    """slack[i, j] = RHS - LHS of the ordered-pair condition (i as first index)."""
    X, G, F, L = S.xs, S.gs, S.fs, S.L
    gg = G @ G.T
    g2 = np.diag(gg)
    xg = X @ G.T                      # xg[i, j] = <x_i, g_j>
    gxd = np.sum(G * X, axis=1)       # <g_j, x_j>
    rhs = F[:, None] - F[None, :] - (xg - gxd[None, :])
    lhs = (g2[:, None] + g2[None, :] - 2 * gg) / (2 * L)
    if nonconvex:
        U = X - G / L
        uu = U @ U.T
        u2 = np.diag(uu)
        lhs = lhs - (L / 4) * (u2[:, None] + u2[None, :] - 2 * uu)
    return rhs - lhs


def _run_check(S: InterpolationSet, nonconvex: bool, tol_factor: float) -> CheckResult:
    slack = _pair_slacks(S, nonconvex)
    np.fill_diagonal(slack, 0.0)
    tol = tol_factor * S.scale
    bad = np.argwhere(slack < -tol)
    violations = tuple((int(i), int(j), float(slack[i, j])) for i, j in bad)
    return CheckResult(ok=len(violations) == 0, violations=violations,
                       min_slack=float(slack.min()) if S.size > 1 else 0.0)


def check_convex_interpolable(S: InterpolationSet,
                              tol_factor: float = 1e-10) -> CheckResult:
    """1/(2L) ||g_i - g_j||^2 <= f_i - f_j - <g_j, x_i - x_j> for all ordered pairs."""
    return _run_check(S, nonconvex=False, tol_factor=tol_factor)


def check_nonconvex_interpolable(S: InterpolationSet,
                                 tol_factor: float = 1e-10) -> CheckResult:
    """Convex condition weakened by L/4 ||x_i - x_j - (g_i - g_j)/L||^2."""
    return _run_check(S, nonconvex=True, tol_factor=tol_factor)


# ---------------------------------------------------------------------------
# simplex QP
# ---------------------------------------------------------------------------

def project_simplex(v: np.ndarray) -> np.ndarray:
    """Exact Euclidean projection onto {alpha >= 0, sum alpha = 1}."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    k = ks[u - css / ks > 0][-1]
    return np.maximum(v - css[k - 1] / k, 0.0)


@dataclass(frozen=True)
class SimplexQpSolution:
    alpha: np.ndarray
    objective_value: float
    kkt_residual: float
    iterations: int
    degenerate: bool


def _kkt_residual(alpha, grad):
    return float(np.max(np.abs(alpha - project_simplex(alpha - grad))))


def _polish_active_set(Q, b, support, max_pivots=60):
    """Exact equality-constrained solves on a growing/shrinking support guess."""
    T = b.size
    active = sorted(set(support)) or [int(np.argmin(b))]
    for _ in range(max_pivots):
        idx = np.array(active)
        k = idx.size
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = Q[np.ix_(idx, idx)]
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.concatenate([-b[idx], [1.0]])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            return None
        a_act, mu = sol[:k], sol[k]
        if np.min(a_act) < -1e-12:
            if k == 1:
                return None
            active.pop(int(np.argmin(a_act)))
            continue
        alpha = np.zeros(T)
        alpha[idx] = np.maximum(a_act, 0.0)
        v = Q @ alpha + b
        dual_tol = 1e-12 * (1.0 + abs(mu) + float(np.max(np.abs(v))))
        outside = [i for i in range(T) if i not in active]
        if not outside or np.min(v[outside]) >= mu - dual_tol:
            return alpha
        active.append(int(min(outside, key=lambda i: v[i])))
        active.sort()
    return None


def solve_simplex_qp(Q: np.ndarray, b: np.ndarray, const: float = 0.0,
                     tol: float = 1e-10, max_iter: int = 100_000) -> SimplexQpSolution:
    """Minimize 0.5 a'Qa + b'a + const over the unit simplex (Q PSD)."""
    Q = np.asarray(Q, dtype=float)
    b = np.asarray(b, dtype=float)
    T = b.size

    def finish(alpha, iters):
        alpha = np.maximum(alpha, 0.0)
        alpha = alpha / alpha.sum()
        grad = Q @ alpha + b
        res = _kkt_residual(alpha, grad)
        val = float(0.5 * alpha @ Q @ alpha + b @ alpha + const)
        # degenerate face: an inactive vertex sits at (numerically) the same
        # multiplier level as the support, so alpha* may be non-unique
        mu = float(alpha @ grad)
        inactive = alpha <= 1e-10
        degen = bool(np.any(inactive) and
                     np.min(grad[inactive], initial=np.inf) <= mu + 1e-7 * (1 + abs(mu)))
        return SimplexQpSolution(alpha, val, res, iters, degen)

    if T == 1:
        return finish(np.ones(1), 0)

    lip = float(np.max(np.linalg.eigvalsh(Q))) if np.any(Q) else 0.0
    if lip <= 0:
        alpha = np.zeros(T)
        alpha[int(np.argmin(b))] = 1.0  # affine objective: best vertex
        return finish(alpha, 0)

    step = 1.0 / lip
    alpha = np.full(T, 1.0 / T)
    zeta = alpha.copy()
    t_mom = 1.0
    for it in range(1, max_iter + 1):
        grad_z = Q @ zeta + b
        nxt = project_simplex(zeta - step * grad_z)
        if (zeta - nxt) @ (nxt - alpha) > 0:
            t_new, beta_mom = 1.0, 0.0   # gradient restart: drop momentum
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom ** 2))
            beta_mom = (t_mom - 1.0) / t_new
        zeta = nxt + beta_mom * (nxt - alpha)
        alpha, t_mom = nxt, t_new
        if it % 25 == 0 or it == max_iter:
            grad = Q @ alpha + b
            if _kkt_residual(alpha, grad) <= tol:
                return finish(alpha, it)
            polished = _polish_active_set(Q, b, np.flatnonzero(alpha > 1e-12))
            if polished is not None and \
                    _kkt_residual(polished, Q @ polished + b) <= tol:
                return finish(polished, it)
    raise QpToleranceError(
        f"simplex QP did not reach KKT residual {tol:g} in {max_iter} iterations")


# ---------------------------------------------------------------------------
# bounded interpolants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InterpolantEval:
    value: float
    gradient: np.ndarray
    alpha: SimplexQpSolution


def _qp_data(S: InterpolationSet, y: np.ndarray, mode: str):
    """(Q, b, const, anchors A, envelope factor) for W (convex) or What."""
    L = S.L
    U = S.xs - S.gs / L               # rows x_t - g_t / L
    if mode == "convex":
        A = U
        c = S.floor_values()
        Q = L * (A @ A.T)
        b = -L * (A @ y) + c
        const = 0.5 * L * float(y @ y)
        factor = L
    else:
        A = 0.5 * U                   # x_t - (g_t + L x_t) / (2L)
        shifted = S.gs + L * S.xs
        c = S.fs + 0.5 * L * np.sum(S.xs ** 2, axis=1) \
            - np.sum(shifted ** 2, axis=1) / (4 * L)
        Q = 2 * L * (A @ A.T)
        b = -2 * L * (A @ y) + c
        const = 0.5 * L * float(y @ y)   # L||y||^2 from Z minus (L/2)||y||^2
        factor = 2 * L
    return Q, b, const, A, factor


def _check_for_mode(S: InterpolationSet, mode: str) -> CheckResult:
    if mode == "convex":
        return check_convex_interpolable(S)
    if mode == "nonconvex":
        return check_nonconvex_interpolable(S)
    raise ValueError(f"mode must be 'convex' or 'nonconvex', got {mode!r}")


def eval_bounded_interpolant(S: InterpolationSet, y, mode: str = "convex",
                             gradient: str = "auto", check: bool = True,
                             max_iter: int = 100_000) -> InterpolantEval:
    """Value and gradient of the bounded interpolant at y.

    gradient: "envelope" uses the optimal-alpha relation, "fd" central
    differences, "auto" the envelope with a finite-difference fallback when
    the QP optimum looks degenerate (non-unique face).
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (S.dim,):
        raise ValueError(f"probe point must have dimension {S.dim}")
    if check:
        res = _check_for_mode(S, mode)
        if not res.ok:
            raise ValueError(
                f"set is not {mode}-interpolable: {len(res.violations)} violated "
                f"pairs, worst slack {res.min_slack:.3e}")
    tol = 1e-10 * S.scale
    Q, b, const, A, factor = _qp_data(S, y, mode)
    sol = solve_simplex_qp(Q, b, const, tol=tol, max_iter=max_iter)
    grad = factor * (y - A.T @ sol.alpha)
    if mode == "nonconvex":
        grad = grad - S.L * y
    if gradient == "fd" or (gradient == "auto" and sol.degenerate):
        grad = _fd_gradient(S, y, mode, tol, max_iter)
    return InterpolantEval(value=sol.objective_value, gradient=grad, alpha=sol)


def _fd_gradient(S, y, mode, tol, max_iter, h_rel=1e-6):
    h = h_rel * (1.0 + float(np.linalg.norm(y)))
    g = np.empty(S.dim)
    for i in range(S.dim):
        e = np.zeros(S.dim)
        e[i] = h
        vp = solve_simplex_qp(*_qp_data(S, y + e, mode)[:3], tol=tol,
                              max_iter=max_iter).objective_value
        vm = solve_simplex_qp(*_qp_data(S, y - e, mode)[:3], tol=tol,
                              max_iter=max_iter).objective_value
        g[i] = (vp - vm) / (2 * h)
    return g


def global_min_of_interpolant(S: InterpolationSet, mode: str = "convex",
                              check: bool = True):
    """(argmin, min value) = (x_j - g_j/L, f_j - ||g_j||^2/(2L)), lowest-index j."""
    if mode not in ("convex", "nonconvex"):
        raise ValueError(f"mode must be 'convex' or 'nonconvex', got {mode!r}")
    if check:
        res = _check_for_mode(S, mode)
        if not res.ok:
            raise ValueError(f"set is not {mode}-interpolable")
    c = S.floor_values()
    j = int(np.argmin(c))
    return S.xs[j] - S.gs[j] / S.L, float(c[j])


# ---------------------------------------------------------------------------
# beta feasibility range
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BetaRange:
    lo: float
    hi: float
    certified_floor: float  # min_i f(z_i) - ||gamma||^2 / L, a lower bound on hi
    scale: float

    @property
    def nonempty(self) -> bool:
        return self.lo <= self.hi + 1e-12 * self.scale

    def contains(self, beta: float) -> bool:
        slack = 1e-12 * self.scale
        return self.lo - slack <= beta <= self.hi + slack


def beta_range(zs, fzs, ys, gamma, L: float, chunk: int = 4096) -> BetaRange:
    """Admissible common values beta for extending {(y_j, gamma, beta)}.

    zs: (n, d) anchor points with values fzs; ys: (m, d) points sharing the
    gradient gamma and (by hypothesis) the inner product <gamma, y_j>.  The
    interval is [max_{i,j} base_ij - q_ij, min_{i,j} base_ij + q_ij] with
    base_ij = f(z_i) + <gamma, y_j - z_i> and q_ij = L/4 ||y_j - z_i||^2.
    """
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    fzs = np.atleast_1d(np.asarray(fzs, dtype=float))
    gamma = np.asarray(gamma, dtype=float)
    if zs.shape[0] != fzs.size or zs.shape[1] != ys.shape[1] or \
            gamma.shape != (zs.shape[1],):
        raise ValueError("inconsistent shapes among zs, fzs, ys, gamma")
    if not L > 0:
        raise ValueError("L must be positive")

    gy = ys @ gamma
    spread = float(np.max(gy) - np.min(gy))
    if spread > 1e-9 * (1.0 + float(np.max(np.abs(gy)))):
        raise ValueError(
            f"<gamma, y_j> must be identical across ys (spread {spread:.3e})")

    y2 = np.sum(ys ** 2, axis=1)
    lo, hi = -np.inf, np.inf
    for start in range(0, zs.shape[0], chunk):
        zc = zs[start:start + chunk]
        fc = fzs[start:start + chunk]
        base = fc[:, None] + gy[None, :] - (zc @ gamma)[:, None]
        d2 = np.sum(zc ** 2, axis=1)[:, None] + y2[None, :] - 2 * (zc @ ys.T)
        d2 = np.maximum(d2, 0.0)
        q = 0.25 * L * d2
        lo = max(lo, float(np.max(base - q)))
        hi = min(hi, float(np.min(base + q)))
    g2 = float(gamma @ gamma)
    scale = 1.0 + float(np.max(np.abs(fzs))) + g2 / L
    return BetaRange(lo=lo, hi=hi, certified_floor=float(np.min(fzs)) - g2 / L,
                     scale=scale)
