"""d-dimensional objectives assembled from exact scalar parts.

Three kinds cover every construction used by the lower-bound instances:

* ``separable_linear_plus_bumps``: G * x[0] + sum_t h_t(x[t+1]) with each
  h_t a 1-D piecewise bump (or None for the zero function).  Its gradient
  along coordinate 0 is identically G.
* ``embedded_scalar``: a 1-D function applied to one coordinate.
* ``quadratic_diag``: (1/2) sum_i c_i x_i^2 with curvatures c_i >= 0.
"""

from __future__ import annotations

import numpy as np

from .piecewise import PiecewiseScalarFunction

__all__ = [
    "Objective",
    "SeparableObjective",
    "EmbeddedScalarObjective",
    "DiagonalQuadratic",
    "uniform_quadratic",
    "single_coordinate_quadratic",
]


class Objective:
    """Common surface: exact value, gradient, optional diagonal Hessian."""

    kind: str
    dim: int
    grad_lipschitz: float
    hess_lipschitz: float | None

    def _check_dim(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        return x

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian_diag(self, x) -> np.ndarray:
        raise NotImplementedError(f"{self.kind} objective does not expose a Hessian")

    def suboptimality_gap(self, x1) -> float:
        """f(x1) - inf f, for kinds with a closed-form infimum."""
        raise NotImplementedError


class _StackedBumps:
    """One vectorized evaluator for many 1-D piecewise cubics, one coordinate
    each.  Piece lookup and Horner evaluation reproduce the per-function path
    bit for bit (same breakpoint comparison, same association order)."""

    def __init__(self, bumps: list[tuple[int, PiecewiseScalarFunction]]):
        self.coords = np.array([i for i, _ in bumps], dtype=int)
        fns = [h for _, h in bumps]
        n = len(fns)
        max_breaks = max(len(h.pieces) - 1 for h in fns)
        max_pieces = max_breaks + 1
        self.breaks = np.full((n, max_breaks), np.inf)
        self.shifts = np.zeros((n, max_pieces))
        self.coeffs = np.zeros((3, n, max_pieces, 4))
        for r, h in enumerate(fns):
            nb = len(h.pieces) - 1
            self.breaks[r, :nb] = [p.lo for p in h.pieces[1:]]
            for k, piece in enumerate(h.pieces):
                self.shifts[r, k] = piece.shift
                for order in range(3):
                    dc = piece.derivative_coeffs(order)
                    self.coeffs[order, r, k, :len(dc)] = dc
        self._rows = np.arange(n)

    def eval(self, x: np.ndarray, order: int) -> np.ndarray:
        piece = (self.breaks <= x[:, None]).sum(axis=1)
        u = x - self.shifts[self._rows, piece]
        c = self.coeffs[order, self._rows, piece]
        return ((c[:, 3] * u + c[:, 2]) * u + c[:, 1]) * u + c[:, 0]


class SeparableObjective(Objective):
    kind = "separable_linear_plus_bumps"

    def __init__(self, G: float, bumps):
        """bumps: one entry per coordinate 1..T-1; None means the zero function."""
        self.G = float(G)
        self.bumps = tuple(bumps)
        self.dim = len(self.bumps) + 1
        ls = [h.grad_lipschitz for h in self.bumps if h is not None]
        if any(l is None for l in ls):
            raise ValueError("every bump must declare a gradient Lipschitz constant")
        self.grad_lipschitz = max(ls, default=0.0)
        hs = [h.hess_lipschitz for h in self.bumps if h is not None]
        self.twice_differentiable = all(h is None or h.hess_lipschitz is not None
                                        for h in self.bumps)
        self.hess_lipschitz = max([h for h in hs if h is not None], default=0.0) \
            if self.twice_differentiable else None
        live = [(i + 1, h) for i, h in enumerate(self.bumps) if h is not None]
        cubic = all(len(p.coeffs) <= 4 for _, h in live for p in h.pieces)
        self._stacked = _StackedBumps(live) if live and cubic else None
        self._live = live

    def _bump_eval(self, x: np.ndarray, order: int) -> np.ndarray:
        out = np.zeros(self.dim)
        if self._stacked is not None:
            idx = self._stacked.coords
            out[idx] = self._stacked.eval(x[idx], order)
        else:
            for i, h in self._live:
                out[i] = h(float(x[i]), order)
        return out

    def value(self, x) -> float:
        x = self._check_dim(x)
        return float(self.G * x[0] + self._bump_eval(x, 0).sum())

    def gradient(self, x) -> np.ndarray:
        x = self._check_dim(x)
        g = self._bump_eval(x, 1)
        g[0] = self.G
        return g

    def hessian_diag(self, x) -> np.ndarray:
        if not self.twice_differentiable:
            raise NotImplementedError(
                "separable objective built from bumps without a Lipschitz Hessian")
        x = self._check_dim(x)
        return self._bump_eval(x, 2)

    def suboptimality_gap(self, x1) -> float:
        raise NotImplementedError(
            "the separable objective is unbounded below; use the interpolation "
            "certificate from sgdfloor.instances instead")


class EmbeddedScalarObjective(Objective):
    kind = "embedded_scalar"

    def __init__(self, scalar: PiecewiseScalarFunction, coord: int, dim: int):
        if not 0 <= coord < dim:
            raise ValueError("coordinate index out of range")
        if scalar.grad_lipschitz is None:
            raise ValueError("scalar part must declare a gradient Lipschitz constant")
        self.scalar = scalar
        self.coord = coord
        self.dim = dim
        self.grad_lipschitz = scalar.grad_lipschitz
        self.hess_lipschitz = scalar.hess_lipschitz

    def value(self, x) -> float:
        x = self._check_dim(x)
        return self.scalar(float(x[self.coord]))

    def gradient(self, x) -> np.ndarray:
        x = self._check_dim(x)
        g = np.zeros(self.dim)
        g[self.coord] = self.scalar(float(x[self.coord]), 1)
        return g

    def hessian_diag(self, x) -> np.ndarray:
        if self.hess_lipschitz is None:
            raise NotImplementedError("scalar part is not twice differentiable")
        x = self._check_dim(x)
        h = np.zeros(self.dim)
        h[self.coord] = self.scalar(float(x[self.coord]), 2)
        return h

    def suboptimality_gap(self, x1) -> float:
        return self.value(x1) - self.scalar.infimum()


class DiagonalQuadratic(Objective):
    kind = "quadratic_diag"

    def __init__(self, curvature):
        c = np.asarray(curvature, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("curvature must be a non-empty vector")
        if np.any(c < 0):
            raise ValueError("curvature entries must be non-negative")
        self.curvature = c
        self.dim = c.size
        self.grad_lipschitz = float(c.max())
        self.hess_lipschitz = 0.0  # constant Hessian

    def value(self, x) -> float:
        x = self._check_dim(x)
        return float(0.5 * np.dot(self.curvature * x, x))

    def gradient(self, x) -> np.ndarray:
        x = self._check_dim(x)
        return self.curvature * x

    def hessian_diag(self, x) -> np.ndarray:
        self._check_dim(x)
        return self.curvature.copy()

    def suboptimality_gap(self, x1) -> float:
        return self.value(x1)  # infimum 0 at the origin


def uniform_quadratic(L: float, dim: int) -> DiagonalQuadratic:
    """(L/2) ||x||^2."""
    return DiagonalQuadratic(np.full(dim, float(L)))


def single_coordinate_quadratic(c1: float, dim: int) -> DiagonalQuadratic:
    """(c1/2) x_1^2 embedded in dimension dim."""
    c = np.zeros(dim)
    c[0] = c1
    return DiagonalQuadratic(c)
