"""Exact 1-D piecewise-polynomial building blocks with closed-form derivatives.

Three families are provided: a bounded sigmoid-like step ``make_sigmoid``,
a pair of flat-topped quadratic bumps ``make_bump1`` (variants that rise
immediately or only past half width), and a cubic bump ``make_bump2`` whose
second derivative vanishes at the plateau edges.  All pieces store polynomial
coefficients in powers of (x - shift), so values and the first two
derivatives are evaluated exactly (no finite differencing, no runtime |x|):
absolute-value case formulas are realized by explicit mirrored pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

__all__ = [
    "PolynomialPiece",
    "PiecewiseScalarFunction",
    "make_sigmoid",
    "make_bump1",
    "make_bump2",
    "zero_function",
    "evaluate",
]

_CONTINUITY_TOL = 1e-12


@dataclass(frozen=True)
class PolynomialPiece:
    """One polynomial piece on [lo, hi]: sum_k coeffs[k] * (x - shift)^k."""

    lo: float
    hi: float
    coeffs: tuple[float, ...]
    shift: float = 0.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"piece interval is empty: [{self.lo}, {self.hi}]")
        if len(self.coeffs) == 0:
            raise ValueError("piece needs at least one coefficient")

    def derivative_coeffs(self, order: int) -> tuple[float, ...]:
        c = list(self.coeffs)
        for _ in range(order):
            c = [k * c[k] for k in range(1, len(c))]
        return tuple(c) if c else (0.0,)

    def __call__(self, x, order: int = 0):
        return npoly.polyval(np.asarray(x) - self.shift, self.derivative_coeffs(order))


class PiecewiseScalarFunction:
    """An exactly evaluable scalar function given by polynomial pieces covering R.

    Pieces must partition the line (hi of one piece equals lo of the next,
    with infinite sentinels at the ends) and be C^1 across every breakpoint;
    C^2 is additionally required when a Hessian Lipschitz constant is
    declared.  Continuity is validated numerically at construction rather
    than assumed, which catches transcription errors in the case formulas.
    """

    def __init__(self, pieces, grad_lipschitz: float | None = None,
                 hess_lipschitz: float | None = None):
        pieces = tuple(pieces)
        if not pieces:
            raise ValueError("need at least one piece")
        if pieces[0].lo != -math.inf or pieces[-1].hi != math.inf:
            raise ValueError("pieces must cover all of R (infinite end sentinels)")
        for a, b in zip(pieces, pieces[1:]):
            if a.hi != b.lo:
                raise ValueError(f"gap or overlap between pieces at {a.hi} vs {b.lo}")
        if grad_lipschitz is not None and grad_lipschitz < 0:
            raise ValueError("grad_lipschitz must be >= 0")
        if hess_lipschitz is not None and hess_lipschitz < 0:
            raise ValueError("hess_lipschitz must be >= 0")
        self.pieces = pieces
        self.grad_lipschitz = grad_lipschitz
        self.hess_lipschitz = hess_lipschitz
        # interior breakpoints, for searchsorted piece lookup
        self._breaks = np.array([p.lo for p in pieces[1:]], dtype=float)
        self._check_continuity()

    def _check_continuity(self):
        smooth_orders = 3 if self.hess_lipschitz is not None else 2
        self._c2_jump_breaks = set()
        for left, right in zip(self.pieces, self.pieces[1:]):
            a = left.hi
            for order in range(3):
                lv = float(left(a, order))
                rv = float(right(a, order))
                tol = _CONTINUITY_TOL * (1.0 + abs(lv) + abs(rv))
                if order < smooth_orders and abs(lv - rv) > tol:
                    raise ValueError(
                        f"order-{order} discontinuity at breakpoint {a}: {lv} vs {rv}")
                if order == 2 and abs(lv - rv) > tol:
                    self._c2_jump_breaks.add(a)

    def piece_index(self, x: float) -> int:
        return int(np.searchsorted(self._breaks, x, side="right"))

    def __call__(self, x: float, order: int = 0) -> float:
        """Evaluate the function (order 0) or an exact derivative (order 1 or 2)."""
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        if order == 2 and x in self._c2_jump_breaks:
            raise ValueError(
                f"second derivative jumps at x={x}; the query is ill posed")
        return float(self.pieces[self.piece_index(x)](x, order))

    def eval_many(self, xs: np.ndarray, order: int = 0) -> np.ndarray:
        """Vectorized evaluation; breakpoints resolve to the right-hand piece."""
        xs = np.asarray(xs, dtype=float)
        idx = np.searchsorted(self._breaks, xs, side="right")
        out = np.empty_like(xs, dtype=float)
        for k in np.unique(idx):
            m = idx == k
            out[m] = self.pieces[k](xs[m], order)
        return out

    def breakpoints(self) -> np.ndarray:
        return self._breaks.copy()

    def infimum(self) -> float:
        """Exact infimum over R (piece endpoints, interior critical points, tails)."""
        best = math.inf
        for i, p in enumerate(self.pieces):
            nonzero = [k for k, c in enumerate(p.coeffs) if c != 0.0]
            deg_eff = max(nonzero) if nonzero else 0
            if deg_eff >= 1:
                lead = p.coeffs[deg_eff]
                if p.lo == -math.inf and lead * (-1) ** deg_eff < 0:
                    return -math.inf
                if p.hi == math.inf and lead < 0:
                    return -math.inf
            cands = [e for e in (p.lo, p.hi) if math.isfinite(e)]
            if not cands:
                cands.append(p.shift)  # single piece covering R
            dc = p.derivative_coeffs(1)
            if len(dc) > 1:
                for r in npoly.polyroots(dc):
                    if abs(r.imag) < 1e-12:
                        x = r.real + p.shift
                        if p.lo <= x <= p.hi:
                            cands.append(x)
            for x in cands:
                best = min(best, float(p(x, 0)))
        return best


def evaluate(f: PiecewiseScalarFunction, x: float, order: int = 0) -> float:
    """Functional form of ``f(x, order)``."""
    return f(x, order)


def zero_function() -> PiecewiseScalarFunction:
    """The identically-zero function (stand-in for degenerate bump width b=0)."""
    return PiecewiseScalarFunction(
        [PolynomialPiece(-math.inf, math.inf, (0.0,))],
        grad_lipschitz=0.0, hess_lipschitz=0.0)


def make_sigmoid() -> PiecewiseScalarFunction:
    """Odd, non-decreasing step from -1/2 to 1/2, flat outside [-1, 1].

    Five pieces: constant tails, cubic shoulders 2/3 (x -/+ 1)^3 -/+ ... and
    the middle -2/3 x^3 + x; gradient is 2-Lipschitz and Hessian 4-Lipschitz.
    """
    return PiecewiseScalarFunction(
        [
            PolynomialPiece(-math.inf, -1.0, (-0.5,), shift=-1.0),
            PolynomialPiece(-1.0, -0.5, (-0.5, 0.0, 0.0, 2.0 / 3.0), shift=-1.0),
            PolynomialPiece(-0.5, 0.5, (0.0, 1.0, 0.0, -2.0 / 3.0), shift=0.0),
            PolynomialPiece(0.5, 1.0, (0.5, 0.0, 0.0, 2.0 / 3.0), shift=1.0),
            PolynomialPiece(1.0, math.inf, (0.5,), shift=1.0),
        ],
        grad_lipschitz=2.0,
        hess_lipschitz=4.0,
    )


def make_bump1(L: float, b: float, variant: str) -> PiecewiseScalarFunction:
    """Even flat-topped bump with L-Lipschitz gradient, plateau L b^2 / 16.

    variant "plus" rises from 0 immediately and plateaus at |x| >= b/2;
    variant "minus" is zero on |x| <= b/2 and plateaus at |x| >= b.  Both
    have zero derivative at 0, +/-b/2 and +/-b.
    """
    if L <= 0 or b <= 0:
        raise ValueError("make_bump1 requires L > 0 and b > 0")
    if variant not in ("plus", "minus"):
        raise ValueError(f"unknown variant {variant!r}; use 'plus' or 'minus'")
    top = L * b * b / 16.0
    if variant == "plus":
        pieces = [
            PolynomialPiece(-math.inf, -b / 2, (top,), shift=-b / 2),
            PolynomialPiece(-b / 2, -b / 4, (top, 0.0, -L / 2), shift=-b / 2),
            PolynomialPiece(-b / 4, b / 4, (0.0, 0.0, L / 2), shift=0.0),
            PolynomialPiece(b / 4, b / 2, (top, 0.0, -L / 2), shift=b / 2),
            PolynomialPiece(b / 2, math.inf, (top,), shift=b / 2),
        ]
    else:
        pieces = [
            PolynomialPiece(-math.inf, -b, (top,), shift=-b),
            PolynomialPiece(-b, -3 * b / 4, (top, 0.0, -L / 2), shift=-b),
            PolynomialPiece(-3 * b / 4, -b / 2, (0.0, 0.0, L / 2), shift=-b / 2),
            PolynomialPiece(-b / 2, b / 2, (0.0,), shift=0.0),
            PolynomialPiece(b / 2, 3 * b / 4, (0.0, 0.0, L / 2), shift=b / 2),
            PolynomialPiece(3 * b / 4, b, (top, 0.0, -L / 2), shift=b),
            PolynomialPiece(b, math.inf, (top,), shift=b),
        ]
    return PiecewiseScalarFunction(pieces, grad_lipschitz=L)


def make_bump2(rho: float, b: float) -> PiecewiseScalarFunction:
    """Even cubic bump with rho-Lipschitz Hessian, plateau rho b^3 / 32.

    Rises like rho/6 |x|^3 near 0 and meets the plateau at |x| = b with both
    first and second derivatives equal to zero, so iterates sitting at 0 or
    +/-b expose no curvature.
    """
    if rho <= 0 or b <= 0:
        raise ValueError("make_bump2 requires rho > 0 and b > 0")
    top = rho * b ** 3 / 32.0
    mid0 = rho * b ** 3 / 192.0
    pieces = [
        PolynomialPiece(-math.inf, -b, (top,), shift=-b),
        PolynomialPiece(-b, -3 * b / 4, (top, 0.0, 0.0, -rho / 6), shift=-b),
        PolynomialPiece(-3 * b / 4, -b / 4,
                        (mid0, rho * b * b / 16, rho * b / 4, rho / 6), shift=0.0),
        PolynomialPiece(-b / 4, 0.0, (0.0, 0.0, 0.0, -rho / 6), shift=0.0),
        PolynomialPiece(0.0, b / 4, (0.0, 0.0, 0.0, rho / 6), shift=0.0),
        PolynomialPiece(b / 4, 3 * b / 4,
                        (mid0, -rho * b * b / 16, rho * b / 4, -rho / 6), shift=0.0),
        PolynomialPiece(3 * b / 4, b, (top, 0.0, 0.0, rho / 6), shift=b),
        PolynomialPiece(b, math.inf, (top,), shift=b),
    ]
    # |h''| peaks at rho*b/4, so the gradient is (rho*b/4)-Lipschitz as well
    return PiecewiseScalarFunction(pieces, grad_lipschitz=rho * b / 4.0,
                                   hess_lipschitz=rho)
