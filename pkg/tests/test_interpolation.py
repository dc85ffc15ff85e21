"""Interpolability conditions, the simplex QP, bounded interpolants, beta range."""

import numpy as np
import pytest

from helpers_interp import (
    grid_interpolant_value,
    random_quadratic_set,
    reference_simplex_projection,
)
from sgdfloor.interpolation import (
    BetaRange,
    InterpolationSet,
    beta_range,
    check_convex_interpolable,
    check_nonconvex_interpolable,
    eval_bounded_interpolant,
    global_min_of_interpolant,
    project_simplex,
    solve_simplex_qp,
)


class TestConvexChecker:
    def test_quadratic_pair_is_tight(self):
        L = 1.6
        S = InterpolationSet(xs=[[0.0], [1.0]], gs=[[0.0], [L]],
                             fs=[0.0, L / 2], L=L)
        res = check_convex_interpolable(S)
        assert res.ok
        assert res.min_slack == pytest.approx(0.0, abs=1e-14)

    def test_single_triple_ok(self):
        S = InterpolationSet(xs=[[2.0, 1.0]], gs=[[0.5, 0.0]], fs=[3.0], L=1.0)
        assert check_convex_interpolable(S).ok

    def test_same_point_different_gradients(self):
        L, v = 2.0, np.array([0.7, -0.4])
        S = InterpolationSet(xs=[[0.0, 0.0], [0.0, 0.0]],
                             gs=[np.zeros(2), v], fs=[0.0, 0.0], L=L)
        res = check_convex_interpolable(S)
        assert not res.ok
        slacks = [s for (_, _, s) in res.violations]
        assert min(slacks) == pytest.approx(-np.dot(v, v) / (2 * L), rel=1e-12)

    def test_random_quadratic_sets_pass(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            S = random_quadratic_set(rng, rng.integers(2, 7), rng.integers(1, 5), 1.3)
            assert check_convex_interpolable(S).ok


class TestNonconvexChecker:
    def test_convex_implies_nonconvex(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            S = random_quadratic_set(rng, rng.integers(2, 7), rng.integers(1, 5),
                                     2.0, mode="convex")
            assert check_convex_interpolable(S).ok
            assert check_nonconvex_interpolable(S).ok

    def test_concave_quadratic_ok(self):
        L = 1.0
        S = InterpolationSet(xs=[[0.0], [1.0]], gs=[[0.0], [-L]],
                             fs=[0.0, -L / 2], L=L)
        assert check_nonconvex_interpolable(S).ok

    def test_nonconvex_quadratic_sets_pass(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            S = random_quadratic_set(rng, rng.integers(2, 6), rng.integers(1, 4),
                                     1.0, mode="nonconvex")
            assert check_nonconvex_interpolable(S).ok

    def test_same_point_different_gradients_violates(self):
        S = InterpolationSet(xs=[[0.0], [0.0]], gs=[[0.0], [1.0]],
                             fs=[0.0, 0.0], L=1.0)
        assert not check_nonconvex_interpolable(S).ok


class TestSimplexProjection:
    def test_matches_reference(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            v = rng.normal(0, 3, rng.integers(1, 12))
            np.testing.assert_allclose(project_simplex(v),
                                       reference_simplex_projection(v), atol=1e-12)

    def test_feasibility(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            a = project_simplex(rng.normal(0, 5, 8))
            assert a.min() >= 0
            assert abs(a.sum() - 1) < 1e-12

    def test_fixed_point_on_simplex(self):
        a = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(project_simplex(a), a, atol=1e-15)


class TestSimplexQp:
    def test_affine_objective_picks_best_vertex(self):
        sol = solve_simplex_qp(np.zeros((3, 3)), np.array([2.0, -1.0, 0.5]))
        np.testing.assert_array_equal(sol.alpha, [0.0, 1.0, 0.0])
        assert sol.objective_value == -1.0

    def test_single_variable(self):
        sol = solve_simplex_qp(np.array([[2.0]]), np.array([3.0]), const=1.0)
        assert sol.alpha[0] == 1.0
        assert sol.objective_value == pytest.approx(5.0)

    def test_solution_invariants(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            T = int(rng.integers(2, 7))
            M = rng.normal(size=(T, T))
            Q = M @ M.T
            b = rng.normal(0, 2, T)
            sol = solve_simplex_qp(Q, b, tol=1e-10)
            assert sol.alpha.min() >= 0
            assert abs(sol.alpha.sum() - 1) <= 1e-10
            assert sol.kkt_residual <= 1e-10

    def test_known_two_dim_solution(self):
        # min (a1-0.2)^2+(a2-0.8)^2 over simplex has interior solution (0.2, 0.8)
        Q = 2 * np.eye(2)
        b = -2 * np.array([0.2, 0.8])
        sol = solve_simplex_qp(Q, b)
        np.testing.assert_allclose(sol.alpha, [0.2, 0.8], atol=1e-9)


class TestBoundedInterpolant:
    def test_single_point_collapses_to_quadratic(self):
        L = 1.7
        S = InterpolationSet(xs=[[0.0, 0.0]], gs=[[0.0, 0.0]], fs=[0.0], L=L)
        rng = np.random.default_rng(6)
        for _ in range(10):
            y = rng.normal(0, 2, 2)
            ev = eval_bounded_interpolant(S, y, mode="convex")
            assert ev.value == pytest.approx(0.5 * L * y @ y, rel=1e-12)
            np.testing.assert_allclose(ev.gradient, L * y, atol=1e-10)

    @pytest.mark.parametrize("mode", ["convex", "nonconvex"])
    def test_interpolation_fidelity(self, mode):
        rng = np.random.default_rng(7)
        for _ in range(25):
            T, d = int(rng.integers(2, 6)), int(rng.integers(1, 4))
            S = random_quadratic_set(rng, T, d, 1.5, mode=mode)
            for i in range(T):
                ev = eval_bounded_interpolant(S, S.xs[i], mode=mode)
                assert abs(ev.value - S.fs[i]) <= 1e-8 * S.scale
                assert np.linalg.norm(ev.gradient - S.gs[i]) <= 1e-6 * S.scale

    def test_minimum_value_attained_at_formula_point(self):
        rng = np.random.default_rng(8)
        for mode in ("convex", "nonconvex"):
            S = random_quadratic_set(rng, 4, 2, 1.0, mode=mode)
            xstar, fstar = global_min_of_interpolant(S, mode=mode)
            c = S.floor_values()
            assert fstar == pytest.approx(float(c.min()))
            ev = eval_bounded_interpolant(S, xstar, mode=mode)
            assert ev.value == pytest.approx(fstar, abs=1e-9 * S.scale)

    def test_global_min_examples(self):
        S = InterpolationSet(xs=[[1.0, -2.0]], gs=[[0.0, 0.0]], fs=[5.0], L=1.0)
        xstar, fstar = global_min_of_interpolant(S)
        np.testing.assert_array_equal(xstar, [1.0, -2.0])
        assert fstar == 5.0
        # formula evaluation on the two-triple example (not itself interpolable,
        # so the feasibility pre-check is switched off)
        L = 2.0
        S2 = InterpolationSet(xs=[[0.0], [1.0]], gs=[[0.0], [L]],
                              fs=[1.0, 0.0], L=L)
        xstar, fstar = global_min_of_interpolant(S2, check=False)
        np.testing.assert_allclose(xstar, [0.0])
        assert fstar == pytest.approx(-L / 2)

    def test_lower_boundedness_at_probes(self):
        rng = np.random.default_rng(9)
        for mode in ("convex", "nonconvex"):
            for _ in range(20):
                S = random_quadratic_set(rng, int(rng.integers(2, 6)), 2, 1.0,
                                         mode=mode)
                floor = float(S.floor_values().min())
                for _ in range(10):
                    y = rng.normal(0, 4, 2)
                    ev = eval_bounded_interpolant(S, y, mode=mode, check=False)
                    assert ev.value >= floor - 1e-8

    @pytest.mark.parametrize("mode", ["convex", "nonconvex"])
    def test_envelope_gradient_vs_finite_differences(self, mode):
        rng = np.random.default_rng(10)
        checked = 0
        while checked < 40:
            S = random_quadratic_set(rng, int(rng.integers(2, 6)),
                                     int(rng.integers(1, 4)), 1.2, mode=mode)
            y = rng.normal(0, 2, S.dim)
            ev = eval_bounded_interpolant(S, y, mode=mode, gradient="envelope")
            if ev.alpha.degenerate:
                continue  # non-unique face: envelope direction not well defined
            fd = eval_bounded_interpolant(S, y, mode=mode, gradient="fd")
            scale = max(1.0, float(np.linalg.norm(ev.gradient)))
            assert np.linalg.norm(ev.gradient - fd.gradient) / scale <= 1e-5
            checked += 1

    @pytest.mark.parametrize("mode", ["convex", "nonconvex"])
    def test_gradient_lipschitz_certificate(self, mode):
        rng = np.random.default_rng(11)
        S = random_quadratic_set(rng, 5, 3, 1.4, mode=mode)
        evs = []
        ys = rng.normal(0, 3, (30, 3))
        for y in ys:
            evs.append(eval_bounded_interpolant(S, y, mode=mode, check=False))
        for i in range(len(ys)):
            for j in range(i + 1, len(ys)):
                lhs = np.linalg.norm(evs[i].gradient - evs[j].gradient)
                assert lhs <= S.L * np.linalg.norm(ys[i] - ys[j]) * (1 + 1e-6) + 1e-9

    def test_intermediate_shifted_set_is_2L_smooth(self):
        # the nonconvex construction routes through a 2L-smooth convex function
        rng = np.random.default_rng(12)
        S = random_quadratic_set(rng, 4, 2, 1.0, mode="nonconvex")
        shifted = InterpolationSet(xs=S.xs, gs=S.gs + S.L * S.xs,
                                   fs=S.fs + 0.5 * S.L * np.sum(S.xs ** 2, axis=1),
                                   L=2 * S.L)
        assert check_convex_interpolable(shifted).ok

    @pytest.mark.parametrize("mode", ["convex", "nonconvex"])
    def test_qp_matches_grid_oracle(self, mode):
        rng = np.random.default_rng(13)
        for _ in range(12):
            T, d = int(rng.integers(2, 5)), int(rng.integers(1, 4))
            S = random_quadratic_set(rng, T, d, 1.0, mode=mode, spread=1.0)
            y = rng.normal(0, 1.5, d)
            ev = eval_bounded_interpolant(S, y, mode=mode, check=False)
            ref = grid_interpolant_value(S, y, mode=mode)
            assert abs(ev.value - ref) <= 1e-5

    def test_three_point_grid_example(self):
        # 3-point set in d = 2, convex mode, random y, grid resolution 1e-3
        rng = np.random.default_rng(14)
        S = random_quadratic_set(rng, 3, 2, 1.0, spread=1.0)
        y = rng.normal(0, 1.0, 2)
        ev = eval_bounded_interpolant(S, y)
        ref = grid_interpolant_value(S, y, k0=1000, zooms=3)
        assert abs(ev.value - ref) <= 1e-5

    def test_infeasible_set_rejected(self):
        S = InterpolationSet(xs=[[0.0], [0.0]], gs=[[0.0], [1.0]],
                             fs=[0.0, 0.0], L=1.0)
        with pytest.raises(ValueError, match="interpolable"):
            eval_bounded_interpolant(S, np.zeros(1), mode="convex")

    def test_probe_dim_checked(self):
        S = InterpolationSet(xs=[[0.0, 0.0]], gs=[[0.0, 0.0]], fs=[0.0], L=1.0)
        with pytest.raises(ValueError, match="dimension"):
            eval_bounded_interpolant(S, np.zeros(3))


def linear_family_points(rng, n, m, d, L):
    """Anchor/extension sets sampled from a linear function (all gradients gamma)."""
    gamma = rng.normal(0, 1, d)
    c0 = float(rng.normal())
    zs = rng.normal(0, 2, (n, d))
    fzs = zs @ gamma + c0
    base = rng.normal(0, 2, d)
    ys = base[None, :] + rng.normal(0, 1, (m, d))
    # force equal <gamma, y_j> by removing the gamma component spread
    g2 = gamma @ gamma
    ys = ys - np.outer((ys @ gamma - base @ gamma) / g2, gamma)
    return zs, fzs, ys, gamma, c0


class TestBetaRange:
    def test_contains_true_value_when_ys_subset_zs(self):
        rng = np.random.default_rng(15)
        for _ in range(50):
            d, n = int(rng.integers(1, 5)), int(rng.integers(2, 8))
            zs, fzs, _, gamma, c0 = linear_family_points(rng, n, 1, d, 1.0)
            ys = zs[:1]
            r = beta_range(zs, fzs, ys, gamma, L=1.0)
            assert r.nonempty
            assert r.contains(float(fzs[0]))

    def test_singleton_interval(self):
        z = np.array([[0.3, -1.0]])
        gamma = np.array([0.5, 0.2])
        r = beta_range(z, np.array([2.0]), z, gamma, L=1.0)
        assert r.lo == pytest.approx(2.0, abs=1e-14)
        assert r.hi == pytest.approx(2.0, abs=1e-14)
        assert r.nonempty

    def test_inconsistent_projection_rejected(self):
        zs = np.zeros((1, 2))
        ys = np.array([[0.0, 0.0], [1.0, 0.0]])
        gamma = np.array([1.0, 0.0])
        with pytest.raises(ValueError, match="identical"):
            beta_range(zs, np.zeros(1), ys, gamma, L=1.0)

    def test_certified_floor_and_feasible_extension(self):
        rng = np.random.default_rng(16)
        for _ in range(50):
            d, n, m = int(rng.integers(1, 5)), int(rng.integers(1, 6)), \
                int(rng.integers(1, 4))
            L = float(rng.uniform(0.5, 3.0))
            zs, fzs, ys, gamma, c0 = linear_family_points(rng, n, m, d, L)
            r = beta_range(zs, fzs, ys, gamma, L=L)
            assert r.nonempty
            assert r.hi >= r.certified_floor - 1e-12 * r.scale
            # the lemma's feasible extension really passes the pairwise check
            beta = min(max(0.5 * (r.lo + r.hi), r.lo), r.hi)
            xs = np.vstack([zs, ys])
            gs = np.tile(gamma, (n + m, 1))
            fs = np.concatenate([fzs, np.full(m, beta)])
            assert check_nonconvex_interpolable(
                InterpolationSet(xs, gs, fs, L), tol_factor=1e-9).ok

    def test_shape_validation(self):
        with pytest.raises(ValueError, match="shapes"):
            beta_range(np.zeros((2, 3)), np.zeros(2), np.zeros((1, 2)),
                       np.zeros(3), L=1.0)
