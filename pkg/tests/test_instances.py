"""Builders and verifiers for every lower-bound construction."""

import math

import numpy as np
import pytest

from sgdfloor.engine import NoiseModel, StepSchedule, run
from sgdfloor.instances import (
    aggregation_gamma_sq,
    aggregation_realizations,
    beta_ranges_per_pattern,
    build_aggregation_instance,
    build_hessian_instance,
    build_quadratic_distance_instance,
    build_quadratic_noise_instance,
    dimension_sweep_noise_dilution,
    distance_dimension_floor,
    fixed_point_impossibility_demo,
    gd_last_iterate,
    gd_uniform_average,
    hessian_gamma_sq,
    identity_algorithm,
    noise_dimension_floor,
    quadratic_noise_moments,
    sgdlow_composition,
    verify_aggregation_instance,
    verify_concentration,
    verify_hessian_instance,
    verify_quadratic_distance_instance,
    verify_quadratic_noise_instance,
)


def random_admissible(rng, T, eta_hi=1.5, zeta_hi=1.2):
    steps = rng.uniform(0.0, eta_hi, T - 1)
    weights = rng.uniform(0.0, zeta_hi, T)
    return steps, weights


class TestAggregationFormula:
    def test_value_at_T2(self):
        np.testing.assert_allclose(aggregation_gamma_sq(1, 1, 1, 2),
                                   (math.sqrt(73) - 3) / 16, rtol=1e-15)

    def test_value_at_T100(self):
        np.testing.assert_allclose(aggregation_gamma_sq(1, 1, 1, 100),
                                   (math.sqrt(6345) - 3) / 1584, rtol=1e-15)

    def test_asymptotic_form(self):
        T = 10_000
        exact = aggregation_gamma_sq(1, 1, 1, T)
        approx = 0.5 * math.sqrt(1.0 / (T - 1))
        assert abs(exact / approx - 1) <= 0.05

    def test_preconditions(self):
        with pytest.raises(ValueError):
            aggregation_gamma_sq(1, 1, 1, 1)
        with pytest.raises(ValueError):
            aggregation_gamma_sq(0, 1, 1, 5)


class TestAggregationInstance:
    def test_exact_gradients_over_seeds_and_parameters(self):
        # gradients at every iterate and at x_out stay exactly G e_1
        rng = np.random.default_rng(0)
        T = 12
        for trial in range(100):
            steps, weights = random_admissible(rng, T)
            inst = build_aggregation_instance(1.0, 1.0, 1.0, T, steps, weights)
            traj = inst.simulate(seed=trial)
            ver = verify_aggregation_instance(inst, traj, beta_patterns=None)
            assert ver.max_grad_deviation <= 1e-12
            assert ver.certificate_ok

    def test_uniform_weights_exercise_tail_selection(self):
        # uniform 1/T weights give tail sums above 1/2 in the first half:
        # the flat-topped "plus" bumps must be selected there
        T = 10
        steps = np.full(T - 1, 0.7)
        inst = build_aggregation_instance(1.0, 1.0, 1.0, T, steps,
                                          np.full(T, 1.0 / T))
        traj = inst.simulate(seed=3)
        ver = verify_aggregation_instance(inst, traj, beta_patterns=None)
        assert ver.max_grad_deviation <= 1e-12

    def test_certificate_tight_at_optimal_step(self):
        L = sigma = 1.0
        delta = 1.0
        T = 30
        g2 = aggregation_gamma_sq(L, delta, sigma, T)
        eta_star = 8 * g2 / (L * sigma ** 2)
        inst = build_aggregation_instance(L, delta, sigma, T,
                                          np.full(T - 1, eta_star),
                                          np.full(T, 1.0 / T))
        traj = inst.simulate(seed=0)
        ver = verify_aggregation_instance(inst, traj, beta_patterns=None)
        assert ver.certificate_ok
        assert abs(ver.certificate - delta) <= 1e-6 * delta

    def test_zero_steps_trivial_certificate(self):
        T = 6
        inst = build_aggregation_instance(1.0, 1.0, 1.0, T, np.zeros(T - 1),
                                          np.full(T, 1.0 / T))
        traj = inst.simulate(seed=0)
        assert float(np.min(traj.values)) == 0.0
        ver = verify_aggregation_instance(inst, traj, beta_patterns="auto")
        assert ver.passed

    def test_T2_both_sign_patterns_beta_nonempty(self):
        inst = build_aggregation_instance(1.0, 1.0, 1.0, 2, [0.8], [0.4, 0.6])
        ranges = beta_ranges_per_pattern(inst, np.array([[1.0], [-1.0]]))
        assert all(r.nonempty for r in ranges)

    def test_exhaustive_beta_check_small_T(self):
        rng = np.random.default_rng(5)
        steps, weights = random_admissible(rng, 6)
        inst = build_aggregation_instance(1.3, 0.7, 0.9, 6, steps, weights)
        traj = inst.simulate(seed=1)
        ver = verify_aggregation_instance(inst, traj, beta_patterns="auto")
        assert ver.beta.exhaustive and ver.beta.patterns_checked == 32
        assert ver.beta.joint_nonempty and ver.beta.floor_ok
        assert ver.beta.pairwise_ok is True
        assert ver.passed

    def test_sampled_beta_check(self):
        rng = np.random.default_rng(6)
        T = 20
        steps, weights = random_admissible(rng, T)
        inst = build_aggregation_instance(1.0, 1.0, 1.0, T, steps, weights)
        traj = inst.simulate(seed=2)
        ver = verify_aggregation_instance(inst, traj, beta_patterns=128, seed=7)
        assert not ver.beta.exhaustive
        assert ver.beta.patterns_checked == 128
        assert ver.beta.joint_nonempty and ver.beta.floor_ok

    def test_realizations_match_engine(self):
        rng = np.random.default_rng(8)
        T = 7
        steps, weights = random_admissible(rng, T)
        inst = build_aggregation_instance(1.0, 1.0, 1.0, T, steps, weights)
        traj = inst.simulate(seed=9)
        noise = inst.noise.with_seed(9)
        signs = np.array([-noise.rademacher_sign(t) for t in range(1, T)])
        zs, fzs, ys = aggregation_realizations(inst, signs[None, :])
        np.testing.assert_allclose(
            np.sort(zs[:, 0]), np.sort(traj.iterates[:, 0]), atol=1e-14)
        np.testing.assert_allclose(ys[0], traj.x_out, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(np.sort(fzs), np.sort(traj.values), atol=1e-13)

    def test_builder_validation(self):
        with pytest.raises(ValueError):
            build_aggregation_instance(1, 1, 1, 5, [0.1] * 3, [0.2] * 5)
        with pytest.raises(ValueError):
            build_aggregation_instance(1, 1, 1, 5, [0.1] * 4, [0.2] * 4)
        with pytest.raises(ValueError):
            build_aggregation_instance(1, 1, 1, 5, [0.1] * 4, [-0.2] + [0.2] * 4)


class TestHessianInstance:
    def test_gamma_value_at_T2(self):
        g2, floor = hessian_gamma_sq(1, 1, 1, 2)
        np.testing.assert_allclose(g2, 3 / 32 * 256 ** (1 / 3), rtol=1e-15)
        np.testing.assert_allclose(floor, 0.5, rtol=1e-15)
        assert g2 >= floor

    def test_verifier_passes_for_any_steps(self):
        rng = np.random.default_rng(1)
        T = 15
        for scale in (0.1, 1.0, 5.0):  # the drop bound holds for every step size
            steps = rng.uniform(0, scale, T - 1)
            inst = build_hessian_instance(1.0, 1.0, 1.0, T, steps)
            traj = inst.simulate(seed=4)
            ver = verify_hessian_instance(inst, traj)
            assert ver.gradients_ok
            assert ver.value_drop_ok
            assert ver.max_abs_curvature == 0.0

    def test_gradient_norm_is_predicted_gamma(self):
        inst = build_hessian_instance(1.0, 1.0, 1.0, 50,
                                      np.full(49, 0.3))
        traj = inst.simulate(seed=0)
        g2 = inst.predicted["gamma_sq"]
        assert traj.criteria.min_grad_norm ** 2 == pytest.approx(g2, rel=1e-12)


class TestDistanceInstance:
    def _build(self, T=16, prob_delta=0.2, eta=None, L=1.0, delta=1.0, sigma=1.0):
        eta = 1.0 / (L * math.sqrt(T)) if eta is None else eta
        steps = np.full(T - 1, eta)
        d0 = distance_dimension_floor(L, delta, sigma, T, prob_delta, steps)
        return build_quadratic_distance_instance(
            L, delta, sigma, T, prob_delta, math.ceil(d0), steps)

    def test_predicted_bound_example(self):
        # sum eta = 1 with L = 1 gives delta / 25
        T = 11
        steps = np.full(T - 1, 0.1)
        d0 = distance_dimension_floor(1, 1, 1, T, 0.2, steps)
        inst = build_quadratic_distance_instance(1, 1, 1, T, 0.2,
                                                 math.ceil(d0), steps)
        np.testing.assert_allclose(inst.predicted["min_grad_sq"], 1 / 25,
                                   rtol=1e-12)

    def test_gradient_norm_identity(self):
        inst = self._build()
        m = inst.params["scale_m"]
        rng = np.random.default_rng(2)
        for _ in range(10):
            x = rng.normal(size=inst.objective.dim)
            np.testing.assert_allclose(
                np.linalg.norm(inst.objective.gradient(x)),
                abs(x[0]) / (2 * m), rtol=1e-12)

    def test_noiseless_first_coordinate_stays_above_half(self):
        inst = self._build()
        traj = run(inst.objective, inst.x1, inst.params["T"],
                   StepSchedule.small_steps(inst.params["steps"]),
                   NoiseModel.none())
        coords = traj.iterates[:, 0]
        etas = np.asarray(inst.params["steps"])
        m = inst.params["scale_m"]
        expect = inst.x1[0] * np.concatenate(
            [[1.0], np.cumprod(1 - etas / (2 * m))])
        np.testing.assert_allclose(coords, expect, rtol=1e-12)
        assert np.all(coords >= inst.x1[0] / 2 - 1e-12)

    def test_frequency_verification(self):
        inst = self._build()
        report = verify_quadratic_distance_instance(inst, replications=100,
                                                    seed=11)
        assert report.passed
        assert report.direction == "lower"

    def test_validation(self):
        T = 8
        steps = np.full(T - 1, 2.0)  # above 1/L
        with pytest.raises(ValueError, match=r"\[0, 1/L\]"):
            build_quadratic_distance_instance(1, 1, 1, T, 0.1, 10_000, steps)
        small = np.full(T - 1, 0.1)
        with pytest.raises(ValueError, match="floor"):
            build_quadratic_distance_instance(1, 1, 1, T, 0.1, 2, small)


class TestNoiseInstance:
    def test_constant_case_bound(self):
        d = math.ceil(noise_dimension_floor(32, 0.1))
        inst = build_quadratic_noise_instance(1, 1, 1, 32, 0.1, d,
                                              StepSchedule.constant(0.5))
        np.testing.assert_allclose(inst.predicted["min_grad_sq"], 1 / 6,
                                   rtol=1e-12)
        assert inst.theorem_id == "prop_noise_const"

    def test_floor_case_bound(self):
        d = math.ceil(noise_dimension_floor(32, 0.1))
        inst = build_quadratic_noise_instance(1, 1, 1, 32, 0.1, d,
                                              StepSchedule.constant(1.0))
        np.testing.assert_allclose(inst.predicted["min_grad_sq"], 0.5,
                                   rtol=1e-12)
        assert inst.theorem_id == "prop_noise_floor"

    def test_dimension_floor_value(self):
        assert math.ceil(noise_dimension_floor(100, 0.01)) == 1018

    def test_constant_case_verifies(self):
        T, d = 24, 1024
        inst = build_quadratic_noise_instance(1, 1, 1, T, 0.1, d,
                                              StepSchedule.constant(0.5))
        ver = verify_quadratic_noise_instance(inst, replications=150, seed=3)
        assert ver.passed
        assert ver.bound_report.passed and ver.moments_ok
        assert ver.max_mean_zscore <= 5 and ver.max_var_zscore <= 5

    def test_moment_formulas_against_direct_simulation(self):
        L, sigma, d, T = 1.3, 0.8, 256, 10
        rng = np.random.default_rng(4)
        steps = rng.uniform(0, 1 / L, T - 1)
        means, var = quadratic_noise_moments(L, 0.9, steps, sigma, d)
        obj_x1 = np.zeros(d)
        obj_x1[0] = 0.9
        from sgdfloor.objectives import uniform_quadratic
        reps = 400
        firsts = np.empty((reps, T))
        for r in range(reps):
            traj = run(uniform_quadratic(L, d), obj_x1, T,
                       StepSchedule.small_steps(steps),
                       NoiseModel.gaussian_isotropic(sigma ** 2, seed=100 + r))
            firsts[r] = traj.iterates[:, 0]
        emp_mean = firsts.mean(axis=0)
        emp_var = firsts.var(axis=0, ddof=1)
        for t in range(T):
            if var[t] == 0:
                assert emp_mean[t] == pytest.approx(means[t], abs=1e-12)
                continue
            assert abs(emp_mean[t] - means[t]) <= 5 * math.sqrt(var[t] / reps)
            assert abs(emp_var[t] - var[t]) <= 5 * var[t] * math.sqrt(2 / (reps - 1))

    def test_poly_case_reports_empirical_constant(self):
        T, d = 24, 1024
        inst = build_quadratic_noise_instance(
            1, 1, 1, T, 0.1, d, StepSchedule.poly_decay(1.0, 1.0, 0.5))
        assert inst.theorem_id == "prop_noise_poly"
        assert inst.predicted["min_grad_sq"] is None
        ver = verify_quadratic_noise_instance(inst, replications=60, seed=5)
        assert ver.bound_report is None
        assert ver.empirical_constant > 0
        assert ver.moments_ok

    def test_unclassifiable_schedule_rejected(self):
        d = math.ceil(noise_dimension_floor(8, 0.1))
        with pytest.raises(ValueError, match="no Prop-noise case"):
            build_quadratic_noise_instance(
                1, 1, 1, 8, 0.1, d, StepSchedule.small_steps([0.1, 0.0] * 4))

    def test_dimension_validation(self):
        with pytest.raises(ValueError, match="floor"):
            build_quadratic_noise_instance(1, 1, 1, 100, 0.01, 100,
                                           StepSchedule.constant(0.5))


class TestSgdlowComposition:
    def test_small_steps_route(self):
        T = 16
        steps = np.full(T - 1, 1.0 / (1.0 * math.sqrt(T)))
        inst, bound, route = sgdlow_composition(
            1, 1, 1, T, 0.2, 4096, "small", steps=steps)
        assert route == "distance"
        c = float(np.sum(steps)) / math.sqrt(T)
        np.testing.assert_allclose(bound, 1 / (25 * max(1, c) * math.sqrt(T)))
        hits = 0
        reps = 60
        for r in range(reps):
            traj = inst.simulate(seed=r, record=False)
            hits += traj.criteria.min_grad_norm ** 2 >= bound
        se = math.sqrt(0.2 * 0.8 / reps)
        assert hits / reps >= 0.8 - 3 * se

    def test_fixed_step_midrange_routes_to_noise(self):
        T = 16
        inst, bound, route = sgdlow_composition(
            1, 1, 1, T, 0.2, 1024, "fixed", eta=0.5)
        assert route == "noise_const"
        np.testing.assert_allclose(bound, 0.5 * 1.0 / (2 * math.sqrt(T) - 1))
        # the proposition's bound dominates the theorem chain bound
        assert inst.predicted["min_grad_sq"] >= bound

    def test_fixed_tiny_step_routes_to_distance(self):
        T = 16
        inst, bound, route = sgdlow_composition(
            1, 1, 1, T, 0.2, 8192, "fixed", eta=0.01)
        assert route == "distance"

    def test_fixed_large_step_routes_to_floor(self):
        inst, bound, route = sgdlow_composition(
            1, 1, 1, 16, 0.2, 1024, "fixed", eta=1.5)
        assert route == "noise_floor"
        np.testing.assert_allclose(bound, 0.5 * 1.5 ** 2)

    def test_poly_route(self):
        inst, bound, route = sgdlow_composition(
            1, 1, 1, 16, 0.2, 1024, "poly", a=1.0, b=0.0, theta=0.5)
        assert route == "noise_poly" and bound is None


class TestConcentration:
    def test_reference_bound_value(self):
        report = verify_concentration(1.0, 1.0, 1000, 0.5, samples=20_000,
                                      seed=0)
        np.testing.assert_allclose(report.theoretical,
                                   4 * math.exp(-125 / 12), rtol=1e-12)
        assert report.passed

    def test_pure_noise_ratio_mean_one(self):
        report = verify_concentration(0.0, 2.0, 500, 0.5, samples=20_000,
                                      seed=1)
        assert abs(report.details["mean_ratio"] - 1.0) <= 0.01
        assert report.passed

    def test_wide_epsilon_no_failures(self):
        report = verify_concentration(1.0, 1.0, 2000, 0.999, samples=5_000,
                                      seed=2)
        assert report.details["failures"] == 0

    def test_validation(self):
        with pytest.raises(ValueError):
            verify_concentration(1.0, 1.0, 100, 1.5, samples=2000)
        with pytest.raises(ValueError):
            verify_concentration(1.0, 1.0, 100, 0.5, samples=10)


class TestImpossibility:
    def test_identity_algorithm(self):
        res = fixed_point_impossibility_demo(identity_algorithm(), T=10)
        assert abs(res.x1_star) <= 1e-9
        assert res.grad_at_out == pytest.approx(1.0, abs=1e-15)

    def test_plain_gd_with_uniform_averaging(self):
        res = fixed_point_impossibility_demo(gd_uniform_average(0.1), T=50)
        assert abs(res.x_out) <= 1e-9
        assert abs(res.grad_at_out) >= 0.5
        assert res.grad_at_out == pytest.approx(1 - 2 * res.x_out ** 2, abs=1e-16)

    def test_last_iterate_gd_flat_region(self):
        algo = gd_last_iterate(0.2)
        from sgdfloor.piecewise import make_sigmoid
        s = make_sigmoid()
        for x1 in (1.0, 2.5, 7.0):
            assert algo(lambda x: s(x, 1), x1, 20) == x1

    def test_nondeterministic_algorithm_rejected(self):
        state = {"n": 0}

        def fickle(oracle, x1, T):
            state["n"] += 1
            return x1 + state["n"]

        with pytest.raises(ValueError, match="deterministic"):
            fixed_point_impossibility_demo(fickle, T=5)


class TestDimensionSweep:
    def test_noise_dilution_shrinks_with_dimension(self):
        results = dimension_sweep_noise_dilution(
            T=20, dims=[4, 64, 1024], sigma2=1.0, eta=0.1, replications=7,
            seed=0)
        devs = [dev for _, dev in results]
        assert devs[0] > devs[-1] * 3  # variance per coordinate scales as 1/d
