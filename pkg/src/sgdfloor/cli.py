"""Experiment runner CLI.

Every instance, verifier and bound is exposed as a subcommand.  A run is
described by a flat key=value config (file via --config, overridden by
command-line flags), executes a seeded batch of replications, and writes
<output>.csv (one row per replication plus a summary row, 17 significant
digits) and <output>.json (config echo, bounds, verdicts, wall time).  Files
are written atomically (write to a temp name, then rename).

Exit codes: 0 all verdicts pass, 2 invalid config, 3 a verification failed,
4 internal/tolerance failure.
"""

from __future__ import annotations

import argparse
import csv as csv_mod
import json
import math
import os
import sys
import time

import numpy as np

from . import bounds as bounds_mod
from . import instances as inst_mod
from .engine import AggregationRule, NoiseModel, StepSchedule, run
from .interpolation import InterpolationSet, QpToleranceError, \
    check_convex_interpolable, check_nonconvex_interpolable, \
    eval_bounded_interpolant, global_min_of_interpolant
from .objectives import EmbeddedScalarObjective, uniform_quadratic
from .piecewise import make_bump1, make_bump2, make_sigmoid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3
EXIT_INTERNAL = 4


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def parse_config_file(path: str) -> dict:
    """Flat `key = value` lines; # starts a comment; no nesting."""
    values: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    for ln, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected 'key = value'")
        key, val = line.split("=", 1)
        key, val = key.strip(), val.strip()
        if not key.isidentifier():
            raise ConfigError(f"{path}:{ln}: bad key {key!r}")
        values[key] = val
    return values


_MISSING = object()


class Params:
    """Typed access to the merged flat config; errors name the offending key."""

    def __init__(self, values: dict):
        self.values = dict(values)
        self.resolved: dict = {}

    def _fetch(self, key, default):
        if key in self.values and self.values[key] is not None:
            return self.values[key]
        if default is _MISSING:
            raise ConfigError(f"missing required config key '{key}'")
        return default

    def get_float(self, key, default=_MISSING) -> float:
        raw = self._fetch(key, default)
        if raw is None:
            return None
        try:
            val = float(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"config key '{key}' must be a real number, "
                              f"got {raw!r}") from None
        self.resolved[key] = val
        return val

    def get_int(self, key, default=_MISSING) -> int:
        raw = self._fetch(key, default)
        if raw is None:
            return None
        try:
            val = int(str(raw), 10)
        except (TypeError, ValueError):
            raise ConfigError(f"config key '{key}' must be an integer, "
                              f"got {raw!r}") from None
        self.resolved[key] = val
        return val

    def get_str(self, key, default=_MISSING) -> str:
        raw = self._fetch(key, default)
        if raw is None:
            return None
        self.resolved[key] = str(raw)
        return str(raw)

    def get_list(self, key, default=_MISSING):
        """Comma-separated reals, or None."""
        raw = self._fetch(key, default)
        if raw is None:
            return None
        if isinstance(raw, (list, tuple)):
            vals = [float(v) for v in raw]
        else:
            try:
                vals = [float(tok) for tok in str(raw).split(",") if tok.strip()]
            except ValueError:
                raise ConfigError(f"config key '{key}' must be a comma-"
                                  f"separated list of reals, got {raw!r}") from None
        self.resolved[key] = vals
        return vals


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv_atomic(path: str, header, rows):
    tmp = path + ".tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv_mod.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) if not isinstance(v, str) else v
                             for v in row])
    os.replace(tmp, path)


def write_json_atomic(path: str, payload: dict):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    os.replace(tmp, path)


def emit(prefix: str | None, experiment: str, header, rows, summary: dict,
         params_echo: dict, passed: bool, t0: float):
    if prefix:
        write_csv_atomic(prefix + ".csv", header, rows)
        write_json_atomic(prefix + ".json", {
            "experiment": experiment,
            "params": params_echo,
            "results": summary,
            "passed": passed,
            "wall_time_s": time.monotonic() - t0,
        })
    line = f"[{experiment}] {'PASS' if passed else 'FAIL'}"
    extras = {k: v for k, v in summary.items()
              if isinstance(v, (int, float, bool))}
    if extras:
        line += " | " + ", ".join(
            f"{k}={fmt(v) if not isinstance(v, bool) else v}"
            for k, v in sorted(extras.items()))
    print(line)


def _steps_from_params(p: Params, T: int, L: float, rng) -> np.ndarray:
    steps = p.get_list("steps", None)
    if steps is not None:
        if len(steps) != T - 1:
            raise ConfigError(f"config key 'steps' must list T-1={T - 1} values")
        return np.asarray(steps)
    eta = p.get_float("eta", None)
    if eta is not None:
        return np.full(T - 1, eta)
    a = p.get_float("a", None)
    if a is not None:
        b = p.get_float("b", 0.0)
        theta = p.get_float("theta", 0.5)
        return StepSchedule.poly_decay(a, b, theta).realized(T)
    draw = rng.uniform(0.0, 1.0 / L, T - 1)
    self_echo = [float(v) for v in draw]
    p.resolved["steps"] = self_echo
    return draw


def _weights_from_params(p: Params, T: int, rng) -> np.ndarray:
    spec = p.get_str("weights", "uniform")
    if spec == "uniform":
        return np.full(T, 1.0 / T)
    if spec == "last":
        w = np.zeros(T)
        w[-1] = 1.0
        return w
    if spec == "random":
        w = rng.uniform(0.0, 2.0 / T, T)
        p.resolved["weights"] = [float(v) for v in w]
        return w
    try:
        vals = [float(tok) for tok in spec.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError("config key 'weights' must be 'uniform', 'last', "
                          "'random' or a comma-separated list") from None
    if len(vals) != T:
        raise ConfigError(f"config key 'weights' must list T={T} values")
    p.resolved["weights"] = vals
    return np.asarray(vals)


TRAJ_HEADER = ["experiment", "replication", "seed", "min_grad_norm",
               "avg_grad_norm", "norm_of_avg_grad", "grad_norm_at_out",
               "min_grad_sq", "bound", "verdict"]


def _traj_row(experiment, rep, seed, crit, bound, ok):
    return [experiment, str(rep), str(seed), crit.min_grad_norm,
            crit.avg_grad_norm, crit.norm_of_avg_grad, crit.grad_norm_at_out,
            crit.min_grad_norm ** 2, bound, "pass" if ok else "fail"]


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def run_lower_aggregation(p: Params, prefix, t0):
    L = p.get_float("L", 1.0)
    delta = p.get_float("delta_gap", 1.0)
    sigma = p.get_float("sigma", 1.0)
    T = p.get_int("T", 100)
    reps = p.get_int("replications", 50)
    seed = p.get_int("seed", 0)
    beta_patterns = p.get_int("beta_patterns", 64)
    rng = np.random.default_rng(seed)
    steps = _steps_from_params(p, T, L, rng)
    weights = _weights_from_params(p, T, rng)
    inst = inst_mod.build_aggregation_instance(L, delta, sigma, T, steps, weights)
    g2 = inst.predicted["gamma_sq"]
    rows, all_ok = [], True
    worst_dev = 0.0
    for r in range(reps):
        traj = inst.simulate(seed=seed + r)
        pats = beta_patterns if (r == 0 and beta_patterns > 0) else None
        ver = inst_mod.verify_aggregation_instance(inst, traj,
                                                   beta_patterns=pats,
                                                   seed=seed)
        ok = ver.passed
        all_ok &= ok
        worst_dev = max(worst_dev, ver.max_grad_deviation)
        rows.append(_traj_row("aggregation_step", r, seed + r, traj.criteria,
                              g2, ok))
    summary = {"gamma_sq": g2, "max_grad_deviation": worst_dev,
               "replications": reps}
    rows.append(["aggregation_step", "summary", str(seed), "", "", "", "",
                 g2, g2, "pass" if all_ok else "fail"])
    emit(prefix, "aggregation_step", TRAJ_HEADER, rows, summary,
         p.resolved, all_ok, t0)
    return all_ok


def run_lower_hessian(p: Params, prefix, t0):
    rho = p.get_float("rho", 1.0)
    delta = p.get_float("delta_gap", 1.0)
    sigma = p.get_float("sigma", 1.0)
    T = p.get_int("T", 100)
    reps = p.get_int("replications", 10)
    seed = p.get_int("seed", 0)
    rng = np.random.default_rng(seed)
    steps = _steps_from_params(p, T, rho, rng)
    inst = inst_mod.build_hessian_instance(rho, delta, sigma, T, steps)
    g2 = inst.predicted["gamma_sq"]
    rows, all_ok = [], True
    for r in range(reps):
        traj = inst.simulate(seed=seed + r)
        ver = inst_mod.verify_hessian_instance(inst, traj)
        all_ok &= ver.passed
        rows.append(_traj_row("nonconvex_hessian", r, seed + r, traj.criteria,
                              g2, ver.passed))
    rows.append(["nonconvex_hessian", "summary", str(seed), "", "", "", "",
                 g2, g2, "pass" if all_ok else "fail"])
    emit(prefix, "nonconvex_hessian", TRAJ_HEADER, rows,
         {"gamma_sq": g2, "gamma_sq_floor": inst.predicted["gamma_sq_floor"],
          "replications": reps},
         p.resolved, all_ok, t0)
    return all_ok


def run_lower_distance(p: Params, prefix, t0):
    L = p.get_float("L", 1.0)
    delta = p.get_float("delta_gap", 1.0)
    sigma = p.get_float("sigma", 1.0)
    T = p.get_int("T", 64)
    prob_delta = p.get_float("delta_prob", 0.1)
    reps = p.get_int("replications", 200)
    seed = p.get_int("seed", 0)
    rng = np.random.default_rng(seed)
    steps = _steps_from_params(p, T, L, rng)
    d = p.get_int("d", None)
    if d is None:
        d = math.ceil(inst_mod.distance_dimension_floor(
            L, delta, sigma, T, prob_delta, steps))
        p.resolved["d"] = d
    inst = inst_mod.build_quadratic_distance_instance(
        L, delta, sigma, T, prob_delta, d, steps)
    bound = inst.predicted["min_grad_sq"]
    rows = []
    hits = 0
    for r in range(reps):
        traj = inst.simulate(seed=seed + r, record=False)
        ok = traj.criteria.min_grad_norm ** 2 >= bound
        hits += ok
        rows.append(_traj_row("prop_distance", r, seed + r, traj.criteria,
                              bound, ok))
    report = inst_mod.verify_quadratic_distance_instance(inst, reps, seed)
    rows.append(["prop_distance", "summary", str(seed), "", "", "", "",
                 hits / reps, bound, report.verdict])
    emit(prefix, "prop_distance", TRAJ_HEADER, rows,
         {"bound": bound, "frequency": hits / reps, "threshold_slack": report.slack,
          "d": d, "d0": inst.predicted["d0"]},
         p.resolved, report.passed, t0)
    return report.passed


def run_lower_noise(p: Params, prefix, t0, case: str):
    L = p.get_float("L", 1.0)
    delta = p.get_float("delta_gap", 1.0)
    sigma = p.get_float("sigma", 1.0)
    T = p.get_int("T", 64)
    prob_delta = p.get_float("delta_prob", 0.1)
    reps = p.get_int("replications", 200)
    seed = p.get_int("seed", 0)
    if case == "poly":
        schedule = StepSchedule.poly_decay(p.get_float("a", 1.0),
                                           p.get_float("b", 0.0),
                                           p.get_float("theta", 0.5))
    else:
        schedule = StepSchedule.constant(p.get_float("eta", _MISSING if
                                                     case == "floor" else 0.5))
    d = p.get_int("d", None)
    if d is None:
        d = math.ceil(inst_mod.noise_dimension_floor(T, prob_delta))
        p.resolved["d"] = d
    inst = inst_mod.build_quadratic_noise_instance(
        L, delta, sigma, T, prob_delta, d, schedule,
        case="constant" if case == "const" else case)
    ver = inst_mod.verify_quadratic_noise_instance(inst, reps, seed)
    bound = inst.predicted["min_grad_sq"]
    rows = []
    for r in range(reps):
        traj = inst.simulate(seed=seed + r, record=False)
        mg2 = traj.criteria.min_grad_norm ** 2
        ok = True if bound is None else mg2 >= bound
        rows.append(_traj_row(inst.theorem_id, r, seed + r, traj.criteria,
                              bound, ok))
    passed = ver.passed
    rows.append([inst.theorem_id, "summary", str(seed), "", "", "", "",
                 "" if ver.bound_report is None else ver.bound_report.empirical,
                 bound, "pass" if passed else "fail"])
    summary = {"bound": bound, "moments_ok": ver.moments_ok,
               "max_mean_zscore": ver.max_mean_zscore,
               "max_var_zscore": ver.max_var_zscore, "d": d}
    if ver.empirical_constant is not None:
        summary["empirical_constant"] = ver.empirical_constant
    emit(prefix, inst.theorem_id, TRAJ_HEADER, rows, summary,
         p.resolved, passed, t0)
    return passed


def run_impossibility(p: Params, prefix, t0):
    algo_name = p.get_str("algorithm", "gd_uniform_avg")
    eta = p.get_float("eta", 0.1)
    T = p.get_int("T", 50)
    makers = {
        "gd_uniform_avg": lambda: inst_mod.gd_uniform_average(eta),
        "gd_last": lambda: inst_mod.gd_last_iterate(eta),
        "identity": inst_mod.identity_algorithm,
    }
    if algo_name not in makers:
        raise ConfigError(f"config key 'algorithm' must be one of "
                          f"{sorted(makers)}, got {algo_name!r}")
    header = ["experiment", "replication", "seed", "x1_star", "x_out",
              "grad_at_out", "verdict"]
    try:
        res = inst_mod.fixed_point_impossibility_demo(makers[algo_name](), T)
    except ValueError as e:
        # hypothesis violation is a verification failure, not a config error
        rows = [["infdim", "0", "0", "", "", "", "fail"]]
        emit(prefix, "infdim", header, rows, {"error": str(e)},
             p.resolved, False, t0)
        return False
    ok = abs(res.x_out) <= 1e-9 and abs(res.grad_at_out) >= 0.5
    rows = [["infdim", "0", "0", res.x1_star, res.x_out, res.grad_at_out,
             "pass" if ok else "fail"]]
    emit(prefix, "infdim", header, rows,
         {"x1_star": res.x1_star, "x_out": res.x_out,
          "grad_at_out": res.grad_at_out,
          "bracket_radius": res.bracket_radius},
         p.resolved, ok, t0)
    return ok


def run_upper(p: Params, prefix, t0, which: str):
    L = p.get_float("L", 1.0)
    delta = p.get_float("delta_gap", 1.0)
    sigma = 0.0 if which == "gd" else p.get_float("sigma", 1.0)
    T = p.get_int("T", 64)
    seed = p.get_int("seed", 0)
    reps = p.get_int("replications", 0)
    rng = np.random.default_rng(seed)
    steps = _steps_from_params(p, T, L, rng)
    if which == "ghadimi_lan":
        bound = bounds_mod.ghadimi_lan_bound(L, delta, sigma, steps)
    elif which == "gd":
        bound = bounds_mod.gd_corollary_bound(L, delta, steps)
    elif which == "kappa":
        kappas = p.get_list("kappas", None)
        if kappas is None:
            kappas = list(1 - L * np.asarray(steps))
            p.resolved["kappas"] = kappas
        bound = bounds_mod.kappa_bound(L, delta, sigma, steps, kappas)
    else:
        raise ConfigError(f"unknown upper bound '{which}'")
    rows = []
    passed = True
    summary = {"bound": bound}
    if reps > 0:
        d = p.get_int("d", 16)
        obj = uniform_quadratic(L, d)
        x1 = np.zeros(d)
        x1[0] = math.sqrt(2 * delta / L)
        noise = NoiseModel.none() if sigma == 0 else \
            NoiseModel.gaussian_isotropic(sigma ** 2)
        report = bounds_mod.empirical_vs_bound(
            obj, x1, StepSchedule.small_steps(steps), noise, T, reps,
            seed=seed, delta=delta)
        passed = report.passed
        summary.update({"empirical": report.empirical, "slack": report.slack})
        for r in range(reps):
            traj = run(obj, x1, T, StepSchedule.small_steps(steps),
                       noise.with_seed(seed + r), record=False)
            rows.append(_traj_row(f"upper_{which}", r, seed + r,
                                  traj.criteria, bound,
                                  traj.criteria.min_grad_norm ** 2 <= bound))
    rows.append([f"upper_{which}", "summary", str(seed), "", "", "", "",
                 summary.get("empirical", ""), bound,
                 "pass" if passed else "fail"])
    emit(prefix, f"upper_{which}", TRAJ_HEADER, rows, summary,
         p.resolved, passed, t0)
    return passed


def run_tightness(p: Params, prefix, t0):
    L = p.get_float("L", 1.0)
    delta = p.get_float("delta_gap", 1.0)
    sigma = p.get_float("sigma", 1.0)
    T = p.get_int("T", 10_000)
    reps = p.get_int("replications", 3)
    seed = p.get_int("seed", 0)
    report = bounds_mod.tightness_report(L, delta, sigma, T, reps, seed)
    d = report.details
    header = ["experiment", "replication", "seed", "min_grad_sq",
              "lower_bound", "upper_bound", "ratio", "verdict"]
    rows = [["tightness", "0", str(seed), report.empirical, d["lower"],
             report.theoretical, d["ratio"], report.verdict]]
    emit(prefix, "tightness", header, rows,
         {"lower": d["lower"], "upper": report.theoretical,
          "ratio": d["ratio"], "clamped": d["clamped"],
          "empirical": report.empirical},
         p.resolved, report.passed, t0)
    return report.passed


def run_concentration(p: Params, prefix, t0):
    M = p.get_float("M", 1.0)
    varmass = p.get_float("varmass", 1.0)
    d = p.get_int("d", 1000)
    eps = p.get_float("eps", 0.5)
    samples = p.get_int("samples", 100_000)
    seed = p.get_int("seed", 0)
    report = inst_mod.verify_concentration(M, varmass, d, eps, samples, seed)
    header = ["experiment", "replication", "seed", "samples", "failures",
              "empirical_rate", "bound", "verdict"]
    rows = [["concentration", "0", str(seed), str(samples),
             str(report.details["failures"]), report.empirical,
             report.theoretical, report.verdict]]
    emit(prefix, "concentration", header, rows,
         {"bound": report.theoretical, "empirical": report.empirical,
          "mean_ratio": report.details["mean_ratio"]},
         p.resolved, report.passed, t0)
    return report.passed


def read_interpolation_set(path: str, L: float) -> InterpolationSet:
    """One triple per line: d values of x, d values of g, then f."""
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for ln, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                try:
                    vals = [float(tok) for tok in line.split()]
                except ValueError:
                    raise ConfigError(f"{path}:{ln}: non-numeric token") from None
                if len(vals) % 2 != 1 or len(vals) < 3:
                    raise ConfigError(
                        f"{path}:{ln}: need 2d+1 whitespace-separated values "
                        f"(x, then g, then f), got {len(vals)}")
                rows.append(vals)
    except OSError as e:
        raise ConfigError(f"cannot read set file {path}: {e}") from e
    if not rows:
        raise ConfigError(f"{path}: no triples found")
    d = (len(rows[0]) - 1) // 2
    if any(len(r) != 2 * d + 1 for r in rows):
        raise ConfigError(f"{path}: inconsistent dimensions across lines")
    arr = np.asarray(rows)
    return InterpolationSet(xs=arr[:, :d], gs=arr[:, d:2 * d], fs=arr[:, -1],
                            L=L)


def run_interpolate(p: Params, prefix, t0, set_file: str):
    L = p.get_float("L", 1.0)
    mode = p.get_str("mode", "convex")
    if mode not in ("convex", "nonconvex"):
        raise ConfigError("config key 'mode' must be 'convex' or 'nonconvex'")
    probes = p.get_int("probes", 16)
    seed = p.get_int("seed", 0)
    S = read_interpolation_set(set_file, L)
    checker = check_convex_interpolable if mode == "convex" \
        else check_nonconvex_interpolable
    res = checker(S)
    header = ["experiment", "triple", "value_error", "gradient_error",
              "kkt_residual", "verdict"]
    rows = []
    passed = bool(res.ok)
    summary = {"interpolable": bool(res.ok), "violations": len(res.violations),
               "min_slack": res.min_slack, "mode": mode}
    if res.ok:
        for i in range(S.size):
            ev = eval_bounded_interpolant(S, S.xs[i], mode=mode, check=False)
            verr = abs(ev.value - S.fs[i])
            gerr = float(np.linalg.norm(ev.gradient - S.gs[i]))
            ok = verr <= 1e-8 * S.scale and gerr <= 1e-6 * S.scale
            passed &= ok
            rows.append(["interpolate", str(i), verr, gerr,
                         ev.alpha.kkt_residual, "pass" if ok else "fail"])
        floor = float(S.floor_values().min())
        rng = np.random.default_rng(seed)
        span = float(np.max(np.abs(S.xs))) + 1.0
        probe_ok = True
        for _ in range(probes):
            y = rng.uniform(-span, span, S.dim)
            ev = eval_bounded_interpolant(S, y, mode=mode, check=False)
            probe_ok &= ev.value >= floor - 1e-8
        passed &= probe_ok
        argmin, fstar = global_min_of_interpolant(S, mode=mode, check=False)
        summary.update({"global_min": fstar, "floor_probes_ok": probe_ok,
                        "argmin_norm": float(np.linalg.norm(argmin))})
    else:
        for (i, j, slack) in res.violations[:100]:
            rows.append(["interpolate", f"{i},{j}", slack, "", "", "fail"])
    rows.append(["interpolate", "summary", "", "", "",
                 "pass" if passed else "fail"])
    emit(prefix, "interpolate", header, rows, summary, p.resolved, passed, t0)
    return passed


def run_simulate(p: Params, prefix, t0):
    kind = p.get_str("objective", "quadratic")
    L = p.get_float("L", 1.0)
    d = p.get_int("d", 8)
    T = p.get_int("T", 32)
    sigma = p.get_float("sigma", 0.0)
    noise_kind = p.get_str("noise", "gaussian" if sigma > 0 else "none")
    reps = p.get_int("replications", 1)
    seed = p.get_int("seed", 0)
    agg = p.get_str("agg", "none")
    rng = np.random.default_rng(seed)
    steps = _steps_from_params(p, T, L, rng)
    if kind == "quadratic":
        obj = uniform_quadratic(L, d)
        x1 = np.zeros(d)
        x1[0] = p.get_float("x1_norm", 1.0)
    elif kind == "sigmoid":
        obj = EmbeddedScalarObjective(make_sigmoid(), coord=0, dim=d)
        x1 = np.zeros(d)
        x1[0] = p.get_float("x1_norm", 0.5)
    else:
        raise ConfigError("config key 'objective' must be 'quadratic' or "
                          "'sigmoid'")
    if noise_kind == "none":
        noise = NoiseModel.none()
    elif noise_kind == "gaussian":
        noise = NoiseModel.gaussian_isotropic(sigma ** 2)
    elif noise_kind == "rademacher":
        noise = NoiseModel.rademacher_coordinate(sigma)
    else:
        raise ConfigError("config key 'noise' must be none|gaussian|rademacher")
    if agg == "none":
        rule = AggregationRule.none()
    elif agg == "uniform":
        rule = AggregationRule.uniform(T)
    elif agg == "last":
        rule = AggregationRule.last_iterate(T)
    else:
        raise ConfigError("config key 'agg' must be none|uniform|last")
    rows = []
    for r in range(reps):
        traj = run(obj, x1, T, StepSchedule.small_steps(steps),
                   noise.with_seed(seed + r), rule)
        rows.append(_traj_row("simulate", r, seed + r, traj.criteria, "", True))
    rows.append(["simulate", "summary", str(seed), "", "", "", "", "", "",
                 "pass"])
    emit(prefix, "simulate", TRAJ_HEADER, rows, {"replications": reps},
         p.resolved, True, t0)
    return True


def _curve_rows(f, lo, hi, n):
    xs = np.linspace(lo, hi, n)
    return [[x, f(x)] for x in xs]


def run_plot_data(p: Params, prefix, t0, result_prefixes):
    if not prefix:
        raise ConfigError("missing required config key 'output'")
    n = p.get_int("points", 401)
    lo = p.get_float("range_lo", -2.0)
    hi = p.get_float("range_hi", 2.0)
    curves = {
        "s_curve": make_sigmoid(),
        "h1_minus": make_bump1(1.0, 1.0, "minus"),
        "h1_plus": make_bump1(1.0, 1.0, "plus"),
        "h2": make_bump2(1.0, 1.0),
    }
    for name, fn in curves.items():
        write_csv_atomic(f"{prefix}_{name}.csv", ["x", "y"],
                         _curve_rows(fn, lo, hi, n))
    sweep = []
    for rp in result_prefixes:
        json_path = rp + ".json"
        csv_path = rp + ".csv"
        if not os.path.exists(json_path) or not os.path.exists(csv_path):
            raise ConfigError(f"missing result files for prefix {rp!r}")
        with open(json_path, "r", encoding="utf-8") as fh:
            summary = json.load(fh)
        t_val = summary.get("params", {}).get("T")
        res = summary.get("results", {})
        bound = res.get("bound", res.get("upper"))
        emp = res.get("empirical", res.get("frequency"))
        if t_val is not None:
            sweep.append([t_val, bound if bound is not None else "",
                          emp if emp is not None else ""])
        # per-replication empirical-vs-theoretical overlay
        with open(csv_path, "r", newline="", encoding="utf-8") as fh:
            reader = list(csv_mod.reader(fh))
        head = reader[0]
        out_rows = []
        if "min_grad_sq" in head and "bound" in head:
            i_rep = head.index("replication")
            i_emp = head.index("min_grad_sq")
            i_b = head.index("bound")
            for row in reader[1:]:
                if row[i_rep] == "summary":
                    continue
                out_rows.append([row[i_rep], row[i_emp], row[i_b]])
        stem = os.path.basename(rp)
        write_csv_atomic(f"{prefix}_{stem}_overlay.csv",
                         ["replication", "empirical", "theoretical"], out_rows)
    sweep.sort(key=lambda r: r[0])
    write_csv_atomic(f"{prefix}_sweep.csv", ["T", "bound", "empirical"], sweep)
    print(f"[plot-data] PASS | curves={len(curves)}, overlays="
          f"{len(result_prefixes)}, sweep_points={len(sweep)}")
    return True


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

_KEY_FLAGS = ["L", "rho", "delta_gap", "sigma", "T", "d", "delta_prob", "eta",
              "steps", "a", "b", "theta", "weights", "replications", "seed",
              "samples", "eps", "M", "varmass", "algorithm", "beta_patterns",
              "mode", "probes", "objective", "noise", "agg", "x1_norm",
              "kappas", "points", "range_lo", "range_hi"]

LOWER_IDS = ["aggregation_step", "nonconvex_hessian", "prop_distance",
             "prop_noise_const", "prop_noise_floor", "prop_noise_poly",
             "infdim"]
UPPER_IDS = ["ghadimi_lan", "kappa", "gd"]


def _add_common(sp):
    sp.add_argument("--config", help="flat key = value config file")
    sp.add_argument("--output", help="output path prefix (.csv and .json)")
    for key in _KEY_FLAGS:
        sp.add_argument(f"--{key}", dest=key, default=None,
                        help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sgdfloor",
        description="Adversarial SGD instances and gradient-norm bound checks")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("simulate", "run SGD on a stock objective and record criteria"),
        ("tightness", "lower/upper sandwich at the near-optimal step"),
        ("concentration", "Gaussian norm concentration frequency check"),
        ("impossibility", "1-D fixed-output bisection demo"),
    ]:
        _add_common(sub.add_parser(name, help=help_))
    low = sub.add_parser("lower", help="build + verify a lower-bound instance")
    low.add_argument("theorem_id", choices=LOWER_IDS)
    _add_common(low)
    up = sub.add_parser("upper", help="closed-form upper bounds (+ harness)")
    up.add_argument("bound", choices=UPPER_IDS)
    _add_common(up)
    itp = sub.add_parser("interpolate", help="check a triple set and evaluate "
                                             "the bounded interpolant")
    itp.add_argument("set_file")
    _add_common(itp)
    pd = sub.add_parser("plot-data", help="emit plot-ready series files")
    pd.add_argument("results", nargs="*", help="result path prefixes")
    _add_common(pd)
    return ap


def merge_params(args) -> Params:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for key in _KEY_FLAGS + ["output"]:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return Params(values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.monotonic()
    try:
        p = merge_params(args)
        prefix = p.get_str("output", None)
        p.resolved.pop("output", None)  # echoed params describe the experiment
        cmd = args.command
        if cmd == "simulate":
            ok = run_simulate(p, prefix, t0)
        elif cmd == "lower":
            tid = args.theorem_id
            if tid == "aggregation_step":
                ok = run_lower_aggregation(p, prefix, t0)
            elif tid == "nonconvex_hessian":
                ok = run_lower_hessian(p, prefix, t0)
            elif tid == "prop_distance":
                ok = run_lower_distance(p, prefix, t0)
            elif tid.startswith("prop_noise"):
                ok = run_lower_noise(p, prefix, t0, tid.rsplit("_", 1)[-1])
            else:
                ok = run_impossibility(p, prefix, t0)
        elif cmd == "upper":
            ok = run_upper(p, prefix, t0, args.bound)
        elif cmd == "tightness":
            ok = run_tightness(p, prefix, t0)
        elif cmd == "concentration":
            ok = run_concentration(p, prefix, t0)
        elif cmd == "impossibility":
            ok = run_impossibility(p, prefix, t0)
        elif cmd == "interpolate":
            ok = run_interpolate(p, prefix, t0, args.set_file)
        else:
            ok = run_plot_data(p, prefix, t0, args.results)
        return EXIT_OK if ok else EXIT_VERIFY
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except QpToleranceError as e:
        print(f"tolerance failure: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as e:  # internal failure
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
