"""Acceptance criteria, one test each, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are also
collected into an "acceptance criteria" section at the end of the session.
Criteria 9 and 11 train a few dozen networks and take a few minutes.
"""
import time

import numpy as np
import pytest

from gradcheck import max_rel_error, random_net
from largebatch.config import DiscardSweepConfig, RunConfig, SweepConfig
from largebatch.data import ScheduleSpec
from largebatch.experiments import (
    compare_optimizers, compare_schedules, run_discard_sweep, run_sweep, run_theory_check, run_train,
)
from largebatch.optim import (
    OptimizerConfig, approx_radii, curvature_radius_exact, lars_layer_lr, mclr_layer_lr,
    percent_delta_layer_lr,
)
from largebatch.tensor import LayerState, backward, finite_diff_gradient
from largebatch.theory import mc_mean_distance_estimate, predict_mean_distance

GAMMA_GRID = [0.005, 0.01, 0.02, 0.04, 0.08]
SEEDS = [0, 1, 2, 3, 4]


@pytest.fixture(scope="module")
def default_sweep():
    start = time.perf_counter()
    rows, slopes = run_sweep(SweepConfig(layer=0))
    return slopes["fits"], time.perf_counter() - start


def test_gradient_scaling_law(default_sweep, acceptance_report):
    fits, seconds = default_sweep
    fit = fits["first_step_mean_abs_grad"]
    ok = -0.65 <= fit["slope"] <= -0.35 and fit["r_squared"] >= 0.9
    acceptance_report(1, ok, f"mean_abs_grad slope {fit['slope']:.4f} (want [-0.65, -0.35]), "
                             f"r^2 {fit['r_squared']:.4f} (want >= 0.9), sweep {seconds:.1f}s")


def test_loss_stride_scaling_law(default_sweep, acceptance_report):
    fit = default_sweep[0]["first_step_normalized_loss_stride"]
    ok = -1.2 <= fit["slope"] <= -0.8 and fit["r_squared"] >= 0.9
    acceptance_report(2, ok, f"normalized_loss_stride slope {fit['slope']:.4f} (want [-1.2, -0.8]), "
                             f"r^2 {fit['r_squared']:.4f} (want >= 0.9)")


def test_param_stride_identity(acceptance_report):
    result = run_train(RunConfig(optimizer=OptimizerConfig(kind="sgd", lr=0.05)))
    worst = max(abs(r.normalized_param_stride - r.mean_abs_grad) / r.mean_abs_grad for r in result.records)
    steps = result.summary["n_steps"]
    acceptance_report(3, worst <= 1e-12, f"max relative gap {worst:.2e} over {steps} SGD steps x "
                                         f"{len(result.records) // steps} layers (want <= 1e-12)")


def test_theory_matches_sampling(acceptance_report):
    start = time.perf_counter()
    report = run_theory_check([0.5, 1.0, 2.0], [1, 16, 256], 10 ** 6, seed=0)
    seconds = time.perf_counter() - start
    parts = [f"{name} {e['passed']}/{e['cells']} (max rel err {e['max_relative_error']:.4f})"
             for name, e in report["predictors"].items()]
    acceptance_report(4, report["all_passed"] and seconds < 60,
                      "; ".join(parts) + f"; {seconds:.1f}s")


def test_backprop_matches_finite_differences(acceptance_report):
    worst, worst_seed = 0.0, None
    for seed in range(100):
        net, batch = random_net(seed)
        backward(net, batch)
        err = max_rel_error(net, finite_diff_gradient(net, batch))
        if err > worst:
            worst, worst_seed = err, seed
    acceptance_report(5, worst < 1e-6, f"max relative deviation {worst:.2e} (seed {worst_seed}) "
                                       f"over 100 random nets (want < 1e-6)")


def test_curvature_approximation(acceptance_report):
    cfg = OptimizerConfig(r_min=1e-9, r_max=1e9)
    worst = 0.0
    for a in np.geomspace(0.1, 10, 41):
        # |g| = 2a|w| <= 0.1 on both sides of the minimum
        for w in np.concatenate([np.linspace(-0.05 / a, -1e-4, 60), np.linspace(1e-4, 0.05 / a, 60)]):
            g = 2 * a * w
            approx = float(approx_radii(w, g, cfg)[0])
            exact = curvature_radius_exact(g, 2 * a, cfg)
            worst = max(worst, abs(approx - exact) / exact)
    example = curvature_radius_exact(0.1, 1.0)

    defaults = OptimizerConfig()
    vals = np.array([0.0, 1e-13, -1e-13, 0.05, -0.3, 1.0, 2.5])
    w, g = np.meshgrid(vals, vals)
    _, guarded = approx_radii(w, g, defaults)
    radius_raw = np.abs(w) / np.where(g == 0, 1, np.abs(g))
    in_range = (radius_raw >= defaults.r_min) & (radius_raw <= defaults.r_max)
    failure_inputs = (np.abs(w) < defaults.guard_eps) | (np.abs(g) < defaults.guard_eps)
    # away from the clamp the guard must fire exactly on the two failure inputs
    guards_exact = bool(np.all(guarded[in_range | failure_inputs] == failure_inputs[in_range | failure_inputs]))
    ok = worst <= 0.016 and guards_exact
    acceptance_report(6, ok, f"max relative error {100 * worst:.3f}% for |g| <= 0.1 (want <= 1.6%); "
                             f"exact {example:.7f} vs approx 1.0 at a=0.5, w=0.1; "
                             f"guards exact on w=0 / g=0 inputs: {guards_exact}")


def test_discard_trend(acceptance_report):
    rows, report = run_discard_sweep(DiscardSweepConfig())
    rho = report["spearman"]
    grads = ", ".join(f"{r['mean_abs_grad']:.3e}" for r in rows)
    acceptance_report(7, rho is not None and rho >= 0.9,
                      f"spearman {rho} over ratios 0.1..0.9 (want >= 0.9); mean_abs_grad [{grads}]")


def _layer(w, g):
    w, g = np.asarray(w, float), np.asarray(g, float)
    out = LayerState(w[:-1].reshape(-1, 1), w[-1:].reshape(1, 1))
    out.grad_weights, out.grad_bias = g[:-1].reshape(-1, 1), g[-1:].reshape(1, 1)
    return out


def test_layerwise_equivalences(acceptance_report):
    rng = np.random.default_rng(2024)
    cfg = OptimizerConfig(kind="mclr", gamma=0.01, r_min=1e-12, r_max=1e12)
    worst = 0.0
    for _ in range(2000):
        size = int(rng.integers(2, 50))
        w = rng.choice([-1, 1], size) * 10 ** rng.uniform(-3, 3, size)
        g = rng.choice([-1, 1], size) * 10 ** rng.uniform(-3, 3, size)
        c = 10 ** rng.uniform(-2, 2)
        for rule in (lars_layer_lr, percent_delta_layer_lr, mclr_layer_lr):
            a, b = rule(_layer(w, g), cfg), rule(_layer(c * w, c * g), cfg)
            worst = max(worst, abs(a - b) / a)
    lars = lars_layer_lr(_layer([3, 4], [0.06, 0.08]), OptimizerConfig(gamma=0.1))
    pdelta = percent_delta_layer_lr(_layer([1, 2], [0.1, 0.4]), OptimizerConfig(gamma=0.1))
    mclr = mclr_layer_lr(_layer([1, 2, 3], [0.1, 0.2, 0.4]), OptimizerConfig(gamma=0.01))
    fixtures = (abs(lars - 5.0) <= 1e-12 and abs(pdelta - 0.2 / 0.3) <= 1e-12 and abs(mclr - 0.1) <= 1e-12)
    acceptance_report(8, worst <= 1e-12 and fixtures,
                      f"max rescaling drift {worst:.2e} over 2000 draws x 3 rules (want <= 1e-12); "
                      f"LARS {lars:.12g}, PercentDelta {pdelta:.12g}, MCLR {mclr:.12g}")


@pytest.mark.slow
def test_mclr_matches_lars(acceptance_report):
    start = time.perf_counter()
    base = RunConfig(schedule=ScheduleSpec.constant(256, 0.05), epochs=30, record_stats=False)
    res = compare_optimizers(base, ["mclr", "lars"], GAMMA_GRID, SEEDS)
    seconds = time.perf_counter() - start
    gap = abs(res["mclr"]["best_median_accuracy"] - res["lars"]["best_median_accuracy"])
    acceptance_report(9, gap <= 0.03 and seconds < 600,
                      f"MCLR {res['mclr']['best_median_accuracy']:.4f} (gamma {res['mclr']['best_gamma']}) vs "
                      f"LARS {res['lars']['best_median_accuracy']:.4f} (gamma {res['lars']['best_gamma']}), "
                      f"gap {100 * gap:.2f} points (want <= 3); {seconds:.0f}s")


def test_distance_to_minimum_law(acceptance_report):
    parts, ok = [], True
    for n in (1, 16, 256):
        est = mc_mean_distance_estimate(1.0, 0.5, n, 10 ** 6, seed=n)
        pred = predict_mean_distance(1.0, 0.5, n)
        rel = abs(est.mean - pred) / pred
        ok &= rel <= 0.01
        parts.append(f"n={n}: simulated {est.mean:.5f} vs formula {pred:.5f} ({100 * rel:.2f}%)")
    acceptance_report(10, ok, "; ".join(parts) + " (want within 1%)")


@pytest.mark.slow
def test_schedule_behaviour(acceptance_report, tmp_path):
    base = RunConfig(record_stats=False)
    scheduled = ScheduleSpec(((0, 16, 0.005), (1, 256, 0.05)))
    baseline = ScheduleSpec.constant(256, 0.05)
    summary = compare_schedules(base, scheduled, baseline, SEEDS, out_dir=tmp_path)
    both = all(len(summary[k]["final_losses"]) == len(SEEDS) for k in ("scheduled", "baseline"))
    s, b = summary["scheduled"]["median_final_loss"], summary["baseline"]["median_final_loss"]
    acceptance_report(11, s <= b and both and (tmp_path / "summary.json").exists(),
                      f"median final loss scheduled {s:.5f} vs fixed-large-batch {b:.5f} (want <=) "
                      f"over {len(SEEDS)} seeds, {base.epochs} epochs")
