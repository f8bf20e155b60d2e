import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from largebatch.theory import (
    GaussianGradientModel, QuadraticMinimum, calibrate_sigma, fit_loglog_slope,
    gaussian_mean_abs_gradient, gaussian_mean_distance, mc_loss_stride_estimate,
    mc_mean_abs_gradient, mc_mean_abs_gradient_estimate, mc_mean_distance_estimate,
    mc_param_stride_estimate, predict_loss_stride, predict_mean_abs_gradient,
    predict_mean_distance, predict_param_stride,
)

TWO_OVER_SQRT_PI = 2 / math.sqrt(math.pi)


def test_mean_abs_gradient_examples():
    assert predict_mean_abs_gradient(1, 1) == pytest.approx(1.128379, abs=1e-6)
    assert predict_mean_abs_gradient(1, 4) == pytest.approx(0.564190, abs=1e-6)


def test_param_stride_examples():
    assert predict_param_stride(1, 1, 1) == pytest.approx(TWO_OVER_SQRT_PI, rel=1e-15)
    assert predict_param_stride(1, 0.1, 1) == pytest.approx(0.112838, abs=1e-6)


def test_loss_stride_examples():
    assert predict_loss_stride(1, 1, 1) == 1.0
    assert predict_loss_stride(1, 1, 4) == 0.25


def test_mean_distance_examples():
    assert predict_mean_distance(math.sqrt(math.pi), 1, 1) == pytest.approx(1.0, rel=1e-15)
    assert predict_mean_distance(1, 0.5, 1) == pytest.approx(TWO_OVER_SQRT_PI, rel=1e-15)


@pytest.mark.parametrize("call", [
    lambda: predict_mean_abs_gradient(0, 1), lambda: predict_mean_abs_gradient(1, 0),
    lambda: predict_mean_distance(1, 0, 1), lambda: GaussianGradientModel(1.0, 1, mu=0.5),
    lambda: QuadraticMinimum(-1.0),
])
def test_invalid_inputs(call):
    with pytest.raises(ValueError):
        call()


@given(sigma=st.floats(0.01, 100), c=st.floats(0.01, 100), n=st.integers(1, 10_000))
def test_predictors_homogeneous(sigma, c, n):
    assert predict_mean_abs_gradient(c * sigma, n) == pytest.approx(c * predict_mean_abs_gradient(sigma, n), rel=1e-12)
    assert predict_loss_stride(c * sigma, 0.1, n) == pytest.approx(c * c * predict_loss_stride(sigma, 0.1, n), rel=1e-12)


@given(mean_abs=st.floats(1e-6, 1e3), n=st.integers(1, 4096))
def test_calibration_inverts_predictor(mean_abs, n):
    assert predict_mean_abs_gradient(calibrate_sigma(mean_abs, n), n) == pytest.approx(mean_abs, rel=1e-12)


def test_mc_half_normal_mean():
    est = mc_mean_abs_gradient(1.0, 1, 10 ** 6, seed=7)
    assert abs(est - 0.7979) <= 0.005
    assert abs(est - math.sqrt(2 / math.pi)) <= 0.005


def test_mc_degenerate_sigma():
    assert mc_mean_abs_gradient(1e-300, 4, 1000) == pytest.approx(0.0, abs=1e-290)


def test_mc_deterministic_per_seed():
    assert mc_mean_abs_gradient(1.0, 8, 1000, seed=3) == mc_mean_abs_gradient(1.0, 8, 1000, seed=3)
    assert mc_mean_abs_gradient(1.0, 8, 1000, seed=3) != mc_mean_abs_gradient(1.0, 8, 1000, seed=4)


def test_mc_doubling_batch_divides_by_sqrt2():
    a = mc_mean_abs_gradient(1.0, 16, 200_000, seed=1)
    b = mc_mean_abs_gradient(1.0, 32, 200_000, seed=2)
    assert a / b == pytest.approx(math.sqrt(2), rel=0.01)


def test_exact_reference_matches_sampling_at_n64():
    est = mc_mean_abs_gradient(1.0, 64, 10 ** 6, seed=0)
    assert abs(est - gaussian_mean_abs_gradient(1.0, 64)) / gaussian_mean_abs_gradient(1.0, 64) < 0.005


def test_published_constant_is_sqrt2_above_exact_mean():
    # the closed form keeps the 1/sqrt(n) law but carries a sqrt(2) factor
    for n in (1, 7, 64):
        ratio = predict_mean_abs_gradient(1.3, n) / gaussian_mean_abs_gradient(1.3, n)
        assert ratio == pytest.approx(math.sqrt(2), rel=1e-14)


def test_loss_stride_matches_sampling():
    est = mc_loss_stride_estimate(1.0, 0.5, 16, 10 ** 6, seed=5)
    assert abs(est.mean - predict_loss_stride(1.0, 0.5, 16)) / predict_loss_stride(1.0, 0.5, 16) < 0.005


@pytest.mark.parametrize("sigma", [0.1, 0.5, 1.0, 3.0])
@pytest.mark.parametrize("n", [1, 2, 16, 100, 256])
def test_sampling_within_three_standard_errors(sigma, n):
    k, seed = 20_000, 11
    checks = [
        (mc_mean_abs_gradient_estimate(sigma, n, k, seed), gaussian_mean_abs_gradient(sigma, n)),
        (mc_param_stride_estimate(sigma, 0.1, n, k, seed), 0.1 * gaussian_mean_abs_gradient(sigma, n)),
        (mc_loss_stride_estimate(sigma, 0.1, n, k, seed), predict_loss_stride(sigma, 0.1, n)),
        (mc_mean_distance_estimate(sigma, 0.7, n, k, seed), gaussian_mean_distance(sigma, 0.7, n)),
    ]
    for est, expected in checks:
        assert abs(est.mean - expected) < 3 * est.stderr


def test_distance_oracle_uses_quadratic_geometry():
    well = QuadraticMinimum(0.5, b=2.0)
    w = np.array([1.0, 2.5])
    assert np.allclose(well.distance_from_grad(well.grad(w)), well.distance(w))
    assert well.hess() == 1.0


@pytest.mark.parametrize("exponent", [-1.0, -0.5, 0.0])
def test_slope_fit_recovers_planted_exponent(exponent):
    ns = [32, 64, 128, 256, 512, 1024]
    fit = fit_loglog_slope([(n, 3.0 * n ** exponent) for n in ns])
    assert abs(fit.slope - exponent) < 1e-9
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_slope_fit_constant_values():
    fit = fit_loglog_slope([(1, 2.0), (2, 2.0), (4, 2.0)])
    assert fit.slope == 0.0 and 0 <= fit.r_squared <= 1


@pytest.mark.parametrize("points", [
    [(1, 1.0), (2, 0.5)], [(1, 1.0), (2, 0.0), (4, 0.25)], [(1, 1.0), (2, -1.0), (4, 0.25)],
    [(2, 1.0), (2, 0.5), (2, 0.25)],
])
def test_slope_fit_rejects_bad_points(points):
    with pytest.raises(ValueError):
        fit_loglog_slope(points)


@given(st.lists(st.tuples(st.floats(1, 1e4), st.floats(1e-6, 1e6)), min_size=3, max_size=20,
                unique_by=lambda p: p[0]))
def test_r_squared_in_unit_interval(points):
    fit = fit_loglog_slope(points)
    assert 0.0 <= fit.r_squared <= 1.0
