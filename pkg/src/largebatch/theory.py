"""Closed-form batch-size scaling laws and Monte-Carlo oracles for them.

Per-sample gradients are modelled as ``N(0, sigma)`` and a batch gradient as
the mean of ``n`` of them. The ``predict_*`` functions use the constants as
published (``2 sigma / sqrt(pi n)`` for the mean absolute gradient). The exact
half-normal mean is ``sigma * sqrt(2 / (pi n))``, a factor ``sqrt(2)`` smaller;
:func:`gaussian_mean_abs_gradient` gives that value so the two can be
compared against sampling. Both share the ``1/sqrt(n)`` exponent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class GaussianGradientModel:
    sigma: float
    n: int = 1
    mu: float = 0.0

    def __post_init__(self):
        if self.mu != 0.0:
            raise ValueError("the gradient model is centred: mu must be 0")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.n < 1:
            raise ValueError("batch size must be >= 1")

    @property
    def batch_std(self) -> float:
        return self.sigma / math.sqrt(self.n)


@dataclass(frozen=True)
class QuadraticMinimum:
    """``L(w) = a (w - b)^2 + c`` near a minimum."""

    a: float
    b: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive for a minimum")

    def loss(self, w):
        return self.a * (np.asarray(w) - self.b) ** 2 + self.c

    def grad(self, w):
        return 2.0 * self.a * (np.asarray(w) - self.b)

    def hess(self, w=None):
        return 2.0 * self.a

    def distance(self, w):
        return np.asarray(w) - self.b

    def distance_from_grad(self, g):
        return np.asarray(g) / (2.0 * self.a)


class SlopeFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float


def _check(sigma, n):
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")


def predict_mean_abs_gradient(sigma, n) -> float:
    _check(sigma, n)
    return 2.0 * sigma / (SQRT_PI * math.sqrt(n))


def predict_param_stride(sigma, lr, n) -> float:
    return lr * predict_mean_abs_gradient(sigma, n)


def predict_loss_stride(sigma, lr, n) -> float:
    _check(sigma, n)
    return sigma * sigma * lr / n


def predict_mean_distance(sigma, a, n) -> float:
    _check(sigma, n)
    if not a > 0:
        raise ValueError("a must be positive")
    return sigma / (a * SQRT_PI * math.sqrt(n))


def gaussian_mean_abs_gradient(sigma, n) -> float:
    """Exact ``E|g|`` for ``g ~ N(0, sigma / sqrt(n))``."""
    _check(sigma, n)
    return sigma * math.sqrt(2.0 / (math.pi * n))


def gaussian_mean_distance(sigma, a, n) -> float:
    """Exact ``E|g / 2a|`` for ``g ~ N(0, sigma / sqrt(n))``."""
    return gaussian_mean_abs_gradient(sigma, n) / (2.0 * a)


def calibrate_sigma(mean_abs_grad, n) -> float:
    """Invert :func:`predict_mean_abs_gradient` for sigma."""
    return mean_abs_grad * SQRT_PI * math.sqrt(n) / 2.0


class MCEstimate(NamedTuple):
    mean: float
    stderr: float
    k: int


def sample_batch_means(sigma, n, k, seed=0, chunk=2 ** 22):
    """``k`` batch gradients, each the mean of ``n`` raw ``N(0, sigma)`` draws.

    Draws are generated in chunks so memory stays bounded for large ``k * n``.
    """
    if k < 1 or n < 1:
        raise ValueError("k and n must be >= 1")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    rng = np.random.default_rng(seed)
    rows = max(1, chunk // n)
    out = np.empty(k)
    for start in range(0, k, rows):
        m = min(rows, k - start)
        out[start:start + m] = rng.standard_normal((m, n)).mean(axis=1)
    return sigma * out


def _estimate(values) -> MCEstimate:
    values = np.asarray(values, dtype=np.float64)
    sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return MCEstimate(float(values.mean()), sd / math.sqrt(values.size), int(values.size))


def mc_mean_abs_gradient_estimate(sigma, n, k, seed=0) -> MCEstimate:
    return _estimate(np.abs(sample_batch_means(sigma, n, k, seed)))


def mc_mean_abs_gradient(sigma, n, k, seed=0) -> float:
    return mc_mean_abs_gradient_estimate(sigma, n, k, seed).mean


def mc_param_stride_estimate(sigma, lr, n, k, seed=0) -> MCEstimate:
    return _estimate(lr * np.abs(sample_batch_means(sigma, n, k, seed)))


def mc_loss_stride_estimate(sigma, lr, n, k, seed=0) -> MCEstimate:
    g = sample_batch_means(sigma, n, k, seed)
    return _estimate(lr * g * g)


def mc_mean_distance_estimate(sigma, a, n, k, seed=0) -> MCEstimate:
    """Quadratic-ensemble oracle: offset from the minimum recovered from ``g / 2a``."""
    well = QuadraticMinimum(a)
    return _estimate(np.abs(well.distance_from_grad(sample_batch_means(sigma, n, k, seed))))


def fit_loglog_slope(points) -> SlopeFit:
    """Least-squares line through ``(ln n, ln value)``."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points for a slope fit")
    for x, y in pts:
        if not (x > 0 and y > 0):
            raise ValueError(f"log-log fit needs positive values, got ({x}, {y})")
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    xm, ym = lx.mean(), ly.mean()
    sxx = float(np.sum((lx - xm) ** 2))
    if sxx == 0:
        raise ValueError("log-log fit needs at least two distinct x values")
    slope = float(np.sum((lx - xm) * (ly - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((ly - (intercept + slope * lx)) ** 2))
    ss_tot = float(np.sum((ly - ym) ** 2))
    if ss_tot <= 1e-300:
        r2 = 1.0 if ss_res <= 1e-300 else 0.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return SlopeFit(slope, intercept, r2)
