"""Update rules: SGD, per-parameter curvature LR, and layer-wise LR rules.

All layer-wise rules share one shape: a layer LR ``gamma * R`` where ``R`` is
some statistic of ``|w| / |g|`` over the layer, clamped into
``[r_min, r_max]``. Weights and bias of a layer are treated as one group.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import NamedTuple

import numpy as np

from .tensor import LayerState, Network, Batch, finite_diff_hessian_diag

KINDS = ("sgd", "cblr", "mclr", "lars", "percent_delta")


class NonFiniteError(FloatingPointError):
    pass


@dataclass
class OptimizerConfig:
    kind: str = "sgd"
    gamma: float = 0.01
    lr: float = 0.05
    weight_decay: float = 0.0
    guard_eps: float = 1e-12
    r_min: float = 1e-3
    r_max: float = 1e3
    hessian_eps: float = 1e-4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown optimizer {self.kind!r}; expected one of {KINDS}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if not self.guard_eps > 0 or not self.hessian_eps > 0:
            raise ValueError("guard_eps and hessian_eps must be positive")
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")

    def to_dict(self):
        return asdict(self)


DEFAULT = OptimizerConfig()


class CurvatureEstimate(NamedTuple):
    radius: float
    guarded: bool


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in {name}")


def _apply(layer: LayerState, delta_w, delta_b, name="layer"):
    _check_finite(f"update of {name}", delta_w)
    _check_finite(f"update of {name}", delta_b)
    layer.weights -= delta_w
    layer.bias -= delta_b
    return np.concatenate([delta_w.ravel(), delta_b.ravel()])


def sgd_step(layer: LayerState, lr, weight_decay=0.0, name="layer"):
    """``w <- w - lr * (g + weight_decay * w)``; returns the applied update."""
    return layerwise_step(layer, lr, weight_decay, name)


def layerwise_step(layer: LayerState, eta, weight_decay=0.0, name="layer"):
    if not layer.has_grad:
        raise ValueError(f"{name} has no gradients")
    _check_finite(f"gradients of {name}", layer.grad_weights)
    _check_finite(f"gradients of {name}", layer.grad_bias)
    dw = eta * (layer.grad_weights + weight_decay * layer.weights)
    db = eta * (layer.grad_bias + weight_decay * layer.bias)
    return _apply(layer, dw, db, name)


def curvature_radius_exact(g, h, cfg: OptimizerConfig = DEFAULT) -> float:
    """Osculating-circle radius ``(1 + g^2)^1.5 / |h|`` of the loss along one weight.

    Returns ``r_max`` when ``|h| < guard_eps`` and never more than ``r_max``.
    """
    radius, _ = exact_radii(np.float64(g), np.float64(h), cfg)
    return float(radius)


def exact_radii(g, h, cfg: OptimizerConfig = DEFAULT):
    """Vectorised :func:`curvature_radius_exact`; also returns the guard mask."""
    g = np.asarray(g, dtype=np.float64)
    h = np.abs(np.asarray(h, dtype=np.float64))
    flat = h < cfg.guard_eps
    with np.errstate(divide="ignore", invalid="ignore"):
        radius = np.where(flat, cfg.r_max, (1.0 + g * g) ** 1.5 / np.where(flat, 1.0, h))
    over = radius > cfg.r_max
    return np.minimum(radius, cfg.r_max), flat | over


def approx_radii(w, g, cfg: OptimizerConfig = DEFAULT):
    """Vectorised ``|w / g|`` with both failure cases guarded.

    ``|g| < eps`` gives ``r_max``; ``|w| < eps`` falls to ``r_min`` through the
    clamp. Returns ``(radii, guarded_mask)``.
    """
    w = np.abs(np.asarray(w, dtype=np.float64))
    g = np.abs(np.asarray(g, dtype=np.float64))
    small_g = g < cfg.guard_eps
    small_w = w < cfg.guard_eps
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = np.where(small_g, cfg.r_max, w / np.where(small_g, 1.0, g))
    radius = np.clip(raw, cfg.r_min, cfg.r_max)
    guarded = small_g | small_w | (radius != raw)
    return radius, guarded


def curvature_radius_approx(w, g, cfg: OptimizerConfig = DEFAULT) -> CurvatureEstimate:
    radius, guarded = approx_radii(w, g, cfg)
    return CurvatureEstimate(float(radius), bool(guarded))


def _clamped_ratio(num, den, cfg):
    if den < cfg.guard_eps:
        return cfg.r_max
    if num < cfg.guard_eps:
        return cfg.r_min
    return float(np.clip(num / den, cfg.r_min, cfg.r_max))


def lower_median(values) -> float:
    """Lower middle order statistic (no averaging for even counts)."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise ValueError("median of an empty set")
    return float(v[(v.size - 1) // 2])


def mclr_layer_lr(layer: LayerState, cfg: OptimizerConfig) -> float:
    """Layer LR from the median curvature radius ``median|w| / median|g|``.

    With weight decay ``beta`` the denominator becomes
    ``median|g| + beta * median|w|``.
    """
    w_m = lower_median(np.abs(layer.params()))
    g_m = lower_median(np.abs(layer.grads()))
    den = g_m + cfg.weight_decay * w_m if cfg.weight_decay > 0 else g_m
    return cfg.gamma * _clamped_ratio(w_m, den, cfg)


def lars_layer_lr(layer: LayerState, cfg: OptimizerConfig) -> float:
    w_norm = float(np.linalg.norm(layer.params()))
    g_norm = float(np.linalg.norm(layer.grads()))
    return cfg.gamma * _clamped_ratio(w_norm, g_norm, cfg)


def percent_delta_layer_lr(layer: LayerState, cfg: OptimizerConfig) -> float:
    """``gamma * size / sum|g_i / w_i|`` skipping entries with ``|w_i| < eps``."""
    w = layer.params()
    g = layer.grads()
    keep = np.abs(w) >= cfg.guard_eps
    if not keep.any():
        return cfg.gamma * cfg.r_max
    total = float(np.sum(np.abs(g[keep] / w[keep])))
    return cfg.gamma * _clamped_ratio(float(keep.sum()), total, cfg)


LAYER_RULES = {
    "mclr": mclr_layer_lr,
    "lars": lars_layer_lr,
    "percent_delta": percent_delta_layer_lr,
}


def cblr_step(layer: LayerState, hessian_diag, cfg: OptimizerConfig, name="layer"):
    """Per-parameter LR ``gamma * R_i`` with the exact radius from ``(g, h)``.

    ``hessian_diag`` is a ``(weights, bias)`` pair of second derivatives.
    Returns ``(update, per_parameter_lr)``.
    """
    if not layer.has_grad:
        raise ValueError(f"{name} has no gradients")
    h_w, h_b = hessian_diag
    r_w, _ = exact_radii(layer.grad_weights, h_w, cfg)
    r_b, _ = exact_radii(layer.grad_bias, h_b, cfg)
    dw = cfg.gamma * r_w * layer.grad_weights
    db = cfg.gamma * r_b * layer.grad_bias
    update = _apply(layer, dw, db, name)
    return update, cfg.gamma * np.concatenate([r_w.ravel(), r_b.ravel()])


class Optimizer:
    """Applies one configured rule to every layer of a network.

    ``step`` returns ``(updates, lrs)``: the update vector actually subtracted
    from each layer and the layer's effective LR (for CBLR the mean of its
    per-parameter LRs).
    """

    def __init__(self, cfg: OptimizerConfig):
        self.cfg = cfg

    def step(self, net: Network, lr=None, batch: Batch | None = None):
        cfg = self.cfg
        lr = cfg.lr if lr is None else lr
        updates, lrs = [], []
        if cfg.kind == "cblr":
            if batch is None:
                raise ValueError("cblr needs the batch to probe second derivatives")
            # probe before touching any weights so every layer sees the same point
            hess = finite_diff_hessian_diag(net, batch, cfg.hessian_eps)
            for k, layer in enumerate(net.layers):
                upd, per_param = cblr_step(layer, hess[k], cfg, f"layer {k}")
                updates.append(upd)
                lrs.append(float(np.mean(per_param)))
            return updates, lrs
        if cfg.kind == "sgd":
            etas = [lr] * len(net.layers)
        else:
            rule = LAYER_RULES[cfg.kind]
            etas = [rule(layer, cfg) for layer in net.layers]
        for k, (layer, eta) in enumerate(zip(net.layers, etas)):
            updates.append(layerwise_step(layer, eta, cfg.weight_decay, f"layer {k}"))
            lrs.append(float(eta))
        return updates, lrs
