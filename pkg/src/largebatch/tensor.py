"""Dense feed-forward networks with hand-written backprop.

Everything is float64 and 2-D: a batch is ``(n, d)``, a layer's weights are
``(in, out)`` and its bias is ``(1, out)``. The finite-difference routines at
the bottom never call :func:`backward`, so they can be used to check it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("identity", "relu", "tanh")
LOSSES = ("mse", "softmax_cross_entropy")


class ShapeError(ValueError):
    pass


def as_tensor(values, name="tensor") -> np.ndarray:
    """Coerce to a finite 2-D float64 array (1-D input becomes a row)."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"{name}: expected 2-D data, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: non-finite entries")
    return arr


@dataclass
class LayerState:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "identity"
    grad_weights: np.ndarray | None = None
    grad_bias: np.ndarray | None = None

    def __post_init__(self):
        self.weights = as_tensor(self.weights, "weights")
        self.bias = as_tensor(self.bias, "bias")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}")
        if self.bias.shape != (1, self.weights.shape[1]):
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match weights {self.weights.shape}"
            )

    @property
    def n_in(self) -> int:
        return self.weights.shape[0]

    @property
    def n_out(self) -> int:
        return self.weights.shape[1]

    @property
    def size(self) -> int:
        return self.weights.size + self.bias.size

    @property
    def has_grad(self) -> bool:
        return self.grad_weights is not None and self.grad_bias is not None

    def params(self) -> np.ndarray:
        """Weights and bias flattened into one vector (a copy)."""
        return np.concatenate([self.weights.ravel(), self.bias.ravel()])

    def grads(self) -> np.ndarray:
        if not self.has_grad:
            raise ValueError("layer has no gradients; run backward() first")
        return np.concatenate([self.grad_weights.ravel(), self.grad_bias.ravel()])


@dataclass
class Batch:
    inputs: np.ndarray
    targets: np.ndarray
    sample_ids: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.inputs = as_tensor(self.inputs, "inputs")
        self.targets = as_tensor(self.targets, "targets")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ShapeError(
                f"inputs have {self.inputs.shape[0]} rows but targets have {self.targets.shape[0]}"
            )
        if not self.sample_ids:
            self.sample_ids = list(range(self.inputs.shape[0]))
        self.sample_ids = [int(i) for i in self.sample_ids]
        if len(self.sample_ids) != self.inputs.shape[0]:
            raise ShapeError("sample_ids length must equal the number of rows")
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise ValueError("sample_ids must be unique")

    def __len__(self):
        return self.inputs.shape[0]

    def subset(self, rows) -> "Batch":
        rows = list(rows)
        return Batch(self.inputs[rows], self.targets[rows], [self.sample_ids[r] for r in rows])


@dataclass
class Network:
    layers: list[LayerState]
    loss_kind: str = "mse"

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        if self.loss_kind not in LOSSES:
            raise ValueError(f"unknown loss {self.loss_kind!r}; expected one of {LOSSES}")
        for k in range(len(self.layers) - 1):
            if self.layers[k].n_out != self.layers[k + 1].n_in:
                raise ShapeError(
                    f"layer {k} outputs {self.layers[k].n_out} but layer {k + 1} expects {self.layers[k + 1].n_in}"
                )

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    @property
    def widths(self) -> list[int]:
        return [self.n_in] + [layer.n_out for layer in self.layers]

    def n_params(self) -> int:
        return sum(layer.size for layer in self.layers)

    def copy(self) -> "Network":
        layers = [
            LayerState(
                layer.weights.copy(),
                layer.bias.copy(),
                layer.activation,
                None if layer.grad_weights is None else layer.grad_weights.copy(),
                None if layer.grad_bias is None else layer.grad_bias.copy(),
            )
            for layer in self.layers
        ]
        return Network(layers, self.loss_kind)

    def zero_grad(self):
        for layer in self.layers:
            layer.grad_weights = None
            layer.grad_bias = None

    def predict(self, inputs) -> np.ndarray:
        return _forward_pass(self, np.asarray(inputs, dtype=np.float64))[-1]


def init_network(widths, activations, loss_kind="mse", seed=0, rng=None) -> Network:
    """Glorot-uniform weights, zero biases.

    ``activations`` may be a single name (used for every hidden layer, last
    layer identity) or one name per layer.
    """
    widths = [int(w) for w in widths]
    if len(widths) < 2 or min(widths) < 1:
        raise ValueError(f"invalid layer widths {widths}")
    n_layers = len(widths) - 1
    if isinstance(activations, str):
        activations = [activations] * (n_layers - 1) + ["identity"]
    activations = list(activations)
    if len(activations) != n_layers:
        raise ValueError(f"{n_layers} layers but {len(activations)} activations")
    rng = np.random.default_rng(seed) if rng is None else rng
    layers = []
    for fan_in, fan_out, act in zip(widths[:-1], widths[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append(LayerState(w, np.zeros((1, fan_out)), act))
    return Network(layers, loss_kind)


def _activate(kind, z):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(kind, z, a):
    if kind == "relu":
        # subgradient 0 at exactly 0
        return (z > 0.0).astype(np.float64)
    if kind == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def _check_batch(net: Network, batch: Batch):
    if batch.inputs.shape[1] != net.n_in:
        raise ShapeError(f"batch inputs have width {batch.inputs.shape[1]}, network expects {net.n_in}")
    if batch.targets.shape[1] != net.n_out:
        raise ShapeError(f"batch targets have width {batch.targets.shape[1]}, network outputs {net.n_out}")


def _forward_pass(net, x):
    acts = [x]
    for layer in net.layers:
        z = acts[-1] @ layer.weights + layer.bias
        acts.append(_activate(layer.activation, z))
    return acts


def _sample_losses(loss_kind, y, t):
    if loss_kind == "mse":
        return 0.5 * np.mean((y - t) ** 2, axis=1)
    shifted = y - y.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    # clamp tiny negative round-off (one-hot targets give exact -log p >= 0)
    return np.maximum(-(t * log_probs).sum(axis=1), 0.0)


def _output_grad(loss_kind, y, t):
    """d(per-sample loss)/d(output), one row per sample."""
    if loss_kind == "mse":
        return (y - t) / y.shape[1]
    shifted = y - y.max(axis=1, keepdims=True)
    p = np.exp(shifted)
    p /= p.sum(axis=1, keepdims=True)
    return p * t.sum(axis=1, keepdims=True) - t


def forward(net: Network, batch: Batch):
    """Return ``(per_sample_losses, mean_loss)``."""
    _check_batch(net, batch)
    y = _forward_pass(net, batch.inputs)[-1]
    losses = _sample_losses(net.loss_kind, y, batch.targets)
    return losses, float(np.mean(losses))


def backward(net: Network, batch: Batch) -> np.ndarray:
    """Fill every layer's gradients with d(mean loss)/d(param).

    Returns the per-sample losses from the forward pass it runs.
    """
    _check_batch(net, batch)
    acts = [batch.inputs]
    pre = []
    for layer in net.layers:
        z = acts[-1] @ layer.weights + layer.bias
        pre.append(z)
        acts.append(_activate(layer.activation, z))
    y, t = acts[-1], batch.targets
    losses = _sample_losses(net.loss_kind, y, t)

    delta = _output_grad(net.loss_kind, y, t) / y.shape[0]
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        delta = delta * _activation_grad(layer.activation, pre[k], acts[k + 1])
        layer.grad_weights = acts[k].T @ delta
        layer.grad_bias = delta.sum(axis=0, keepdims=True)
        if k:
            delta = delta @ layer.weights.T
    return losses


def _param_views(net):
    for k, layer in enumerate(net.layers):
        yield k, "weights", layer.weights
        yield k, "bias", layer.bias


def _cast_params(net, dtype):
    return [[layer.weights.astype(dtype), layer.bias.astype(dtype)] for layer in net.layers]


def _loss_with(net, params, x, t):
    a = x
    for (w, b), layer in zip(params, net.layers):
        a = _activate(layer.activation, a @ w + b)
    return np.mean(_sample_losses(net.loss_kind, a, t))


def finite_diff_gradient(net: Network, batch: Batch, epsilon=1e-5, dtype=np.longdouble):
    """Central-difference gradient of the mean loss, one parameter at a time.

    The loss is re-evaluated on copies of the parameters in ``dtype``
    (extended precision by default), so round-off in ``L(w+eps) - L(w-eps)``
    stays far below the truncation error even for tiny gradient entries.
    The network itself is never modified. Returns a list of
    ``(grad_weights, grad_bias)`` pairs, one per layer.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    _check_batch(net, batch)
    params = _cast_params(net, dtype)
    x = batch.inputs.astype(dtype)
    t = batch.targets.astype(dtype)
    eps = dtype(epsilon)
    out = []
    for pair in params:
        grads = []
        for param in pair:
            g = np.zeros(param.shape)
            for idx in np.ndindex(param.shape):
                orig = param[idx]
                param[idx] = orig + eps
                up = _loss_with(net, params, x, t)
                param[idx] = orig - eps
                down = _loss_with(net, params, x, t)
                param[idx] = orig
                g[idx] = float((up - down) / (2 * eps))
            grads.append(g)
        out.append(tuple(grads))
    return out


def finite_diff_hessian_diag(net: Network, batch: Batch, epsilon=1e-4):
    """Diagonal of the Hessian of the mean loss via central second differences.

    Same return layout as :func:`finite_diff_gradient`. Costs two extra
    forwards per parameter.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    _check_batch(net, batch)
    base = forward(net, batch)[1]
    out = [(np.zeros_like(layer.weights), np.zeros_like(layer.bias)) for layer in net.layers]
    for k, kind, param in _param_views(net):
        target = out[k][0] if kind == "weights" else out[k][1]
        for idx in np.ndindex(param.shape):
            orig = param[idx]
            param[idx] = orig + epsilon
            up = forward(net, batch)[1]
            param[idx] = orig - epsilon
            down = forward(net, batch)[1]
            param[idx] = orig
            target[idx] = (up - 2.0 * base + down) / (epsilon * epsilon)
    return out


def accuracy(net: Network, inputs, targets) -> float:
    """Fraction of rows whose argmax output matches the argmax target."""
    y = net.predict(inputs)
    return float(np.mean(np.argmax(y, axis=1) == np.argmax(np.asarray(targets), axis=1)))
