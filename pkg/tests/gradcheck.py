"""Shared fixtures for comparing backprop against finite differences."""
import numpy as np

from largebatch.tensor import Batch, init_network


def random_net(seed, max_layers=3, max_units=32, batch=4):
    """Seeded random net plus a batch that keeps ReLU inputs away from the kink.

    Central differences are only valid where the loss is smooth, so batches
    with a ReLU pre-activation within 1e-3 of zero are redrawn.
    """
    rng = np.random.default_rng(seed)
    n_layers = int(rng.integers(1, max_layers + 1))
    widths = [int(w) for w in rng.integers(1, max_units + 1, size=n_layers + 1)]
    acts = [str(a) for a in rng.choice(["identity", "tanh", "relu"], size=n_layers)]
    loss = str(rng.choice(["mse", "softmax_cross_entropy"]))
    if loss == "softmax_cross_entropy":
        widths[-1] = max(widths[-1], 2)
    net = init_network(widths, acts, loss, rng=rng)
    for layer in net.layers:
        layer.bias[:] = rng.normal(0.0, 0.1, layer.bias.shape)
    while True:
        x = rng.standard_normal((batch, widths[0]))
        if loss == "mse":
            t = rng.standard_normal((batch, widths[-1]))
        else:
            t = np.eye(widths[-1])[rng.integers(0, widths[-1], batch)]
        a, near_kink = x, False
        for layer in net.layers:
            z = a @ layer.weights + layer.bias
            near_kink |= layer.activation == "relu" and bool(np.any(np.abs(z) < 1e-3))
            a = np.maximum(z, 0) if layer.activation == "relu" else (np.tanh(z) if layer.activation == "tanh" else z)
        if not near_kink:
            return net, Batch(x, t)


def max_rel_error(net, fd):
    worst = 0.0
    for layer, (gw, gb) in zip(net.layers, fd):
        for analytic, numeric in ((layer.grad_weights, gw), (layer.grad_bias, gb)):
            worst = max(worst, float(np.max(np.abs(analytic - numeric) / (np.abs(numeric) + 1e-12))))
    return worst
