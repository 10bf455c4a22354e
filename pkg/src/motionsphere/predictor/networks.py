"""Dense generator and critic networks and their tape-level building blocks."""

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..errors import DimensionError
from ..geometry import trapezoid_weights

ACTIVATIONS = {
    "leaky_relu": ad.leaky_relu,
    "tanh": ad.tanh,
    "relu": ad.relu,
}


def init_mlp(sizes, rng):
    """Glorot-uniform weights and zero biases for a chain of dense layers."""
    params = []
    for d_in, d_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (d_in + d_out))
        params.append(rng.uniform(-limit, limit, size=(d_in, d_out)))
        params.append(np.zeros(d_out))
    return params


@dataclass
class MLP:
    """Dense network; ``params`` is ``[W0, b0, W1, b1, ...]``."""

    params: list
    activation: str
    slope: float = 0.2

    @property
    def sizes(self):
        return [self.params[0].shape[0]] + [w.shape[1] for w in self.params[0::2]]

    def tensors(self):
        return [ad.Tensor(p, requires_grad=True) for p in self.params]

    def forward(self, x, params=None):
        params = params if params is not None else [ad.Tensor(p) for p in self.params]
        x = ad.as_tensor(x)
        if x.shape[-1] != self.params[0].shape[0]:
            raise DimensionError(
                f"network expects input width {self.params[0].shape[0]}, got {x.shape[-1]}"
            )
        act = ACTIVATIONS[self.activation]
        n_layers = len(params) // 2
        h = x
        for i in range(n_layers):
            h = h @ params[2 * i] + params[2 * i + 1]
            if i < n_layers - 1:
                h = act(h, self.slope) if self.activation == "leaky_relu" else act(h)
        return h


class SphereGrid:
    """Constants tying flat network vectors to points on the SRVF sphere.

    A point of shape ``(T_s, n)`` is flattened row-major to ``T_s * n``
    entries; ``weights`` holds the matching trapezoid weights.
    """

    def __init__(self, mu):
        self.mu = np.asarray(mu, dtype=float)
        self.grid_size, self.dim = self.mu.shape
        w = trapezoid_weights(self.grid_size)
        self.weights = np.repeat(w, self.dim)
        self.mu_flat = self.mu.reshape(-1)
        self.mu_weighted = (self.weights * self.mu_flat)[:, None]

    @property
    def flat_size(self):
        return self.grid_size * self.dim

    def flatten(self, points):
        points = np.asarray(points, dtype=float)
        return points.reshape(points.shape[0], -1)

    def tangent_project(self, raw):
        """Subtract the component along ``mu`` (quadrature inner product)."""
        return raw - (raw @ self.mu_weighted) * self.mu_flat

    def sq_norm(self, v):
        return ad.sum_(v * v * self.weights, axis=1, keepdims=True)

    def exp(self, v):
        r2 = self.sq_norm(v)
        return ad.cos_sqrt(r2) * self.mu_flat + ad.sinc_sqrt(r2) * v

    def log_exp(self, v):
        """``log_mu(exp_mu(v))``: identity while ``|v| < pi``, wrapped beyond."""
        r = np.sqrt(np.maximum(self.sq_norm(v).data, 0.0))
        wrap = 2.0 * np.pi * np.round(r / (2.0 * np.pi))
        if not np.any(wrap):
            return v
        safe_r = ad.clamp_min(ad.sqrt(self.sq_norm(v)), 1e-300)
        return v * (1.0 - wrap / safe_r)


def generator_network(in_size, out_size, cfg, rng):
    return MLP(init_mlp([in_size, *cfg.gen_hidden, out_size], rng), "leaky_relu", cfg.leaky_slope)


def critic_network(in_size, cfg, rng):
    return MLP(init_mlp([in_size, *cfg.critic_hidden, 1], rng), "tanh")


def generator_forward(gen, prior_tangent, mu, params=None):
    """Tangent-space prediction at ``mu`` for one or a batch of prior tangents.

    Numpy in, numpy out unless ``params`` (tape tensors) are given. A
    generator with one extra output column carries a log scale-ratio head,
    which is dropped here.
    """
    grid = mu if isinstance(mu, SphereGrid) else SphereGrid(mu)
    x = np.asarray(prior_tangent, dtype=float) if not isinstance(prior_tangent, ad.Tensor) else prior_tangent
    single = not isinstance(x, ad.Tensor) and x.ndim == 2
    if isinstance(x, ad.Tensor):
        flat = x
    else:
        flat = x.reshape(1, -1) if single else x.reshape(x.shape[0], -1)
    if params is None:
        with ad.no_grad():
            out = _generator_tape(gen, flat, grid, None)
        out = out.data.reshape(-1, grid.grid_size, grid.dim)
        return out[0] if single else out
    return _generator_tape(gen, flat, grid, params)


def _generator_tape(gen, flat, grid, params):
    raw = gen.forward(flat, params)
    raw = raw[:, : grid.flat_size] if raw.shape[1] > grid.flat_size else raw
    return grid.tangent_project(raw)


def generator_log_scale(gen, flat, params=None):
    """Output of the scale head (last column), or None when absent."""
    raw = gen.forward(flat, params)
    return raw[:, -1]


def discriminator_forward(critic, x, params=None):
    """Critic value (no sigmoid) for one ``(T_s, n)`` tangent or a batch."""
    if isinstance(x, ad.Tensor):
        return critic.forward(x, params)[:, 0]
    x = np.asarray(x, dtype=float)
    single = x.ndim == 2
    flat = x.reshape(1, -1) if single else x.reshape(x.shape[0], -1)
    with ad.no_grad():
        out = critic.forward(flat, params).data[:, 0]
    return float(out[0]) if single else out
