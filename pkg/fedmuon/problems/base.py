"""
Shared problem interface and the stochastic-gradient noise channel.

A problem owns n clients, each with a loss f_i over a layered parameter.
Gradients are exact; `stoch_grad` adds a draw from the problem's channel
keyed by (client, round, step) so every evaluation is reproducible no matter
which thread runs it.
"""
import math
from dataclasses import dataclass

import numpy as np

from fedmuon.core import params as P


@dataclass(frozen=True)
class Heterogeneity:
    """zeta at the optimum, or a gradient-dispersion proxy when `proxy` is set."""
    value: float
    proxy: bool = False


class NoiseChannel:
    """
    Zero-mean Gaussian noise with E||noise||_F^2 = sigma^2.

    Each entry has variance sigma^2 / (number of entries).
    """

    def __init__(self, sigma=0.0, seed=0):
        if sigma < 0:
            raise ValueError(f'Noise level must be non-negative, got {sigma}')
        self.sigma = float(sigma)
        self.seed = int(seed)

    def rng(self, key):
        return np.random.default_rng(np.random.SeedSequence([self.seed, *key]))

    def sample(self, shape, key, size=None):
        entries = math.prod(shape)
        std = self.sigma / math.sqrt(entries)
        out_shape = tuple(shape) if size is None else (size, *shape)
        return self.rng(key).normal(0.0, std, size=out_shape)

    def perturb(self, grad, key):
        """Add one draw to a layered gradient; the budget sigma^2 is shared by all layers."""
        if self.sigma == 0:
            return grad

        entries = sum(value.size for value in grad.values())
        flat = self.sample((entries,), key)
        out, offset = {}, 0
        for name, value in grad.items():
            out[name] = value + flat[offset:offset + value.size].reshape(value.shape)
            offset += value.size
        return out


class Problem:
    """Base class; subclasses set `layers`, `n_clients` and implement the oracles."""

    layers = {}
    n_clients = 0

    def __init__(self, channel=None):
        self.channel = channel or NoiseChannel()

    def check_client(self, client):
        if not 0 <= client < self.n_clients:
            raise KeyError(f'Unknown client id {client}; expected 0..{self.n_clients - 1}')

    def init_params(self):
        raise NotImplementedError

    def loss(self, client, params):
        raise NotImplementedError

    def grad(self, client, params):
        raise NotImplementedError

    def stoch_grad(self, client, params, key, channel=None):
        """Exact gradient plus one noise draw keyed by (client, *key)."""
        channel = channel or self.channel
        return channel.perturb(self.grad(client, params), (client, *key))

    def global_loss(self, params):
        return sum(self.loss(i, params) for i in range(self.n_clients)) / self.n_clients

    def global_grad(self, params):
        return P.mean(self.grad(i, params) for i in range(self.n_clients))

    def heterogeneity(self, params=None):
        raise NotImplementedError

    def dispersion(self, params):
        """sqrt((1/n) sum_i ||grad f_i - grad f||_F^2) at `params`."""
        full = self.global_grad(params)
        total = sum(
            P.distance(self.grad(i, params), full) ** 2 for i in range(self.n_clients)
        )
        return math.sqrt(total / self.n_clients)

    def accuracy(self, params):
        return None

    @property
    def rho(self):
        """sup ||X||_trace / ||X||_F over the parameter space."""
        return P.rank_bound(self.init_params())
