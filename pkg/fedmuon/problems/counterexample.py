"""
Two scalar clients on which local oracle steps cancel exactly.

f_0(x) = x^2 / 2 and f_1(x) = (x + a)^2 / 2. From x = -a/4 with zero momentum
the two normalized momenta point in opposite directions every round, so plain
local averaging never moves while the optimum sits at -a/2.
"""
import math

import numpy as np

from fedmuon.core.optim import LayerSpec
from fedmuon.problems.base import Heterogeneity, Problem


class CounterexampleProblem(Problem):
    n_clients = 2
    layers = {'x': LayerSpec('scalar', 1, 1)}

    def __init__(self, a=1.0, x0=None, channel=None):
        super().__init__(channel)
        if not a > 0:
            raise ValueError(f'Offset a must be positive, got {a}')
        self.a = float(a)
        self.x0 = -self.a / 4 if x0 is None else float(x0)

    def init_params(self):
        return {'x': np.array([[self.x0]])}

    def _offset(self, client):
        self.check_client(client)
        return 0.0 if client == 0 else self.a

    def loss(self, client, params):
        offset = self._offset(client)
        x = float(params['x'][0, 0])
        return (x + offset) ** 2 / 2

    def grad(self, client, params):
        offset = self._offset(client)
        return {'x': params['x'] + offset}

    @property
    def minimizer(self):
        return -self.a / 2

    @property
    def floor(self):
        """Squared gradient norm at the stagnation point: a^2 / 16."""
        return self.a ** 2 / 16

    def heterogeneity(self, params=None):
        x_star = {'x': np.array([[self.minimizer]])}
        total = sum(
            float(np.sum(self.grad(i, x_star)['x'] ** 2)) for i in range(self.n_clients)
        )
        return Heterogeneity(math.sqrt(total / self.n_clients))
