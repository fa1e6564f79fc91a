"""
Matrix least-squares clients: f_i(X) = 1/2 ||A_i X - B_i||_F^2.

Every client's targets are B_i = A_i (X_c + h Delta_i), so client i is
minimized at X_c + h Delta_i and the knob h controls how far apart the
client minimizers are. h = 0 gives a shared stationary point.
"""
import math

import numpy as np
from scipy import linalg

from fedmuon.core.matlin import as_mat, svd
from fedmuon.core.optim import LayerSpec
from fedmuon.problems.base import Heterogeneity, Problem


class MatrixQuadraticProblem(Problem):

    def __init__(self, a_mats, b_mats, channel=None):
        super().__init__(channel)
        if len(a_mats) != len(b_mats) or not a_mats:
            raise ValueError('Need one B_i per A_i and at least one client')

        self.a_mats = [as_mat(a, 'A_i') for a in a_mats]
        self.b_mats = [as_mat(b, 'B_i') for b in b_mats]
        d1 = self.a_mats[0].shape[1]
        d2 = self.b_mats[0].shape[1]
        for a, b in zip(self.a_mats, self.b_mats):
            if a.shape[1] != d1 or b.shape != (a.shape[0], d2):
                raise ValueError(f'Inconsistent client shapes: A {a.shape}, B {b.shape}')

        self.d1, self.d2 = d1, d2
        self.n_clients = len(self.a_mats)
        self.layers = {'x': LayerSpec('matrix', d1, d2)}

    @classmethod
    def generate(cls, clients=8, d1=8, d2=6, k=16, heterogeneity=1.0,
                 low_rank=0, seed=0, center=True, channel=None):
        """
        Random instance.

        low_rank > 0 gives each A_i that many dominant singular values with the
        rest damped by 1e-2, so the Hessians are approximately low rank.
        center=False draws a random shared component X_c instead of zero.
        """
        rng = np.random.default_rng(seed)
        x_common = np.zeros((d1, d2)) if center else rng.normal(size=(d1, d2))

        a_mats, b_mats = [], []
        for _ in range(clients):
            a = rng.normal(size=(k, d1)) / math.sqrt(k)
            if low_rank:
                u, s, vt = np.linalg.svd(a, full_matrices=False)
                s[low_rank:] *= 1e-2
                a = (u * s) @ vt
            delta = rng.normal(size=(d1, d2))
            a_mats.append(a)
            b_mats.append(a @ (x_common + heterogeneity * delta))

        return cls(a_mats, b_mats, channel=channel)

    def init_params(self):
        return {'x': np.zeros((self.d1, self.d2))}

    def _residual(self, client, params):
        self.check_client(client)
        return self.a_mats[client] @ params['x'] - self.b_mats[client]

    def loss(self, client, params):
        return 0.5 * float(np.sum(self._residual(client, params) ** 2))

    def grad(self, client, params):
        return {'x': self.a_mats[client].T @ self._residual(client, params)}

    def client_minimizer(self, client):
        self.check_client(client)
        return linalg.lstsq(self.a_mats[client], self.b_mats[client])[0]

    def minimizer(self):
        """Least-squares solution of the stacked system: the minimizer of f."""
        a = np.vstack(self.a_mats)
        b = np.vstack(self.b_mats)
        return linalg.lstsq(a, b)[0]

    @property
    def smoothness(self):
        """L = max_i s_1(A_i)^2 in Frobenius geometry."""
        return max(float(svd(a).s[0]) ** 2 for a in self.a_mats)

    @property
    def smoothness_trace_spectral(self):
        """
        Sufficient constant for ||grad(X) - grad(Y)||_trace <= L ||X - Y||_sp.

        ||A^T A Z||_trace <= s_1(A)^2 ||Z||_trace <= s_1(A)^2 min(d1, d2) ||Z||_sp.
        """
        return min(self.d1, self.d2) * self.smoothness

    def heterogeneity(self, params=None):
        x_star = {'x': self.minimizer()}
        total = sum(
            float(np.sum(self.grad(i, x_star)['x'] ** 2)) for i in range(self.n_clients)
        )
        return Heterogeneity(math.sqrt(total / self.n_clients))
