"""
Softmax classification with one hidden tanh layer over Dirichlet-split data.

The weight matrices are routed to the matrix oracle; the bias rows are
vector layers trained by momentum SGD.
"""
import numpy as np
from scipy.special import logsumexp, softmax

from fedmuon.core.optim import LayerSpec
from fedmuon.problems.base import Heterogeneity, Problem
from fedmuon.problems.dataset import make_blobs
from fedmuon.problems.partition import dirichlet_partition


class ToyClassificationProblem(Problem):

    def __init__(self, dataset, n_clients=16, hidden=32, beta=0.1, batch=32,
                 test_fraction=0.2, seed=0, channel=None):
        super().__init__(channel)
        if hidden > 64 or dataset.features.shape[1] > 64:
            raise ValueError('Layers are limited to 64x64')

        rng = np.random.default_rng(seed)
        order = rng.permutation(dataset.labels.size)
        n_test = int(round(test_fraction * order.size))
        test, train = order[:n_test], order[n_test:]

        self.x_train = dataset.features[train]
        self.y_train = dataset.labels[train]
        self.x_test = dataset.features[test]
        self.y_test = dataset.labels[test]
        self.classes = dataset.classes
        self.batch = int(batch)
        self.seed = int(seed)

        self.n_clients = n_clients
        self.shards = dirichlet_partition(self.y_train, n_clients, beta, rng)

        features = dataset.features.shape[1]
        self.layers = {
            'w1': LayerSpec('matrix', hidden, features),
            'b1': LayerSpec('vector', 1, hidden),
            'w2': LayerSpec('matrix', self.classes, hidden),
            'b2': LayerSpec('vector', 1, self.classes),
        }

    @classmethod
    def generate(cls, samples=1200, features=16, classes=10, hidden=32, clients=16,
                 beta=0.1, batch=32, test_fraction=0.2, seed=0, channel=None):
        dataset = make_blobs(samples=samples, features=features, classes=classes, seed=seed)
        return cls(dataset, n_clients=clients, hidden=hidden, beta=beta, batch=batch,
                   test_fraction=test_fraction, seed=seed, channel=channel)

    def init_params(self):
        rng = np.random.default_rng([self.seed, 1])
        hidden, features = self.layers['w1'].shape
        return {
            'w1': rng.normal(size=(hidden, features)) / np.sqrt(features),
            'b1': np.zeros((1, hidden)),
            'w2': rng.normal(size=(self.classes, hidden)) / np.sqrt(hidden),
            'b2': np.zeros((1, self.classes)),
        }

    def _forward(self, params, x):
        hidden = np.tanh(x @ params['w1'].T + params['b1'])
        logits = hidden @ params['w2'].T + params['b2']
        return hidden, logits

    def _loss(self, params, x, y):
        _, logits = self._forward(params, x)
        picked = logits[np.arange(y.size), y]
        return float(np.mean(logsumexp(logits, axis=1) - picked))

    def _grad(self, params, x, y):
        hidden, logits = self._forward(params, x)
        dlogits = softmax(logits, axis=1)
        dlogits[np.arange(y.size), y] -= 1.0
        dlogits /= y.size

        dhidden = (dlogits @ params['w2']) * (1.0 - hidden ** 2)
        return {
            'w1': dhidden.T @ x,
            'b1': dhidden.sum(axis=0, keepdims=True),
            'w2': dlogits.T @ hidden,
            'b2': dlogits.sum(axis=0, keepdims=True),
        }

    def _shard(self, client):
        self.check_client(client)
        idx = self.shards[client]
        return self.x_train[idx], self.y_train[idx]

    def loss(self, client, params):
        return self._loss(params, *self._shard(client))

    def grad(self, client, params):
        return self._grad(params, *self._shard(client))

    def stoch_grad(self, client, params, key, channel=None):
        """Minibatch gradient on the client's shard, plus the channel's noise."""
        x, y = self._shard(client)
        channel = channel or self.channel
        if 0 < self.batch < y.size:
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, 2, client, *key]))
            pick = rng.choice(y.size, size=self.batch, replace=False)
            x, y = x[pick], y[pick]
        return channel.perturb(self._grad(params, x, y), (client, *key))

    def accuracy(self, params):
        if self.y_test.size == 0:
            return None
        _, logits = self._forward(params, self.x_test)
        return float(np.mean(np.argmax(logits, axis=1) == self.y_test))

    def heterogeneity(self, params=None):
        """No closed-form optimum: report the gradient dispersion at `params` as a proxy."""
        params = self.init_params() if params is None else params
        return Heterogeneity(self.dispersion(params), proxy=True)
