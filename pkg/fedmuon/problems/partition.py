import numpy as np
from scipy.stats import entropy

from fedmuon.core.errors import ConfigError


def dirichlet_partition(labels, n, beta, rng):
    """
    Split item indices among n clients with Dirichlet(beta) label proportions.

    For every label the items are shuffled and cut according to one draw
    from Dirichlet(beta * 1_n). Small beta concentrates each label on few
    clients; large beta approaches an even split. Empty shards are repaired
    by moving one item from the currently largest shard.

    Args:
        labels: 1-D array of integer labels
        n: number of clients
        beta: Dirichlet concentration, > 0
        rng: numpy Generator

    Returns:
        List of n sorted index arrays covering every item exactly once

    Raises:
        ConfigError: non-positive beta or n, or fewer items than clients
    """
    labels = np.asarray(labels)
    if not beta > 0:
        raise ConfigError(f'Dirichlet beta must be positive, got {beta}', keys=['problem.beta'])
    if n < 1:
        raise ConfigError(f'Need at least one client, got {n}', keys=['round.n'])
    if labels.size < n:
        raise ConfigError(
            f'Cannot give {n} clients at least one of {labels.size} items',
            keys=['problem.samples', 'round.n'],
        )

    shards = [[] for _ in range(n)]
    for label in np.unique(labels):
        idx = np.flatnonzero(labels == label)
        rng.shuffle(idx)

        proportions = rng.dirichlet(np.full(n, beta))
        cuts = (np.cumsum(proportions) * idx.size).astype(int)[:-1]
        for client, part in enumerate(np.split(idx, cuts)):
            shards[client].extend(part.tolist())

    for client in range(n):
        if not shards[client]:
            donor = max(range(n), key=lambda i: len(shards[i]))
            shards[client].append(shards[donor].pop())

    return [np.array(sorted(shard), dtype=np.int64) for shard in shards]


def label_entropy(labels, shards, classes):
    """Entropy (nats) of each shard's label histogram."""
    labels = np.asarray(labels)
    return np.array([
        entropy(np.bincount(labels[shard], minlength=classes)) for shard in shards
    ])
