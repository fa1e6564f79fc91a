import numpy as np

from fedmuon.core.errors import ConfigError

# Stream tag separating client sampling from gradient noise draws
SAMPLING_STREAM = 0x5A3


def round_rng(seed, round_index):
    return np.random.default_rng(np.random.SeedSequence([seed, SAMPLING_STREAM, round_index]))


def sample_clients(n, S, rng):
    """
    Uniform size-S subset of range(n) without replacement, in increasing order.

    The first S positions of a seeded partial Fisher-Yates shuffle.
    """
    if not 1 <= S <= n:
        raise ConfigError(f'Cannot sample S={S} of n={n} clients', keys=['round.S'])

    ids = list(range(n))
    for i in range(S):
        j = int(rng.integers(i, n))
        ids[i], ids[j] = ids[j], ids[i]
    return sorted(ids[:S])
