"""
Federated round engine for FedMuon, LocalMuon, FedAvg and SCAFFOLD.

Main entry point:
    run(cfg, problem, rounds, metric_every=1) -> List[RoundTrace]

Example usage:
    from fedmuon.core.matlin import EUCLIDEAN_VEC
    from fedmuon.fedproto import RoundConfig, run
    from fedmuon.problems import CounterexampleProblem

    cfg = RoundConfig(n=2, S=2, K=1, eta=0.01, alpha=0.5, algorithm='localmuon',
                      norm=EUCLIDEAN_VEC, vector_rule='lmo')
    traces = run(cfg, CounterexampleProblem(a=1.0), rounds=100)
"""

from .state import (
    ALGORITHMS,
    ClientState,
    ClientUpdate,
    RoundConfig,
    ServerState,
)
from .sampling import round_rng, sample_clients
from .client import init_client, local_round_fedavg, local_round_fedmuon
from .server import init_server, server_aggregate
from .scaffold import local_round_scaffold, scaffold_aggregate
from .engine import run, spectrum_norms


__all__ = [
    # Main entry point
    'run',

    # State
    'ALGORITHMS',
    'ClientState',
    'ClientUpdate',
    'RoundConfig',
    'ServerState',

    # Sampling
    'round_rng',
    'sample_clients',

    # Clients
    'init_client',
    'local_round_fedavg',
    'local_round_fedmuon',
    'local_round_scaffold',

    # Server
    'init_server',
    'server_aggregate',
    'scaffold_aggregate',

    # Metrics
    'spectrum_norms',
]
