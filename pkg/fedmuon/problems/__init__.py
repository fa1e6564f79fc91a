"""
Objective suite with exact loss/gradient oracles and a seeded noise channel.

Main entry point:
    build_problem(problem_config, n_clients, seed) -> Problem

Example usage:
    from fedmuon.problems import CounterexampleProblem

    problem = CounterexampleProblem(a=1.0)
    problem.grad(1, problem.init_params())   # {'x': array([[0.75]])}
"""

from fedmuon.core.errors import ConfigError

from .base import Heterogeneity, NoiseChannel, Problem
from .counterexample import CounterexampleProblem
from .quadratic import MatrixQuadraticProblem
from .classification import ToyClassificationProblem
from .partition import dirichlet_partition, label_entropy
from .dataset import Dataset, load_dataset, make_blobs, save_dataset


def build_problem(cfg, n_clients, seed=0):
    """Instantiate the problem described by the validated [problem] table."""
    channel = NoiseChannel(cfg.get('sigma', 0.0), seed=seed)
    kind = cfg['kind']

    if kind == 'counterexample':
        return CounterexampleProblem(a=cfg['a'], x0=cfg.get('x0'), channel=channel)

    if kind == 'quadratic':
        return MatrixQuadraticProblem.generate(
            clients=n_clients,
            d1=cfg['d1'],
            d2=cfg['d2'],
            k=cfg['k'],
            heterogeneity=cfg['heterogeneity'],
            low_rank=cfg['low_rank'],
            seed=cfg['data_seed'],
            channel=channel,
        )

    if kind == 'classification':
        if cfg.get('dataset'):
            try:
                dataset = load_dataset(cfg['dataset'])
            except ValueError as e:
                raise ConfigError(str(e), keys=['problem.dataset'])
        else:
            dataset = make_blobs(
                samples=cfg['samples'],
                features=cfg['features'],
                classes=cfg['classes'],
                seed=cfg['data_seed'],
            )
        return ToyClassificationProblem(
            dataset,
            n_clients=n_clients,
            hidden=cfg['hidden'],
            beta=cfg['beta'],
            batch=cfg['batch'],
            test_fraction=cfg['test_fraction'],
            seed=cfg['data_seed'],
            channel=channel,
        )

    raise ValueError(f"Unknown problem kind: '{kind}'")


__all__ = [
    'build_problem',
    'Heterogeneity',
    'NoiseChannel',
    'Problem',
    'CounterexampleProblem',
    'MatrixQuadraticProblem',
    'ToyClassificationProblem',
    'dirichlet_partition',
    'label_entropy',
    'Dataset',
    'load_dataset',
    'make_blobs',
    'save_dataset',
]
