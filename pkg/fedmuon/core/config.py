"""
Experiment configuration.

Configs are TOML files merged table by table over the packaged
`fedmuon/config/defaults.toml`. Validation runs in full before anything is
computed or written; every offending key is collected into one ConfigError.
"""
import importlib.resources
import os
import tomllib
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

from fedmuon.core.errors import ConfigError, UnsupportedNormError
from fedmuon.core.lmo import NsConfig
from fedmuon.core.matlin import NormKind
from fedmuon.fedproto.state import RoundConfig

WORKERS_ENV = 'FEDMUON_WORKERS'

PROBLEM_KINDS = ('counterexample', 'quadratic', 'classification')
ORACLES = ('exact', 'newton_schulz')

# Keys that may appear without a default
OPTIONAL_KEYS = {
    'problem': {'x0': float, 'dataset': str},
}

# Round keys consumed by the config layer instead of RoundConfig itself
ROUND_META_KEYS = ('oracle', 'ns_steps', 'ns_coefficients', 'norm')


@dataclass(frozen=True)
class ExperimentConfig:
    problem: dict
    round: RoundConfig
    rounds: int
    metric_every: int = 1
    seeds: list = field(default_factory=lambda: [0])
    wallclock: bool = False
    workers: int = 1
    grid: dict = field(default_factory=dict)
    out_dir: Path = Path('runs')

    def for_seed(self, seed):
        return replace(self, round=replace(self.round, seed=seed), seeds=[seed])


@lru_cache(maxsize=1)
def load_defaults():
    with importlib.resources.files('fedmuon.config').joinpath('defaults.toml')\
            .open('rb') as file:
        return tomllib.load(file)


def read_toml(path):
    try:
        with open(path, 'rb') as f:
            return tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: '{path}'", keys=['<file>'])
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Invalid TOML in '{path}': {e}", keys=['<file>'])


def _type_ok(value, expected):
    if expected is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if expected is int:
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, expected)


def merge_config(user, defaults=None):
    """
    Merge a parsed user table over the defaults.

    Returns:
        (merged dict, list of (key, message) problems)
    """
    defaults = load_defaults() if defaults is None else defaults
    problems = []
    merged = {}

    for table in user:
        if table not in defaults:
            problems.append((table, f"unknown table '[{table}]'"))
        elif not isinstance(user[table], dict):
            problems.append((table, f"'{table}' must be a table"))

    for table, table_defaults in defaults.items():
        section = dict(table_defaults)
        given = user.get(table, {})
        if not isinstance(given, dict):
            merged[table] = section
            continue

        optional = OPTIONAL_KEYS.get(table, {})
        for key, value in given.items():
            name = f'{table}.{key}'
            if key in table_defaults:
                expected = type(table_defaults[key])
            elif key in optional:
                expected = optional[key]
            else:
                problems.append((name, f"unknown key '{name}'"))
                continue

            if not _type_ok(value, expected):
                problems.append((name, f"'{name}' must be of type {expected.__name__}"))
                continue
            if expected is list:
                default_items = table_defaults.get(key) or [0.0]
                item_type = float if isinstance(default_items[0], float) else type(default_items[0])
                if not all(_type_ok(item, item_type) for item in value):
                    problems.append((name, f"'{name}' items must be of type {item_type.__name__}"))
                    continue
            section[key] = float(value) if expected is float else value
        merged[table] = section

    return merged, problems


def _ns_config(rnd, problems):
    if rnd['oracle'] not in ORACLES:
        problems.append(('round.oracle', f"oracle must be one of {', '.join(ORACLES)}"))
        return None
    if rnd['oracle'] == 'exact':
        return None

    coefficients = rnd['ns_coefficients']
    if len(coefficients) != 3:
        problems.append(('round.ns_coefficients', 'ns_coefficients needs exactly three values'))
        return None
    try:
        return NsConfig(*(float(c) for c in coefficients), steps=rnd['ns_steps'])
    except ConfigError as e:
        problems.append(('round.ns_steps', str(e)))
        return None


def _check_problem(problem, rnd, problems):
    kind = problem['kind']
    if kind not in PROBLEM_KINDS:
        problems.append(('problem.kind', f"kind must be one of {', '.join(PROBLEM_KINDS)}"))
        return

    if problem['sigma'] < 0:
        problems.append(('problem.sigma', 'sigma must be non-negative'))

    if kind == 'counterexample':
        if not problem['a'] > 0:
            problems.append(('problem.a', 'a must be positive'))
        if rnd['n'] != 2:
            problems.append(('round.n', 'the counterexample has exactly n = 2 clients'))
    elif kind == 'quadratic':
        for key in ('d1', 'd2', 'k'):
            if problem[key] < 1:
                problems.append((f'problem.{key}', f'{key} must be >= 1'))
        if problem['low_rank'] < 0:
            problems.append(('problem.low_rank', 'low_rank must be >= 0'))
    else:
        for key in ('samples', 'features', 'classes', 'hidden'):
            if problem[key] < 1:
                problems.append((f'problem.{key}', f'{key} must be >= 1'))
        if problem['features'] > 64 or problem['hidden'] > 64:
            problems.append(('problem.hidden', 'layers are limited to 64x64'))
        if not problem['beta'] > 0:
            problems.append(('problem.beta', 'beta must be positive'))
        if not 0 <= problem['test_fraction'] < 1:
            problems.append(('problem.test_fraction', 'test_fraction must lie in [0, 1)'))
        if problem['batch'] < 0:
            problems.append(('problem.batch', 'batch must be >= 0 (0 = full shard)'))


def build_config(user, seed=None, out=None, workers=None, env=None):
    """
    Validate a parsed user table and build the ExperimentConfig.

    Command-line overrides win over the environment, which wins over the file.

    Raises:
        ConfigError: listing every offending key
    """
    env = os.environ if env is None else env
    merged, problems = merge_config(user)
    problem, rnd, exp = merged['problem'], merged['round'], merged['experiment']

    _check_problem(problem, rnd, problems)
    ns = _ns_config(rnd, problems)

    try:
        norm = NormKind.parse(rnd['norm'])
    except UnsupportedNormError as e:
        problems.append(('round.norm', str(e)))
        norm = None

    if exp['rounds'] < 1:
        problems.append(('experiment.rounds', 'rounds must be >= 1'))
    if exp['metric_every'] < 1:
        problems.append(('experiment.metric_every', 'metric_every must be >= 1'))
    if not exp['seeds']:
        problems.append(('experiment.seeds', 'seeds must not be empty'))

    if workers is None and env.get(WORKERS_ENV):
        try:
            workers = int(env[WORKERS_ENV])
        except ValueError:
            problems.append((WORKERS_ENV, f'{WORKERS_ENV} must be an integer'))
    workers = exp['workers'] if workers is None else workers
    if workers < 1:
        problems.append(('experiment.workers', 'workers must be >= 1'))

    seeds = [seed] if seed is not None else list(exp['seeds'])
    round_cfg = None
    if norm is not None:
        fields_ = {k: v for k, v in rnd.items() if k not in ROUND_META_KEYS}
        try:
            round_cfg = RoundConfig(norm=norm, ns=ns, seed=seeds[0] if seeds else 0, **fields_)
        except ConfigError as e:
            problems.extend((key, str(e)) for key in e.keys)

    if problems:
        keys = list(dict.fromkeys(key for key, _ in problems))
        details = '; '.join(dict.fromkeys(message for _, message in problems))
        raise ConfigError(f'Invalid configuration ({", ".join(keys)}): {details}', keys=keys)

    return ExperimentConfig(
        problem=problem,
        round=round_cfg,
        rounds=exp['rounds'],
        metric_every=exp['metric_every'],
        seeds=seeds,
        wallclock=exp['wallclock'],
        workers=workers,
        grid=merged['grid'],
        out_dir=Path(out) if out is not None else Path(merged['output']['dir']),
    )


def load_config(path, seed=None, out=None, workers=None, env=None):
    return build_config(read_toml(path), seed=seed, out=out, workers=workers, env=env)


def check_grid(config):
    """Raises ConfigError unless every grid list is non-empty."""
    empty = [f'grid.{key}' for key, values in config.grid.items() if not values]
    if empty:
        raise ConfigError(f'Grid lists must not be empty: {", ".join(empty)}', keys=empty)
