"""
Round configuration and the state carried by clients and the server.

The message boundary is explicit: the server sends (X, C) to sampled
clients, and each client answers with a ClientUpdate holding its parameter
displacement and its new control variate.
"""
from dataclasses import dataclass, field

from fedmuon.core.errors import ConfigError
from fedmuon.core.lmo import NsConfig
from fedmuon.core.matlin import SPECTRAL, NormKind
from fedmuon.core.optim import SCALING_RULES

ALGORITHMS = ('fedmuon', 'localmuon', 'fedavg', 'scaffold')
DIRECTIONS = ('lmo', 'identity')
VECTOR_RULES = ('lmo', 'sgd')
LOCAL_OPTIMIZERS = ('sgd', 'momentum', 'adam')
MOMENTUM_INITS = ('zero', 'grad')
CONTROL_UPDATES = ('last', 'mean')


@dataclass(frozen=True)
class RoundConfig:
    n: int = 16
    S: int = 8
    K: int = 5
    eta: float = 0.001
    eta_vector: float = 0.01
    alpha: float = 0.5
    algorithm: str = 'fedmuon'
    norm: NormKind = SPECTRAL
    ns: NsConfig | None = None
    direction: str = 'lmo'
    vector_rule: str = 'sgd'
    scaling: str = 'sqrt_max'
    local_optimizer: str = 'sgd'
    momentum_init: str = 'zero'
    control_update: str = 'last'
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        errors = []

        def check(ok, key, message):
            if not ok:
                errors.append((key, message))

        check(isinstance(self.n, int) and self.n >= 1, 'round.n', f'n must be >= 1, got {self.n!r}')
        check(isinstance(self.S, int) and 1 <= self.S <= max(self.n, 1), 'round.S',
              f'S must satisfy 1 <= S <= n, got S={self.S!r}, n={self.n!r}')
        check(isinstance(self.K, int) and self.K >= 1, 'round.K', f'K must be >= 1, got {self.K!r}')
        check(self.eta > 0, 'round.eta', f'eta must be positive, got {self.eta!r}')
        check(self.eta_vector > 0, 'round.eta_vector',
              f'eta_vector must be positive, got {self.eta_vector!r}')
        check(0 < self.alpha <= 1, 'round.alpha', f'alpha must lie in (0, 1], got {self.alpha!r}')
        check(self.algorithm in ALGORITHMS, 'round.algorithm',
              f"algorithm must be one of {', '.join(ALGORITHMS)}, got '{self.algorithm}'")
        check(self.direction in DIRECTIONS, 'round.direction',
              f"direction must be one of {', '.join(DIRECTIONS)}, got '{self.direction}'")
        check(self.vector_rule in VECTOR_RULES, 'round.vector_rule',
              f"vector_rule must be one of {', '.join(VECTOR_RULES)}, got '{self.vector_rule}'")
        check(self.scaling in SCALING_RULES, 'round.scaling',
              f"scaling must be one of {', '.join(SCALING_RULES)}, got '{self.scaling}'")
        check(self.local_optimizer in LOCAL_OPTIMIZERS, 'round.local_optimizer',
              f"local_optimizer must be one of {', '.join(LOCAL_OPTIMIZERS)}, "
              f"got '{self.local_optimizer}'")
        check(self.momentum_init in MOMENTUM_INITS, 'round.momentum_init',
              f"momentum_init must be one of {', '.join(MOMENTUM_INITS)}, got '{self.momentum_init}'")
        check(self.control_update in CONTROL_UPDATES, 'round.control_update',
              f"control_update must be one of {', '.join(CONTROL_UPDATES)}, "
              f"got '{self.control_update}'")
        check(self.norm.tag in ('spectral', 'frobenius', 'euclidean_vec'), 'round.norm',
              f"No oracle for the '{self.norm}' unit ball")
        check(self.ns is None or self.norm.tag == 'spectral', 'round.oracle',
              'Newton-Schulz oracle requires the spectral norm')
        check(isinstance(self.workers, int) and self.workers >= 1, 'round.workers',
              f'workers must be >= 1, got {self.workers!r}')

        if errors:
            keys = [key for key, _ in errors]
            details = '; '.join(message for _, message in errors)
            raise ConfigError(f'Invalid round configuration: {details}', keys=keys)

    @property
    def uses_control_variates(self):
        return self.algorithm in ('fedmuon', 'scaffold')

    @property
    def p_hat_fixed(self):
        """Schatten exponent for metrics when it does not depend on kappa."""
        if self.algorithm in ('fedavg', 'scaffold') or self.direction == 'identity':
            return 2.0
        if self.norm.tag != 'spectral':
            return 2.0
        return 1.0 if self.ns is None else None


@dataclass(frozen=True)
class ClientState:
    """Per-client parameter, momentum, control variate and local optimizer state."""
    id: int
    x: dict
    m: dict
    c: dict
    opt: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ClientUpdate:
    """
    What a sampled client sends back: the displacement X_i(r, K) - X(r), the
    new control variate, and the displacement after each local step for
    metrics.
    """
    id: int
    delta: dict
    c_new: dict
    path: tuple = ()
    kappa: float = 1.0


@dataclass(frozen=True)
class ServerState:
    x: dict
    c: dict
    c_registry: dict
    round: int = 0
