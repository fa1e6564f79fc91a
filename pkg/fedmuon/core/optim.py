"""
Local optimizer state machines.

States are frozen dataclasses; every step returns a new state instead of
mutating the old one, so client loops can run side by side.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from fedmuon.core.errors import ConfigError
from fedmuon.core.lmo import lmo
from fedmuon.core.matlin import as_mat, check_same_shape

ROLES = ('matrix', 'vector', 'scalar')

SCALING_RULES = ('sqrt_max', 'none')


@dataclass(frozen=True)
class LayerSpec:
    role: str
    rows: int
    cols: int

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigError(f"Unknown layer role: '{self.role}'", keys=['role'])
        if self.role == 'scalar' and (self.rows, self.cols) != (1, 1):
            raise ConfigError(f'Scalar layer must be 1x1, got {self.rows}x{self.cols}')
        if self.role == 'vector' and 1 not in (self.rows, self.cols):
            raise ConfigError(f'Vector layer must be a row or column, got {self.rows}x{self.cols}')

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def is_matrix(self):
        return self.role == 'matrix'


@dataclass(frozen=True)
class MomentumState:
    """Exponential moving average of stochastic gradients."""
    m: np.ndarray
    alpha: float


@dataclass(frozen=True)
class HeavyBallState:
    buf: np.ndarray
    momentum: float = 0.9


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0


def momentum_state(shape, alpha, init=None):
    m = np.zeros(shape) if init is None else as_mat(init).copy()
    return MomentumState(m=m, alpha=alpha)


def momentum_update(state, grad):
    """m' = (1 - alpha) m + alpha grad."""
    grad = as_mat(grad, 'grad')
    check_same_shape(state.m, grad)
    return replace(state, m=(1 - state.alpha) * state.m + state.alpha * grad)


def identity_direction(g):
    """The direction map with the oracle removed: plain negative (corrected) gradient."""
    return -as_mat(g, 'g')


def muon_corrected_direction(m, c_local, c_global, kind, ns=None):
    """lmo(m - c_local + c_global); exact oracle unless a Newton-Schulz config is given."""
    m = as_mat(m, 'm')
    c_local = as_mat(c_local, 'c_local')
    c_global = as_mat(c_global, 'c_global')
    check_same_shape(m, c_local)
    check_same_shape(m, c_global)
    return lmo(m - c_local + c_global, kind, ns)


def heavy_ball_state(shape, momentum=0.9):
    return HeavyBallState(buf=np.zeros(shape), momentum=momentum)


def sgd_momentum_step(state, param, grad, eta):
    """Heavy-ball step: buf' = mu buf + grad, param' = param - eta buf'."""
    param = as_mat(param, 'param')
    grad = as_mat(grad, 'grad')
    check_same_shape(param, grad)
    check_same_shape(state.buf, grad)

    buf = state.momentum * state.buf + grad
    return replace(state, buf=buf), param - eta * buf


def adam_state(shape, beta1=0.9, beta2=0.999, eps=1e-8):
    return AdamState(m=np.zeros(shape), v=np.zeros(shape), beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state, param, grad, eta):
    """Bias-corrected Adam step."""
    param = as_mat(param, 'param')
    grad = as_mat(grad, 'grad')
    check_same_shape(param, grad)
    check_same_shape(state.m, grad)

    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grad
    v = state.beta2 * state.v + (1 - state.beta2) * grad ** 2
    m_hat = m / (1 - state.beta1 ** t)
    v_hat = v / (1 - state.beta2 ** t)

    step = eta * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, t=t), param - step


def per_layer_stepsize(eta, spec, scaling='sqrt_max'):
    """
    Scale the stepsize of matrix layers by sqrt(max(rows, cols)).

    Vector and scalar layers keep `eta`. `scaling='none'` disables the rule.
    """
    if not eta > 0:
        raise ConfigError(f'Stepsize must be positive, got {eta}', keys=['round.eta'])
    if scaling not in SCALING_RULES:
        raise ConfigError(f"Unknown scaling rule: '{scaling}'", keys=['round.scaling'])

    if spec.is_matrix and scaling == 'sqrt_max':
        return eta * math.sqrt(max(spec.rows, spec.cols))
    return eta
