"""
Linear minimization oracles.

lmo(G) is the minimizer of <G, D> over the unit ball of a norm. For the
spectral norm it is the negated polar factor -U V^T; the Newton-Schulz
iteration approximates it with matrix products only.

All oracles map the zero matrix to the zero matrix.
"""
import math
from dataclasses import dataclass

import numpy as np

from fedmuon.core.errors import ConfigError, UndefinedOracleError, UnsupportedNormError
from fedmuon.core.matlin import (
    as_mat,
    check_same_shape,
    nonzero_singular_values,
    svd,
)

ANALYZED_COEFFICIENTS = (15 / 8, -5 / 4, 3 / 8)

# Quintic tuned for speed rather than accuracy; no sandwich guarantee
QUINTIC_COEFFICIENTS = (3.4445, -4.7750, 2.0315)


@dataclass(frozen=True)
class NsConfig:
    a: float = ANALYZED_COEFFICIENTS[0]
    b: float = ANALYZED_COEFFICIENTS[1]
    c: float = ANALYZED_COEFFICIENTS[2]
    steps: int = 5

    def __post_init__(self):
        if not isinstance(self.steps, int) or self.steps < 0:
            raise ConfigError(
                f'Newton-Schulz steps must be a non-negative integer, got {self.steps!r}',
                keys=['round.ns_steps'],
            )

    @property
    def coefficients(self):
        return (self.a, self.b, self.c)

    @property
    def is_analyzed(self):
        return self.coefficients == ANALYZED_COEFFICIENTS


@dataclass(frozen=True)
class EffectiveP:
    kappa: float
    p: float


def _normalized(g):
    return g / np.linalg.norm(g)


def lmo_exact(g, kind):
    """
    Exact oracle for the spectral, Frobenius and Euclidean-vector unit balls.

    Returns D with ||D|| <= 1 and <g, D> = -||g||_dual.

    Raises:
        UnsupportedNormError: trace and general Schatten balls
    """
    g = as_mat(g, 'g')

    if kind.tag == 'euclidean_vec' and g.shape[0] != 1 and g.shape[1] != 1:
        raise UnsupportedNormError(
            f'Euclidean vector oracle needs a row or column, got shape {g.shape}'
        )
    if kind.tag not in ('spectral', 'frobenius', 'euclidean_vec'):
        raise UnsupportedNormError(f"No exact oracle for the '{kind}' unit ball")

    if not np.any(g):
        return np.zeros_like(g)

    if kind.tag == 'spectral':
        result = svd(g)
        rank = nonzero_singular_values(result.s).size
        return -(result.u[:, :rank] @ result.vt[:rank, :])

    return -_normalized(g)


def ns_polynomial(x, coefficients=ANALYZED_COEFFICIENTS):
    """phi(x) = a x + b x^3 + c x^5, the map one iteration applies to each singular value."""
    a, b, c = coefficients
    x = np.asarray(x, dtype=np.float64)
    return a * x + b * x ** 3 + c * x ** 5


def lmo_newton_schulz(g, cfg):
    """
    Inexact spectral oracle: run `cfg.steps` Newton-Schulz iterations on
    g / ||g||_F and return the negated iterate.

    With zero steps this is the normalized gradient -g / ||g||_F. The Gram
    product is formed on the smaller side (transpose when rows > cols).
    """
    g = as_mat(g, 'g')
    if not np.any(g):
        return np.zeros_like(g)

    transposed = g.shape[0] > g.shape[1]
    x = _normalized(g.T if transposed else g)

    for _ in range(cfg.steps):
        gram = x @ x.T
        poly = cfg.b * gram + cfg.c * (gram @ gram)
        x = cfg.a * x + poly @ x

    return -(x.T if transposed else x)


def kappa(singular_values):
    """Smallest nonzero singular value over the Frobenius norm of the nonzero spectrum."""
    s = nonzero_singular_values(singular_values)
    if s.size == 0:
        raise UndefinedOracleError('Effective p is undefined for an all-zero spectrum')
    return float(s.min() / math.sqrt(float(np.sum(s ** 2))))


def effective_p_from_kappa(kappa_value, steps):
    """
    p = 1 + log(1 - (1 - kappa)^(1.5^T)) / log(kappa), clamped to [1, 2].

    T = 0 gives exactly 2. kappa = 1 (a single nonzero singular value) is the
    limit: 2 for T = 0 and 1 otherwise.
    """
    if steps == 0:
        return 2.0
    if kappa_value >= 1.0:
        return 1.0

    residual = (1.0 - kappa_value) ** (1.5 ** steps)
    p = 1.0 + math.log1p(-residual) / math.log(kappa_value)
    return min(2.0, max(1.0, p))


def effective_p(singular_values, steps):
    k = kappa(singular_values)
    return EffectiveP(kappa=k, p=effective_p_from_kappa(k, steps))


def lmo(g, kind, ns=None):
    """Dispatch to the Newton-Schulz oracle when `ns` is given, else the exact one."""
    if ns is None:
        return lmo_exact(g, kind)
    if kind.tag != 'spectral':
        raise UnsupportedNormError(
            f"Newton-Schulz approximates the spectral oracle, not '{kind}'"
        )
    return lmo_newton_schulz(g, ns)


def lmo_bias_witness(ms, kind):
    """
    Return (mean of lmo over members, lmo of the mean).

    The two differ in general: averaging after the oracle is not the oracle
    of the average.
    """
    if len(ms) < 2:
        raise ValueError(f'Need at least 2 matrices, got {len(ms)}')

    mats = [as_mat(m, 'm') for m in ms]
    for m in mats[1:]:
        check_same_shape(mats[0], m)

    mean_of_lmo = sum(lmo_exact(m, kind) for m in mats) / len(mats)
    lmo_of_mean = lmo_exact(sum(mats) / len(mats), kind)
    return mean_of_lmo, lmo_of_mean
