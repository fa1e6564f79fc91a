"""
Dense matrix helpers: validation, inner product, SVD and the norms used
throughout the package.

A matrix is a 2-D float64 numpy array. Every public function validates its
input with `as_mat` and returns finite values.
"""
import math
from dataclasses import dataclass

import numpy as np

from fedmuon.core.errors import DimensionError, NumericalError, UnsupportedNormError

# Relative cutoff below which a singular value counts as zero
ZERO_THRESHOLD = 1e-12

SVD_TOLERANCE = 1e-8


@dataclass(frozen=True)
class NormKind:
    """Tagged norm selector: frobenius, spectral, trace, schatten(p) or euclidean_vec."""
    tag: str
    p: float | None = None

    TAGS = ('frobenius', 'spectral', 'trace', 'schatten', 'euclidean_vec')

    def __post_init__(self):
        if self.tag not in self.TAGS:
            raise UnsupportedNormError(f"Unknown norm kind: '{self.tag}'")
        if self.tag == 'schatten':
            if self.p is None or not self.p >= 1:
                raise UnsupportedNormError(
                    f"Schatten parameter must be >= 1, got {self.p}"
                )
        elif self.p is not None:
            raise UnsupportedNormError(f"Norm '{self.tag}' takes no parameter")

    @classmethod
    def schatten(cls, p):
        return cls('schatten', float(p))

    @classmethod
    def parse(cls, text):
        """
        Read the config spelling of a norm.

        Examples:
            >>> NormKind.parse('spectral')
            NormKind(tag='spectral', p=None)
            >>> NormKind.parse('schatten:3')
            NormKind(tag='schatten', p=3.0)
        """
        text = text.strip().lower()
        if text.startswith('schatten'):
            _, _, value = text.partition(':')
            try:
                return cls.schatten(float(value))
            except ValueError:
                raise UnsupportedNormError(
                    f"Invalid Schatten norm '{text}'. Expected 'schatten:P'"
                )
        return cls(text)

    def __str__(self):
        return f'schatten:{self.p:g}' if self.tag == 'schatten' else self.tag


FROBENIUS = NormKind('frobenius')
SPECTRAL = NormKind('spectral')
TRACE = NormKind('trace')
EUCLIDEAN_VEC = NormKind('euclidean_vec')


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray


def as_mat(a, name='matrix'):
    """Coerce to a finite 2-D float64 array or raise."""
    mat = np.asarray(a, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
        raise DimensionError(f'{name} must be a non-empty 2-D matrix, got shape {mat.shape}')
    if not np.all(np.isfinite(mat)):
        raise NumericalError(f'{name} contains non-finite entries')
    return mat


def check_same_shape(a, b):
    if a.shape != b.shape:
        raise DimensionError(f'Shape mismatch: {a.shape} vs {b.shape}')


def inner(a, b):
    """Frobenius inner product: the sum of elementwise products."""
    a = as_mat(a, 'a')
    b = as_mat(b, 'b')
    check_same_shape(a, b)
    return float(np.sum(a * b))


def svd(a):
    """
    Compact SVD with a deterministic sign convention.

    In every left singular vector the entry of largest magnitude is made
    non-negative and the matching row of vt is flipped with it, so repeated
    calls on the same input give bit-identical factors.

    Raises:
        NumericalError: LAPACK did not converge or the reconstruction residual
            exceeds 1e-8 relative Frobenius error
    """
    a = as_mat(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f'SVD did not converge: {e}', residual=math.inf)

    pivots = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[pivots, np.arange(u.shape[1])] < 0, -1.0, 1.0)
    u = u * signs
    vt = vt * signs[:, None]

    scale = np.linalg.norm(a)
    residual = np.linalg.norm(a - (u * s) @ vt) / (scale if scale > 0 else 1.0)
    if residual > SVD_TOLERANCE:
        raise NumericalError(
            f'SVD reconstruction residual {residual:.3e} exceeds {SVD_TOLERANCE:g}',
            residual=residual,
        )

    return SvdResult(u=u, s=s, vt=vt)


def singular_values(a):
    return svd(a).s


def nonzero_singular_values(s):
    """Drop singular values below ZERO_THRESHOLD times the largest one."""
    s = np.asarray(s, dtype=np.float64)
    if s.size == 0 or s.max() <= 0:
        return s[:0]
    return s[s >= ZERO_THRESHOLD * s.max()]


def _schatten(s, p):
    top = s.max() if s.size else 0.0
    if top == 0:
        return 0.0
    return float(top * np.sum((s / top) ** p) ** (1.0 / p))


def norm(a, kind):
    a = as_mat(a)

    if kind.tag == 'frobenius':
        return float(np.linalg.norm(a))
    if kind.tag == 'euclidean_vec':
        if a.shape[0] != 1 and a.shape[1] != 1:
            raise DimensionError(
                f'Euclidean vector norm needs a row or column, got shape {a.shape}'
            )
        return float(np.linalg.norm(a))

    s = singular_values(a)
    if kind.tag == 'spectral':
        return float(s[0])
    if kind.tag == 'trace':
        return float(np.sum(s))
    return _schatten(s, kind.p)


def dual_norm_kind(kind):
    """Spectral and trace are dual to each other; Frobenius and Euclidean are self-dual."""
    duals = {
        'spectral': TRACE,
        'trace': SPECTRAL,
        'frobenius': FROBENIUS,
        'euclidean_vec': EUCLIDEAN_VEC,
    }
    if kind.tag not in duals:
        raise UnsupportedNormError(f"Dual of '{kind}' is not supported")
    return duals[kind.tag]


def rank_bound(shape):
    """sqrt(min(d1, d2)): the constant in ||A||_trace <= sqrt(min(d1, d2)) ||A||_F."""
    return math.sqrt(min(shape))
