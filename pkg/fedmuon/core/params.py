"""
Model parameters as an ordered mapping of layer name to matrix.

Single-matrix problems use one layer named 'x'. The helpers below apply a
matrix operation layer by layer and always return new dictionaries.
"""
import math

import numpy as np

from fedmuon.core.errors import DimensionError
from fedmuon.core.matlin import FROBENIUS, SPECTRAL, TRACE, norm


def zeros_like(params):
    return {name: np.zeros_like(value) for name, value in params.items()}


def copy(params):
    return {name: value.copy() for name, value in params.items()}


def check_layers(a, b):
    if list(a) != list(b):
        raise DimensionError(f'Layer mismatch: {list(a)} vs {list(b)}')
    for name in a:
        if a[name].shape != b[name].shape:
            raise DimensionError(
                f"Shape mismatch in layer '{name}': {a[name].shape} vs {b[name].shape}"
            )


def add(a, b, scale=1.0):
    """a + scale * b"""
    check_layers(a, b)
    return {name: a[name] + scale * b[name] for name in a}


def sub(a, b):
    check_layers(a, b)
    return {name: a[name] - b[name] for name in a}


def scale(a, factor):
    return {name: factor * value for name, value in a.items()}


def mean(items):
    """Layerwise mean, summed in the given order."""
    items = list(items)
    total = zeros_like(items[0])
    for item in items:
        total = add(total, item)
    return scale(total, 1.0 / len(items))


def is_finite(params):
    return all(np.all(np.isfinite(value)) for value in params.values())


def distance(a, b):
    """Frobenius distance over all layers."""
    check_layers(a, b)
    return math.sqrt(sum(float(np.sum((a[name] - b[name]) ** 2)) for name in a))


def gradient_norms(grad):
    """
    Frobenius, trace and spectral norms of a layered gradient.

    Frobenius is taken over all entries, trace is the sum of layer trace
    norms and spectral the largest layer spectral norm, so
    frobenius <= trace <= sqrt(sum of min(d1, d2)) * frobenius.
    """
    frob = math.sqrt(sum(norm(value, FROBENIUS) ** 2 for value in grad.values()))
    trace = sum(norm(value, TRACE) for value in grad.values())
    spectral = max(norm(value, SPECTRAL) for value in grad.values())
    return frob, trace, spectral


def rank_bound(params):
    return math.sqrt(sum(min(value.shape) for value in params.values()))
