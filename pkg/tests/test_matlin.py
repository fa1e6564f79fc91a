import math

import numpy as np
import pytest

from fedmuon.core.errors import DimensionError, NumericalError, UnsupportedNormError
from fedmuon.core.matlin import (
    EUCLIDEAN_VEC,
    FROBENIUS,
    SPECTRAL,
    TRACE,
    NormKind,
    as_mat,
    dual_norm_kind,
    inner,
    nonzero_singular_values,
    norm,
    rank_bound,
    singular_values,
    svd,
)


def random_matrices(seed, count, max_rows=32, max_cols=48):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        shape = (int(rng.integers(1, max_rows + 1)), int(rng.integers(1, max_cols + 1)))
        yield rng.normal(size=shape)


def test_as_mat_rejects_vectors():
    """Test 1-D arrays are not matrices"""
    with pytest.raises(DimensionError):
        as_mat(np.ones(3))


def test_as_mat_rejects_empty():
    """Test matrices with a zero dimension are rejected"""
    with pytest.raises(DimensionError):
        as_mat(np.ones((0, 3)))


def test_as_mat_rejects_nan():
    """Test non-finite entries raise NumericalError"""
    with pytest.raises(NumericalError):
        as_mat([[1.0, math.nan]])


def test_inner_product():
    """Test inner is the sum of elementwise products"""
    assert inner([[1.0, 2.0], [3.0, 4.0]], [[1.0, 0.0], [0.0, -1.0]]) == -3.0


def test_inner_shape_mismatch():
    """Test inner of different shapes raises DimensionError"""
    with pytest.raises(DimensionError):
        inner(np.ones((2, 3)), np.ones((3, 2)))


@pytest.mark.parametrize('kind', [FROBENIUS, SPECTRAL, TRACE])
def test_inner_dual_norm_bound(kind):
    """Test <A, B> <= ||A|| ||B||_dual on random pairs"""
    rng = np.random.default_rng(5)
    dual = dual_norm_kind(kind)
    for a in random_matrices(6, 300):
        b = rng.normal(size=a.shape)
        assert inner(a, b) <= norm(a, kind) * norm(b, dual) * (1 + 1e-10) + 1e-12


def test_svd_diagonal():
    """Test singular values of a diagonal matrix are its sorted absolute entries"""
    s = singular_values(np.diag([1.0, -3.0, 2.0]))

    np.testing.assert_allclose(s, [3.0, 2.0, 1.0])


def test_svd_sign_convention_and_reconstruction():
    """Test the largest entry of each left vector is non-negative and USV^T = A"""
    for a in random_matrices(1, 50):
        result = svd(a)
        pivots = np.argmax(np.abs(result.u), axis=0)
        assert np.all(result.u[pivots, np.arange(result.u.shape[1])] >= 0)
        np.testing.assert_allclose((result.u * result.s) @ result.vt, a, atol=1e-10)


def test_svd_is_repeatable():
    """Test two calls on the same input give identical factors"""
    a = np.random.default_rng(2).normal(size=(7, 4))

    first, second = svd(a), svd(a)

    assert np.array_equal(first.u, second.u)
    assert np.array_equal(first.s, second.s)
    assert np.array_equal(first.vt, second.vt)


def test_svd_zero_matrix():
    """Test the zero matrix has all-zero singular values"""
    assert not singular_values(np.zeros((3, 2))).any()
    assert nonzero_singular_values(singular_values(np.zeros((3, 2)))).size == 0


def test_nonzero_singular_values_threshold():
    """Test values below 1e-12 of the largest are dropped"""
    s = nonzero_singular_values([2.0, 1.0, 1e-13, 0.0])

    np.testing.assert_array_equal(s, [2.0, 1.0])


def test_norm_rank_one():
    """Test all Schatten norms agree on a rank-one matrix"""
    a = np.outer([3.0, 4.0], [1.0, 0.0, 0.0])

    for kind in (FROBENIUS, SPECTRAL, TRACE, NormKind.schatten(3)):
        assert norm(a, kind) == pytest.approx(5.0)


def test_norm_identity():
    """Test norms of the 4x4 identity"""
    eye = np.eye(4)

    assert norm(eye, FROBENIUS) == pytest.approx(2.0)
    assert norm(eye, TRACE) == pytest.approx(4.0)
    assert norm(eye, SPECTRAL) == pytest.approx(1.0)
    assert norm(eye, NormKind.schatten(4)) == pytest.approx(4 ** 0.25)


def test_norm_inequalities():
    """Test ||A||_F <= ||A||_trace <= sqrt(min(d1, d2)) ||A||_F on 1000 matrices"""
    for a in random_matrices(3, 1000):
        frob, trace = norm(a, FROBENIUS), norm(a, TRACE)
        assert frob <= trace * (1 + 1e-10)
        assert trace <= rank_bound(a.shape) * frob * (1 + 1e-10)


def test_schatten_monotone():
    """Test Schatten norms are non-increasing in p"""
    for a in random_matrices(4, 300):
        chain = [norm(a, NormKind.schatten(p)) for p in (1, 1.25, 2, 5)] + [norm(a, SPECTRAL)]
        for larger, smaller in zip(chain, chain[1:]):
            assert smaller <= larger * (1 + 1e-10)


def test_schatten_endpoints():
    """Test Schatten(1) is the trace norm and Schatten(2) the Frobenius norm"""
    a = np.random.default_rng(5).normal(size=(5, 3))

    assert norm(a, NormKind.schatten(1)) == pytest.approx(norm(a, TRACE))
    assert norm(a, NormKind.schatten(2)) == pytest.approx(norm(a, FROBENIUS))


def test_euclidean_vec_requires_vector():
    """Test the Euclidean vector norm rejects a full matrix"""
    assert norm([[3.0, 4.0]], EUCLIDEAN_VEC) == 5.0

    with pytest.raises(DimensionError):
        norm(np.ones((2, 2)), EUCLIDEAN_VEC)


def test_schatten_p_below_one():
    """Test Schatten p < 1 is not a norm"""
    with pytest.raises(UnsupportedNormError):
        NormKind.schatten(0.5)


def test_unknown_norm_tag():
    """Test an unknown tag is rejected"""
    with pytest.raises(UnsupportedNormError):
        NormKind('nuclear')


@pytest.mark.parametrize('text, expected', [
    ('spectral', SPECTRAL),
    ('Frobenius', FROBENIUS),
    ('schatten:3', NormKind.schatten(3)),
    ('euclidean_vec', EUCLIDEAN_VEC),
])
def test_norm_kind_parse(text, expected):
    """Test the config spelling of norms"""
    assert NormKind.parse(text) == expected


def test_norm_kind_parse_invalid_schatten():
    """Test a Schatten spelling without a number"""
    with pytest.raises(UnsupportedNormError):
        NormKind.parse('schatten:abc')


def test_norm_kind_str():
    """Test str gives back the config spelling"""
    assert str(NormKind.schatten(3)) == 'schatten:3'
    assert str(SPECTRAL) == 'spectral'


def test_dual_norm_kind():
    """Test spectral and trace are dual, Frobenius self-dual"""
    assert dual_norm_kind(SPECTRAL) == TRACE
    assert dual_norm_kind(TRACE) == SPECTRAL
    assert dual_norm_kind(FROBENIUS) == FROBENIUS

    with pytest.raises(UnsupportedNormError):
        dual_norm_kind(NormKind.schatten(3))
