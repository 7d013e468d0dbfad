import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from maxrank.linalg import mp_identity_errors, null_basis, numerical_rank, pinv, range_basis


def test_row_vector_closed_form():
    # xi^T / |xi|^2
    got = pinv(np.array([[1.0, 2.0]]))
    assert np.allclose(got, [[0.2], [0.4]], atol=1e-15)
    assert max(mp_identity_errors(np.array([[1.0, 2.0]]), got)) < 1e-14


def test_identity():
    assert np.allclose(pinv(np.eye(3)), np.eye(3))


def test_cauchy_riemann_symbol():
    m = np.array([[1.0, -2.0], [2.0, 1.0]])
    assert np.allclose(pinv(m), m.T / 5, atol=1e-15)


def test_zero_matrix_maps_to_zero():
    assert np.array_equal(pinv(np.zeros((2, 3))), np.zeros((3, 2)))


def test_batched_shape():
    a = np.random.default_rng(0).standard_normal((4, 5, 2, 3))
    out = pinv(a)
    assert out.shape == (4, 5, 3, 2)
    assert np.allclose(out[1, 2], np.linalg.pinv(a[1, 2]))


def test_rank_tolerance_truncates():
    m = np.diag([1.0, 1e-12])
    assert numerical_rank(m) == 1
    assert np.allclose(pinv(m), np.diag([1.0, 0.0]))
    assert numerical_rank(m, tol=1e-14) == 2


def test_bases_are_complementary():
    m = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0]])
    r = range_basis(m)
    k = null_basis(m)
    assert r.shape == (2, 1) and k.shape == (3, 2)
    assert np.allclose(m @ k, 0)
    assert np.allclose(k.T @ k, np.eye(2))


def test_rejects_vectors():
    with pytest.raises(ValueError):
        pinv(np.ones(3))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)),
              elements=st.floats(-10, 10, allow_nan=False, width=64)))
def test_moore_penrose_identities(m):
    mp = pinv(m)
    assert max(mp_identity_errors(m, mp)) < 1e-7


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_matches_numpy_on_complex(rows, cols, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    assert np.allclose(pinv(m), np.linalg.pinv(m), atol=1e-10)
