import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import crandn
from lsnet.exceptions import DimensionError
from lsnet.tensor import (
    casorati,
    fft2_frames,
    fft_time,
    ifft2_frames,
    ifft_time,
    inner,
    norm2,
    svd,
    uncasorati,
)

shapes3 = st.tuples(st.integers(1, 7), st.integers(1, 7), st.integers(1, 5))


def test_casorati_single_entry():
    x = np.array([[[2 - 1j]]])
    assert casorati(x).shape == (1, 1)
    assert casorati(x)[0, 0] == 2 - 1j


def test_casorati_columns_are_row_major_frames():
    x = np.zeros((2, 2, 2), dtype=complex)
    x[..., 0] = [[1, 2], [3, 4]]
    x[..., 1] = [[5, 6], [7, 8]]
    m = casorati(x)
    np.testing.assert_array_equal(m[:, 0], [1, 2, 3, 4])
    np.testing.assert_array_equal(m[:, 1], [5, 6, 7, 8])


def test_casorati_rejects_wrong_rank():
    with pytest.raises(DimensionError):
        casorati(np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        uncasorati(np.zeros((4, 3)), (2, 3, 3))


@given(shapes3, st.integers(0, 2**32 - 1))
def test_casorati_roundtrip_bit_exact(shape, seed):
    x = crandn(np.random.default_rng(seed), *shape)
    back = uncasorati(casorati(x), shape)
    assert back.tobytes() == x.tobytes()


def test_svd_diagonal():
    f = svd(np.diag([3.0, 1.0]))
    np.testing.assert_allclose(f.sigma, [3, 1])
    np.testing.assert_allclose(f.U, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(f.V, np.eye(2), atol=1e-15)


def test_svd_zero_matrix():
    f = svd(np.zeros((4, 3)))
    assert np.all(f.sigma == 0)


def test_svd_random_against_eigenvalues():
    rng = np.random.default_rng(7)
    m = crandn(rng, 6, 4)
    f = svd(m)
    assert np.linalg.norm(f.reconstruct() - m) <= 1e-10 * np.linalg.norm(m)
    # separate reference: eigenvalues of the Hermitian Gram matrix
    ev = np.sort(np.linalg.eigvalsh(m.conj().T @ m))[::-1]
    np.testing.assert_allclose(f.sigma, np.sqrt(ev), rtol=1e-10)


@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_svd_invariants(m, n, seed):
    a = crandn(np.random.default_rng(seed), m, n)
    f = svd(a)
    r = min(m, n)
    assert f.U.shape == (m, r) and f.V.shape == (n, r)
    assert np.all(np.diff(f.sigma) <= 0) and np.all(f.sigma >= 0)
    np.testing.assert_allclose(f.U.conj().T @ f.U, np.eye(r), atol=1e-10)
    np.testing.assert_allclose(f.V.conj().T @ f.V, np.eye(r), atol=1e-10)
    assert np.linalg.norm(f.reconstruct() - a) <= 1e-10 * np.linalg.norm(a)
    # phase convention: first nonzero entry of each U column is real and positive
    for j in range(r):
        col = f.U[:, j]
        first = col[np.argmax(np.abs(col) > 1e-12 * np.abs(col).max())]
        assert first.real > 0 and abs(first.imag) <= 1e-14


def test_svd_singular_values_8x8():
    a = crandn(np.random.default_rng(3), 8, 8)
    ev = np.sort(np.linalg.eigvalsh(a.conj().T @ a))[::-1]
    np.testing.assert_allclose(svd(a).sigma, np.sqrt(ev), rtol=1e-8)


def test_svd_deterministic():
    a = crandn(np.random.default_rng(5), 9, 4)
    f1, f2 = svd(a), svd(a)
    for x, y in zip(f1, f2):
        assert x.tobytes() == y.tobytes()


def test_fft_delta_is_flat():
    x = np.zeros((4, 6, 1), dtype=complex)
    x[0, 0, 0] = 1
    np.testing.assert_allclose(fft2_frames(x), np.full((4, 6, 1), 1 / np.sqrt(24)), atol=1e-15)


def test_fft_two_point():
    a, b = 1.5 - 2j, -0.5 + 1j
    x = np.array([a, b]).reshape(2, 1, 1)
    np.testing.assert_allclose(fft2_frames(x).ravel(), [(a + b) / np.sqrt(2), (a - b) / np.sqrt(2)],
                               atol=1e-15)
    y = np.array([a, b]).reshape(1, 1, 2)
    np.testing.assert_allclose(fft_time(y).ravel(), [(a + b) / np.sqrt(2), (a - b) / np.sqrt(2)],
                               atol=1e-15)


def test_fft_roundtrip_5x6x2():
    x = crandn(np.random.default_rng(0), 5, 6, 2)
    assert np.max(np.abs(ifft2_frames(fft2_frames(x)) - x)) < 1e-12
    assert np.max(np.abs(ifft_time(fft_time(x)) - x)) < 1e-12


def test_fft_time_constant_goes_to_dc():
    x = np.full((3, 2, 4), 2 + 1j)
    f = fft_time(x)
    np.testing.assert_allclose(f[..., 0], (2 + 1j) * 2.0)
    np.testing.assert_allclose(f[..., 1:], 0, atol=1e-15)


@given(shapes3, st.integers(0, 2**32 - 1))
def test_fft_parseval(shape, seed):
    x = crandn(np.random.default_rng(seed), *shape)
    n = norm2(x)
    assert abs(norm2(fft2_frames(x)) - n) <= 1e-12 * n
    assert abs(norm2(fft_time(x)) - n) <= 1e-12 * n


def test_fft_rank_checks():
    with pytest.raises(DimensionError):
        fft2_frames(np.zeros((4, 4)))
    with pytest.raises(DimensionError):
        fft_time(np.zeros((2, 2, 2, 2)))


def test_inner_hand_value():
    assert inner(np.array([1 + 1j]), np.array([2 - 1j])) == 1 + 3j


def test_inner_norm_relation(rng):
    x = crandn(rng, 3, 4, 2)
    v = inner(x, x)
    assert abs(v.imag) == 0 and np.isclose(v.real, norm2(x) ** 2)
    assert inner(x, np.zeros_like(x)) == 0
    with pytest.raises(DimensionError):
        inner(x, x[:1])
