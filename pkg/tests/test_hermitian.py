import numpy as np
import pytest

from irsrelay.hermitian import (
    NonHermitian,
    complex_from_embedding,
    eig_hermitian,
    is_psd,
    min_eigenvalue,
    real_embedding,
)


def random_hermitian(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


def test_eig_diagonal():
    w, v = eig_hermitian(np.diag([2.0, 1.0]))
    assert np.allclose(w, [1.0, 2.0])
    assert np.allclose(np.abs(v), [[0.0, 1.0], [1.0, 0.0]])


def test_eig_hand_derived_2x2():
    # [[1, -j], [j, 1]] has characteristic polynomial l^2 - 2l = 0.
    a = np.array([[1.0, -1j], [1j, 1.0]])
    w, v = eig_hermitian(a)
    assert np.allclose(w, [0.0, 2.0], atol=1e-12)
    assert np.allclose(v.conj().T @ v, np.eye(2), atol=1e-9)


def test_eig_scalar():
    w, _ = eig_hermitian(np.array([[5.0]]))
    assert np.allclose(w, [5.0])


def test_eig_reconstruction_random():
    rng = np.random.default_rng(7)
    for n in (2, 5, 11):
        a = random_hermitian(rng, n)
        w, v = eig_hermitian(a)
        scale = np.max(np.abs(a))
        assert np.max(np.abs(v @ np.diag(w) @ v.conj().T - a)) < 1e-9 * scale
        assert np.max(np.abs(v.conj().T @ v - np.eye(n))) < 1e-9
        assert np.all(np.diff(w) >= 0)


def test_eig_rejects_non_hermitian():
    with pytest.raises(NonHermitian):
        eig_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_min_eigenvalue_cases():
    assert min_eigenvalue(np.eye(3)) == pytest.approx(1.0)
    assert min_eigenvalue(np.array([[1.0, 2.0], [2.0, 1.0]])) == pytest.approx(-1.0)
    assert min_eigenvalue(np.zeros((2, 2))) == pytest.approx(0.0)


def test_min_eigenvalue_matches_eig():
    rng = np.random.default_rng(3)
    a = random_hermitian(rng, 6)
    w, _ = eig_hermitian(a)
    assert min_eigenvalue(a) == pytest.approx(w[0])


def test_psd_check():
    assert is_psd(np.eye(2))
    assert is_psd(np.zeros((3, 3)))
    assert not is_psd(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_embedding_real_matrix():
    a = np.array([[2.0, 1.0], [1.0, 3.0]])
    e = real_embedding(a)
    assert np.allclose(e, np.block([[a, np.zeros((2, 2))], [np.zeros((2, 2)), a]]))


def test_embedding_spectrum_doubled():
    a = np.array([[1.0, -1j], [1j, 1.0]])
    e = real_embedding(a)
    assert np.allclose(np.linalg.eigvalsh(e), [0.0, 0.0, 2.0, 2.0], atol=1e-12)


def test_embedding_scalar():
    assert np.allclose(real_embedding(np.array([[4.0]])), np.diag([4.0, 4.0]))


def test_embedding_is_linear():
    rng = np.random.default_rng(11)
    a, b = random_hermitian(rng, 4), random_hermitian(rng, 4)
    assert np.array_equal(real_embedding(a + b), real_embedding(a) + real_embedding(b))


def test_embedding_trace_identities():
    rng = np.random.default_rng(5)
    a, x = random_hermitian(rng, 4), random_hermitian(rng, 4)
    assert np.trace(real_embedding(a)) == pytest.approx(2 * np.trace(a).real)
    lhs = np.trace(a @ x).real
    rhs = 0.5 * np.trace(real_embedding(a) @ real_embedding(x))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_complex_from_embedding_roundtrip():
    rng = np.random.default_rng(9)
    a = random_hermitian(rng, 5)
    assert np.allclose(complex_from_embedding(real_embedding(a)), a)


def test_complex_from_embedding_arbitrary_psd():
    # An arbitrary PSD symmetric matrix maps to a Hermitian PSD matrix with
    # matching trace inner products against embedded Hermitian data.
    rng = np.random.default_rng(13)
    m = rng.standard_normal((6, 6))
    x = m @ m.T
    g = complex_from_embedding(x)
    assert min_eigenvalue(g) >= -1e-10
    a = random_hermitian(rng, 3)
    assert np.trace(a @ g).real == pytest.approx(0.5 * np.trace(real_embedding(a) @ x))
