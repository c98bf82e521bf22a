"""Dense complex Hermitian matrix primitives shared by the optimization stack."""

from __future__ import annotations

import numpy as np

# Max elementwise deviation tolerated between A and A^H.
HERMITIAN_TOL = 1e-12
# lambda_min >= -PSD_TOL * max(1, max |diag|) counts as positive semidefinite;
# interior-point outputs are PSD only to solver tolerance.
PSD_TOL = 1e-8


class NonHermitian(ValueError):
    """Input matrix is not Hermitian within tolerance."""


class NoConvergence(RuntimeError):
    """Eigenvalue iteration failed to converge."""


def assert_hermitian(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate and return `a` as a square complex Hermitian ndarray."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonHermitian(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise NonHermitian("matrix contains non-finite entries")
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 0.0)
    if dev > tol * scale:
        raise NonHermitian(f"deviation from Hermitian symmetry {dev:.3e} exceeds tolerance")
    return a


def eig_hermitian(a, tol: float = HERMITIAN_TOL):
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues ascending, eigenvector matrix with orthonormal
    columns) such that a @ v[:, k] = w[k] * v[:, k].
    """
    a = assert_hermitian(a, tol)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NoConvergence(str(exc)) from exc
    return w, v


def min_eigenvalue(a, tol: float = HERMITIAN_TOL) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    w, _ = eig_hermitian(a, tol)
    return float(w[0])


def is_psd(a, tol: float = PSD_TOL) -> bool:
    """PSD check with tolerance relative to the largest diagonal entry."""
    a = assert_hermitian(a)
    scale = max(1.0, float(np.max(np.abs(np.diag(a).real))) if a.shape[0] else 0.0)
    return min_eigenvalue(a) >= -tol * scale


def real_embedding(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Embed a Hermitian n x n matrix as a real symmetric 2n x 2n matrix.

    The embedding [[Re A, -Im A], [Im A, Re A]] doubles every eigenvalue's
    multiplicity and satisfies tr(A X) = tr(embed(A) embed(X)) / 2 for
    Hermitian X, which is how complex blocks enter the real conic solver.
    """
    a = assert_hermitian(a, tol)
    re, im = a.real, a.imag
    return np.block([[re, -im], [im, re]])


def complex_from_embedding(x) -> np.ndarray:
    """Map a real symmetric 2n x 2n matrix back to a Hermitian n x n matrix.

    Inverse of `real_embedding` on its range; for an arbitrary symmetric PSD
    input it returns the Hermitian PSD matrix G with
    tr(G A) = tr(X embed(A)) / 2 for every Hermitian A.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1] or x.shape[0] % 2:
        raise ValueError(f"expected a square matrix of even dimension, got shape {x.shape}")
    n = x.shape[0] // 2
    p, q = x[:n, :n], x[:n, n:]
    r = x[n:, n:]
    re = 0.5 * (p + r)
    im = 0.5 * (q.T - q)
    return re + 1j * im
