"""Dense matrix primitives: positive square roots, polar factors, pseudoinverses.

All operations are pure functions on small dense arrays (the design envelope
is dimension <= ~64) and use a relative tolerance, by default 1e-9 of the
Frobenius norm of the input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotHermitianError, NotPSDError

DEFAULT_TOL = 1e-9


def _scale(a: np.ndarray, tol: float) -> float:
    """Absolute comparison threshold: relative to ||a||, falling back to tol for a = 0."""
    norm = float(np.linalg.norm(a))
    return tol * norm if norm > 0.0 else tol


def positive_sqrt(a: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Positive-semidefinite square root of a Hermitian PSD matrix.

    Uses a Hermitian eigendecomposition; eigenvalues in (-tol*||a||, 0) are
    clamped to zero so that floating-point PSD inputs are accepted.  Raises
    ``NotHermitianError`` / ``NotPSDError`` otherwise.  Real input yields a
    real result.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {a.shape}")
    atol = _scale(a, tol)
    if np.linalg.norm(a - a.conj().T) > atol:
        raise NotHermitianError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh((a + a.conj().T) / 2.0)
    if w[0] < -atol:
        raise NotPSDError(f"matrix has eigenvalue {w[0]:.3e} below -tol*||a||")
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.conj().T
    root = (root + root.conj().T) / 2.0
    if np.isrealobj(a):
        return root.real
    return root


def polar_decompose(t: np.ndarray, tol: float = DEFAULT_TOL):
    """Polar factorization t = p @ o with p PSD and o orthogonal.

    Returns ``(p, o, unique)``.  ``p`` equals ``positive_sqrt(t @ t.T)``.  For
    rank-deficient ``t`` the orthogonal factor is completed from the singular
    vectors, flipping the sign of a null direction so that det(o) = +1 when a
    sign is free; ``unique`` is False in that case.
    """
    t = np.asarray(t, dtype=float)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise NotHermitianError(f"polar factorization needs a square matrix, got {t.shape}")
    n = t.shape[0]
    w, s, vt = np.linalg.svd(t)
    p = (w * s) @ w.T
    p = (p + p.T) / 2.0
    o = w @ vt
    smax = s[0] if n else 0.0
    unique = bool(n and s[-1] > tol * max(smax, 1.0))
    if not unique and np.linalg.det(o) < 0.0:
        # Flipping a null singular direction changes o but not p @ o.
        w = w.copy()
        w[:, -1] = -w[:, -1]
        o = w @ vt
    return p, o, unique


def pseudo_inverse(a: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse; singular values below tol*max(s) are dropped."""
    return np.linalg.pinv(np.asarray(a, dtype=float), rcond=tol)


@dataclass(frozen=True)
class MatrixFlags:
    """Structural predicates of a matrix, each true iff it holds within tolerance."""

    hermitian: bool
    psd: bool
    unitary: bool
    orthogonal: bool
    real: bool
    diagonal: bool


def classify(a: np.ndarray, tol: float = DEFAULT_TOL) -> MatrixFlags:
    """Evaluate the structural predicates of ``a`` at relative tolerance ``tol``."""
    a = np.asarray(a, dtype=complex)
    atol = _scale(a, tol)
    real = bool(np.max(np.abs(a.imag), initial=0.0) <= atol)
    square = a.ndim == 2 and a.shape[0] == a.shape[1]
    hermitian = bool(square and np.linalg.norm(a - a.conj().T) <= atol)
    psd = False
    if hermitian:
        w = np.linalg.eigvalsh((a + a.conj().T) / 2.0)
        psd = bool(w[0] >= -atol)
    unitary = bool(
        square and np.linalg.norm(a.conj().T @ a - np.eye(a.shape[0])) <= max(atol, tol)
    )
    orthogonal = bool(
        square
        and real
        and np.linalg.norm(a.real.T @ a.real - np.eye(a.shape[0])) <= max(atol, tol)
    )
    diagonal = False
    if a.ndim == 2:
        mask = np.ones(a.shape, dtype=bool)
        k = min(a.shape)
        mask[np.arange(k), np.arange(k)] = False
        diagonal = bool(np.max(np.abs(a[mask]), initial=0.0) <= atol)
    return MatrixFlags(
        hermitian=hermitian,
        psd=psd,
        unitary=unitary,
        orthogonal=orthogonal,
        real=real,
        diagonal=diagonal,
    )
