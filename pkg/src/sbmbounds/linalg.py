"""Small symmetric-matrix helpers used throughout the package."""

import numpy as np


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def psd_sqrt(S: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root; eigenvalues in [-1e-10, 0) are clipped."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    w, V = np.linalg.eigh(symmetrize(S))
    if w.min() < -1e-10:
        raise ValueError(f"matrix is not PSD (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def clip_eigenvalues(A: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Project a symmetric matrix onto {lo*I <= A <= hi*I} by eigenvalue clipping."""
    w, V = np.linalg.eigh(symmetrize(np.atleast_2d(A)))
    return (V * np.clip(w, lo, hi)) @ V.T


def eig_interval(A: np.ndarray) -> tuple[float, float]:
    w = np.linalg.eigvalsh(symmetrize(np.atleast_2d(A)))
    return float(w.min()), float(w.max())


def is_definite(R: np.ndarray, tol: float = 1e-12) -> bool:
    """True when all eigenvalues are strictly positive or strictly negative."""
    w = np.linalg.eigvalsh(symmetrize(np.atleast_2d(R)))
    return bool(np.all(w > tol) or np.all(w < -tol))
