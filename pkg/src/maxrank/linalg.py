"""Small dense linear-algebra helpers shared by the symbol and solver layers."""
from __future__ import annotations

import numpy as np

DEFAULT_RANK_TOL = 1e-9


def pinv(matrix: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse through the SVD.

    Singular values are inverted only when they exceed ``tol * sigma_1``.
    Leading axes are treated as a batch, so an array of shape ``(..., N, M)``
    yields an array of shape ``(..., M, N)``. A zero matrix maps to zero.
    """
    a = np.asarray(matrix)
    if a.ndim < 2:
        raise ValueError("pinv expects at least a 2-D array")
    if a.shape[-1] == 0 or a.shape[-2] == 0:
        return np.zeros(a.shape[:-2] + (a.shape[-1], a.shape[-2]), dtype=a.dtype)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    smax = s[..., :1]
    keep = s > tol * smax
    s_inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    return np.einsum("...ji,...j,...kj->...ik", vh.conj(), s_inv, u.conj())


def numerical_rank(matrix: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Rank with a relative singular-value threshold; batched over leading axes."""
    a = np.asarray(matrix)
    s = np.linalg.svd(a, compute_uv=False)
    if s.shape[-1] == 0:
        return np.zeros(a.shape[:-2], dtype=int)
    return np.sum(s > tol * s[..., :1], axis=-1)


def range_basis(matrix: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the column space."""
    a = np.asarray(matrix)
    if a.size == 0:
        return np.zeros((a.shape[0], 0))
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    r = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
    return u[:, :r]


def null_basis(matrix: np.ndarray, tol: float = DEFAULT_RANK_TOL,
               scale: float | None = None) -> np.ndarray:
    """Orthonormal basis of the kernel; ``scale`` sets the absolute threshold."""
    a = np.asarray(matrix)
    m = a.shape[1]
    if m == 0:
        return np.zeros((0, 0))
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    ref = s[0] if scale is None and s.size else (scale or 0.0)
    r = int(np.sum(s > tol * ref)) if ref > 0 else 0
    return vh[r:].conj().T


def mp_identity_errors(m: np.ndarray, mp: np.ndarray) -> tuple[float, float, float, float]:
    """Relative errors of the four Moore-Penrose identities."""
    nm = max(np.linalg.norm(m, 2), 1e-300)
    nmp = max(np.linalg.norm(mp, 2), 1e-300)
    e1 = np.linalg.norm(m @ mp @ m - m, 2) / nm
    e2 = np.linalg.norm(mp @ m @ mp - mp, 2) / nmp
    p = m @ mp
    q = mp @ m
    e3 = np.linalg.norm(p - p.conj().T, 2) / max(np.linalg.norm(p, 2), 1.0)
    e4 = np.linalg.norm(q - q.conj().T, 2) / max(np.linalg.norm(q, 2), 1.0)
    return float(e1), float(e2), float(e3), float(e4)
