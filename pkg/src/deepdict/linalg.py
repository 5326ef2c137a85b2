"""Dense linear-algebra kernels shared by the trainers.

All matrices follow the column convention ``X = D @ Z``: columns of ``X``
are samples, columns of ``D`` are atoms and columns of ``Z`` are the
coefficient vectors.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .exceptions import NumericError, ShapeError

#: Singular values below ``RCOND * s_max`` are treated as zero.
RCOND = 1e-12
#: Relative inflation applied to ``s_max**2`` in :func:`spectral_bound`.
SPECTRAL_SAFETY = 1e-6
#: Columns with a smaller norm are considered dead by :func:`normalize_columns`.
DEAD_COLUMN_NORM = 1e-12


class SvdResult(NamedTuple):
    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array or raise."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError(f"{name} contains non-finite values")
    return m


def pinv(d, rcond: float = RCOND) -> np.ndarray:
    """Moore-Penrose pseudoinverse; singular values below ``rcond * s_max`` are dropped."""
    d = as_matrix(d, "d")
    if d.size == 0:
        raise ShapeError("pinv of an empty matrix")
    return np.linalg.pinv(d, rcond=rcond)


def lstsq_dict(y, z, rcond: float = RCOND) -> np.ndarray:
    """Solve ``min_D ||Y - D Z||_F`` (minimum-norm solution ``Y Z^+``)."""
    y = as_matrix(y, "y")
    z = as_matrix(z, "z")
    if y.shape[1] != z.shape[1]:
        raise ShapeError(f"y has {y.shape[1]} columns but z has {z.shape[1]}")
    if z.size == 0:
        raise ShapeError("z is empty")
    return y @ np.linalg.pinv(z, rcond=rcond)


def lstsq_coef(y, d, rcond: float = RCOND) -> np.ndarray:
    """Solve ``min_Z ||Y - D Z||_F`` (minimum-norm solution ``D^+ Y``)."""
    y = as_matrix(y, "y")
    d = as_matrix(d, "d")
    if y.shape[0] != d.shape[0]:
        raise ShapeError(f"y has {y.shape[0]} rows but d has {d.shape[0]}")
    if d.size == 0:
        raise ShapeError("d is empty")
    return np.linalg.pinv(d, rcond=rcond) @ y


def _flip_signs(u: np.ndarray, vt: np.ndarray) -> None:
    # Make the largest-magnitude entry of every left vector positive so the
    # factorization does not depend on the LAPACK build.
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    u *= signs
    vt *= signs[:, None]


def truncated_svd(y, k: int) -> SvdResult:
    """Top-``k`` singular triples of ``y`` with a deterministic sign convention."""
    y = as_matrix(y, "y")
    if not 1 <= k <= min(y.shape):
        raise ShapeError(f"k={k} outside [1, {min(y.shape)}] for shape {y.shape}")
    u, s, vt = np.linalg.svd(y, full_matrices=False)
    u, s, vt = u[:, :k].copy(), s[:k].copy(), vt[:k].copy()
    _flip_signs(u, vt)
    return SvdResult(u, s, vt)


def spectral_bound(d) -> float:
    """Upper bound on the largest eigenvalue of ``D^T D``.

    Returns ``s_max(D)**2 * (1 + 1e-6)`` so that ``a I - D^T D`` is strictly
    positive definite, or ``1e-6`` for an all-zero ``D``.
    """
    d = as_matrix(d, "d")
    if d.size == 0:
        raise ShapeError("spectral_bound of an empty matrix")
    smax = np.linalg.norm(d, 2)
    if smax == 0.0:
        return SPECTRAL_SAFETY
    return float(smax * smax * (1.0 + SPECTRAL_SAFETY))


def normalize_columns(d) -> np.ndarray:
    """Scale every column to unit l2 norm.

    A column whose norm is below ``1e-12`` is replaced by the coordinate
    vector ``e[j % rows]`` where ``j`` is the column index.
    """
    d = as_matrix(d, "d")
    out = d.copy()
    rows = d.shape[0]
    if rows == 0:
        return out
    norms = np.linalg.norm(d, axis=0)
    dead = norms < DEAD_COLUMN_NORM
    live = ~dead
    out[:, live] /= norms[live]
    for j in np.flatnonzero(dead):
        out[:, j] = 0.0
        out[j % rows, j] = 1.0
    return out
