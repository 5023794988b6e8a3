"""Hankel matrix utilities.

An L x m Hankel matrix is constant along anti-diagonals, so it is fully
described by the m + L - 1 anti-diagonal values.  Delay embedding a scalar
series z of length m + L - 1 produces exactly such a matrix (entry (i, j)
is z[i + j]), and averaging the anti-diagonals of a general matrix is both
the Frobenius-nearest Hankel projection and the natural way to read a
series back out of an approximately Hankel matrix.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import InvalidDataError, ShapeError


def _as_matrix(z):
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={z.ndim}")
    if not np.all(np.isfinite(z)):
        raise InvalidDataError("matrix contains non-finite entries")
    return z


def hankel_from_series(z, L: int):
    """Delay-embed a scalar series: row i of the result is z[i : i + m].

    Parameters
    ----------
    z : 1-D array of length >= L
    L : number of lagged rows, >= 1

    Returns the L x (len(z) - L + 1) Hankel matrix with first column
    z[:L] and last row z[L-1:].
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise ShapeError(f"series must be 1-D, got ndim={z.ndim}")
    if not np.all(np.isfinite(z)):
        raise InvalidDataError("series contains non-finite values")
    if L < 1:
        raise ShapeError(f"L must be >= 1, got {L}")
    if z.size < L:
        raise ShapeError(f"series of length {z.size} is too short for L={L}")
    return scipy.linalg.hankel(z[:L], z[L - 1:])


def extract_latent(z_matrix):
    """Anti-diagonal means of an L x m matrix, as a series of length m + L - 1.

    For an exact Hankel matrix this inverts hankel_from_series.
    """
    z = _as_matrix(z_matrix)
    L, m = z.shape
    idx = np.add.outer(np.arange(L), np.arange(m))
    sums = np.bincount(idx.ravel(), weights=z.ravel(), minlength=L + m - 1)
    counts = np.bincount(idx.ravel(), minlength=L + m - 1)
    return sums / counts


def nearest_hankel(z_matrix):
    """Frobenius-nearest Hankel matrix: every anti-diagonal replaced by its mean.

    Orthogonal projection onto the subspace of Hankel matrices, hence
    idempotent and linear.
    """
    z = _as_matrix(z_matrix)
    L, m = z.shape
    means = extract_latent(z)
    idx = np.add.outer(np.arange(L), np.arange(m))
    return means[idx]


def is_hankel(z_matrix, tol: float = 0.0) -> bool:
    """True when every anti-diagonal is constant within tol (absolute)."""
    z = _as_matrix(z_matrix)
    return bool(np.max(np.abs(z - nearest_hankel(z)), initial=0.0) <= tol)
