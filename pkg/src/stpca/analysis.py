"""Downstream analysis of fitted latent embeddings.

Four groups of tools:

* SVD readouts: component time series of the Hankel-like projection
  (hankel_svd_projections) and a plain PCA baseline on the raw data.
* Curve distances: the discrete Frechet distance and its
  normalization-and-sign-invariant variant used to compare projection
  curves across noise levels.
* Fluctuation sweep: sliding-window stPCA fits that track the standard
  deviation of the latent series over time.
* Tipping detection: simple threshold rules on a fluctuation sweep.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .core import EmbeddingConfig, SeriesMatrix, fit_stpca
from .errors import InvalidDataError, ParameterError, ShapeError


@dataclass(eq=False)
class ProjectionSet:
    """Top components of an SVD readout.

    singular_values : top r singular values, non-increasing
    components : m x r matrix; column k is the k-th component time series
    directions : orthonormal left factors (one column per component)
    variance_proportions : squared singular values over the full spectrum,
        normalized to sum to one (length min of the matrix dimensions)
    """

    singular_values: np.ndarray
    components: np.ndarray
    directions: np.ndarray
    variance_proportions: np.ndarray


def _checked_matrix(z, name):
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={z.ndim}")
    if not np.all(np.isfinite(z)):
        raise InvalidDataError(f"{name} contains non-finite entries")
    return z


def hankel_svd_projections(z_matrix, r: int) -> ProjectionSet:
    """Top-r right-singular-vector time series of a projection matrix.

    For an L x m projection Z = U S R', column k of R is a time series of
    length m describing how strongly the k-th left pattern is expressed at
    each time point.  variance_proportions covers the full spectrum so it
    always sums to one.
    """
    z = _checked_matrix(z_matrix, "projection matrix")
    if not 1 <= r <= min(z.shape):
        raise ParameterError(
            f"r must lie in [1, {min(z.shape)}] for shape {z.shape}, got {r}"
        )
    u, s, vt = np.linalg.svd(z, full_matrices=False)
    total = float(np.sum(s * s))
    if total == 0.0:
        raise InvalidDataError("projection matrix is identically zero")
    return ProjectionSet(
        singular_values=s[:r].copy(),
        components=vt[:r].T.copy(),
        directions=u[:, :r].copy(),
        variance_proportions=(s * s) / total,
    )


def pca_baseline(x: SeriesMatrix, r: int) -> ProjectionSet:
    """Conventional PCA on the row-centered data, as a comparison point.

    components holds the top-r principal component score series (projection
    of the centered data onto each unit direction); directions holds the
    orthonormal loading vectors.
    """
    if not 1 <= r <= min(x.n, x.m):
        raise ParameterError(
            f"r must lie in [1, {min(x.n, x.m)}] for an {x.n} x {x.m} series, got {r}"
        )
    centered = x.values - x.values.mean(axis=1, keepdims=True)
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    total = float(np.sum(s * s))
    if total == 0.0:
        raise InvalidDataError("series is constant; PCA is undefined")
    scores = (s[:r, None] * vt[:r]).T
    return ProjectionSet(
        singular_values=s[:r].copy(),
        components=scores,
        directions=u[:, :r].copy(),
        variance_proportions=(s * s) / total,
    )


def _as_curve(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] < 1:
        raise ShapeError(f"{name} must be a non-empty (points x dims) array")
    if not np.all(np.isfinite(a)):
        raise InvalidDataError(f"{name} contains non-finite values")
    return a


def discrete_frechet(a, b) -> float:
    """Discrete Frechet distance between two polygonal curves.

    Curves are (points x dims) arrays (1-D input is treated as a curve in
    one dimension) with matching dims.  Uses the classic dynamic program of
    Eiter and Mannila with Euclidean point distances:

        c(i, j) = max(d(a_i, b_j), min(c(i-1, j), c(i-1, j-1), c(i, j-1)))

    Symmetric, non-negative, and satisfies the triangle inequality; it is a
    pseudo-metric because distinct curves can lie at distance zero.
    """
    a = _as_curve(a, "curve a")
    b = _as_curve(b, "curve b")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(
            f"curves live in different dimensions: {a.shape[1]} vs {b.shape[1]}"
        )
    d = cdist(a, b)
    p, q = d.shape
    c = np.empty_like(d)
    c[0, :] = np.maximum.accumulate(d[0, :])
    c[:, 0] = np.maximum.accumulate(d[:, 0])
    for i in range(1, p):
        ci = c[i]
        cp = c[i - 1]
        di = d[i]
        for j in range(1, q):
            ci[j] = max(di[j], min(cp[j], cp[j - 1], ci[j - 1]))
    return float(c[-1, -1])


def _zscore_curve(a):
    # Per coordinate, subtract the mean and divide by the sample SD.
    # Constant coordinates (or single-point curves) map to zero.
    if a.shape[0] < 2:
        return np.zeros_like(a)
    mean = a.mean(axis=0)
    sd = a.std(axis=0, ddof=1)
    out = np.zeros_like(a)
    ok = sd > 0.0
    out[:, ok] = (a[:, ok] - mean[ok]) / sd[ok]
    return out


def pcfd(a, b) -> float:
    """Principal-component Frechet distance between two curves.

    Both curves are z-scored per coordinate (sample SD; constant
    coordinates become zero), then the discrete Frechet distance is taken
    with the better of the two sign conventions:

        pcfd(a, b) = min(dfd(za, zb), dfd(-za, zb))

    This makes the comparison invariant to per-coordinate affine rescaling
    with positive slope and to an overall sign flip of either curve, which
    is exactly the freedom left open by SVD-based component extraction.
    """
    a = _as_curve(a, "curve a")
    b = _as_curve(b, "curve b")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(
            f"curves live in different dimensions: {a.shape[1]} vs {b.shape[1]}"
        )
    za = _zscore_curve(a)
    zb = _zscore_curve(b)
    return min(discrete_frechet(za, zb), discrete_frechet(-za, zb))


@dataclass(eq=False)
class FluctuationSweep:
    """Latent fluctuation sizes across sliding windows.

    positions : start column (0-based) of each window
    fl : sample standard deviation of the latent series fitted on each
        window, non-negative
    window_width, stride : the sweep geometry, in columns
    """

    positions: np.ndarray
    fl: np.ndarray
    window_width: int
    stride: int


def _window_fl(x: SeriesMatrix, cfg: EmbeddingConfig, start: int, width: int) -> float:
    sub = SeriesMatrix(x.values[:, start : start + width])
    fit = fit_stpca(sub, cfg)
    return float(np.std(fit.z_extended, ddof=1))


def fluctuation_sweep(
    x: SeriesMatrix,
    cfg: EmbeddingConfig,
    window_width: int,
    stride: int = 1,
    workers: int = 1,
) -> FluctuationSweep:
    """Fit stPCA on every sliding window and record the latent sample SD.

    Windows cover columns [start, start + window_width) for
    start = 0, stride, 2*stride, ... while they fit; each window is
    re-centered by its own fit.  The SD uses ddof=1 over the extended
    latent series (window_width + L - 1 values).

    workers > 1 runs the per-window fits on a thread pool; the output is
    identical to the sequential run because windows are independent and
    results are collected in order.
    """
    if window_width < cfg.L:
        raise ParameterError(
            f"window width {window_width} is smaller than L={cfg.L}"
        )
    if window_width > x.m:
        raise ParameterError(
            f"window width {window_width} exceeds the series length {x.m}"
        )
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    starts = np.arange(0, x.m - window_width + 1, stride)
    if workers > 1 and starts.size > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            fl = list(pool.map(lambda s: _window_fl(x, cfg, s, window_width), starts))
    else:
        fl = [_window_fl(x, cfg, s, window_width) for s in starts]
    return FluctuationSweep(
        positions=starts,
        fl=np.asarray(fl, dtype=float),
        window_width=window_width,
        stride=stride,
    )


def detect_tipping(
    sweep: FluctuationSweep,
    rule: str = "mean-exceed",
    *,
    factor: float = 3.0,
    baseline_len: int = 5,
) -> list[int]:
    """Indices (0-based, ascending) of windows flagged as anomalous.

    rule "mean-exceed" flags windows whose fluctuation strictly exceeds the
    mean over the whole sweep.  rule "fold-change" flags windows exceeding
    factor times the median of the first baseline_len windows; baseline_len
    must be at least 1 and smaller than the number of windows.  Both rules
    are invariant to rescaling all fluctuations by a positive constant.
    """
    fl = np.asarray(sweep.fl, dtype=float)
    if rule == "mean-exceed":
        mask = fl > fl.mean()
    elif rule == "fold-change":
        if factor <= 0:
            raise ParameterError(f"factor must be positive, got {factor}")
        if not 1 <= baseline_len < fl.size:
            raise ParameterError(
                f"baseline_len must lie in [1, {fl.size - 1}] for {fl.size} windows, "
                f"got {baseline_len}"
            )
        mask = fl > factor * np.median(fl[:baseline_len])
    else:
        raise ParameterError(f"unknown rule {rule!r}")
    return [int(i) for i in np.flatnonzero(mask)]
