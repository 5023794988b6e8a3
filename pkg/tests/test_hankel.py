"""Hankel construction, anti-diagonal averaging, and nearest-Hankel tests."""

import numpy as np
import pytest

from stpca import (
    ShapeError,
    extract_latent,
    hankel_from_series,
    is_hankel,
    nearest_hankel,
)


def test_hankel_from_series_layout():
    z = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    h = hankel_from_series(z, 3)
    assert h.shape == (3, 3)
    assert np.array_equal(h, [[1, 2, 3], [2, 3, 4], [3, 4, 5]])
    assert is_hankel(h)


def test_hankel_from_series_validation():
    with pytest.raises(ShapeError):
        hankel_from_series(np.arange(4.0), 0)
    with pytest.raises(ShapeError):
        hankel_from_series(np.arange(3.0), 4)


def test_round_trip_series_to_matrix_and_back():
    rng = np.random.default_rng(31)
    for _ in range(30):
        length = int(rng.integers(1, 40))
        L = int(rng.integers(1, length + 1))
        z = rng.standard_normal(length)
        h = hankel_from_series(z, L)
        assert h.shape == (L, length - L + 1)
        assert np.allclose(extract_latent(h), z, rtol=0.0, atol=1e-12)


def test_extract_latent_hand_case():
    z = np.array([[0.0, 0.0], [1.0, 0.0]])
    # anti-diagonals: {0}, {0, 1}, {0} -> means (0, 0.5, 0)
    assert np.array_equal(extract_latent(z), [0.0, 0.5, 0.0])
    assert np.array_equal(nearest_hankel(z), [[0.0, 0.5], [0.5, 0.0]])


def test_nearest_hankel_is_idempotent():
    rng = np.random.default_rng(32)
    for _ in range(20):
        a = rng.standard_normal((int(rng.integers(1, 8)), int(rng.integers(1, 8))))
        once = nearest_hankel(a)
        assert is_hankel(once, tol=1e-12)
        assert np.allclose(nearest_hankel(once), once, atol=1e-12)


def test_nearest_hankel_is_frobenius_projection():
    rng = np.random.default_rng(33)
    a = rng.standard_normal((5, 7))
    best = nearest_hankel(a)
    base = np.linalg.norm(a - best)
    for _ in range(100):
        z = rng.standard_normal(5 + 7 - 1)
        competitor = hankel_from_series(z, 5)
        assert np.linalg.norm(a - competitor) >= base - 1e-12


def test_is_hankel_detects_violations():
    good = hankel_from_series(np.arange(6.0), 2)
    assert is_hankel(good)
    bad = good.copy()
    bad[1, 0] += 1e-6
    assert not is_hankel(bad)
    assert is_hankel(bad, tol=1e-3)


def test_single_row_and_column_matrices():
    row = np.array([[1.0, 2.0, 3.0]])
    assert np.array_equal(extract_latent(row), [1.0, 2.0, 3.0])
    col = np.array([[1.0], [2.0], [3.0]])
    assert np.array_equal(extract_latent(col), [1.0, 2.0, 3.0])
    assert is_hankel(row) and is_hankel(col)
