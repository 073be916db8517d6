"""Input validation helpers used by the public entry points."""

from __future__ import annotations

import numpy as np

from .exceptions import InputError


def as_float_matrix(values, name: str = "X") -> np.ndarray:
    """Coerce to a 2-d float64 array with finite entries, at least 2 rows."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise InputError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise InputError(f"{name} needs at least 2 rows, got {arr.shape[0]}")
    if arr.shape[1] < 1:
        raise InputError(f"{name} needs at least 1 column")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise InputError(
            f"{name} contains a non-finite value at row {bad[0]}, column {bad[1]}"
        )
    return arr


def check_distance_matrix(dist, name: str = "distances") -> np.ndarray:
    """Validate a square symmetric non-negative matrix with zero diagonal."""
    arr = np.asarray(dist, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InputError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    if np.any(arr < 0):
        raise InputError(f"{name} contains negative entries")
    if not np.allclose(arr, arr.T, rtol=0.0, atol=1e-12):
        raise InputError(f"{name} is not symmetric")
    if np.any(np.diag(arr) != 0.0):
        raise InputError(f"{name} has a nonzero diagonal")
    return arr


def check_labels(labels, n: int | None = None, name: str = "labels") -> np.ndarray:
    """Validate a 1-d integer label vector with values in 1..G covering every value."""
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise InputError(f"{name} must be 1-dimensional")
    if arr.size == 0:
        raise InputError(f"{name} is empty")
    if not np.issubdtype(arr.dtype, np.integer):
        cast = arr.astype(np.int64, casting="unsafe")
        if not np.array_equal(cast, arr):
            raise InputError(f"{name} must be integers")
        arr = cast
    arr = arr.astype(np.int64)
    if n is not None and arr.size != n:
        raise InputError(f"{name} has length {arr.size}, expected {n}")
    top = int(arr.max())
    if arr.min() < 1 or top < 1:
        raise InputError(f"{name} must use labels in 1..G")
    present = np.unique(arr)
    if present.size != top:
        missing = sorted(set(range(1, top + 1)) - set(present.tolist()))
        raise InputError(f"{name} skips label(s) {missing}")
    return arr


def check_fraction(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 < value <= 1.0:
        raise InputError(f"{name} must lie in (0, 1], got {value}")
    return value


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    try:
        out = int(value)
    except (TypeError, ValueError):
        raise InputError(f"{name} must be an integer, got {value!r}") from None
    if out != value or out < minimum:
        raise InputError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return out


def check_seed(value, name: str = "seed") -> int:
    try:
        out = int(value)
    except (TypeError, ValueError):
        raise InputError(f"{name} must be a non-negative integer") from None
    if out < 0:
        raise InputError(f"{name} must be non-negative, got {out}")
    return out
