"""Input validation helpers used by the estimators and the functional API."""

import numpy as np


def as_float_array(x, name, ndim=None):
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be a {ndim}-d array, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_sample_pair(U, F):
    """Validate a paired sample matrix (one row per sample, one column per point)."""
    U = as_float_array(U, "U", ndim=2)
    F = as_float_array(F, "F", ndim=2)
    if U.shape != F.shape:
        raise ValueError(f"U and F must have identical shapes, got {U.shape} vs {F.shape}")
    if U.shape[0] == 0:
        raise ValueError("need at least one sample")
    return U, F


def check_scalar(name, value, *, low=None, high=None, low_open=False, high_open=False):
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite")
    if low is not None and (value <= low if low_open else value < low):
        op = ">" if low_open else ">="
        raise ValueError(f"{name} must be {op} {low}, got {value}")
    if high is not None and (value >= high if high_open else value > high):
        op = "<" if high_open else "<="
        raise ValueError(f"{name} must be {op} {high}, got {value}")
    return value


def check_int(name, value, *, low=None, high=None):
    if value != int(value):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if low is not None and value < low:
        raise ValueError(f"{name} must be >= {low}, got {value}")
    if high is not None and value > high:
        raise ValueError(f"{name} must be <= {high}, got {value}")
    return value
