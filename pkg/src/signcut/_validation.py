"""Input validation helpers shared by the estimators and free functions."""

import numbers

import numpy as np


def check_tensor(X, *, min_order=1, max_order=None, name="X"):
    """Validate a dense real tensor and return it as a float64 ndarray.

    Lower precision inputs are widened. Empty axes, NaN and Inf are rejected.
    """
    arr = np.asarray(X)
    if arr.dtype == object or not (
        np.issubdtype(arr.dtype, np.number) or arr.dtype == bool
    ):
        raise TypeError(f"{name} must be numeric, got dtype {arr.dtype}")
    if np.iscomplexobj(arr):
        raise TypeError(f"{name} must be real-valued")
    if arr.ndim < min_order:
        raise ValueError(f"{name} must have order >= {min_order}, got {arr.ndim}")
    if max_order is not None and arr.ndim > max_order:
        raise ValueError(f"{name} must have order <= {max_order}, got {arr.ndim}")
    if arr.size == 0 or any(n == 0 for n in arr.shape):
        raise ValueError(f"{name} has an empty axis: shape {arr.shape}")
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or infinite values")
    return arr


def check_matrix(X, name="A"):
    return check_tensor(X, min_order=2, max_order=2, name=name)


def check_vector(x, name="x"):
    return check_tensor(x, min_order=1, max_order=1, name=name)


def check_count(value, name, *, minimum=0):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)
