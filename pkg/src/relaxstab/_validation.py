"""Input validation helpers shared by the functional API and the estimators."""

import numpy as np
from sklearn.utils import check_array


def as_matrix(M, name, shape=None):
    """Return ``M`` as a finite 2-D float array, optionally of a fixed shape."""
    arr = check_array(M, ensure_2d=True, dtype=np.float64,
                      ensure_min_samples=1, ensure_min_features=1,
                      input_name=name)
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    return arr


def as_square(M, name, n=None):
    arr = as_matrix(M, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} must be {n}x{n}, got {arr.shape}")
    return arr


def as_unit_normal(normal, atol=1e-12):
    n = np.asarray(normal, dtype=np.float64).reshape(-1)
    if n.shape != (2,):
        raise ValueError(f"normal must be a 2-vector, got shape {n.shape}")
    if not np.all(np.isfinite(n)) or abs(np.hypot(*n) - 1.0) > atol:
        raise ValueError(f"normal must be a unit vector, got {tuple(n)}")
    return n


def check_states(U, N, name="U"):
    """Validate a batch of states of shape (n_samples, N)."""
    arr = check_array(U, ensure_2d=True, dtype=np.float64, input_name=name)
    if arr.shape[1] != N:
        raise ValueError(f"{name} must have {N} columns, got {arr.shape[1]}")
    return arr
