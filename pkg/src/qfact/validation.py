"""Input validation helpers.

Small check_* functions in the style of scikit-learn's validation utilities:
each one coerces its input to a canonical ndarray form, verifies the
structural invariant, and raises a descriptive error otherwise.
"""

from __future__ import annotations

import numbers

import numpy as np

from .errors import DimensionMismatchError

MAX_DIM = 16

UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-10
STATE_NORM_TOL = 1e-12


def check_complex_vector(x, name="vector") -> np.ndarray:
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def check_state_vector(x, dim=None, name="state") -> np.ndarray:
    """Coerce to a unit-norm complex vector of length dim (2 <= dim <= 16)."""
    arr = check_complex_vector(x, name)
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatchError(
            f"{name} has dimension {arr.shape[0]}, expected {dim}")
    d = arr.shape[0]
    if not 2 <= d <= MAX_DIM:
        raise ValueError(f"{name} dimension must be in [2, {MAX_DIM}], got {d}")
    norm = np.linalg.norm(arr)
    if abs(norm - 1.0) > STATE_NORM_TOL:
        raise ValueError(f"{name} must have unit norm, got {norm!r}")
    return arr


def check_square_matrix(m, dim=None, name="matrix") -> np.ndarray:
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatchError(
            f"{name} has dimension {arr.shape[0]}, expected {dim}")
    return arr


def check_unitary(m, dim=None, tol=UNITARY_TOL, name="matrix") -> np.ndarray:
    arr = check_square_matrix(m, dim, name)
    d = arr.shape[0]
    defect = np.max(np.abs(arr.conj().T @ arr - np.eye(d)))
    if defect > tol:
        raise ValueError(
            f"{name} is not unitary within {tol} (defect {defect:.3e})")
    return arr


def check_hermitian(m, dim=None, tol=HERMITIAN_TOL, name="matrix") -> np.ndarray:
    arr = check_square_matrix(m, dim, name)
    defect = np.max(np.abs(arr - arr.conj().T))
    if defect > tol:
        raise ValueError(
            f"{name} is not Hermitian within {tol} (defect {defect:.3e})")
    return arr


def check_strictly_increasing(values, name="eigenvalues") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.diff(arr) > 0):
        raise ValueError(f"{name} must be strictly increasing (non-degenerate)")
    return arr


def check_probability_vector(p, tol=1e-10, name="probabilities") -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if np.any(arr < -tol):
        raise ValueError(f"{name} contains negative entries")
    total = arr.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"{name} must sum to 1 within {tol}, got {total!r}")
    return np.clip(arr, 0.0, None)


def check_rng(rng) -> np.random.Generator:
    """Accept a Generator, a seed, or None and return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, numbers.Integral):
        return np.random.default_rng(rng)
    raise TypeError(f"expected a numpy Generator or integer seed, got {type(rng)!r}")


def check_in_unit_interval(x, name) -> float:
    val = float(x)
    if not 0.0 < val < 1.0:
        raise ValueError(f"{name} must lie strictly inside (0, 1), got {val!r}")
    return val
