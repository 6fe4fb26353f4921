"""Dense float64 linear algebra primitives.

Matrices throughout the package are C-contiguous numpy float64 arrays.
Everything here is pure, allocation-per-call, and safe to use from
multiple threads.
"""

from __future__ import annotations

import numpy as np


class NotPositiveDefiniteError(ValueError):
    """Raised when a Cholesky pivot is not strictly positive."""


def stable_softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax with max subtraction; overflow-free for logits up to +-1e4.

    Accepts a 1-D vector or a 2-D array (softmax along the last axis).
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.size == 0:
        raise ValueError("empty logits")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_sum_exp(values: np.ndarray) -> float:
    """log(sum(exp(values))) evaluated without overflow."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty input")
    m = float(values.max())
    return m + float(np.log(np.exp(values - m).sum()))


def cholesky_decompose(a: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L @ L.T == a for symmetric positive-definite a.

    Raises NotPositiveDefiniteError when a pivot is <= 0, so the caller can
    increase shrinkage and retry.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(1.0, float(np.abs(a).max())) if a.size else 1.0
    if a.size and float(np.abs(a - a.T).max()) > 1e-9 * scale:
        raise ValueError("matrix must be symmetric")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("not positive definite") from exc


def solve_lower_triangular(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Forward substitution for L y = b with L lower-triangular."""
    from scipy.linalg import solve_triangular

    return solve_triangular(lower, b, lower=True, check_finite=False)
