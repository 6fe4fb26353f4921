"""Numerics foundation: stable primitives, Cholesky, finite differences, tape."""

from xpmo.numerics.fd import finite_difference_gradient
from xpmo.numerics.linalg import (
    NotPositiveDefiniteError,
    cholesky_decompose,
    log_sum_exp,
    solve_lower_triangular,
    stable_softmax,
)
from xpmo.numerics import tape

__all__ = [
    "NotPositiveDefiniteError",
    "cholesky_decompose",
    "finite_difference_gradient",
    "log_sum_exp",
    "solve_lower_triangular",
    "stable_softmax",
    "tape",
]
