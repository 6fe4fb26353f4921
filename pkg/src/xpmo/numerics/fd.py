"""Central finite differences, the independent oracle for the gradient tape."""

from __future__ import annotations

from typing import Callable

import numpy as np


def finite_difference_gradient(
    f: Callable[[np.ndarray], float],
    theta: np.ndarray,
    h: float = 1e-5,
) -> np.ndarray:
    """Central-difference gradient (f(x+h e_k) - f(x-h e_k)) / 2h per coordinate.

    f must treat its argument as read-only; it is called 2n times on a
    private copy of theta.
    """
    theta = np.array(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    flat = theta.ravel()
    gflat = grad.ravel()
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        up = float(f(theta))
        flat[k] = orig - h
        down = float(f(theta))
        flat[k] = orig
        gflat[k] = (up - down) / (2.0 * h)
    return grad
