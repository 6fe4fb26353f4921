"""Brute-force spectral pipeline oracles.

direct_dft2d evaluates the full double sum per output bin, O((HW)^2), with no
row/column factorization; direct_descriptor composes it with an explicit
shift, crop, and flatten. These stay independent of the package's separable
implementation.
"""

from __future__ import annotations

import numpy as np


def direct_dft2d(gray: np.ndarray) -> np.ndarray:
    gray = np.asarray(gray, dtype=np.float64)
    h, w = gray.shape
    m, n = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    out = np.empty((h, w), dtype=np.complex128)
    for u in range(h):
        for v in range(w):
            phase = np.exp(-2j * np.pi * (u * m / h + v * n / w))
            out[u, v] = (gray * phase).sum()
    return out


def direct_descriptor(pixels: np.ndarray, crop_radius: int) -> np.ndarray:
    gray = pixels.mean(axis=2) if pixels.shape[2] == 3 else pixels[:, :, 0]
    h, w = gray.shape
    spectrum = direct_dft2d(gray)
    shifted = np.empty_like(spectrum)
    for u in range(h):
        for v in range(w):
            shifted[(u + h // 2) % h, (v + w // 2) % w] = spectrum[u, v]
    mag = np.abs(shifted)
    cr, cc = h // 2, w // 2
    patch = mag[cr - crop_radius : cr + crop_radius + 1, cc - crop_radius : cc + crop_radius + 1]
    return patch.reshape(-1)
