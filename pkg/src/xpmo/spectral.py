"""Low-frequency spectral descriptors of images.

Pipeline: grayscale -> unnormalized 2-D DFT -> centred magnitude -> square
crop around the DC bin -> row-major flatten. The DFT is evaluated separably
(row transforms, then column transforms) which is exact and fast enough for
desk-scale images; no FFT is involved.

All functions are pure; descriptor extraction parallelizes trivially over a
batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_CROP_RADIUS = 3


@dataclass
class ImageSample:
    """One image: (H, W, C) float64 pixels in [0, 1], C in {1, 3}.

    class_label and true_domain are simulation ground truth carried for
    evaluation only; nothing in the adaptation path reads them.
    """

    pixels: np.ndarray
    class_label: int | None = None
    true_domain: int | None = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim == 2:
            self.pixels = self.pixels[:, :, None]
        if self.pixels.ndim != 3 or self.pixels.shape[2] not in (1, 3):
            raise ValueError(f"pixels must be (H, W, 1|3), got {self.pixels.shape}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def validate(self) -> "ImageSample":
        if not np.all(np.isfinite(self.pixels)):
            raise ValueError("pixels must be finite")
        if self.pixels.min() < 0.0 or self.pixels.max() > 1.0:
            raise ValueError("pixels must lie in [0, 1]")
        return self


@dataclass
class SpectralDescriptor:
    """Flattened (2r+1) x (2r+1) low-frequency magnitude patch."""

    crop_radius: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        side = 2 * self.crop_radius + 1
        if self.values.shape != (side * side,):
            raise ValueError(f"descriptor must have length {side * side}, got {self.values.shape}")

    @property
    def side(self) -> int:
        return 2 * self.crop_radius + 1


def to_grayscale(img: ImageSample) -> np.ndarray:
    """Channel mean per pixel; single-channel input passes through."""
    if img.channels == 1:
        return img.pixels[:, :, 0]
    return img.pixels.mean(axis=2)


def _dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def dft2d(gray: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2-D DFT, computed separably.

    F(u, v) = sum_m sum_n x(m, n) exp(-j 2 pi (u m / H + v n / W)); row
    transforms first, then column transforms, O(HW(H+W)).
    """
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2 or gray.shape[0] < 1 or gray.shape[1] < 1:
        raise ValueError("input must be a non-empty 2-D matrix")
    h, w = gray.shape
    rows = gray @ _dft_matrix(w).T
    return _dft_matrix(h) @ rows


def centered_magnitude(spectrum: np.ndarray) -> np.ndarray:
    """Shift the DC bin to (floor(H/2), floor(W/2)) and take the modulus."""
    spectrum = np.asarray(spectrum)
    h, w = spectrum.shape
    return np.abs(np.roll(spectrum, (h // 2, w // 2), axis=(0, 1)))


def extract_descriptor(
    img: ImageSample,
    crop_radius: int = DEFAULT_CROP_RADIUS,
    log_compress: bool = False,
) -> SpectralDescriptor:
    """Low-frequency descriptor of one image.

    Crops the centred magnitude spectrum to a (2r+1)^2 patch around DC and
    flattens row-major. log_compress applies log(1 + m) entrywise, off by
    default; raw magnitudes follow the definition exactly.
    """
    side = 2 * crop_radius + 1
    if side > min(img.height, img.width):
        raise ValueError("crop exceeds spectrum")
    mag = centered_magnitude(dft2d(to_grayscale(img)))
    cr, cc = img.height // 2, img.width // 2
    patch = mag[cr - crop_radius : cr + crop_radius + 1, cc - crop_radius : cc + crop_radius + 1]
    values = patch.reshape(-1)
    if log_compress:
        values = np.log1p(values)
    return SpectralDescriptor(crop_radius, values)


def batch_descriptors(
    images: list[ImageSample],
    crop_radius: int = DEFAULT_CROP_RADIUS,
    log_compress: bool = False,
) -> np.ndarray:
    """Stack descriptors of a batch into a (B, d) matrix."""
    if not images:
        raise ValueError("empty batch")
    return np.stack([extract_descriptor(im, crop_radius, log_compress).values for im in images])
