"""Pre-processing pipelines: histogram equalization and Gaussian filtering.

Both operate on 2-D grayscale arrays in [0, 1] and preserve shape. One of
the two pipelines is selected per image, typically by sequence kind (day
sequences get equalization, night sequences get the Gaussian filter).
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import NonPositiveSigmaError

N_LEVELS = 256
DEFAULT_SIGMA = 1.0


class PipelineKind(Enum):
    EQUALIZE_ONLY = "equalize"
    GAUSSIAN_ONLY = "gaussian"


def equalize_histogram(img: np.ndarray) -> np.ndarray:
    """Equalize intensities over a 256-bin histogram.

    Uses the discrete CDF mapping ``(cdf(v) - cdf_min) / (N - cdf_min)``
    where ``cdf_min`` is the CDF at the lowest occupied bin. The mapping is
    monotone non-decreasing; a constant image maps to all zeros.
    """
    img = np.asarray(img, dtype=np.float64)
    bins = np.rint(img * (N_LEVELS - 1)).astype(np.int64)
    counts = np.bincount(bins.ravel(), minlength=N_LEVELS)
    cdf = np.cumsum(counts)
    occupied = np.nonzero(counts)[0]
    cdf_min = cdf[occupied[0]]
    denom = cdf[-1] - cdf_min
    if denom == 0:
        return np.zeros_like(img)
    mapping = (cdf - cdf_min) / denom
    return mapping[bins]


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian kernel of radius ceil(3*sigma)."""
    if sigma <= 0:
        raise NonPositiveSigmaError(f"sigma must be > 0, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with edge replication at the borders."""
    if sigma <= 0:
        raise NonPositiveSigmaError(f"sigma must be > 0, got {sigma}")
    img = np.asarray(img, dtype=np.float64)
    radius = math.ceil(3.0 * sigma)
    out = gaussian_filter1d(img, sigma, axis=0, mode="nearest", radius=radius)
    out = gaussian_filter1d(out, sigma, axis=1, mode="nearest", radius=radius)
    # The kernel is a convex combination; clamp float drift so the output
    # range never exceeds the input range.
    return np.clip(out, img.min(), img.max())


def run_pipeline(
    img: np.ndarray, kind: PipelineKind, sigma: float = DEFAULT_SIGMA
) -> np.ndarray:
    """Apply the selected pre-processing pipeline to one image."""
    if kind is PipelineKind.EQUALIZE_ONLY:
        return equalize_histogram(img)
    if kind is PipelineKind.GAUSSIAN_ONLY:
        return gaussian_blur(img, sigma)
    raise ValueError(f"unknown pipeline kind: {kind!r}")
