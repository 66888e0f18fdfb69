"""Sparse-component cleanup: threshold, morphology, contour refinement.

A sparse column is turned into a foreground mask in three stages: a hard
threshold on magnitudes, an opening/closing/small-component sweep, and a
morphological active-contour pass that pushes the mask boundary outward
until it meets strong edges in a guide image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatchError, ThresholdOutOfRangeError
from .preprocess import gaussian_blur

# Edge-stopping function: g = 1 / (1 + EDGE_ALPHA * |grad(blur(guide))|^2),
# with the gradient taken as half the Sobel response. At that scale a step
# of contrast >= ~0.4 drives g below the default balloon gate (0.3) while a
# blurred step's far tails do not, so contours can approach an edge before
# stopping on it.
EDGE_ALPHA = 100.0
EDGE_BLUR_SIGMA = 2.0
_GRAD_SCALE = 0.5

# 3-pixel line segments through the center, used by the curvature-smoothing
# inf/sup operators.
_LINE_SEGMENTS = (
    np.array([[0, 0, 0], [1, 1, 1], [0, 0, 0]], dtype=bool),
    np.array([[0, 1, 0], [0, 1, 0], [0, 1, 0]], dtype=bool),
    np.eye(3, dtype=bool),
    np.flipud(np.eye(3, dtype=bool)),
)


@dataclass(frozen=True)
class PostprocessConfig:
    """Parameters for the threshold / morphology / contour chain.

    ``balloon`` > 0 is outward pressure; it only acts where the edge
    function exceeds ``abs(balloon)``, i.e. away from strong edges.
    """

    hard_threshold: float = 0.15
    opening_radius: int = 2
    closing_radius: int = 4
    min_component_area: int = 50
    contour_iterations: int = 50
    balloon: float = 0.3

    def __post_init__(self) -> None:
        if not 0.0 < self.hard_threshold < 1.0:
            raise ThresholdOutOfRangeError(
                f"hard_threshold must be in (0, 1), got {self.hard_threshold}"
            )
        if self.opening_radius < 0 or self.closing_radius < 0:
            raise ValueError("morphology radii must be >= 0")
        if self.min_component_area < 0:
            raise ValueError("min_component_area must be >= 0")
        if self.contour_iterations < 0:
            raise ValueError("contour_iterations must be >= 0")


def disk(radius: int) -> np.ndarray:
    """Disk structuring element: all offsets with dx^2 + dy^2 <= r^2."""
    r = int(radius)
    if r == 0:
        return np.ones((1, 1), dtype=bool)
    y, x = np.ogrid[-r : r + 1, -r : r + 1]
    return x * x + y * y <= r * r


def hard_threshold_mask(sparse_column: np.ndarray, t: float) -> np.ndarray:
    """Mark pixels whose sparse magnitude reaches ``t`` (entries are signed)."""
    if not 0.0 < t < 1.0:
        raise ThresholdOutOfRangeError(f"threshold must be in (0, 1), got {t}")
    return np.abs(np.asarray(sparse_column, dtype=np.float64)) >= t


def morphological_clean(mask: np.ndarray, cfg: PostprocessConfig) -> np.ndarray:
    """Opening, then closing, then removal of small connected components.

    Computed as if the mask were embedded in an all-false plane, so border
    behavior is independent of the window.
    """
    mask = np.asarray(mask, dtype=bool)
    out = mask
    if cfg.opening_radius > 0:
        elem = disk(cfg.opening_radius)
        out = ndimage.binary_dilation(ndimage.binary_erosion(out, elem), elem)
    if cfg.closing_radius > 0:
        elem = disk(cfg.closing_radius)
        pad = cfg.closing_radius + 1
        padded = np.pad(out, pad, mode="constant", constant_values=False)
        closed = ndimage.binary_erosion(ndimage.binary_dilation(padded, elem), elem)
        out = closed[pad:-pad, pad:-pad]
    if cfg.min_component_area > 0:
        labels, n = ndimage.label(out, structure=np.ones((3, 3), dtype=bool))
        if n:
            areas = np.bincount(labels.ravel())
            small = np.nonzero(areas < cfg.min_component_area)[0]
            out = out & ~np.isin(labels, small[small > 0])
    return out.copy() if out is mask else out


def edge_stopping(guide: np.ndarray) -> np.ndarray:
    """Inverse edge indicator of the guide image, in (0, 1]."""
    smooth = gaussian_blur(np.asarray(guide, dtype=np.float64), EDGE_BLUR_SIGMA)
    gx = ndimage.sobel(smooth, axis=1, mode="nearest") * _GRAD_SCALE
    gy = ndimage.sobel(smooth, axis=0, mode="nearest") * _GRAD_SCALE
    return 1.0 / (1.0 + EDGE_ALPHA * (gx * gx + gy * gy))


def _sup_inf(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    for seg in _LINE_SEGMENTS:
        out |= ndimage.binary_erosion(u, seg)
    return out


def _inf_sup(u: np.ndarray) -> np.ndarray:
    out = np.ones_like(u)
    for seg in _LINE_SEGMENTS:
        out &= ndimage.binary_dilation(u, seg)
    return out


def refine_contour(
    mask: np.ndarray, guide: np.ndarray, cfg: PostprocessConfig
) -> np.ndarray:
    """Morphological active-contour refinement of a mask against a guide.

    Each step applies the balloon force (a one-pixel dilation or erosion,
    gated to pixels where the edge function exceeds ``abs(balloon)``)
    followed by one curvature-smoothing pass. The inf/sup smoothing
    operators alternate order between steps to avoid directional bias.
    """
    mask = np.asarray(mask, dtype=bool)
    guide = np.asarray(guide, dtype=np.float64)
    if mask.shape != guide.shape:
        raise DimensionMismatchError(
            f"mask shape {mask.shape} != guide shape {guide.shape}"
        )
    if cfg.contour_iterations == 0:
        return mask.copy()

    u = mask.copy()
    g = edge_stopping(guide)
    balloon_zone = g > abs(cfg.balloon) if cfg.balloon != 0 else None
    dg_y, dg_x = np.gradient(g)
    for step in range(cfg.contour_iterations):
        if balloon_zone is not None:
            if cfg.balloon > 0:
                moved = ndimage.binary_dilation(u)
            else:
                moved = ndimage.binary_erosion(u)
            u[balloon_zone] = moved[balloon_zone]
        # Edge attraction: advect the boundary along grad(g) so it settles
        # in the valleys of g instead of being eroded away by smoothing.
        du_y, du_x = np.gradient(u.astype(np.float64))
        advect = dg_y * du_y + dg_x * du_x
        u[advect > 0] = True
        u[advect < 0] = False
        if step % 2 == 0:
            u = _sup_inf(_inf_sup(u))
        else:
            u = _inf_sup(_sup_inf(u))
    return u


def postprocess(
    sparse: np.ndarray, guides: list[np.ndarray], cfg: PostprocessConfig
) -> list[np.ndarray]:
    """Run the full chain on every column of a sparse matrix.

    ``sparse`` is p-by-n (or a FeatureMatrix); ``guides`` supplies one
    (height, width) frame per column, defining the reshape layout.
    """
    data = getattr(sparse, "data", sparse)
    data = np.asarray(data, dtype=np.float64)
    if not guides or data.shape[1] != len(guides):
        raise DimensionMismatchError(
            f"{data.shape[1]} sparse columns vs {len(guides)} guide frames"
        )
    shape = guides[0].shape
    if shape[0] * shape[1] != data.shape[0]:
        raise DimensionMismatchError(
            f"column length {data.shape[0]} does not reshape to {shape}"
        )
    masks = []
    for j, guide in enumerate(guides):
        if guide.shape != shape:
            raise DimensionMismatchError("guide frames differ in shape")
        m = hard_threshold_mask(data[:, j].reshape(shape), cfg.hard_threshold)
        m = morphological_clean(m, cfg)
        m = refine_contour(m, guide, cfg)
        masks.append(m)
    return masks
