"""Feature layers and data-matrix assembly.

The texture layer is an 8-neighbor local binary pattern; the color layer is
the (pre-processed) grayscale image itself. The two are blended per pixel
with a weight ``beta`` and the blended frames become the columns of the
matrix handed to the decomposition solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ImageTooSmallError, TooFewFramesError

# Row/col offsets of the 8 neighbors, clockwise from the top-left; bit k of
# the pattern code gets weight 2**k in this order.
NEIGHBOR_OFFSETS = (
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
)


@dataclass(frozen=True)
class FeatureMatrix:
    """A p-by-n data matrix whose columns are flattened frames."""

    data: np.ndarray
    width: int
    height: int

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def column_image(self, j: int) -> np.ndarray:
        """Reshape column ``j`` back into its (height, width) frame."""
        return self.data[:, j].reshape(self.height, self.width)


def validate_beta(beta: float) -> float:
    beta = float(beta)
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    return beta


def lbp(img: np.ndarray) -> np.ndarray:
    """8-neighbor, radius-1 local binary pattern, scaled to [0, 1].

    Bit k is set when the k-th neighbor (clockwise from the top-left) is >=
    the center pixel; ties set the bit, so a constant image codes to 255
    everywhere. Borders are handled by edge replication and the 8-bit code
    is divided by 255.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if h < 3 or w < 3:
        raise ImageTooSmallError(f"lbp needs at least 3x3 pixels, got {w}x{h}")
    padded = np.pad(img, 1, mode="edge")
    code = np.zeros((h, w), dtype=np.uint16)
    for k, (dr, dc) in enumerate(NEIGHBOR_OFFSETS):
        neighbor = padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
        code |= (neighbor >= img).astype(np.uint16) << k
    return code.astype(np.float64) / 255.0


def fuse_layers(texture: np.ndarray, color: np.ndarray, beta: float) -> np.ndarray:
    """Per-pixel blend ``beta * texture + (1 - beta) * color``."""
    beta = validate_beta(beta)
    texture = np.asarray(texture, dtype=np.float64)
    color = np.asarray(color, dtype=np.float64)
    if texture.shape != color.shape:
        raise DimensionMismatchError(
            f"layer shapes differ: {texture.shape} vs {color.shape}"
        )
    return beta * texture + (1.0 - beta) * color


def assemble_matrix(frames: list[np.ndarray]) -> FeatureMatrix:
    """Stack frames as columns: column j is frame j flattened row-major."""
    if len(frames) < 2:
        raise TooFewFramesError(f"need at least 2 frames, got {len(frames)}")
    shape = frames[0].shape
    for i, f in enumerate(frames):
        if f.shape != shape:
            raise DimensionMismatchError(
                f"frame {i} has shape {f.shape}, expected {shape}"
            )
    h, w = shape
    data = np.column_stack([np.asarray(f, dtype=np.float64).ravel() for f in frames])
    return FeatureMatrix(data=data, width=w, height=h)
