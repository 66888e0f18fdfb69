"""Image and manifest loading.

Images are handled as 2-D ``float64`` arrays of shape ``(height, width)``
with values in ``[0, 1]``; binary masks as 2-D ``bool`` arrays. Sizes are
passed around as ``(width, height)`` tuples to match the manifest and CLI
conventions.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    DecodeError,
    EmptySequenceError,
    ManifestParseError,
    MissingFileError,
    ZeroSizeError,
)

# ITU-R BT.601 luma weights used for the color-to-gray transform, kept as
# integers over 1000 so a pure-white pixel maps to exactly 1.0.
LUMA_WEIGHTS = (299, 587, 114)
_LUMA_SCALE = 1000.0


class SequenceKind(Enum):
    DAY = "day"
    NIGHT = "night"


@dataclass(frozen=True)
class FrameEntry:
    image_path: str
    gt_path: Optional[str] = None
    timestamp: Optional[str] = None


@dataclass(frozen=True)
class SequenceManifest:
    """An ordered image sequence, optionally paired with ground truth."""

    sequence_id: str
    kind: SequenceKind
    frames: tuple[FrameEntry, ...] = field(default_factory=tuple)


def load_manifest(path: str) -> SequenceManifest:
    """Read and validate a JSON sequence manifest.

    Relative frame paths are resolved against the manifest's directory.
    Unknown fields in the document are ignored. Raises
    :class:`MissingFileError`, :class:`ManifestParseError`, or
    :class:`EmptySequenceError`.
    """
    if not os.path.isfile(path):
        raise MissingFileError(f"manifest not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestParseError(f"{path}: invalid JSON ({exc})") from exc

    if not isinstance(doc, dict):
        raise ManifestParseError(f"{path}: manifest must be a JSON object")
    try:
        sequence_id = doc["sequence_id"]
        kind_raw = doc["kind"]
        frames_raw = doc["frames"]
    except KeyError as exc:
        raise ManifestParseError(f"{path}: missing field {exc}") from exc

    if not isinstance(sequence_id, str) or not sequence_id:
        raise ManifestParseError(f"{path}: sequence_id must be a non-empty string")
    try:
        kind = SequenceKind(kind_raw)
    except ValueError:
        raise ManifestParseError(
            f"{path}: kind must be 'day' or 'night', got {kind_raw!r}"
        ) from None
    if not isinstance(frames_raw, list):
        raise ManifestParseError(f"{path}: frames must be an array")
    if not frames_raw:
        raise EmptySequenceError(f"{path}: manifest declares no frames")

    base = os.path.dirname(os.path.abspath(path))

    def resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base, p)

    frames = []
    seen: set[str] = set()
    for i, entry in enumerate(frames_raw):
        if not isinstance(entry, dict) or "image" not in entry:
            raise ManifestParseError(f"{path}: frame {i} must be an object with 'image'")
        image = entry["image"]
        if not isinstance(image, str) or not image:
            raise ManifestParseError(f"{path}: frame {i} has a bad 'image' field")
        if image in seen:
            raise ManifestParseError(f"{path}: duplicate image path {image!r}")
        seen.add(image)
        gt = entry.get("gt")
        if gt is not None and not isinstance(gt, str):
            raise ManifestParseError(f"{path}: frame {i} has a bad 'gt' field")
        ts = entry.get("timestamp")
        if ts is not None and not isinstance(ts, str):
            raise ManifestParseError(f"{path}: frame {i} has a bad 'timestamp' field")
        frames.append(
            FrameEntry(
                image_path=resolve(image),
                gt_path=resolve(gt) if gt else None,
                timestamp=ts,
            )
        )
    return SequenceManifest(sequence_id=sequence_id, kind=kind, frames=tuple(frames))


def _open_image(path: str) -> Image.Image:
    if not os.path.isfile(path):
        raise MissingFileError(f"image not found: {path}")
    try:
        img = Image.open(path)
        img.load()
    except UnidentifiedImageError as exc:
        raise DecodeError(f"cannot decode image: {path}") from exc
    except OSError as exc:
        raise DecodeError(f"cannot decode image: {path} ({exc})") from exc
    return img


def _check_size(working_size: tuple[int, int]) -> tuple[int, int]:
    w, h = int(working_size[0]), int(working_size[1])
    if w <= 0 or h <= 0:
        raise ZeroSizeError(f"working size must be positive, got {working_size}")
    return w, h


def load_image(path: str, working_size: tuple[int, int]) -> np.ndarray:
    """Load a PNG/JPEG image as grayscale in [0, 1] at ``working_size``.

    Color inputs are reduced with BT.601 luma weights; resampling is
    bilinear. Re-loading at an image's own size is exact.
    """
    w, h = _check_size(working_size)
    img = _open_image(path)
    rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    gray = rgb @ np.asarray(LUMA_WEIGHTS, dtype=np.float64) / _LUMA_SCALE
    if gray.shape != (h, w):
        resized = Image.fromarray(gray.astype(np.float32), mode="F").resize(
            (w, h), Image.Resampling.BILINEAR
        )
        gray = np.asarray(resized, dtype=np.float64)
    return np.clip(gray, 0.0, 1.0)


def nearest_resize(mask: np.ndarray, working_size: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor resample of a 2-D array using pixel-center mapping."""
    w, h = _check_size(working_size)
    src_h, src_w = mask.shape
    if (src_w, src_h) == (w, h):
        return mask.copy()
    rows = np.minimum((np.arange(h) + 0.5) * src_h / h, src_h - 1).astype(np.int64)
    cols = np.minimum((np.arange(w) + 0.5) * src_w / w, src_w - 1).astype(np.int64)
    return mask[np.ix_(rows, cols)]


def load_mask(path: str, working_size: tuple[int, int]) -> np.ndarray:
    """Load a ground-truth mask as a boolean array at ``working_size``.

    Pixels are binarized at half of full scale before a nearest-neighbor
    resample, so the output stays strictly two-valued.
    """
    w, h = _check_size(working_size)
    img = _open_image(path)
    gray = np.asarray(img.convert("L"), dtype=np.uint8)
    binary = gray >= 128
    return nearest_resize(binary, (w, h))


def save_mask(mask: np.ndarray, path: str) -> None:
    """Write a boolean mask as an 8-bit PNG with values {0, 255}."""
    data = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path, format="PNG")


def save_image(img: np.ndarray, path: str) -> None:
    """Write a [0, 1] grayscale image as an 8-bit PNG."""
    data = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.rint(data * 255).astype(np.uint8), mode="L").save(
        path, format="PNG"
    )
