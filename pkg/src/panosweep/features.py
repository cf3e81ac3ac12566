"""Matching descriptors used in place of learned features.

Three descriptor kinds over ERP images (all longitude-wrapped in u,
edge-replicated in v):

  - ``rgb``: the three color channels as-is.
  - ``census5x5``: 24 channels, one per non-center pixel of a 5x5
    window, holding 2.0 where the neighbor's luminance exceeds the
    center and 0.0 otherwise.  A constant image yields the all-zero
    signature; the 0/2 encoding makes a single differing bit between
    two views contribute unit variance, so mean-channel variance of a
    stereo pair equals Hamming distance / 24.
  - ``zncc5x5``: the 5x5 luminance patch, mean-subtracted and
    L2-normalized (zero vector for flat patches).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .images import ErpImage

DESCRIPTOR_KINDS = ("rgb", "census5x5", "zncc5x5")

_WINDOW_RADIUS = {"rgb": 0, "census5x5": 2, "zncc5x5": 2}


@dataclass
class FeatureMap:
    """H x W x F raster of matching descriptors."""

    values: np.ndarray  # (H, W, F) float32
    kind: str

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


def descriptor_window_radius(kind: str) -> int:
    if kind not in _WINDOW_RADIUS:
        raise ConfigError(f"unknown descriptor kind {kind!r}")
    return _WINDOW_RADIUS[kind]


def _shifted(gray: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Neighbor raster: wrap in u, replicate edge rows in v."""
    out = np.roll(gray, -dx, axis=1)
    if dy > 0:
        out = np.concatenate([out[dy:], np.repeat(out[-1:], dy, axis=0)], axis=0)
    elif dy < 0:
        out = np.concatenate([np.repeat(out[:1], -dy, axis=0), out[:dy]], axis=0)
    return out


def extract_features(img: ErpImage, kind: str = "census5x5") -> FeatureMap:
    """Compute a descriptor raster for one view."""
    if kind not in DESCRIPTOR_KINDS:
        raise ConfigError(f"unknown descriptor kind {kind!r}")
    if kind == "rgb":
        return FeatureMap(img.pixels.astype(np.float32), kind)

    gray = img.gray()
    offsets = [(dy, dx) for dy in range(-2, 3) for dx in range(-2, 3)]
    if kind == "census5x5":
        offsets.remove((0, 0))
        vals = np.empty((img.height, img.width, 24), dtype=np.float32)
        for k, (dy, dx) in enumerate(offsets):
            vals[..., k] = (_shifted(gray, dy, dx) > gray) * 2.0
        return FeatureMap(vals, kind)

    # zncc5x5: normalized patch vector
    vals = np.empty((img.height, img.width, 25), dtype=np.float32)
    for k, (dy, dx) in enumerate(offsets):
        vals[..., k] = _shifted(gray, dy, dx)
    vals -= vals.mean(axis=2, keepdims=True)
    norm = np.sqrt((vals * vals).sum(axis=2, keepdims=True))
    with np.errstate(invalid="ignore"):
        vals = np.where(norm > 1e-8, vals / norm, 0.0).astype(np.float32)
    return FeatureMap(vals, kind)


def erode_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    """Shrink a validity mask by the descriptor window radius.

    A pixel stays valid only if the full window around it is valid
    (wrapping in u, replicating in v), so descriptors built from
    partially invalid windows are excluded from matching.
    """
    if radius <= 0:
        return mask.astype(bool)
    out = mask.astype(bool).copy()
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if dy == 0 and dx == 0:
                continue
            out &= _shifted(mask.astype(np.float64), dy, dx) > 0.5
    return out
