"""Raster containers and bilinear sampling on ERP images.

Sampling follows the continuous pixel convention of :mod:`panosweep.geometry`:
array element (i, j) holds the sample at continuous coordinates
(u, v) = (j + 0.5, i + 0.5), u wraps modulo width, v is clamped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass
class ErpImage:
    """Equirectangular RGB raster, channels in [0, 1], width = 2 * height."""

    pixels: np.ndarray  # (H, W, 3) float

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.ndim != 3 or p.shape[2] != 3:
            raise ConfigError(f"ErpImage expects (H, W, 3) pixels, got {p.shape}")
        if p.shape[1] != 2 * p.shape[0]:
            raise ConfigError(f"ErpImage needs width = 2*height, got {p.shape[1]}x{p.shape[0]}")
        if not np.all(np.isfinite(p)):
            raise ConfigError("ErpImage pixels must be finite")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ConfigError("ErpImage channels must lie in [0, 1]")
        self.pixels = p

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def gray(self) -> np.ndarray:
        """Rec.601 luminance, shape (H, W)."""
        r, g, b = self.pixels[..., 0], self.pixels[..., 1], self.pixels[..., 2]
        return 0.299 * r + 0.587 * g + 0.114 * b


@dataclass
class DepthMap:
    """Per-pixel radial distance raster with validity mask and range."""

    depth: np.ndarray  # (H, W) float, meters
    valid: np.ndarray  # (H, W) bool
    d_min: float
    d_max: float

    def __post_init__(self):
        self.depth = np.asarray(self.depth)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.depth.shape != self.valid.shape or self.depth.ndim != 2:
            raise ConfigError("DepthMap depth and valid must be matching 2D rasters")
        if not (0 < self.d_min < self.d_max):
            raise ConfigError(f"DepthMap needs 0 < d_min < d_max, got [{self.d_min}, {self.d_max}]")
        dv = self.depth[self.valid]
        if dv.size and (dv.min() < self.d_min - 1e-9 or dv.max() > self.d_max + 1e-9):
            raise ConfigError("valid DepthMap pixels must lie within [d_min, d_max]")

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]


@dataclass
class PerspImage:
    """Pinhole crop of an ERP image."""

    pixels: np.ndarray  # (H, W, 3) float
    fov_deg: float
    yaw: float = 0.0
    pitch: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.fov_deg < 180.0):
            raise ConfigError(f"fov_deg must lie in (0, 180), got {self.fov_deg}")
        self.pixels = np.asarray(self.pixels, dtype=np.float64)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def bilinear_wrap(values: np.ndarray, u, v):
    """Bilinearly sample a raster at continuous ERP coordinates.

    ``values`` is (H, W) or (H, W, C); u wraps modulo W, v is clamped to
    the valid support.  Returns (samples, in_range) where in_range marks
    points whose full 2x2 support lies inside the row range.
    """
    h, w = values.shape[:2]
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    x = np.mod(u, w) - 0.5
    y = v - 0.5
    in_range = (y >= 0.0) & (y <= h - 1)

    x0 = np.floor(x).astype(np.int64)
    fx = x - x0
    x0 = np.mod(x0, w)
    x1 = np.mod(x0 + 1, w)
    yc = np.clip(y, 0.0, h - 1)
    y0 = np.floor(yc).astype(np.int64)
    y0 = np.minimum(y0, h - 2) if h > 1 else y0
    fy = yc - y0
    y1 = y0 + 1

    v00 = values[y0, x0]
    v01 = values[y0, x1]
    v10 = values[y1, x0]
    v11 = values[y1, x1]
    if values.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    out = top * (1.0 - fy) + bot * fy
    return out, in_range


def constant_image(height: int, width: int, color) -> ErpImage:
    pix = np.empty((height, width, 3), dtype=np.float64)
    pix[:] = np.asarray(color, dtype=np.float64)
    return ErpImage(pix)
