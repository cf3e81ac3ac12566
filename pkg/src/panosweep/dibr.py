"""Depth-image-based rendering: forward splatting with soft z-buffering.

Synthesizes the view of a camera translated along a baseline axis from
one ERP RGB-D input.  Every valid source pixel is reprojected exactly
(no linearization), splatted into its four neighbors with bilinear
weights, and occlusions are resolved by weighting each contribution
with exp(-(z - z_min)/sigma_z), where z_min is the smallest depth
landing on the target pixel.  The shift by z_min keeps relative weights
identical to exp(-z/sigma_z) while staying inside float range, and
makes an unoccluded exact splat carry weight 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .geometry import Axis, BaselineSpec, cart_to_sph, erp_directions, sph_to_pixel
from .images import DepthMap, ErpImage

SIGMA_Z_DEFAULT = 0.05  # meters
WEIGHT_EPS = 1e-4       # below this total weight a target pixel is a hole


@dataclass
class SynthView:
    """One synthesized view: color, reprojected depth, validity mask."""

    image: ErpImage
    depth: DepthMap
    mask: np.ndarray  # (H, W) bool, True where the view carries content
    weight: np.ndarray  # (H, W) accumulated splat weight
    baseline: BaselineSpec


def _splat_corners(u, v, width, height):
    """2x2 bilinear footprint of continuous ERP coords; u wraps, v clamps.

    Returns per-corner (row, col, weight) arrays of shape (4, n); rows
    outside the raster get weight 0.
    """
    x = np.mod(u, width) - 0.5
    y = v - 0.5
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    cols = np.stack([x0, x0 + 1, x0, x0 + 1]) % width
    rows = np.stack([y0, y0, y0 + 1, y0 + 1])
    wts = np.stack([(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy])
    ok = (rows >= 0) & (rows < height)
    rows = np.clip(rows, 0, height - 1)
    return rows, cols, wts * ok


def forward_splat(src: ErpImage, src_depth: DepthMap, baseline: BaselineSpec,
                  sigma_z: float = SIGMA_Z_DEFAULT, weight_eps: float = WEIGHT_EPS):
    """Render the view of the camera translated by the baseline offset.

    Returns (image, depth, weight) where depth holds the radial distance
    from the target camera and weight is the accumulated splat weight
    (pixels with weight < weight_eps are holes).
    """
    if src.pixels.shape[:2] != src_depth.depth.shape:
        raise NumericalError("forward_splat: image and depth dimensions differ")
    if not src_depth.valid.any():
        raise NumericalError("forward_splat: source depth has no valid pixels")
    h, w = src_depth.depth.shape
    sel = src_depth.valid.ravel()
    dirs = erp_directions(w, h).reshape(-1, 3)[sel]
    depth = src_depth.depth.ravel()[sel]
    colors = src.pixels.reshape(-1, 3)[sel]

    pts = dirs * depth[:, None]
    axis = 1 if baseline.axis is Axis.VERTICAL else 0
    pts[:, axis] -= baseline.offset  # target camera sits at +offset
    r2, phi2, theta2 = cart_to_sph(pts[:, 0], pts[:, 1], pts[:, 2])
    u2, v2 = sph_to_pixel(phi2, theta2, w, h)

    rows, cols, wts = _splat_corners(u2, v2, w, h)
    flat_idx = (rows * w + cols).ravel()  # corner-major: 4 blocks of n entries
    bilin = wts.ravel()
    z = np.broadcast_to(r2, wts.shape).ravel()
    colors4 = np.tile(colors, (4, 1))

    # pass 1: per-target-pixel minimum splatted depth
    z_min = np.full(h * w, np.inf)
    np.minimum.at(z_min, flat_idx[bilin > 0], z[bilin > 0])

    # pass 2: order-independent weighted accumulation
    shift = np.where(bilin > 0, z - z_min[flat_idx], 0.0)
    wz = bilin * np.exp(-shift / sigma_z)
    acc_w = np.zeros(h * w)
    acc_c = np.zeros((h * w, 3))
    acc_z = np.zeros(h * w)
    np.add.at(acc_w, flat_idx, wz)
    np.add.at(acc_c, flat_idx, wz[:, None] * colors4)
    np.add.at(acc_z, flat_idx, wz * z)

    valid = acc_w >= weight_eps
    safe_w = np.where(valid, acc_w, 1.0)
    out_color = np.clip(acc_c / safe_w[:, None], 0.0, 1.0)
    out_color[~valid] = 0.0
    out_z = acc_z / safe_w
    out_z = np.clip(out_z, src_depth.d_min, src_depth.d_max)
    out_z[~valid] = src_depth.d_max

    img = ErpImage(out_color.reshape(h, w, 3))
    dm = DepthMap(out_z.reshape(h, w), valid.reshape(h, w), src_depth.d_min, src_depth.d_max)
    return img, dm, acc_w.reshape(h, w)


def synthesize_views(src: ErpImage, src_depth: DepthMap, baselines,
                     sigma_z: float = SIGMA_Z_DEFAULT,
                     weight_eps: float = WEIGHT_EPS) -> list[SynthView]:
    """Forward-splat one synthesized view per baseline."""
    if not baselines:
        raise NumericalError("synthesize_views: baseline list is empty")
    views = []
    for b in baselines:
        if not isinstance(b, BaselineSpec):
            b = BaselineSpec(Axis.VERTICAL, float(b))
        img, dm, wgt = forward_splat(src, src_depth, b, sigma_z, weight_eps)
        views.append(SynthView(img, dm, dm.valid.copy(), wgt, b))
    return views
