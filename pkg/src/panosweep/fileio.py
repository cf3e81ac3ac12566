"""Bit-exact file formats: grayscale PFM for depth, 8-bit PNG for color.

Depth PFM layout (see docs/formats.md for a hex dump):
  line 1: ``Pf``            (grayscale; color ``PF`` is rejected)
  line 2: ``<width> <height>``
  line 3: ``-1.0``          (negative scale = little-endian floats)
  payload: H*W float32, rows bottom-to-top.
Invalid pixels are stored as -1.0; any negative value reads back as
invalid.  write(read(path)) reproduces the file byte for byte.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import FormatError
from .images import DepthMap, ErpImage

_INVALID_SENTINEL = -1.0


def write_depth_pfm(path, depth: DepthMap) -> None:
    data = np.where(depth.valid, depth.depth, _INVALID_SENTINEL).astype("<f4")
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(np.flipud(data).tobytes())


def read_depth_pfm(path, d_min: float | None = None, d_max: float | None = None) -> DepthMap:
    """Read a grayscale PFM depth map.

    The depth range is not part of the format; callers may pass the range
    or let it default to the span of the valid samples.
    """
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip()
        if magic == b"PF":
            raise FormatError("color PFM (header 'PF') is not a depth map; expected 'Pf'")
        if magic != b"Pf":
            raise FormatError(f"not a PFM file (header {magic!r})")
        dims = fh.readline().split()
        if len(dims) != 2:
            raise FormatError("malformed PFM dimensions line")
        try:
            w, h = int(dims[0]), int(dims[1])
        except ValueError as exc:
            raise FormatError("malformed PFM dimensions line") from exc
        if w <= 0 or h <= 0 or w * h > 10**9:
            raise FormatError(f"unreasonable PFM dimensions {w}x{h}")
        try:
            scale = float(fh.readline())
        except ValueError as exc:
            raise FormatError("malformed PFM scale line") from exc
        if scale >= 0:
            raise FormatError("big-endian PFM (positive scale) is not supported")
        payload = fh.read(4 * w * h)
        if len(payload) != 4 * w * h:
            raise FormatError("truncated PFM payload")
    data = np.flipud(np.frombuffer(payload, dtype="<f4").reshape(h, w)).copy()
    valid = data >= 0.0
    if d_min is None:
        d_min = float(data[valid].min()) if valid.any() else 1e-6
    if d_max is None:
        d_max = float(data[valid].max()) if valid.any() else 1.0
    d_min = max(float(d_min), float(np.finfo(np.float32).tiny))
    d_max = float(d_max)
    if d_max <= d_min:
        d_max = d_min * (1.0 + 1e-6)
    return DepthMap(data, valid, d_min, d_max)


def write_png(path, img: ErpImage) -> None:
    arr = np.clip(np.round(img.pixels * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def read_png(path) -> ErpImage:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return ErpImage(arr)
