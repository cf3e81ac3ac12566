"""Spherical geometry for equirectangular (ERP) images.

Conventions used throughout the package:
  - Camera-centered Cartesian frame: y is the vertical axis (up),
    z points at the image center, x points right at the image center.
  - Spherical coordinates (r, phi, theta): r > 0 is the radial depth in
    meters, phi = atan2(x, z) is the longitude in (-pi, pi], theta =
    arccos(y/r) is the polar angle in [0, pi] (0 = straight up).
  - Continuous pixel coordinates: u = (phi/(2*pi) + 0.5) * W,
    v = (theta/pi) * H.  Pixel centers of the raster sit at
    half-integer coordinates (column j has center u = j + 0.5);
    u wraps modulo W.
  - Latitude theta_lat = pi/2 - theta, in [-pi/2, pi/2] (positive = up).

All functions are pure and accept scalars or numpy arrays
(broadcasting applies); angles are radians, distances meters.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DomainError

TWO_PI = 2.0 * np.pi


class Axis(enum.Enum):
    """Translation axis of a stereo baseline."""

    VERTICAL = "vertical"      # y axis
    HORIZONTAL = "horizontal"  # x axis


@dataclass(frozen=True)
class BaselineSpec:
    """Signed camera translation along one axis.

    ``offset`` is the displacement in meters of the moved camera along
    the axis (positive vertical = camera moves +y).
    """

    axis: Axis
    offset: float

    def axis_vector(self) -> np.ndarray:
        if self.axis is Axis.VERTICAL:
            return np.array([0.0, 1.0, 0.0])
        return np.array([1.0, 0.0, 0.0])

    def warn_if_large(self, d_min: float) -> None:
        """Warn when the baseline is not small against the scene range."""
        if abs(self.offset) >= d_min:
            warnings.warn(
                f"baseline |{self.offset}| >= d_min {d_min}; stereo geometry "
                "degenerates for points closer than the baseline",
                stacklevel=2,
            )


def vertical_baseline(offset: float) -> BaselineSpec:
    return BaselineSpec(Axis.VERTICAL, float(offset))


def horizontal_baseline(offset: float) -> BaselineSpec:
    return BaselineSpec(Axis.HORIZONTAL, float(offset))


def cart_to_sph(x, y, z):
    """Convert Cartesian points to spherical (r, phi, theta).

    r = sqrt(x^2 + y^2 + z^2), phi = atan2(x, z), theta = arccos(y/r).
    atan2 covers all quadrants; at the poles (x = z = 0) phi is 0 by
    convention.  Raises DomainError for zero-length input.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    r = np.sqrt(x * x + y * y + z * z)
    if np.any(r == 0.0):
        raise DomainError("cart_to_sph: zero-length input vector")
    phi = np.arctan2(x, z)
    # keep phi in (-pi, pi]: atan2(-0.0, z<0) returns -pi
    phi = np.where(phi <= -np.pi, phi + TWO_PI, phi)
    theta = np.arccos(np.clip(y / r, -1.0, 1.0))
    if phi.ndim == 0:
        return float(r), float(phi), float(theta)
    return r, phi, theta


def sph_to_cart(r, phi, theta):
    """Convert spherical (r, phi, theta) to Cartesian (x, y, z).

    x = r sin(phi) sin(theta), y = r cos(theta), z = r cos(phi) sin(theta).
    """
    r = np.asarray(r, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    st = np.sin(theta)
    x = r * np.sin(phi) * st
    y = r * np.cos(theta)
    z = r * np.cos(phi) * st
    if x.ndim == 0:
        return float(x), float(y), float(z)
    return x, y, z


def _check_erp_dims(width: int, height: int) -> None:
    if width != 2 * height:
        raise ConfigError(f"ERP raster must have width = 2*height, got {width}x{height}")


def sph_to_pixel(phi, theta, width: int, height: int):
    """Map spherical angles to continuous pixel coordinates (u, v).

    u = (phi/(2 pi) + 0.5) * W wrapped modulo W, v = (theta/pi) * H.
    """
    _check_erp_dims(width, height)
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    u = np.mod((phi / TWO_PI + 0.5) * width, width)
    v = (theta / np.pi) * height
    if u.ndim == 0:
        return float(u), float(v)
    return u, v


def pixel_to_sph(u, v, width: int, height: int, r=1.0):
    """Inverse of sph_to_pixel: continuous (u, v) to (r, phi, theta).

    The radial distance is not encoded in the pixel position and is
    passed through unchanged (default 1).
    """
    _check_erp_dims(width, height)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    phi = (u / width - 0.5) * TWO_PI
    theta = (v / height) * np.pi
    r = np.broadcast_to(np.asarray(r, dtype=np.float64), phi.shape)
    if phi.ndim == 0:
        return float(r), float(phi), float(theta)
    return r.copy(), phi, theta


def vertical_disparity(theta, r, b_y):
    """Linearized polar-angle displacement for a vertical stereo baseline.

    d_theta = -(sin(theta)/r) * b_y; the longitude is unchanged for
    vertical motion.  ``b_y`` follows the derivative convention of the
    model (the point displaces by +b_y along y; see exact_reproject).
    """
    r = np.asarray(r, dtype=np.float64)
    if np.any(r <= 0.0):
        raise DomainError("vertical_disparity: r must be positive")
    theta = np.asarray(theta, dtype=np.float64)
    out = -(np.sin(theta) / r) * b_y
    return float(out) if out.ndim == 0 else out


def horizontal_disparity(phi, theta, r, b_x):
    """Linearized (d_phi, d_theta) for a horizontal stereo baseline.

    d_phi = (cos(phi)/(r sin(theta))) * b_x,
    d_theta = (sin(phi) cos(theta)/r) * b_x.
    Raises DomainError at the poles where d_phi is singular.
    """
    r = np.asarray(r, dtype=np.float64)
    if np.any(r <= 0.0):
        raise DomainError("horizontal_disparity: r must be positive")
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    st = np.sin(theta)
    if np.any(st == 0.0):
        raise DomainError("horizontal_disparity: d_phi is singular at the poles")
    dphi = (np.cos(phi) / (r * st)) * b_x
    dtheta = (np.sin(phi) * np.cos(theta) / r) * b_x
    if dphi.ndim == 0:
        return float(dphi), float(dtheta)
    return dphi, dtheta


def exact_reproject(u, v, depth, baseline: BaselineSpec, width: int, height: int):
    """Exact pixel position of a point under the finite-baseline model.

    Lifts pixel (u, v) to the 3D point at the given radial depth,
    displaces it by +offset along the baseline axis (the convention
    whose derivative at offset=0 is vertical_disparity /
    horizontal_disparity), and projects back.  Returns (u', v', r')
    with r' the radial distance of the displaced point.

    Raises DomainError if the displaced point coincides with the
    camera center.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(depth <= 0.0):
        raise DomainError("exact_reproject: depth must be positive")
    r, phi, theta = pixel_to_sph(u, v, width, height, depth)
    x, y, z = sph_to_cart(r, phi, theta)
    off = baseline.offset
    if baseline.axis is Axis.VERTICAL:
        y = y + off
    else:
        x = x + off
    rr = np.sqrt(np.asarray(x) ** 2 + np.asarray(y) ** 2 + np.asarray(z) ** 2)
    if np.any(rr == 0.0):
        raise DomainError("exact_reproject: point displaced onto the camera center")
    r2, phi2, theta2 = cart_to_sph(x, y, z)
    u2, v2 = sph_to_pixel(phi2, theta2, width, height)
    return u2, v2, r2


def wrapped_column_delta(u_from, u_to, width: int):
    """Shortest signed column displacement u_to - u_from modulo width."""
    d = np.asarray(u_to, dtype=np.float64) - np.asarray(u_from, dtype=np.float64)
    d = np.mod(d + width / 2.0, width) - width / 2.0
    return float(d) if d.ndim == 0 else d


@lru_cache(maxsize=8)
def pixel_center_grid(width: int, height: int):
    """(u, v) continuous coordinates of all pixel centers, shape (H, W)."""
    _check_erp_dims(width, height)
    u = np.arange(width, dtype=np.float64) + 0.5
    v = np.arange(height, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(u, v)
    uu.flags.writeable = False
    vv.flags.writeable = False
    return uu, vv


@lru_cache(maxsize=8)
def latitude_grid(height: int) -> np.ndarray:
    """Per-row latitude (pi/2 - theta) at pixel centers, shape (H,)."""
    theta = (np.arange(height, dtype=np.float64) + 0.5) / height * np.pi
    lat = np.pi / 2.0 - theta
    lat.flags.writeable = False
    return lat


@lru_cache(maxsize=8)
def erp_directions(width: int, height: int) -> np.ndarray:
    """Unit ray directions through all pixel centers, shape (H, W, 3)."""
    uu, vv = pixel_center_grid(width, height)
    _, phi, theta = pixel_to_sph(uu, vv, width, height)
    x, y, z = sph_to_cart(1.0, phi, theta)
    dirs = np.stack([x, y, z], axis=-1)
    dirs.flags.writeable = False
    return dirs
