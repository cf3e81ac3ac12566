"""Analytic scenes: parametric primitives, procedural textures, and
ray-cast rendering to ERP RGB-D.

Every primitive has a closed-form ray intersection, so rendered depth
maps double as exact ground truth.  Scenes are serializable to JSON
(see scene_to_json / scene_from_json and docs/formats.md).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .geometry import erp_directions, pixel_to_sph, sph_to_cart, sph_to_pixel
from .images import DepthMap, ErpImage, PerspImage, bilinear_wrap

_HIT_EPS = 1e-9
_SURFACE_EPS = 1e-6


# ---------------------------------------------------------------------------
# Procedural textures


@dataclass(frozen=True)
class Checker:
    """3D checkerboard: cell parity of floor(p/scale) picks color_a/color_b."""

    scale: float = 0.5
    color_a: tuple = (0.9, 0.9, 0.9)
    color_b: tuple = (0.1, 0.1, 0.1)

    def sample(self, points: np.ndarray) -> np.ndarray:
        cells = np.floor(points / self.scale).astype(np.int64)
        parity = (cells.sum(axis=-1) & 1).astype(np.float64)[..., None]
        a = np.asarray(self.color_a, dtype=np.float64)
        b = np.asarray(self.color_b, dtype=np.float64)
        return a * (1.0 - parity) + b * parity


def _hash_lattice(ix, iy, iz, seed):
    """SplitMix64-style integer hash of a 3D lattice point -> [0, 1)."""
    seed_mix = np.uint64((int(seed) * 0xD6E8FEB86659FD93) % (1 << 64))
    h = (ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
         ^ iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
         ^ iz.astype(np.uint64) * np.uint64(0x165667B19E3779F9)
         ^ seed_mix)
    h ^= h >> np.uint64(30)
    h *= np.uint64(0xBF58476D1CE4E5B9)
    h ^= h >> np.uint64(27)
    h *= np.uint64(0x94D049BB133111EB)
    h ^= h >> np.uint64(31)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


@dataclass(frozen=True)
class ValueNoise:
    """Seeded fractal value noise blending two colors.

    ``octaves`` doublings of lattice frequency keep texture energy at
    several scales, which stereo matching needs for well-posed costs.
    """

    seed: int = 0
    scale: float = 0.5
    color_a: tuple = (0.15, 0.15, 0.15)
    color_b: tuple = (0.9, 0.9, 0.9)
    octaves: int = 3

    def _octave(self, points: np.ndarray, scale: float, seed: int) -> np.ndarray:
        p = points / scale
        p0 = np.floor(p)
        f = p - p0
        i0 = p0.astype(np.int64)
        vals = np.zeros(points.shape[:-1], dtype=np.float64)
        for dx in (0, 1):
            for dy in (0, 1):
                for dz in (0, 1):
                    lat = _hash_lattice(i0[..., 0] + dx, i0[..., 1] + dy, i0[..., 2] + dz, seed)
                    w = (np.where(dx, f[..., 0], 1.0 - f[..., 0])
                         * np.where(dy, f[..., 1], 1.0 - f[..., 1])
                         * np.where(dz, f[..., 2], 1.0 - f[..., 2]))
                    vals += w * lat
        return vals

    def sample(self, points: np.ndarray) -> np.ndarray:
        vals = np.zeros(points.shape[:-1], dtype=np.float64)
        amp_total = 0.0
        for k in range(max(1, self.octaves)):
            amp = 0.5**k
            vals += amp * self._octave(points, self.scale / 2**k, self.seed + k)
            amp_total += amp
        vals /= amp_total
        a = np.asarray(self.color_a, dtype=np.float64)
        b = np.asarray(self.color_b, dtype=np.float64)
        return a + vals[..., None] * (b - a)


# ---------------------------------------------------------------------------
# Primitives


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float
    texture: object = field(default_factory=Checker)

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        """Nearest positive hit distance per ray, inf on miss."""
        oc = np.asarray(self.center, dtype=np.float64) - origin
        b = dirs @ oc
        c = oc @ oc - self.radius**2
        disc = b * b - c
        sq = np.sqrt(np.maximum(disc, 0.0))
        t1 = b - sq
        t2 = b + sq
        t = np.where(t1 > _HIT_EPS, t1, t2)
        return np.where((disc >= 0.0) & (t > _HIT_EPS), t, np.inf)

    def surface_distance(self, point: np.ndarray) -> float:
        return abs(np.linalg.norm(np.asarray(point) - np.asarray(self.center)) - self.radius)


@dataclass(frozen=True)
class AxisAlignedBox:
    min_corner: tuple
    max_corner: tuple
    texture: object = field(default_factory=Checker)

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.min_corner, dtype=np.float64)
        hi = np.asarray(self.max_corner, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
            t_lo = (lo - origin) * inv
            t_hi = (hi - origin) * inv
        # rays parallel to a slab: inside -> (-inf, inf), outside -> miss
        par = dirs == 0.0
        inside = (origin >= lo) & (origin <= hi)
        t_lo = np.where(par, np.where(inside, -np.inf, np.inf), t_lo)
        t_hi = np.where(par, np.where(inside, np.inf, -np.inf), t_hi)
        near = np.minimum(t_lo, t_hi).max(axis=-1)
        far = np.maximum(t_lo, t_hi).min(axis=-1)
        t = np.where(near > _HIT_EPS, near, far)  # exterior hit, else interior wall
        return np.where((near <= far) & (t > _HIT_EPS), t, np.inf)

    def surface_distance(self, point: np.ndarray) -> float:
        lo = np.asarray(self.min_corner, dtype=np.float64)
        hi = np.asarray(self.max_corner, dtype=np.float64)
        p = np.asarray(point, dtype=np.float64)
        d_out = np.maximum(np.maximum(lo - p, p - hi), 0.0)
        if np.any(d_out > 0.0):
            return float(np.linalg.norm(d_out))
        return float(np.min(np.minimum(p - lo, hi - p)))


@dataclass(frozen=True)
class Plane:
    point: tuple
    normal: tuple
    texture: object = field(default_factory=Checker)

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        n = np.asarray(self.normal, dtype=np.float64)
        n = n / np.linalg.norm(n)
        denom = dirs @ n
        num = (np.asarray(self.point, dtype=np.float64) - origin) @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / denom
        return np.where((denom != 0.0) & (t > _HIT_EPS), t, np.inf)

    def surface_distance(self, point: np.ndarray) -> float:
        n = np.asarray(self.normal, dtype=np.float64)
        n = n / np.linalg.norm(n)
        return abs((np.asarray(point) - np.asarray(self.point)) @ n)


@dataclass
class SceneSpec:
    """A list of textured primitives plus constant background."""

    primitives: list
    background: tuple = (0.0, 0.0, 0.0)
    d_min: float = 0.2
    d_max: float = 8.0

    def __post_init__(self):
        if not self.primitives:
            raise ConfigError("SceneSpec needs at least one primitive")
        if not (0 < self.d_min < self.d_max):
            raise ConfigError("SceneSpec needs 0 < d_min < d_max")


# ---------------------------------------------------------------------------
# Rendering


def raycast_erp(scene: SceneSpec, cam, width: int, height: int) -> tuple[ErpImage, DepthMap]:
    """Render the scene to an ERP image and exact radial depth map.

    Rays go through pixel centers; the nearest primitive hit supplies
    texture color and radial distance.  Hits outside [d_min, d_max] and
    misses get the background color and an invalid depth.
    """
    cam = np.asarray(cam, dtype=np.float64)
    for prim in scene.primitives:
        if prim.surface_distance(cam) < _SURFACE_EPS:
            raise DomainError("camera origin lies on a primitive surface")
    dirs = erp_directions(width, height)
    flat = dirs.reshape(-1, 3)

    t_all = np.stack([p.intersect(cam, flat) for p in scene.primitives])
    hit_idx = np.argmin(t_all, axis=0)
    t = t_all.min(axis=0)

    color = np.empty((flat.shape[0], 3), dtype=np.float64)
    color[:] = np.asarray(scene.background, dtype=np.float64)
    for k, prim in enumerate(scene.primitives):
        sel = (hit_idx == k) & np.isfinite(t)
        if np.any(sel):
            pts = cam + flat[sel] * t[sel, None]
            color[sel] = prim.texture.sample(pts)

    depth = t.reshape(height, width)
    valid = np.isfinite(depth) & (depth >= scene.d_min) & (depth <= scene.d_max)
    img = ErpImage(np.clip(color.reshape(height, width, 3), 0.0, 1.0))
    depth_out = np.where(valid, depth, scene.d_max)
    return img, DepthMap(depth_out, valid, scene.d_min, scene.d_max)


def camera_frame(yaw: float, pitch: float):
    """Forward/right/up unit vectors of a pinhole camera at (yaw, pitch)."""
    fwd = np.array(sph_to_cart(1.0, yaw, np.pi / 2 - pitch))
    world_up = np.array([0.0, 1.0, 0.0])
    right = np.cross(world_up, fwd)
    nr = np.linalg.norm(right)
    if nr < 1e-12:  # looking straight up/down: pick right from yaw
        right = np.array(sph_to_cart(1.0, yaw + np.pi / 2, np.pi / 2))
    else:
        right = right / nr
    up = np.cross(fwd, right)
    return fwd, right, up


def perspective_crop(img: ErpImage, fov_deg: float, yaw: float, pitch: float,
                     out_width: int, out_height: int) -> PerspImage:
    """Pinhole crop of an ERP image via bilinear resampling.

    ``fov_deg`` is the horizontal field of view; (yaw, pitch) orient the
    optical axis (pitch positive = up).
    """
    if not (0.0 < fov_deg < 180.0):
        raise ConfigError(f"fov_deg must lie in (0, 180), got {fov_deg}")
    f = (out_width / 2.0) / np.tan(np.deg2rad(fov_deg) / 2.0)
    fwd, right, up = camera_frame(yaw, pitch)
    xs = (np.arange(out_width) + 0.5) - out_width / 2.0
    ys = (np.arange(out_height) + 0.5) - out_height / 2.0
    xx, yy = np.meshgrid(xs, ys)
    dirs = (xx[..., None] * right - yy[..., None] * up + f * fwd)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    r = np.sqrt(x * x + y * y + z * z)
    phi = np.arctan2(x, z)
    theta = np.arccos(np.clip(y / r, -1.0, 1.0))
    u, v = sph_to_pixel(phi, theta, img.width, img.height)
    pix, _ = bilinear_wrap(img.pixels, u, v)
    return PerspImage(np.clip(pix, 0.0, 1.0), fov_deg, yaw, pitch)


def crop_interior_mask(erp_width: int, erp_height: int, fov_deg: float, yaw: float,
                       pitch: float, crop_width: int, crop_height: int,
                       margin_px: float = 2.0) -> np.ndarray:
    """ERP pixels whose direction projects strictly inside a pinhole crop.

    The margin (in crop pixels) trims the crop border, the stated
    approximation for eliminating stitching seams in the FoV study.
    """
    f = (crop_width / 2.0) / np.tan(np.deg2rad(fov_deg) / 2.0)
    fwd, right, up = camera_frame(yaw, pitch)
    dirs = erp_directions(erp_width, erp_height).reshape(-1, 3)
    zc = dirs @ fwd
    xc = dirs @ right
    yc = -(dirs @ up)
    with np.errstate(divide="ignore", invalid="ignore"):
        px = xc / zc * f + crop_width / 2.0
        py = yc / zc * f + crop_height / 2.0
    ok = (zc > 0.0) \
        & (px >= margin_px) & (px <= crop_width - margin_px) \
        & (py >= margin_px) & (py <= crop_height - margin_px)
    return ok.reshape(erp_height, erp_width)


# ---------------------------------------------------------------------------
# JSON serialization

_TEXTURES = {"checker": Checker, "value_noise": ValueNoise}
_PRIMITIVES = {"sphere": Sphere, "box": AxisAlignedBox, "plane": Plane}


def _texture_to_json(tex) -> dict:
    if isinstance(tex, Checker):
        return {"kind": "checker", "scale": tex.scale,
                "color_a": list(tex.color_a), "color_b": list(tex.color_b)}
    if isinstance(tex, ValueNoise):
        return {"kind": "value_noise", "seed": tex.seed, "scale": tex.scale,
                "color_a": list(tex.color_a), "color_b": list(tex.color_b)}
    raise ConfigError(f"unknown texture type {type(tex)!r}")


def _texture_from_json(doc: dict):
    kind = doc.get("kind")
    if kind == "checker":
        return Checker(doc.get("scale", 0.5), tuple(doc.get("color_a", (0.9, 0.9, 0.9))),
                       tuple(doc.get("color_b", (0.1, 0.1, 0.1))))
    if kind == "value_noise":
        return ValueNoise(doc.get("seed", 0), doc.get("scale", 0.5),
                          tuple(doc.get("color_a", (0.15, 0.15, 0.15))),
                          tuple(doc.get("color_b", (0.9, 0.9, 0.9))))
    raise ConfigError(f"unknown texture kind {kind!r}")


def scene_to_json(scene: SceneSpec) -> dict:
    prims = []
    for p in scene.primitives:
        if isinstance(p, Sphere):
            prims.append({"kind": "sphere", "center": list(p.center), "radius": p.radius,
                          "texture": _texture_to_json(p.texture)})
        elif isinstance(p, AxisAlignedBox):
            prims.append({"kind": "box", "min": list(p.min_corner), "max": list(p.max_corner),
                          "texture": _texture_to_json(p.texture)})
        elif isinstance(p, Plane):
            prims.append({"kind": "plane", "point": list(p.point), "normal": list(p.normal),
                          "texture": _texture_to_json(p.texture)})
        else:
            raise ConfigError(f"unknown primitive type {type(p)!r}")
    return {"primitives": prims, "background": list(scene.background),
            "d_min": scene.d_min, "d_max": scene.d_max}


def scene_from_json(doc: dict) -> SceneSpec:
    if not isinstance(doc, dict) or "primitives" not in doc:
        raise ConfigError("scene document must be an object with a 'primitives' list")
    prims = []
    for pd in doc["primitives"]:
        kind = pd.get("kind")
        tex = _texture_from_json(pd["texture"]) if "texture" in pd else Checker()
        if kind == "sphere":
            prims.append(Sphere(tuple(pd["center"]), float(pd["radius"]), tex))
        elif kind == "box":
            prims.append(AxisAlignedBox(tuple(pd["min"]), tuple(pd["max"]), tex))
        elif kind == "plane":
            prims.append(Plane(tuple(pd["point"]), tuple(pd["normal"]), tex))
        else:
            raise ConfigError(f"unknown primitive kind {kind!r}")
    return SceneSpec(prims, tuple(doc.get("background", (0.0, 0.0, 0.0))),
                     float(doc.get("d_min", 0.2)), float(doc.get("d_max", 8.0)))


def load_scene(path) -> SceneSpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid scene JSON: {exc}") from exc
    return scene_from_json(doc)


# ---------------------------------------------------------------------------
# Fixed synthetic suite used by trend tests and ablations


def checker_sphere_scene(radius: float = 3.0, center=(0.0, 0.4, 0.0)) -> SceneSpec:
    """Single checkered sphere enclosing the camera; fully analytic depth."""
    return SceneSpec([Sphere(center, radius, Checker(scale=0.55))])


def default_scene_suite() -> list[tuple[str, SceneSpec]]:
    """Three enclosed desk-scale scenes with near and far textured content.

    All surfaces carry fractal noise textures: strictly periodic patterns
    (checkerboards) alias the plane sweep, so they are reserved for the
    geometry oracles and kept out of the matching test suite.
    """
    orbit = SceneSpec([
        Sphere((0.0, 0.3, 0.0), 5.0, ValueNoise(seed=11, scale=0.8, color_a=(0.2, 0.25, 0.3), color_b=(0.85, 0.8, 0.7))),
        Sphere((0.0, -0.3, 2.2), 1.2, ValueNoise(seed=12, scale=0.3, color_a=(0.6, 0.15, 0.1), color_b=(0.98, 0.9, 0.8))),
        Sphere((-1.8, 0.4, -1.5), 0.8, ValueNoise(seed=13, scale=0.25, color_a=(0.1, 0.2, 0.5), color_b=(0.8, 0.9, 1.0))),
    ])
    room = SceneSpec([
        AxisAlignedBox((-3.2, -2.7, -3.2), (3.2, 2.7, 3.2),
                       ValueNoise(seed=21, scale=0.55, color_a=(0.3, 0.25, 0.22), color_b=(0.9, 0.88, 0.8))),
        AxisAlignedBox((0.8, -2.7, 1.0), (1.8, -0.9, 2.0),
                       ValueNoise(seed=22, scale=0.22, color_a=(0.45, 0.3, 0.08), color_b=(0.95, 0.8, 0.45))),
        Sphere((-1.4, 0.1, 1.6), 0.5, ValueNoise(seed=23, scale=0.18, color_a=(0.1, 0.4, 0.15), color_b=(0.85, 1.0, 0.85))),
    ])
    plaza = SceneSpec([
        Sphere((0.0, 0.0, 0.0), 5.2, ValueNoise(seed=31, scale=1.0, color_a=(0.25, 0.3, 0.4), color_b=(0.9, 0.85, 0.75))),
        Plane((0.0, -2.3, 0.0), (0.0, 1.0, 0.0),
              ValueNoise(seed=32, scale=0.4, color_a=(0.35, 0.3, 0.25), color_b=(0.8, 0.75, 0.6))),
        Sphere((1.8, -0.4, 2.6), 1.0, ValueNoise(seed=33, scale=0.3, color_a=(0.7, 0.1, 0.1), color_b=(1.0, 0.9, 0.85))),
        AxisAlignedBox((-0.5, -2.3, -2.8), (0.3, 0.8, -2.0),
                       ValueNoise(seed=34, scale=0.25, color_a=(0.15, 0.25, 0.7), color_b=(0.85, 0.9, 1.0))),
    ])
    return [("orbit", orbit), ("room", room), ("plaza", plaza)]
