"""Multi-view spherical plane-sweep stereo.

Pipeline per cascade level: hypothesis planes (inverse-depth domain) ->
per-reference displacement (closed-form vertical warping, exact 2D
mapping for horizontal baselines) -> bilinear feature warp -> variance
fusion across views -> edge-aware cost aggregation -> soft inverse-depth
regression.  Levels are chained by re-centering a narrower per-pixel
window on the previous prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .features import FeatureMap, descriptor_window_radius, erode_mask, extract_features
from .geometry import (
    Axis,
    BaselineSpec,
    cart_to_sph,
    erp_directions,
    latitude_grid,
    pixel_center_grid,
    sph_to_pixel,
)
from .hypotheses import (
    HypothesisSet,
    cascade_refine,
    default_level_interval,
    sample_hypotheses,
    sample_hypotheses_random,
    sample_hypotheses_uniform_depth,
)
from .images import DepthMap, ErpImage

COST_INF = np.float32(np.inf)


@dataclass
class CostVolume:
    """D x H x W matching costs with per-cell contributing-view counts.

    Cells with fewer than two contributing views carry the +inf sentinel
    (no matching evidence); all other costs are finite and nonnegative.
    """

    cost: np.ndarray         # (D, H, W) float32
    valid_count: np.ndarray  # (D, H, W) uint8

    @property
    def num_planes(self) -> int:
        return self.cost.shape[0]

    @property
    def reliable(self) -> np.ndarray:
        return self.valid_count >= 2


@dataclass
class SweepConfig:
    """Stereo matching stage configuration.

    A coarse level resolves the nearest plane (sharp softmax); refinement
    levels interpolate inside a narrow window re-centered per pixel, which
    wants a larger temperature, hence the optional per-level ``level_taus``.
    Pixels whose warp displacement moves less than ``min_plane_step_px``
    per level-1 plane step (the epipole neighborhoods, e.g. the poles for
    vertical rigs) cannot discriminate between hypotheses and are filled
    from the nearest constrained pixel in the same column when
    ``fill_low_parallax`` is set.
    """

    d_min: float = 0.2
    d_max: float = 8.0
    plane_counts: tuple = (48, 24)
    interval_scale: float = 1.0      # interval scale v at level 1
    level_intervals: tuple | None = None  # inverse-depth step per level > 1
    tau: float = 0.05                # softmax temperature
    level_taus: tuple | None = None  # per-level override of tau
    descriptor: str = "census5x5"
    sampling: str = "inverse"        # inverse | depth | random
    random_sigma: float = 0.5        # jitter in units of the plane step
    seed: int = 0
    aggregate: bool = True
    agg_radius: int = 4
    agg_edge_threshold: float = 0.3
    min_plane_step_px: float = 0.8
    fill_low_parallax: bool = True

    def __post_init__(self):
        if not (0 < self.d_min < self.d_max):
            raise ConfigError("SweepConfig: need 0 < d_min < d_max")
        if not self.plane_counts or any(d < 2 for d in self.plane_counts):
            raise ConfigError("SweepConfig: every level needs >= 2 planes")
        if self.tau <= 0:
            raise ConfigError("SweepConfig: tau must be positive")
        if self.level_taus is not None:
            if len(self.level_taus) != len(self.plane_counts):
                raise ConfigError("SweepConfig: level_taus must match plane_counts")
            if any(t <= 0 for t in self.level_taus):
                raise ConfigError("SweepConfig: level_taus must be positive")
        if self.sampling not in ("inverse", "depth", "random"):
            raise ConfigError(f"SweepConfig: unknown sampling {self.sampling!r}")

    @property
    def num_levels(self) -> int:
        return len(self.plane_counts)

    def level_tau(self, level: int) -> float:
        if self.level_taus is not None:
            return float(self.level_taus[level - 1])
        return self.tau

    def level_interval(self, level: int) -> float:
        """Inverse-depth plane step for cascade level >= 2."""
        if self.level_intervals is not None:
            return self.level_intervals[level - 2]
        return default_level_interval(self.d_min, self.d_max,
                                      self.plane_counts[level - 2],
                                      self.plane_counts[level - 1],
                                      self.interval_scale)


def swl_displacement(hyp: HypothesisSet, plane: int, theta_lat: np.ndarray,
                     baseline: BaselineSpec, feat_height: int) -> np.ndarray:
    """Closed-form row displacement of the spherical warping layer.

    C_y = cos(theta_lat) * b / d_j * (H_f / pi); the column displacement
    of a vertical baseline is identically zero.  ``theta_lat`` holds
    per-pixel latitudes in [-pi/2, pi/2]; a (H,) vector broadcasts over
    columns.  Supports per-pixel plane depths at cascade levels.
    """
    if baseline.axis is not Axis.VERTICAL:
        raise ConfigError("swl_displacement applies to vertical baselines only")
    inv_d = hyp.plane(plane)
    lat = np.asarray(theta_lat, dtype=np.float64)
    if lat.ndim == 1:
        lat = lat[:, None]
    return np.cos(lat) * baseline.offset * inv_d * (feat_height / np.pi)


def exact_displacement(inv_depth, baseline: BaselineSpec, width: int, height: int):
    """Exact per-pixel (C_x, C_y) for an arbitrary baseline at a hypothesis.

    Places the 3D point of every target pixel at depth 1/inv_depth and
    projects it into the view of the camera translated by the baseline
    offset.  Used for horizontal stereo where both displacement
    components are nonzero.
    """
    dirs = erp_directions(width, height)
    inv = np.asarray(inv_depth, dtype=np.float64)
    d = 1.0 / inv
    pts = (dirs * d).copy() if inv.ndim == 0 else dirs * d[..., None]
    axis = 1 if baseline.axis is Axis.VERTICAL else 0
    pts[..., axis] -= baseline.offset
    r2, phi2, theta2 = cart_to_sph(pts[..., 0], pts[..., 1], pts[..., 2])
    u2, v2 = sph_to_pixel(phi2, theta2, width, height)
    uu, vv = pixel_center_grid(width, height)
    cx = np.mod(u2 - uu + width / 2.0, width) - width / 2.0
    cy = v2 - vv
    return cx, cy


def _warp_rows(values: np.ndarray, row_cy: np.ndarray):
    """Row-constant vertical warp: gather rows v + C_y(row), 2-tap."""
    h = values.shape[0]
    y = np.arange(h) + row_cy  # continuous row coordinate minus 0.5 offset cancels
    in_range = (y >= 0.0) & (y <= h - 1)
    yc = np.clip(y, 0.0, h - 1)
    y0 = np.minimum(np.floor(yc).astype(np.int64), h - 2)
    f = (yc - y0).astype(np.float32)
    out = values[y0] * (1.0 - f)[:, None, None] + values[y0 + 1] * f[:, None, None]
    return out, in_range[:, None] & np.ones(values.shape[1], bool)[None, :]


def _warp_columns_fixed(values: np.ndarray, cy: np.ndarray):
    """Per-pixel vertical warp (columns unchanged), 2-tap."""
    h, w = values.shape[:2]
    y = np.arange(h)[:, None] + cy
    in_range = (y >= 0.0) & (y <= h - 1)
    yc = np.clip(y, 0.0, h - 1)
    y0 = np.minimum(np.floor(yc).astype(np.int64), h - 2)
    f = (yc - y0).astype(np.float32)[..., None]
    cols = np.broadcast_to(np.arange(w)[None, :], (h, w))
    out = values[y0, cols] * (1.0 - f) + values[y0 + 1, cols] * f
    return out, in_range


def _warp_generic(values: np.ndarray, cx: np.ndarray, cy: np.ndarray):
    """Full bilinear warp with longitude wrap, 4-tap."""
    h, w = values.shape[:2]
    x = np.mod(np.arange(w)[None, :] + cx, w)
    y = np.arange(h)[:, None] + cy
    in_range = (y >= 0.0) & (y <= h - 1)
    yc = np.clip(y, 0.0, h - 1)
    x0 = np.floor(x).astype(np.int64)
    fx = (x - x0).astype(np.float32)[..., None]
    x0 = np.mod(x0, w)
    x1 = np.mod(x0 + 1, w)
    y0 = np.minimum(np.floor(yc).astype(np.int64), h - 2)
    fy = (yc - y0).astype(np.float32)[..., None]
    y1 = y0 + 1
    top = values[y0, x0] * (1 - fx) + values[y0, x1] * fx
    bot = values[y1, x0] * (1 - fx) + values[y1, x1] * fx
    return top * (1 - fy) + bot * fy, in_range


def warp_view(ref: FeatureMap, c_x, c_y) -> tuple[FeatureMap, np.ndarray]:
    """Warp a reference feature map by a displacement field.

    out(u, v) = ref(u + C_x, v + C_y) with bilinear interpolation;
    u wraps modulo width, rows whose support leaves the raster are
    flagged invalid.  Returns (warped, in_range).
    """
    cx = np.asarray(c_x, dtype=np.float64)
    cy = np.asarray(c_y, dtype=np.float64)
    if np.all(cx == 0.0):
        if cy.ndim == 2 and np.allclose(cy, cy[:, :1]):
            out, ok = _warp_rows(ref.values, cy[:, 0])
        elif cy.ndim <= 1:
            row_cy = np.broadcast_to(cy, (ref.height,)).astype(np.float64)
            out, ok = _warp_rows(ref.values, row_cy)
        else:
            out, ok = _warp_columns_fixed(ref.values, cy)
    else:
        cxb = np.broadcast_to(cx, (ref.height, ref.width))
        cyb = np.broadcast_to(cy, (ref.height, ref.width))
        out, ok = _warp_generic(ref.values, cxb, cyb)
    return FeatureMap(out, ref.kind), ok


def _displacement_for(ref_baseline: BaselineSpec, hyp: HypothesisSet, plane: int,
                      theta_lat: np.ndarray, width: int, height: int):
    if ref_baseline.axis is Axis.VERTICAL:
        cy = swl_displacement(hyp, plane, theta_lat, ref_baseline, height)
        return 0.0, cy
    return exact_displacement(hyp.plane(plane), ref_baseline, width, height)


def build_cost_volume(target: FeatureMap, refs, hyp: HypothesisSet,
                      target_valid: np.ndarray | None = None) -> CostVolume:
    """Variance-fused cost volume over all hypothesis planes.

    ``refs`` is a list of (FeatureMap, BaselineSpec, valid_mask).  For
    every plane each reference is warped by its own baseline-specific
    displacement; the cost is the per-channel variance across the
    contributing views averaged over channels.  Cells reached by fewer
    than two views carry the +inf sentinel.
    """
    if not refs:
        raise ConfigError("build_cost_volume needs at least one reference view")
    h, w, f = target.values.shape
    theta_lat = latitude_grid(h)
    if target_valid is None:
        target_valid = np.ones((h, w), bool)
    tv = target_valid.astype(np.float32)[..., None]
    t_vals = target.values * tv
    s1_t = t_vals
    s2_t = t_vals * target.values
    n_t = tv[..., 0]

    num_planes = hyp.num_planes
    cost = np.empty((num_planes, h, w), dtype=np.float32)
    count = np.empty((num_planes, h, w), dtype=np.uint8)
    ref_masks = [np.asarray(m, dtype=np.float32) for (_, _, m) in refs]

    for j in range(num_planes):
        s1 = s1_t.copy()
        s2 = s2_t.copy()
        n = n_t.copy()
        for (feat, baseline, _), mask in zip(refs, ref_masks):
            cx, cy = _displacement_for(baseline, hyp, j, theta_lat, w, h)
            warped, ok = warp_view(feat, cx, cy)
            wmask_map, _ = warp_view(FeatureMap(mask[..., None], "mask"), cx, cy)
            wm = ((wmask_map.values[..., 0] > 0.999) & ok).astype(np.float32)
            wv = warped.values * wm[..., None]
            s1 += wv
            s2 += wv * warped.values
            n += wm
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = s1 / n[..., None]
            var = s2 / n[..., None] - mean * mean
            c = np.maximum(var, 0.0).mean(axis=2)
        bad = n < 2.0
        c[bad] = COST_INF
        cost[j] = c
        count[j] = n.astype(np.uint8)
    return CostVolume(cost, count)


def _shift2d(arr: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Shift with longitude wrap in x and zero fill in y."""
    out = np.roll(arr, -dx, axis=1)
    if dy > 0:
        out = np.concatenate([out[dy:], np.zeros_like(out[:dy])], axis=0)
    elif dy < 0:
        out = np.concatenate([np.zeros_like(out[dy:]), out[:dy]], axis=0)
    return out


def aggregate_cost(cv: CostVolume, guide: ErpImage, radius: int = 4,
                   edge_threshold: float = 0.3) -> CostVolume:
    """Edge-aware box aggregation of every cost slice.

    Neighbors within ``radius`` contribute when their guide color stays
    within ``edge_threshold`` (max channel difference) of the center
    pixel; windows wrap in longitude and truncate at the top/bottom.
    Infinite (sentinel) cells neither contribute nor change.
    """
    d, h, w = cv.cost.shape
    if (h, w) != (guide.height, guide.width):
        raise ConfigError("aggregate_cost: guide dimensions do not match")
    g = guide.pixels.astype(np.float32)
    offsets = [(dy, dx) for dy in range(-radius, radius + 1)
               for dx in range(-radius, radius + 1)]
    weights = []
    for dy, dx in offsets:
        diff = np.abs(_shift2d(g, dy, dx) - g).max(axis=2)
        wgt = (diff <= edge_threshold).astype(np.float32)
        if dy > 0:
            wgt[h - dy:, :] = 0.0
        elif dy < 0:
            wgt[: -dy, :] = 0.0
        weights.append(wgt)

    out = np.empty_like(cv.cost)
    finite_all = np.isfinite(cv.cost)
    for j in range(d):
        slice_cost = cv.cost[j]
        fin = finite_all[j]
        cm = np.where(fin, slice_cost, 0.0).astype(np.float32)
        fm = fin.astype(np.float32)
        num = np.zeros((h, w), np.float32)
        den = np.zeros((h, w), np.float32)
        for wgt, (dy, dx) in zip(weights, offsets):
            num += wgt * _shift2d(cm, dy, dx)
            den += wgt * _shift2d(fm, dy, dx)
        agg = np.where((den > 0) & fin, num / np.maximum(den, 1.0), slice_cost)
        out[j] = agg
    return CostVolume(out, cv.valid_count.copy())


def regress_depth(cv: CostVolume, hyp: HypothesisSet, tau: float = 0.05) -> DepthMap:
    """Soft inverse-depth regression from a cost volume.

    Softmax weights p_j = softmax(-cost_j / tau) over finite planes; the
    predicted inverse depth is the weighted mean of the plane inverse
    depths (equivalently the sampling-consistent form of the per-level
    interval sum), clamped to the global range.  Pixels with no finite
    plane are invalid.
    """
    if tau <= 0:
        raise ConfigError("regress_depth: tau must be positive")
    cost = cv.cost
    finite = np.isfinite(cost)
    any_finite = finite.any(axis=0)
    safe = np.where(finite, cost, np.float32(np.inf))
    m = safe.min(axis=0)
    m = np.where(any_finite, m, 0.0)
    z = np.where(finite, -(cost - m[None]) / np.float32(tau), -np.inf)
    wgt = np.exp(z, dtype=np.float32)
    wsum = wgt.sum(axis=0)
    wsum_safe = np.where(any_finite, wsum, 1.0)
    inv_planes = hyp.inv_depth.astype(np.float32)
    if hyp.per_pixel:
        pred_inv = (wgt * inv_planes).sum(axis=0) / wsum_safe
    else:
        pred_inv = np.tensordot(inv_planes, wgt, axes=(0, 0)) / wsum_safe
    pred_inv = np.clip(pred_inv.astype(np.float64), 1.0 / hyp.d_max, 1.0 / hyp.d_min)
    depth = 1.0 / pred_inv
    depth = np.where(any_finite, depth, hyp.d_max)
    return DepthMap(depth, any_finite, hyp.d_min, hyp.d_max)


def softmax_plane_weights(cv: CostVolume, tau: float) -> np.ndarray:
    """Per-plane probabilities used by the regression (for inspection)."""
    cost = cv.cost
    finite = np.isfinite(cost)
    safe = np.where(finite, cost, np.float32(np.inf))
    m = safe.min(axis=0)
    m = np.where(finite.any(axis=0), m, 0.0)
    z = np.where(finite, -(cost - m[None]) / np.float32(tau), -np.inf)
    wgt = np.exp(z, dtype=np.float32)
    s = wgt.sum(axis=0)
    return wgt / np.where(s > 0, s, 1.0)


def _as_ref_tuple(entry):
    if hasattr(entry, "image"):  # SynthView
        return entry.image, entry.baseline, entry.mask
    img, baseline, mask = entry
    if mask is None:
        mask = np.ones((img.height, img.width), bool)
    return img, baseline, mask


def parallax_sensitivity(refs, d_min: float, d_max: float,
                         width: int, height: int) -> np.ndarray:
    """Per-pixel displacement sensitivity in pixels per unit inverse depth.

    Measured as the secant slope of the exact displacement between two
    probe depths no closer than twice the baseline (nearer hypotheses
    swing wildly around the reference camera and say nothing about
    discriminability).  Pixels near a baseline epipole get (almost) zero
    sensitivity: they carry no matching evidence at any depth.
    """
    best = np.zeros((height, width))
    for entry in refs:
        _, baseline, _ = _as_ref_tuple(entry)
        inv_lo = 1.0 / d_max
        inv_hi = 1.0 / max(d_min, 2.0 * abs(baseline.offset), 1e-9)
        if inv_hi <= inv_lo:
            inv_hi = 2.0 * inv_lo
        cx_n, cy_n = exact_displacement(inv_hi, baseline, width, height)
        cx_f, cy_f = exact_displacement(inv_lo, baseline, width, height)
        slope = np.hypot(cx_n - cx_f, cy_n - cy_f) / (inv_hi - inv_lo)
        best = np.maximum(best, slope)
    return best


def _fill_low_parallax(depth: DepthMap, weak: np.ndarray,
                       good_source: np.ndarray | None = None) -> DepthMap:
    """Replace unconstrained pixels by the nearest constrained pixel in
    the same column (vertical nearest-neighbor fill).

    ``good_source`` optionally restricts donor pixels to comfortably
    constrained ones; it defaults to the complement of ``weak``.
    """
    if good_source is None:
        good_source = ~weak
    good_source = good_source & ~weak
    if not weak.any() or not good_source.any():
        return depth
    h, w = depth.depth.shape
    rows = np.arange(h)[:, None]
    above = np.where(good_source, rows, -1)
    above = np.maximum.accumulate(above, axis=0)
    below = np.where(good_source, rows, 2 * h)
    below = np.minimum.accumulate(below[::-1], axis=0)[::-1]
    dist_above = np.where(above >= 0, rows - above, 2 * h)
    dist_below = np.where(below < h, below - rows, 2 * h)
    src = np.where(dist_above <= dist_below, above, below)
    has_src = (dist_above < 2 * h) | (dist_below < 2 * h)
    src = np.clip(src, 0, h - 1)
    cols = np.broadcast_to(np.arange(w)[None, :], (h, w))
    replace = weak & has_src
    out = np.where(replace, depth.depth[src, cols], depth.depth)
    valid = np.where(replace, depth.valid[src, cols], depth.valid)
    return DepthMap(out, valid, depth.d_min, depth.d_max)


def run_sweep_levels(target: ErpImage, refs, config: SweepConfig,
                     target_valid: np.ndarray | None = None) -> list[DepthMap]:
    """Full cascade sweep; returns one DepthMap per level (last = final)."""
    entries = [_as_ref_tuple(r) for r in refs]
    if not entries:
        raise ConfigError("run_sweep needs at least one reference view")
    for _, baseline, _ in entries:
        baseline.warn_if_large(config.d_min)
    radius = descriptor_window_radius(config.descriptor)
    t_feat = extract_features(target, config.descriptor)
    ref_feats = []
    for img, baseline, mask in entries:
        feat = extract_features(img, config.descriptor)
        ref_feats.append((feat, baseline, erode_mask(mask, radius)))
    rng = np.random.default_rng(config.seed)

    outputs = []
    prev: DepthMap | None = None
    for level, planes in enumerate(config.plane_counts, start=1):
        if level == 1:
            if config.sampling == "inverse":
                hyp = sample_hypotheses(config.d_min, config.d_max, planes,
                                        config.interval_scale)
            elif config.sampling == "depth":
                hyp = sample_hypotheses_uniform_depth(config.d_min, config.d_max, planes)
            else:
                hyp = sample_hypotheses_random(config.d_min, config.d_max, planes,
                                               rng, config.random_sigma)
        else:
            hyp = cascade_refine(prev, planes, config.level_interval(level),
                                 config.sampling, rng, config.random_sigma, level)
        cv = build_cost_volume(t_feat, ref_feats, hyp, target_valid)
        if config.aggregate:
            cv = aggregate_cost(cv, target, config.agg_radius, config.agg_edge_threshold)
        prev = regress_depth(cv, hyp, config.level_tau(level))
        outputs.append(prev)
    if config.fill_low_parallax and config.min_plane_step_px > 0:
        sens = parallax_sensitivity(entries, config.d_min, config.d_max,
                                    target.width, target.height)
        spacing1 = (1.0 / config.d_min - 1.0 / config.d_max) * config.interval_scale \
            / (config.plane_counts[0] - 1)
        step_px = sens * spacing1
        weak = step_px < config.min_plane_step_px
        strong = step_px >= 1.5 * config.min_plane_step_px
        outputs[-1] = _fill_low_parallax(outputs[-1], weak, strong)
    if not outputs[-1].valid.any():
        raise NumericalError("run_sweep produced no valid depth")
    return outputs


def run_sweep(target: ErpImage, refs, config: SweepConfig,
              target_valid: np.ndarray | None = None) -> DepthMap:
    """Final depth map of the cascade sweep (see run_sweep_levels)."""
    return run_sweep_levels(target, refs, config, target_valid)[-1]
