"""Depth hypothesis plane sampling and cascade window refinement.

Planes are placed in the inverse-depth domain.  Level 1 uses one global
list; later cascade levels carry a per-pixel list re-centered on the
previous level's prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .images import DepthMap


@dataclass
class HypothesisSet:
    """Per-level set of depth planes, uniform in inverse depth.

    ``inv_depth`` is (D,) for a global set or (D, H, W) per pixel and is
    strictly increasing along the plane axis (far to near).  ``interval``
    is the inverse-depth step between consecutive planes (scalar or
    (H, W)).  d_min/d_max are the global range clamps in meters.
    """

    level: int
    inv_depth: np.ndarray
    interval: np.ndarray | float
    d_min: float
    d_max: float

    def __post_init__(self):
        self.inv_depth = np.asarray(self.inv_depth, dtype=np.float64)
        if self.inv_depth.ndim not in (1, 3):
            raise ConfigError("inv_depth must be (D,) or (D, H, W)")
        steps = np.diff(self.inv_depth, axis=0)
        if self.num_planes > 1 and not np.all(steps > 0):
            raise ConfigError("inverse depths must increase strictly across planes")

    @property
    def num_planes(self) -> int:
        return self.inv_depth.shape[0]

    @property
    def per_pixel(self) -> bool:
        return self.inv_depth.ndim == 3

    def plane(self, j: int):
        """Inverse depth of plane j: scalar or (H, W)."""
        return self.inv_depth[j]


def sample_hypotheses(d_min: float, d_max: float, num_planes: int,
                      interval_scale: float = 1.0) -> HypothesisSet:
    """Global level-1 planes, uniform in inverse depth.

    1/d_j = 1/d_max + (1/d_min - 1/d_max) * (interval_scale * j)/(D - 1).
    """
    if not (0 < d_min < d_max):
        raise ConfigError(f"need 0 < d_min < d_max, got [{d_min}, {d_max}]")
    if num_planes < 2:
        raise ConfigError("need at least 2 hypothesis planes")
    if not (0 < interval_scale <= 1.0):
        raise ConfigError("interval_scale must lie in (0, 1]")
    j = np.arange(num_planes, dtype=np.float64)
    span = 1.0 / d_min - 1.0 / d_max
    inv = 1.0 / d_max + span * (interval_scale * j) / (num_planes - 1)
    step = span * interval_scale / (num_planes - 1)
    return HypothesisSet(1, inv, step, d_min, d_max)


def sample_hypotheses_uniform_depth(d_min: float, d_max: float,
                                    num_planes: int) -> HypothesisSet:
    """Ablation sampler: planes uniform in depth (not inverse depth)."""
    d = np.linspace(d_max, d_min, num_planes)
    inv = 1.0 / d
    return HypothesisSet(1, inv, float(np.mean(np.diff(inv))), d_min, d_max)


def sample_hypotheses_random(d_min: float, d_max: float, num_planes: int,
                             rng: np.random.Generator,
                             sigma_steps: float = 0.5) -> HypothesisSet:
    """Ablation sampler: uniform inverse-depth planes with Gaussian jitter.

    Interior planes are perturbed by sigma_steps times the uniform step
    and re-sorted; the endpoints stay pinned so the range is covered.
    """
    base = sample_hypotheses(d_min, d_max, num_planes)
    step = float(base.interval)
    inv = base.inv_depth.copy()
    inv[1:-1] += rng.normal(0.0, sigma_steps * step, num_planes - 2)
    inv[1:-1] = np.clip(inv[1:-1], 1.0 / d_max + 1e-12, 1.0 / d_min - 1e-12)
    inv = np.sort(inv)
    # collapse accidental duplicates by nudging
    for k in range(1, num_planes):
        if inv[k] <= inv[k - 1]:
            inv[k] = np.nextafter(inv[k - 1], np.inf)
    return HypothesisSet(1, inv, step, d_min, d_max)


def default_level_interval(d_min: float, d_max: float, prev_planes: int,
                           num_planes: int, interval_scale: float = 1.0) -> float:
    """Default refinement interval: the level window spans 2/prev_planes
    of the level-1 inverse-depth range."""
    span = (1.0 / d_min - 1.0 / d_max) * interval_scale
    return 2.0 * span / (prev_planes * num_planes)


def cascade_refine(prev: DepthMap, num_planes: int, interval: float,
                   sampling: str = "inverse",
                   rng: np.random.Generator | None = None,
                   sigma_steps: float = 0.5, level: int = 2) -> HypothesisSet:
    """Per-pixel hypothesis window around the previous level's prediction.

    In the inverse-depth domain: lo = max(1/d_prev - D*v/2, 1/d_max),
    hi = min(1/d_min, 1/d_prev + D*v/2), planes uniform on [lo, hi] with
    step (hi - lo)/(D - 1).  Invalid previous pixels fall back to the
    global level-1 range.
    """
    if num_planes < 2:
        raise ConfigError("need at least 2 hypothesis planes")
    d_min, d_max = prev.d_min, prev.d_max
    inv_lo_global, inv_hi_global = 1.0 / d_max, 1.0 / d_min
    inv_prev = np.where(prev.valid,
                        1.0 / np.clip(prev.depth, d_min, d_max),
                        0.5 * (inv_lo_global + inv_hi_global))
    half = num_planes * interval / 2.0
    lo = np.maximum(inv_prev - half, inv_lo_global)
    hi = np.minimum(inv_hi_global, inv_prev + half)
    lo = np.where(prev.valid, lo, inv_lo_global)
    hi = np.where(prev.valid, hi, inv_hi_global)
    step = (hi - lo) / (num_planes - 1)
    j = np.arange(num_planes, dtype=np.float64)[:, None, None]
    inv = lo[None] + j * step[None]
    if sampling == "depth":
        d_lo = 1.0 / hi
        d_hi = 1.0 / lo
        frac = j / (num_planes - 1)
        inv = 1.0 / (d_hi[None] - (d_hi - d_lo)[None] * frac)
    elif sampling == "random":
        if rng is None:
            rng = np.random.default_rng(0)
        jitter = rng.normal(0.0, sigma_steps, (num_planes - 2, 1, 1)) * step[None]
        inv[1:-1] = np.clip(inv[1:-1] + jitter, inv_lo_global, inv_hi_global)
        inv = np.sort(inv, axis=0)
        eps = np.maximum(step[None], 1e-15) * 1e-9
        for k in range(1, num_planes):
            bad = inv[k] <= inv[k - 1]
            inv[k] = np.where(bad, inv[k - 1] + eps[0], inv[k])
    elif sampling != "inverse":
        raise ConfigError(f"unknown sampling strategy {sampling!r}")
    return HypothesisSet(level, inv, step, d_min, d_max)
