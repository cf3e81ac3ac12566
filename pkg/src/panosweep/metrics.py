"""Depth-quality metrics and the inverse-Huber (berHu) training losses.

Losses are computed for reporting only; nothing in this package is
trained by gradient descent.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import NumericalError
from .images import DepthMap


@dataclass
class Metrics:
    """Standard monocular-depth error measures over a shared valid mask."""

    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float
    pixel_count: int

    def as_dict(self) -> dict:
        return {k: (float(v) if k != "pixel_count" else int(v))
                for k, v in asdict(self).items()}


def eval_metrics(pred: DepthMap, gt: DepthMap) -> Metrics:
    """Evaluate prediction against ground truth over the mask intersection.

    abs_rel = mean(|p-g|/g), sq_rel = mean((p-g)^2/g),
    rmse = sqrt(mean((p-g)^2)), rmse_log = sqrt(mean((ln p - ln g)^2)),
    delta_i = fraction with max(p/g, g/p) < 1.25^i.
    """
    if pred.depth.shape != gt.depth.shape:
        raise NumericalError("eval_metrics: dimension mismatch")
    mask = pred.valid & gt.valid
    if not mask.any():
        raise NumericalError("eval_metrics: empty valid-mask intersection")
    p = pred.depth[mask].astype(np.float64)
    g = gt.depth[mask].astype(np.float64)
    diff = p - g
    abs_rel = float(np.mean(np.abs(diff) / g))
    sq_rel = float(np.mean(diff * diff / g))
    rmse = float(np.sqrt(np.mean(diff * diff)))
    rmse_log = float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2)))
    ratio = np.maximum(p / g, g / p)
    deltas = [float(np.mean(ratio < 1.25**i)) for i in (1, 2, 3)]
    return Metrics(abs_rel, sq_rel, rmse, rmse_log, *deltas, int(mask.sum()))


def berhu(pred: DepthMap, gt: DepthMap, c_rule: float = 0.2) -> float:
    """Inverse-Huber loss averaged over the shared valid mask.

    berHu(e) = |e| for |e| <= c, else (e^2 + c^2)/(2c); the threshold is
    c = c_rule * max|e| over the evaluated pixels (0 error gives loss 0).
    """
    if pred.depth.shape != gt.depth.shape:
        raise NumericalError("berhu: dimension mismatch")
    mask = pred.valid & gt.valid
    if not mask.any():
        raise NumericalError("berhu: empty valid-mask intersection")
    e = np.abs(pred.depth[mask] - gt.depth[mask]).astype(np.float64)
    c = c_rule * float(e.max())
    if c == 0.0:
        return 0.0
    vals = np.where(e <= c, e, (e * e + c * c) / (2.0 * c))
    return float(vals.mean())


def total_loss(coarse_pair: tuple[DepthMap, DepthMap],
               stereo_pairs: list[tuple[DepthMap, DepthMap]],
               omega_1: float = 1.0, omega_2: float = 0.02,
               lambdas=None, c_rule: float = 0.2) -> dict:
    """Combined reporting loss: omega_1*L_coarse + omega_2*sum_l lambda_l*L_l.

    ``stereo_pairs`` holds one (prediction, ground truth) pair per cascade
    level; ``lambdas`` defaults to uniform weight 1 per level.
    """
    if omega_1 < 0 or omega_2 < 0:
        raise NumericalError("total_loss: weights must be nonnegative")
    if lambdas is None:
        lambdas = [1.0] * len(stereo_pairs)
    if len(lambdas) != len(stereo_pairs):
        raise NumericalError("total_loss: one lambda per stereo level required")
    l_coarse = berhu(*coarse_pair, c_rule=c_rule)
    per_level = [berhu(p, g, c_rule=c_rule) for p, g in stereo_pairs]
    l_stereo = float(sum(lam * l for lam, l in zip(lambdas, per_level)))
    return {
        "coarse": l_coarse,
        "stereo_levels": per_level,
        "stereo": l_stereo,
        "total": float(omega_1 * l_coarse + omega_2 * l_stereo),
    }


def image_mse(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean squared error between two images over an optional mask."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise NumericalError("image_mse: dimension mismatch")
    se = (a - b) ** 2
    if se.ndim == 3:
        se = se.mean(axis=2)
    if mask is not None:
        if mask.shape != se.shape:
            raise NumericalError("image_mse: mask dimension mismatch")
        if not mask.any():
            raise NumericalError("image_mse: empty mask")
        return float(se[mask].mean())
    return float(se.mean())
