"""Per-image SOD measures: MAE, F-measure, E-measure, S-measure.

Scores are float arrays in [0, 1]; ground truth is boolean (or 0/1). Threshold
sweeps binarize with ``floor(255 * s) >= t`` for t = 0..255 and return curves
indexed by t. Adaptive variants binarize with ``s >= min(2 * mean(s), 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

EPS = np.spacing(1)


def _check(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction shape {pred.shape} != ground-truth shape {gt.shape}")
    if pred.size == 0:
        raise ValueError("empty maps")
    if pred.min() < 0 or pred.max() > 1:
        raise ValueError(f"prediction values must lie in [0, 1], got [{pred.min()}, {pred.max()}]")
    if gt.dtype != bool:
        gt = gt > 0.5
    return pred, gt


def normalize_prediction(pred: np.ndarray) -> np.ndarray:
    """Min-max normalize a score map; constant maps are returned unchanged."""
    pred = np.asarray(pred, dtype=np.float64)
    lo, hi = pred.min(), pred.max()
    if hi == lo:
        return pred
    return (pred - lo) / (hi - lo)


def adaptive_threshold(pred: np.ndarray) -> float:
    return min(2.0 * float(pred.mean()), 1.0)


def mae(pred: np.ndarray, gt: np.ndarray) -> float:
    pred, gt = _check(pred, gt)
    return float(np.mean(np.abs(pred - gt)))


# -- F-measure -------------------------------------------------------------------

@dataclass
class FMeasure:
    max: float
    mean: float
    adp: float
    curve: np.ndarray
    precision: np.ndarray
    recall: np.ndarray


def _f_from_counts(tp, pos, n_fg, beta2):
    tp = np.asarray(tp, dtype=np.float64)
    precision = np.divide(tp, pos, out=np.zeros_like(tp), where=np.asarray(pos) > 0)
    recall = tp / n_fg if n_fg > 0 else np.zeros_like(tp)
    num = (1 + beta2) * precision * recall
    den = beta2 * precision + recall
    f = np.divide(num, den, out=np.zeros_like(num), where=num > 0)
    return f, precision, recall


def f_measure(pred: np.ndarray, gt: np.ndarray, beta2: float = 0.3) -> FMeasure:
    """F-beta over the 256-threshold sweep plus the adaptive-threshold value.

    Empty ground truth gives recall 0 and hence F = 0 at every threshold.
    """
    pred, gt = _check(pred, gt)
    fg, bg = _kernels.threshold_counts(_kernels.quantize(pred), gt)
    n_fg = int(gt.sum())
    curve, precision, recall = _f_from_counts(fg, fg + bg, n_fg, beta2)
    binary = pred >= adaptive_threshold(pred)
    tp = np.count_nonzero(binary & gt)
    f_adp, _, _ = _f_from_counts(np.array([tp]), np.array([np.count_nonzero(binary)]), n_fg, beta2)
    return FMeasure(float(curve.max()), float(curve.mean()), float(f_adp[0]), curve, precision,
                    recall)


# -- E-measure -------------------------------------------------------------------

@dataclass
class EMeasure:
    max: float
    mean: float
    adp: float
    curve: np.ndarray


def _enhanced(a, b):
    align = 2 * a * b / (a * a + b * b + EPS)
    return (align + 1) ** 2 / 4


def _e_from_counts(tp, fp, n_fg, n):
    """Mean enhanced-alignment score of a binarized map given its confusion counts.

    Works elementwise on arrays of counts (one entry per threshold).
    """
    tp = np.asarray(tp, dtype=np.float64)
    fp = np.asarray(fp, dtype=np.float64)
    pos = tp + fp
    if n_fg == 0:
        return (n - pos) / n
    if n_fg == n:
        return pos / n
    fn = n_fg - tp
    tn = n - n_fg - fp
    mp = pos / n
    mg = n_fg / n
    total = (
        tp * _enhanced(1 - mp, 1 - mg)
        + fp * _enhanced(1 - mp, 0 - mg)
        + fn * _enhanced(0 - mp, 1 - mg)
        + tn * _enhanced(0 - mp, 0 - mg)
    )
    return total / n


def e_measure(pred: np.ndarray, gt: np.ndarray) -> EMeasure:
    """Enhanced-alignment measure over the threshold sweep plus the adaptive value.

    Scores are averaged over the N pixels (not N - 1), so a perfect map scores 1.
    All-background / all-foreground ground truth use the measure's degenerate
    branches (score = fraction of pixels predicted background / foreground).
    """
    pred, gt = _check(pred, gt)
    n = gt.size
    n_fg = int(gt.sum())
    fg, bg = _kernels.threshold_counts(_kernels.quantize(pred), gt)
    curve = _e_from_counts(fg, bg, n_fg, n)
    binary = pred >= adaptive_threshold(pred)
    tp = np.count_nonzero(binary & gt)
    fp = np.count_nonzero(binary & ~gt)
    adp = float(_e_from_counts(tp, fp, n_fg, n))
    return EMeasure(float(curve.max()), float(curve.mean()), adp, curve)


# -- S-measure -------------------------------------------------------------------

def _object_score(x: np.ndarray) -> float:
    mean = float(np.mean(x))
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return 2 * mean / (mean * mean + 1 + std + EPS)


def _ssim(n, mx, my, sxx, syy, sxy) -> float:
    denom = n - 1 + EPS
    sx, sy, cxy = sxx / denom, syy / denom, sxy / denom
    alpha = 4 * mx * my * cxy
    beta = (mx * mx + my * my) * (sx + sy)
    if alpha != 0:
        return alpha / (beta + EPS)
    return 1.0 if beta == 0 else 0.0


def centroid(gt: np.ndarray) -> tuple[int, int]:
    """1-based foreground centroid ``(row, col)``, rounded half up; image centre if empty."""
    h, w = gt.shape
    total = gt.sum()
    if total == 0:
        return int(np.floor(h / 2 + 0.5)), int(np.floor(w / 2 + 0.5))
    rows = np.arange(1, h + 1) @ gt.sum(axis=1)
    cols = np.arange(1, w + 1) @ gt.sum(axis=0)
    return int(np.floor(rows / total + 0.5)), int(np.floor(cols / total + 0.5))


def s_measure(pred: np.ndarray, gt: np.ndarray, alpha: float = 0.5) -> float:
    """Structure measure: ``alpha * object + (1 - alpha) * region``, clipped at 0."""
    pred, gt = _check(pred, gt)
    y = gt.mean()
    if y == 0:
        return float(1 - pred.mean())
    if y == 1:
        return float(pred.mean())
    obj = y * _object_score(pred[gt]) + (1 - y) * _object_score(1 - pred[~gt])
    h, w = gt.shape
    cy, cx = centroid(gt)
    stats = _kernels.quadrant_stats(pred, gt, cy, cx)
    weights = np.array([cy * cx, cy * (w - cx), (h - cy) * cx, 0.0]) / (h * w)
    weights[3] = 1 - weights[:3].sum()
    region = sum(wk * _ssim(*stats[k]) for k, wk in enumerate(weights) if stats[k, 0] > 0)
    return float(max(0.0, alpha * obj + (1 - alpha) * region))
