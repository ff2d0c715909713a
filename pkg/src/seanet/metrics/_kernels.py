"""Hot per-pixel kernels for the metric suite.

Each kernel has a numba ``@njit`` implementation and a pure-numpy one with the
same contract. The numba path is used when numba imports and the environment
variable ``SEANET_NUMBA`` is not set to ``0``/``false``/``off``.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("SEANET_NUMBA", "1").lower() not in ("0", "false", "off")

N_LEVELS = 256


def quantize(pred: np.ndarray) -> np.ndarray:
    """Map [0, 1] scores to threshold levels ``floor(255 * s)`` as uint8."""
    return (pred * 255).astype(np.uint8)


# -- threshold histograms -------------------------------------------------------

def threshold_counts_numpy(q: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Count pixels with ``q >= t`` for t = 0..255, split by ground-truth label.

    Returns ``(fg, bg)``, each int64 of length 256, indexed by threshold.
    """
    q = q.ravel()
    gt = gt.ravel()
    fg_hist = np.bincount(q[gt], minlength=N_LEVELS)
    bg_hist = np.bincount(q[~gt], minlength=N_LEVELS)
    # reverse cumulative sum: entry t counts levels >= t
    fg = np.cumsum(fg_hist[::-1])[::-1].astype(np.int64)
    bg = np.cumsum(bg_hist[::-1])[::-1].astype(np.int64)
    return fg, bg


def _threshold_counts_py(q, gt):
    fg = np.zeros(N_LEVELS, np.int64)
    bg = np.zeros(N_LEVELS, np.int64)
    for i in range(q.size):
        if gt[i]:
            fg[q[i]] += 1
        else:
            bg[q[i]] += 1
    for t in range(N_LEVELS - 2, -1, -1):
        fg[t] += fg[t + 1]
        bg[t] += bg[t + 1]
    return fg, bg


# -- quadrant moments for the region term of the structure measure -------------

def quadrant_stats_numpy(pred: np.ndarray, gt: np.ndarray, cy: int, cx: int) -> np.ndarray:
    """Per quadrant (LT, RT, LB, RB split at row ``cy`` / column ``cx``) return
    ``[n, mean_p, mean_g, sum (p-mp)^2, sum (g-mg)^2, sum (p-mp)(g-mg)]``."""
    out = np.zeros((4, 6))
    h, w = pred.shape
    boxes = ((0, cy, 0, cx), (0, cy, cx, w), (cy, h, 0, cx), (cy, h, cx, w))
    for k, (r0, r1, c0, c1) in enumerate(boxes):
        p = pred[r0:r1, c0:c1]
        g = gt[r0:r1, c0:c1].astype(np.float64)
        n = p.size
        if n == 0:
            continue
        mp, mg = p.mean(), g.mean()
        dp, dg = p - mp, g - mg
        out[k] = (n, mp, mg, np.sum(dp * dp), np.sum(dg * dg), np.sum(dp * dg))
    return out


def _quadrant_stats_py(pred, gt, cy, cx):
    out = np.zeros((4, 6))
    h, w = pred.shape
    for k in range(4):
        r0 = 0 if k < 2 else cy
        r1 = cy if k < 2 else h
        c0 = 0 if k % 2 == 0 else cx
        c1 = cx if k % 2 == 0 else w
        n = (r1 - r0) * (c1 - c0)
        if n <= 0:
            continue
        sp = 0.0
        sg = 0.0
        for i in range(r0, r1):
            for j in range(c0, c1):
                sp += pred[i, j]
                sg += 1.0 if gt[i, j] else 0.0
        mp = sp / n
        mg = sg / n
        vp = 0.0
        vg = 0.0
        cv = 0.0
        for i in range(r0, r1):
            for j in range(c0, c1):
                dp = pred[i, j] - mp
                dg = (1.0 if gt[i, j] else 0.0) - mg
                vp += dp * dp
                vg += dg * dg
                cv += dp * dg
        out[k, 0] = n
        out[k, 1] = mp
        out[k, 2] = mg
        out[k, 3] = vp
        out[k, 4] = vg
        out[k, 5] = cv
    return out


if HAVE_NUMBA:
    _threshold_counts_nb = njit(cache=True, nogil=True)(_threshold_counts_py)
    _quadrant_stats_nb = njit(cache=True, nogil=True)(_quadrant_stats_py)

    def threshold_counts_numba(q: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _threshold_counts_nb(np.ascontiguousarray(q).ravel(),
                                    np.ascontiguousarray(gt).ravel())

    def quadrant_stats_numba(pred: np.ndarray, gt: np.ndarray, cy: int, cx: int) -> np.ndarray:
        return _quadrant_stats_nb(np.ascontiguousarray(pred, dtype=np.float64),
                                  np.ascontiguousarray(gt), int(cy), int(cx))


if USE_NUMBA:
    threshold_counts = threshold_counts_numba
    quadrant_stats = quadrant_stats_numba
else:
    threshold_counts = threshold_counts_numpy
    quadrant_stats = quadrant_stats_numpy


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
