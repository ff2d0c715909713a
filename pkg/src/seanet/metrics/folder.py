"""Dataset-level evaluation over folders of prediction / ground-truth images."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .measures import e_measure, f_measure, mae, normalize_prediction, s_measure

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}
REPORT_HEADER = ("predictions resized bilinearly to GT size, min-max normalized unless "
                 "constant; GT binarized at 0.5 of the 8-bit range; E-measure divides by N")


@dataclass
class MetricReport:
    s_alpha: float
    f_max: float
    f_mean: float
    f_adp: float
    e_max: float
    e_mean: float
    e_adp: float
    mae: float
    n_images: int = 0
    missing: list[str] = field(default_factory=list)
    per_image: dict[str, dict[str, float]] = field(default_factory=dict)
    f_curve: list[float] = field(default_factory=list)
    e_curve: list[float] = field(default_factory=list)

    def summary(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in
                ("s_alpha", "f_max", "f_mean", "f_adp", "e_max", "e_mean", "e_adp", "mae")}

    def to_json(self, path: str | Path) -> None:
        data = {"note": REPORT_HEADER, **asdict(self)}
        Path(path).write_text(json.dumps(data, indent=2))

    def curves_csv(self, path: str | Path) -> None:
        rows = ["threshold,f_measure,e_measure"]
        rows += [f"{t},{f:.6f},{e:.6f}" for t, (f, e) in enumerate(zip(self.f_curve, self.e_curve))]
        Path(path).write_text("\n".join(rows) + "\n")


def read_gray(path: str | Path) -> np.ndarray:
    """Read an image as a float array in [0, 1]; raises ``OSError`` on unreadable files."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64) / 255.0


def _stems(folder: Path) -> dict[str, Path]:
    return {p.stem: p for p in sorted(folder.iterdir()) if p.suffix.lower() in IMAGE_SUFFIXES}


def evaluate_pair(pred: np.ndarray, gt: np.ndarray) -> dict:
    """All measures for one image; ``pred`` in [0, 1] at any size, ``gt`` in [0, 1]."""
    gt_bool = gt >= 0.5
    if pred.shape != gt.shape:
        img = Image.fromarray(pred.astype(np.float32), mode="F")
        img = img.resize((gt.shape[1], gt.shape[0]), Image.BILINEAR)
        pred = np.clip(np.asarray(img, dtype=np.float64), 0, 1)
    pred = normalize_prediction(pred)
    fm = f_measure(pred, gt_bool)
    em = e_measure(pred, gt_bool)
    return {
        "s_alpha": s_measure(pred, gt_bool),
        "f_adp": fm.adp,
        "e_adp": em.adp,
        "mae": mae(pred, gt_bool),
        "f_curve": fm.curve,
        "e_curve": em.curve,
    }


def aggregate(results: dict[str, dict], missing: list[str] | None = None) -> MetricReport:
    """Average per-image results (sorted by name). Max/mean of F and E are taken on
    the dataset-mean curves, as in common SOD evaluation tooling."""
    if not results:
        raise ValueError("no image pairs to evaluate")
    names = sorted(results)
    f_curve = np.mean([results[n]["f_curve"] for n in names], axis=0)
    e_curve = np.mean([results[n]["e_curve"] for n in names], axis=0)

    def avg(key):
        return float(np.mean([results[n][key] for n in names]))

    per_image = {
        n: {"s_alpha": float(results[n]["s_alpha"]), "mae": float(results[n]["mae"]),
            "f_max": float(np.max(results[n]["f_curve"])),
            "e_max": float(np.max(results[n]["e_curve"]))}
        for n in names
    }
    return MetricReport(
        s_alpha=avg("s_alpha"), f_max=float(f_curve.max()), f_mean=float(f_curve.mean()),
        f_adp=avg("f_adp"), e_max=float(e_curve.max()), e_mean=float(e_curve.mean()),
        e_adp=avg("e_adp"), mae=avg("mae"), n_images=len(names), missing=missing or [],
        per_image=per_image, f_curve=f_curve.tolist(), e_curve=e_curve.tolist(),
    )


def evaluate_folder(pred_dir: str | Path, gt_dir: str | Path, workers: int = 1) -> MetricReport:
    """Evaluate every same-stem pair; unmatched stems are listed in ``missing``."""
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    preds, gts = _stems(pred_dir), _stems(gt_dir)
    missing = sorted(set(preds) ^ set(gts))
    if missing:
        log.warning("%d unmatched files skipped: %s", len(missing), missing[:10])
    common = sorted(set(preds) & set(gts))

    def one(stem):
        return stem, evaluate_pair(read_gray(preds[stem]), read_gray(gts[stem]))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = dict(pool.map(one, common))
    else:
        results = dict(map(one, common))
    return aggregate(results, missing)
