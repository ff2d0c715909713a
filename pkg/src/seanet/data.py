"""ORSI-SOD dataset ingestion, preprocessing and paired augmentation.

Supported layouts under a dataset root, per split (``train`` / ``test``)::

    root/train/images/*.jpg   root/train/GT/*.png        (also masks/, labels/)
    root/train-images/*.jpg   root/train-labels/*.png    (EORSSD / ORSSD release layout)

Images and masks are matched by file stem.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image
from torch import Tensor
from torch.utils.data import Dataset

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".tif", ".tiff"}
_IMAGE_DIRS = ("images", "image", "imgs")
_MASK_DIRS = ("GT", "gt", "masks", "mask", "labels")


class DatasetError(RuntimeError):
    pass


@dataclass
class Sample:
    image: Tensor          # (3, S, S), normalized
    gt: Tensor             # (1, S, S), values in {0, 1}
    stem: str
    original_size: tuple[int, int]  # (height, width)


@dataclass
class DatasetSplit:
    root: Path
    split: str
    pairs: list[tuple[Path, Path]]

    def __len__(self) -> int:
        return len(self.pairs)


def _split_dirs(root: Path, split: str) -> tuple[Path, Path]:
    for img_name in _IMAGE_DIRS:
        for mask_name in _MASK_DIRS:
            img, mask = root / split / img_name, root / split / mask_name
            if img.is_dir() and mask.is_dir():
                return img, mask
    img, mask = root / f"{split}-images", root / f"{split}-labels"
    if img.is_dir() and mask.is_dir():
        return img, mask
    raise DatasetError(
        f"no {split!r} split under {root}: expected {split}/images + {split}/GT "
        f"or {split}-images + {split}-labels"
    )


def _by_stem(folder: Path) -> dict[str, Path]:
    files = {}
    for p in sorted(folder.iterdir()):
        if p.suffix.lower() in IMAGE_SUFFIXES:
            files.setdefault(p.stem, p)
    return files


def load_split(root: str | Path, split: str) -> DatasetSplit:
    """Stem-matched, sorted (image, mask) pairs of one split."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} does not exist")
    img_dir, mask_dir = _split_dirs(root, split)
    images, masks = _by_stem(img_dir), _by_stem(mask_dir)
    orphans = sorted(set(images) ^ set(masks))
    if orphans:
        detail = [f"{s} (no {'mask' if s in images else 'image'})" for s in orphans]
        raise DatasetError(f"{len(orphans)} unpaired files in {root}/{split}: {', '.join(detail)}")
    if not images:
        raise DatasetError(f"split {split!r} under {root} is empty")
    return DatasetSplit(root, split, [(images[s], masks[s]) for s in sorted(images)])


def _open(path: Path, mode: str) -> Image.Image:
    try:
        with Image.open(path) as im:
            return im.convert(mode)
    except (OSError, ValueError) as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc


def normalize(image: Tensor, mean=IMAGENET_MEAN, std=IMAGENET_STD) -> Tensor:
    m = torch.tensor(mean, dtype=image.dtype).view(3, 1, 1)
    s = torch.tensor(std, dtype=image.dtype).view(3, 1, 1)
    return (image - m) / s


def load_image(path: Path, size: int = 288, mean=IMAGENET_MEAN, std=IMAGENET_STD
               ) -> tuple[Tensor, tuple[int, int]]:
    """RGB image -> bilinearly resized, normalized ``(3, size, size)`` tensor and (h, w)."""
    im = _open(Path(path), "RGB")
    original = (im.height, im.width)
    im = im.resize((size, size), Image.BILINEAR)
    x = torch.from_numpy(np.asarray(im, dtype=np.float32) / 255.0).permute(2, 0, 1)
    return normalize(x, mean, std), original


def load_mask(path: Path, size: int = 288) -> Tensor:
    """8-bit mask -> nearest-resized ``(1, size, size)`` tensor binarized at 0.5."""
    im = _open(Path(path), "L").resize((size, size), Image.NEAREST)
    m = np.asarray(im, dtype=np.float32) / 255.0
    return torch.from_numpy((m >= 0.5).astype(np.float32))[None]


def preprocess(image_file: str | Path, mask_file: str | Path, size: int = 288,
               mean=IMAGENET_MEAN, std=IMAGENET_STD) -> Sample:
    image, original = load_image(Path(image_file), size, mean, std)
    return Sample(image, load_mask(Path(mask_file), size), Path(image_file).stem, original)


def _rotate_free(sample: Sample, angle: float) -> Sample:
    theta = torch.tensor(np.deg2rad(angle))
    c, s = torch.cos(theta), torch.sin(theta)
    mat = torch.tensor([[c, -s, 0.0], [s, c, 0.0]], dtype=sample.image.dtype)[None]
    grid = F.affine_grid(mat, (1, 1, *sample.image.shape[-2:]), align_corners=False)
    img = F.grid_sample(sample.image[None], grid, mode="bilinear", align_corners=False)[0]
    gt = F.grid_sample(sample.gt[None], grid, mode="nearest", align_corners=False)[0]
    return replace(sample, image=img, gt=gt)


def augment(sample: Sample, rng: np.random.Generator, hflip: bool = True, vflip: bool = True,
            rotate: bool = True, max_angle: float | None = None) -> Sample:
    """Random horizontal flip, vertical flip (p=0.5 each) and right-angle rotation,
    applied identically to image and mask. ``max_angle`` switches rotation to a
    uniform angle in ``[-max_angle, max_angle]`` degrees (mask uses nearest)."""
    img, gt = sample.image, sample.gt
    if hflip and rng.random() < 0.5:
        img, gt = img.flip(-1), gt.flip(-1)
    if vflip and rng.random() < 0.5:
        img, gt = img.flip(-2), gt.flip(-2)
    out = replace(sample, image=img, gt=gt)
    if rotate:
        if max_angle is None:
            k = int(rng.integers(4))
            if k:
                out = replace(out, image=torch.rot90(out.image, k, (-2, -1)).contiguous(),
                              gt=torch.rot90(out.gt, k, (-2, -1)).contiguous())
        else:
            out = _rotate_free(out, float(rng.uniform(-max_angle, max_angle)))
    return out


class SODDataset(Dataset):
    """Preprocessed samples of one split; ``train=True`` enables augmentation.

    Each sample's random stream is seeded from ``(seed, index, epoch)`` so results
    do not depend on worker count or ordering; call :meth:`set_epoch` per epoch.
    """

    def __init__(self, split: DatasetSplit, size: int = 288, train: bool = False, seed: int = 0,
                 mean=IMAGENET_MEAN, std=IMAGENET_STD, augment_kwargs: dict | None = None):
        self.split = split
        self.size = size
        self.train = train
        self.seed = seed
        self.mean, self.std = mean, std
        self.augment_kwargs = augment_kwargs or {}
        self.epoch = 0

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.split)

    def __getitem__(self, index: int) -> dict:
        img_path, mask_path = self.split.pairs[index]
        sample = preprocess(img_path, mask_path, self.size, self.mean, self.std)
        if self.train:
            rng = np.random.default_rng([self.seed, index, self.epoch])
            sample = augment(sample, rng, **self.augment_kwargs)
        return {"image": sample.image, "gt": sample.gt, "stem": sample.stem,
                "original_size": torch.tensor(sample.original_size)}


def make_synthetic_dataset(root: str | Path, n: int = 10, size: int = 96, split: str = "train",
                           seed: int = 0) -> DatasetSplit:
    """Write ``n`` toy scenes (textured background, bright ellipses as salient
    objects) in the ``split/images`` + ``split/GT`` layout and load them."""
    root = Path(root)
    img_dir, gt_dir = root / split / "images", root / split / "GT"
    img_dir.mkdir(parents=True, exist_ok=True)
    gt_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size]
    for i in range(n):
        mask = np.zeros((size, size), bool)
        for _ in range(rng.integers(1, 3)):
            cy, cx = rng.uniform(0.2, 0.8, 2) * size
            ry, rx = rng.uniform(0.08, 0.2, 2) * size
            mask |= ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1
        base = rng.uniform(0.2, 0.45, 3)
        img = base + 0.08 * rng.standard_normal((size, size, 3))
        obj = rng.uniform(0.65, 0.95, 3)
        img[mask] = obj + 0.05 * rng.standard_normal((mask.sum(), 3))
        img = (np.clip(img, 0, 1) * 255).astype(np.uint8)
        Image.fromarray(img).save(img_dir / f"scene_{i:03d}.jpg", quality=95)
        Image.fromarray(mask.astype(np.uint8) * 255).save(gt_dir / f"scene_{i:03d}.png")
    return load_split(root, split)
