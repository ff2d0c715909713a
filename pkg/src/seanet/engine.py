"""Training, checkpointing and inference."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
import torch
from PIL import Image
from torch import nn
from torch.utils.data import DataLoader

from .config import Config, from_dict
from .data import IMAGE_SUFFIXES, SODDataset, load_image, load_split
from .layers import resize
from .losses import SeaNetLoss
from .model import SeaNet, build_model

log = logging.getLogger(__name__)


class CheckpointError(RuntimeError):
    pass


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


def lr_at(epoch: int, base_lr: float = 1e-4, decay: float = 0.1, step: int = 30) -> float:
    """Step schedule: ``base_lr * decay ** (epoch // step)`` for integer epochs."""
    return base_lr * decay ** (epoch // step)


def model_from_config(cfg: Config, pretrained: bool | None = None) -> SeaNet:
    return build_model(
        width=cfg.width, input_size=cfg.input_size, ablation=cfg.ablation, dropout=cfg.dropout,
        pool_kernel=cfg.pool_kernel,
        pretrained=cfg.pretrained if pretrained is None else pretrained,
        backbone_weights=cfg.backbone_weights,
    )


def criterion_from_config(cfg: Config) -> SeaNetLoss:
    return SeaNetLoss(lam=cfg.effective_lam, iou_eps=cfg.iou_eps)


def make_optimizer(model: nn.Module, criterion: nn.Module, lr: float) -> torch.optim.Adam:
    params = [p for p in model.parameters() if p.requires_grad]
    params += [p for p in criterion.parameters() if p.requires_grad]
    return torch.optim.Adam(params, lr=lr)


@dataclass
class StepRecord:
    step: int
    bce: float
    iou: float
    edge_align: float
    total: float

    def line(self) -> str:
        return f"{self.step} {self.bce:.6f} {self.iou:.6f} {self.edge_align:.6f} {self.total:.6f}"


LOG_HEADER = "step bce iou edge_align total"


def train_steps(model: SeaNet, criterion: SeaNetLoss, optimizer: torch.optim.Optimizer,
                batches: Iterable[dict], start_step: int = 0, device: str = "cpu"
                ) -> Iterator[StepRecord]:
    """One optimizer step per batch; yields the per-component losses."""
    model.train()
    criterion.train()
    step = start_step
    for batch in batches:
        image = batch["image"].to(device)
        gt = batch["gt"].to(device)
        optimizer.zero_grad(set_to_none=True)
        bundle = criterion(model(image), gt)
        bundle.total.backward()
        optimizer.step()
        step += 1
        yield StepRecord(step, **bundle.as_floats())


@torch.no_grad()
def predict(model: SeaNet, image: torch.Tensor) -> torch.Tensor:
    """Eval-mode S1 for a batch of preprocessed images."""
    model.eval()
    return model(image).s1


@torch.no_grad()
def dataset_mae(model: SeaNet, loader: Iterable[dict], device: str = "cpu") -> float:
    total, count = 0.0, 0
    for batch in loader:
        s1 = predict(model, batch["image"].to(device))
        total += (s1 - batch["gt"].to(device)).abs().mean(dim=(1, 2, 3)).sum().item()
        count += s1.shape[0]
    return total / max(count, 1)


def save_checkpoint(path: str | Path, model: SeaNet, criterion: SeaNetLoss, cfg: Config,
                    **meta) -> None:
    torch.save({"model": model.state_dict(), "criterion": criterion.state_dict(),
                "config": cfg.to_dict(), **meta}, path)


def load_checkpoint(path: str | Path, cfg: Config | None = None) -> tuple[SeaNet, Config]:
    """Rebuild the model from a checkpoint. ``cfg`` overrides the stored config; a
    model/checkpoint mismatch raises :class:`CheckpointError`."""
    try:
        ckpt = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:  # noqa: BLE001
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(ckpt, dict) or "model" not in ckpt:
        raise CheckpointError(f"{path} is not a SeaNet checkpoint")
    if cfg is None:
        cfg = from_dict(ckpt.get("config"))
    model = model_from_config(cfg, pretrained=False)
    try:
        model.load_state_dict(ckpt["model"], strict=True)
    except RuntimeError as exc:
        raise CheckpointError(f"checkpoint {path} does not match the configured model: {exc}") from exc
    model.eval()
    return model, cfg


@dataclass
class TrainResult:
    history: list[StepRecord] = field(default_factory=list)
    epoch_mae: list[float] = field(default_factory=list)
    best_checkpoint: Path | None = None
    last_checkpoint: Path | None = None


def train(cfg: Config) -> TrainResult:
    """Full training run per ``cfg``: Adam, step LR schedule, per-step loss log,
    ``last.pt`` every epoch and ``best.pt`` by validation MAE."""
    cfg.validate()
    if cfg.dataset.root is None:
        raise ValueError("dataset.root is not set")
    train_split = load_split(cfg.dataset.root, cfg.dataset.train_split)
    try:
        val_split = load_split(cfg.dataset.root, cfg.dataset.test_split)
    except Exception:  # noqa: BLE001 - validation split is optional
        val_split = None
    seed_everything(cfg.seed)
    model = model_from_config(cfg).to(cfg.device)
    criterion = criterion_from_config(cfg).to(cfg.device)
    optimizer = make_optimizer(model, criterion, cfg.base_lr)
    norm = dict(mean=cfg.normalization.mean, std=cfg.normalization.std)
    train_set = SODDataset(train_split, cfg.input_size, train=True, seed=cfg.seed,
                           augment_kwargs=vars(cfg.augment).copy(), **norm)
    gen = torch.Generator().manual_seed(cfg.seed)
    loader = DataLoader(train_set, batch_size=cfg.batch_size, shuffle=True, generator=gen,
                        num_workers=cfg.workers, drop_last=len(train_set) > cfg.batch_size)
    val_loader = DataLoader(SODDataset(val_split or train_split, cfg.input_size, **norm),
                            batch_size=cfg.batch_size)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = TrainResult()
    best = float("inf")
    step = 0
    with open(out / "train.log", "w") as logf:
        logf.write(LOG_HEADER + "\n")
        for epoch in range(cfg.epochs):
            for group in optimizer.param_groups:
                group["lr"] = lr_at(epoch, cfg.base_lr, cfg.lr_decay, cfg.lr_step)
            train_set.set_epoch(epoch)
            for rec in train_steps(model, criterion, optimizer, loader, step, cfg.device):
                step = rec.step
                result.history.append(rec)
                logf.write(rec.line() + "\n")
                if cfg.max_steps is not None and step >= cfg.max_steps:
                    break
            logf.flush()
            val = dataset_mae(model, val_loader, cfg.device)
            result.epoch_mae.append(val)
            log.info("epoch %d step %d lr %.2e val MAE %.4f", epoch, step,
                     optimizer.param_groups[0]["lr"], val)
            result.last_checkpoint = out / "last.pt"
            save_checkpoint(result.last_checkpoint, model, criterion, cfg, epoch=epoch, mae=val)
            if val < best:
                best = val
                result.best_checkpoint = out / "best.pt"
                save_checkpoint(result.best_checkpoint, model, criterion, cfg, epoch=epoch, mae=val)
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
    return result


def to_uint8(s: np.ndarray) -> np.ndarray:
    return np.round(np.clip(s, 0, 1) * 255).astype(np.uint8)


@torch.no_grad()
def infer(model: SeaNet, cfg: Config, image_dir: str | Path, out_dir: str | Path,
          visualize: bool = False) -> list[Path]:
    """Write S1 for every image in ``image_dir`` as an 8-bit PNG at the original size."""
    image_dir, out_dir = Path(image_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    model.eval()
    for path in sorted(p for p in image_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES):
        x, (h, w) = load_image(path, cfg.input_size, cfg.normalization.mean, cfg.normalization.std)
        s1 = resize(model(x[None]).s1, (h, w))[0, 0].numpy()
        sal = to_uint8(s1)
        target = out_dir / f"{path.stem}.png"
        Image.fromarray(sal).save(target)
        written.append(target)
        if visualize:
            with Image.open(path) as im:
                rgb = np.asarray(im.convert("RGB"))
            side = np.concatenate([rgb, np.repeat(sal[..., None], 3, axis=2)], axis=1)
            Image.fromarray(side).save(out_dir / f"{path.stem}_vis.png")
    return written
