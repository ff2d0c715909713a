"""Deep-supervision saliency losses and the edge self-alignment loss."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .decoder import SaliencyOutputs
from .layers import ShapeError


def _same_shape(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes differ, {tuple(a.shape)} vs {tuple(b.shape)}")


def bce_loss(logits: Tensor, target: Tensor) -> Tensor:
    """Pixel-mean binary cross-entropy of ``sigmoid(logits)`` against ``target``."""
    _same_shape(logits, target, "bce_loss")
    return F.binary_cross_entropy_with_logits(logits, target)


def iou_loss(prob: Tensor, target: Tensor, eps: float = 1.0) -> Tensor:
    """Soft IoU loss ``1 - (I + eps) / (U + eps)`` per sample, averaged over the batch."""
    _same_shape(prob, target, "iou_loss")
    dims = tuple(range(1, prob.dim()))
    inter = (prob * target).sum(dims)
    union = prob.sum(dims) + target.sum(dims) - inter
    return (1 - (inter + eps) / (union + eps)).mean()


class EdgeAlignLoss(nn.Module):
    """``mean((prelu(e1) - prelu(e2))**2)`` with one learnable slope shared by both inputs."""

    def __init__(self, init: float = 0.25):
        super().__init__()
        self.prelu = nn.PReLU(num_parameters=1, init=init)

    def forward(self, e1: Tensor, e2: Tensor) -> Tensor:
        _same_shape(e1, e2, "edge_align_loss")
        return F.mse_loss(self.prelu(e1), self.prelu(e2))


def resize_target(gt: Tensor, size: tuple[int, int]) -> Tensor:
    """Bilinear resize of a binary mask, re-binarized at 0.5."""
    if tuple(gt.shape[-2:]) == tuple(size):
        return gt
    soft = F.interpolate(gt, size=size, mode="bilinear", align_corners=False)
    return (soft >= 0.5).to(gt.dtype)


@dataclass
class LossBundle:
    bce: list[Tensor]
    iou: list[Tensor]
    edge_align: Tensor
    lam: float
    total: Tensor

    def as_floats(self) -> dict[str, float]:
        return {
            "bce": float(sum(b.item() for b in self.bce)),
            "iou": float(sum(i.item() for i in self.iou)),
            "edge_align": self.edge_align.item(),
            "total": self.total.item(),
        }


class SeaNetLoss(nn.Module):
    """Sum of BCE + IoU over the three supervised scales plus ``lam`` times edge alignment."""

    def __init__(self, lam: float = 0.5, iou_eps: float = 1.0, prelu_init: float = 0.25):
        super().__init__()
        if lam < 0:
            raise ValueError(f"lambda must be non-negative, got {lam}")
        self.lam = lam
        self.iou_eps = iou_eps
        self.edge_align = EdgeAlignLoss(prelu_init)

    def forward(self, outputs: SaliencyOutputs, gt: Tensor) -> LossBundle:
        bces, ious = [], []
        for logits in outputs.logits:
            g = resize_target(gt, logits.shape[-2:])
            bces.append(bce_loss(logits, g))
            ious.append(iou_loss(torch.sigmoid(logits), g, self.iou_eps))
        if outputs.edges is None:
            align = gt.new_zeros(())
        else:
            align = self.edge_align(*outputs.edges)
        total = sum(b + i for b, i in zip(bces, ious)) + self.lam * align
        return LossBundle(bces, ious, align, self.lam, total)
