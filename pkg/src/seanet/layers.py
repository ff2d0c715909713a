"""Shared building blocks: depthwise separable convolution, resampling, shape checks."""

from __future__ import annotations

from typing import Sequence

import torch
import torch.nn.functional as F
from torch import Tensor, nn


class ShapeError(ValueError):
    """Raised when a tensor does not match the shape a block was built for."""


def check_shape(x: Tensor, expected: Sequence[int | None], where: str) -> None:
    """Validate the non-batch shape ``(C, H, W)`` of ``x``; ``None`` entries are wildcards."""
    actual = tuple(x.shape[1:])
    if x.dim() != len(expected) + 1 or any(
        e is not None and e != a for e, a in zip(expected, actual)
    ):
        want = tuple("*" if e is None else e for e in expected)
        raise ShapeError(f"{where}: expected (N, {', '.join(map(str, want))}), got {tuple(x.shape)}")


class ConvBNReLU(nn.Sequential):
    def __init__(self, in_ch, out_ch, kernel_size=1, padding=0, dilation=1, groups=1, relu=True):
        layers: list[nn.Module] = [
            nn.Conv2d(in_ch, out_ch, kernel_size, padding=padding, dilation=dilation,
                      groups=groups, bias=False),
            nn.BatchNorm2d(out_ch),
        ]
        if relu:
            layers.append(nn.ReLU(inplace=True))
        super().__init__(*layers)


class DSConv(nn.Module):
    """3x3 depthwise conv -> BN -> ReLU -> 1x1 pointwise conv -> BN -> ReLU.

    ``pointwise_relu=False`` gives the variant with a linear pointwise stage.
    """

    def __init__(self, in_ch: int, out_ch: int, kernel_size: int = 3, dilation: int = 1,
                 pointwise_relu: bool = True):
        super().__init__()
        pad = dilation * (kernel_size // 2)
        self.in_ch, self.out_ch = in_ch, out_ch
        self.depthwise = ConvBNReLU(in_ch, in_ch, kernel_size, padding=pad, dilation=dilation,
                                    groups=in_ch)
        self.pointwise = ConvBNReLU(in_ch, out_ch, 1, relu=pointwise_relu)

    def forward(self, x: Tensor) -> Tensor:
        return self.pointwise(self.depthwise(x))


class Upsample(nn.Module):
    """Bilinear resize by an integer factor, ``align_corners=False``."""

    def __init__(self, scale: int):
        super().__init__()
        self.scale = scale

    def forward(self, x: Tensor) -> Tensor:
        if self.scale == 1:
            return x
        return F.interpolate(x, scale_factor=self.scale, mode="bilinear", align_corners=False)

    def extra_repr(self) -> str:
        return f"scale={self.scale}"

    def own_flops(self, inputs, output) -> int:
        # 4-tap weighted sum per output entry
        return 0 if self.scale == 1 else 4 * output.numel()


def resize(x: Tensor, size: tuple[int, int]) -> Tensor:
    if tuple(x.shape[-2:]) == tuple(size):
        return x
    return F.interpolate(x, size=size, mode="bilinear", align_corners=False)


def kaiming_init(module: nn.Module) -> None:
    """Kaiming-normal init for every conv and matrix parameter owned by ``module``."""
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)
        init_extra = getattr(m, "reset_parameters_kaiming", None)
        if init_extra is not None:
            init_extra()


@torch.no_grad()
def count_trainable(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters() if p.requires_grad)
