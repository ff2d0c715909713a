"""Semantic kernel compression and dynamic depthwise semantic matching."""

from __future__ import annotations

from typing import Sequence

import torch.nn.functional as F
from torch import Tensor, nn

from .correlation import ChannelCorrelation, ConcatFusion
from .layers import DSConv, ShapeError, Upsample, check_shape

KERNEL_SIZE = 5


def ddconv(f: Tensor, k: Tensor, dilation: int = 1) -> Tensor:
    """Depthwise cross-correlation of each sample with its own kernel.

    ``f`` is ``(N, C, H, W)``, ``k`` is ``(N, C, kh, kw)`` with odd kernel sides.
    Zero padding of ``dilation * (k - 1) / 2`` keeps the spatial size. No bias.
    """
    if k.dim() != 4:
        raise ShapeError(f"ddconv: kernel must be (N, C, kh, kw), got {tuple(k.shape)}")
    n, c, h, w = f.shape
    if k.shape[0] != n or k.shape[1] != c:
        raise ShapeError(
            f"ddconv: kernel {tuple(k.shape)} does not match features {tuple(f.shape)} "
            "(batch and channel counts must agree)"
        )
    kh, kw = k.shape[-2:]
    pad = (dilation * (kh // 2), dilation * (kw // 2))
    out = F.conv2d(f.reshape(1, n * c, h, w), k.reshape(n * c, 1, kh, kw),
                   padding=pad, dilation=dilation, groups=n * c)
    return out.reshape(n, c, h, w)


class DDConv(nn.Module):
    """Parameter-free module wrapper around :func:`ddconv`."""

    def __init__(self, dilation: int):
        super().__init__()
        self.dilation = dilation

    def forward(self, f: Tensor, k: Tensor) -> Tensor:
        return ddconv(f, k, self.dilation)

    def extra_repr(self) -> str:
        return f"dilation={self.dilation}"

    def own_flops(self, inputs, output) -> int:
        k = inputs[1]
        return output.numel() * k.shape[-2] * k.shape[-1]


class SKC(nn.Module):
    """Compress the deepest features into per-sample kernels, one branch per target level."""

    def __init__(self, in_ch: int, out_chs: Sequence[int], kernel_size: int = KERNEL_SIZE):
        super().__init__()
        self.in_ch = in_ch
        self.branches = nn.ModuleList(DSConv(in_ch, c) for c in out_chs)
        self.pool = nn.AdaptiveAvgPool2d(kernel_size)

    def forward(self, f5: Tensor) -> list[Tensor]:
        check_shape(f5, (self.in_ch, None, None), "SKC input")
        return [self.pool(branch(f5)) for branch in self.branches]


class SemanticMatch(nn.Module):
    """Sum of dilated dynamic depthwise convolutions, fused by a 1x1 convolution."""

    def __init__(self, channels: int, dilations: Sequence[int] = (1, 2, 3)):
        super().__init__()
        self.channels = channels
        self.dd = nn.ModuleList(DDConv(r) for r in dilations)
        self.pointwise = nn.Conv2d(channels, channels, 1)

    def matched_sum(self, f: Tensor, k: Tensor) -> Tensor:
        out = self.dd[0](f, k)
        for dd in self.dd[1:]:
            out = out + dd(f, k)
        return out

    def forward(self, f: Tensor, k: Tensor) -> Tensor:
        check_shape(f, (self.channels, None, None), "semantic match input")
        return self.pointwise(self.matched_sum(f, k))

    def own_flops(self, inputs, output) -> int:
        return (len(self.dd) - 1) * output.numel()


class DSMM(nn.Module):
    """Kernels from E5 locate objects in E3/E4; the aligned results are fused.

    ``use_sm=False`` skips the matching (and the kernel compression it needs);
    ``use_ccorr=False`` replaces channel-wise correlation by concatenation.
    """

    def __init__(self, channels: Sequence[int], dilations: Sequence[int] = (1, 2, 3),
                 use_sm: bool = True, use_ccorr: bool = True):
        super().__init__()
        c3, c4, c5 = channels[2], channels[3], channels[4]
        self.c3, self.c4, self.c5 = c3, c4, c5
        self.use_sm = use_sm
        if use_sm:
            self.skc = SKC(c5, (c3, c4))
            self.match3 = SemanticMatch(c3, dilations)
            self.match4 = SemanticMatch(c4, dilations)
        self.align3 = DSConv(c3, c4)
        self.up4 = Upsample(2)
        self.fuse = ChannelCorrelation(c4) if use_ccorr else ConcatFusion()
        self.out_channels = 2 * c4

    def forward(self, f3: Tensor, f4: Tensor, f5: Tensor) -> Tensor:
        check_shape(f3, (self.c3, None, None), "DSMM f3")
        check_shape(f4, (self.c4, f3.shape[2] // 2, f3.shape[3] // 2), "DSMM f4")
        check_shape(f5, (self.c5, None, None), "DSMM f5")
        if self.use_sm:
            k3, k4 = self.skc(f5)
            f3 = self.match3(f3, k3)
            f4 = self.match4(f4, k4)
        return self.fuse(self.align3(f3), self.up4(f4))
