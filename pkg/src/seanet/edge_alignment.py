"""Edge self-alignment: pooling-subtraction edges, edge-gated enhancement, fusion."""

from __future__ import annotations

from typing import Sequence

import torch
from torch import Tensor, nn

from .correlation import ChannelCorrelation, ConcatFusion
from .layers import DSConv, Upsample, check_shape


class EdgeExtract(nn.Module):
    """``f - avgpool_k(f)`` with stride 1 and zero padding; the divisor is always k*k."""

    def __init__(self, kernel_size: int = 3):
        super().__init__()
        if kernel_size % 2 != 1:
            raise ValueError(f"pool kernel must be odd, got {kernel_size}")
        self.pool = nn.AvgPool2d(kernel_size, stride=1, padding=kernel_size // 2,
                                 count_include_pad=True)

    def forward(self, f: Tensor) -> Tensor:
        return f - self.pool(f)

    def own_flops(self, inputs, output) -> int:
        return output.numel()


def extract_edge(f: Tensor, kernel_size: int = 3) -> Tensor:
    return EdgeExtract(kernel_size)(f)


class EEU(nn.Module):
    """Edge-based enhancement: ``sigmoid(conv1x1(edge)) * f + f``.

    Returns ``(enhanced, edge)``; ``edge`` is the raw pooling-subtraction map that
    the alignment loss compares. With ``gate=False`` the features pass through
    unchanged and only the edge map is computed.
    """

    def __init__(self, channels: int, pool_kernel: int = 3, gate: bool = True):
        super().__init__()
        self.edge = EdgeExtract(pool_kernel)
        self.gate = nn.Conv2d(channels, channels, 1) if gate else None

    def forward(self, f: Tensor) -> tuple[Tensor, Tensor]:
        edge = self.edge(f)
        if self.gate is None:
            return f, edge
        return torch.sigmoid(self.gate(edge)) * f + f, edge

    def own_flops(self, inputs, output) -> int:
        # sigmoid, multiply, add
        return 0 if self.gate is None else 3 * output[0].numel()


class ESAM(nn.Module):
    """Align E1/E2 to ``(c2, h1, w1)``, enhance each with its EEU, fuse both.

    ``forward`` returns ``(fused, edge1, edge2)``.
    """

    def __init__(self, channels: Sequence[int], pool_kernel: int = 3, use_eeu: bool = True,
                 use_ccorr: bool = True):
        super().__init__()
        c1, c2 = channels[0], channels[1]
        self.c1, self.c2 = c1, c2
        self.align1 = DSConv(c1, c2)
        self.align2 = DSConv(c2, c2)
        self.up2 = Upsample(2)
        self.eeu1 = EEU(c2, pool_kernel, gate=use_eeu)
        self.eeu2 = EEU(c2, pool_kernel, gate=use_eeu)
        self.fuse = ChannelCorrelation(c2) if use_ccorr else ConcatFusion()
        self.out_channels = 2 * c2

    def align(self, f1: Tensor, f2: Tensor) -> tuple[Tensor, Tensor]:
        check_shape(f1, (self.c1, None, None), "ESAM f1")
        check_shape(f2, (self.c2, f1.shape[2] // 2, f1.shape[3] // 2), "ESAM f2")
        return self.align1(f1), self.up2(self.align2(f2))

    def forward(self, f1: Tensor, f2: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        a1, a2 = self.align(f1, f2)
        e1_out, edge1 = self.eeu1(a1)
        e2_out, edge2 = self.eeu2(a2)
        return self.fuse(e1_out, e2_out), edge1, edge2
