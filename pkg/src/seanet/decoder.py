"""Three-block lightweight decoder with deep-supervision saliency heads."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor, nn

from .layers import DSConv, Upsample, check_shape


class DecoderBlock(nn.Module):
    """DSconv, DSconv, bilinear upsample, DSconv."""

    def __init__(self, name: str, in_ch: int, mid_ch: int, out_ch: int, scale: int,
                 in_size: int | None = None):
        super().__init__()
        self.name = name
        self.in_ch, self.in_size = in_ch, in_size
        self.conv1 = DSConv(in_ch, mid_ch)
        self.conv2 = DSConv(mid_ch, mid_ch)
        self.up = Upsample(scale)
        self.conv3 = DSConv(mid_ch, out_ch)

    def forward(self, x: Tensor) -> Tensor:
        check_shape(x, (self.in_ch, self.in_size, self.in_size), f"decoder block {self.name}")
        return self.conv3(self.up(self.conv2(self.conv1(x))))


class SalHead(nn.Module):
    """Dropout followed by a 1x1 convolution to one channel; returns logits."""

    def __init__(self, in_ch: int, dropout: float = 0.1):
        super().__init__()
        self.in_ch = in_ch
        self.dropout = nn.Dropout(dropout)
        self.conv = nn.Conv2d(in_ch, 1, 1)

    def forward(self, x: Tensor) -> Tensor:
        check_shape(x, (self.in_ch, None, None), "SalHead input")
        return self.conv(self.dropout(x))


@dataclass
class SaliencyOutputs:
    """Logits of the three supervised maps, finest first, plus the two edge maps."""

    logits: list[Tensor]
    edges: tuple[Tensor, Tensor] | None = None

    @property
    def maps(self) -> list[Tensor]:
        return [torch.sigmoid(z) for z in self.logits]

    @property
    def s1(self) -> Tensor:
        return torch.sigmoid(self.logits[0])


class Decoder(nn.Module):
    """Progressive decoding of E5, then E5+DSMM, then E3-4+ESAM features.

    ``dsmm_ch`` / ``esam_ch`` of 0 drop the corresponding concat input.
    """

    def __init__(self, channels, input_size: int = 288, dsmm_ch: int | None = None,
                 esam_ch: int | None = None, dropout: float = 0.1):
        super().__init__()
        c2, c4, c5 = channels[1], channels[3], channels[4]
        dsmm_ch = 2 * c4 if dsmm_ch is None else dsmm_ch
        esam_ch = 2 * c2 if esam_ch is None else esam_ch
        h1, h3, h5 = input_size // 2, input_size // 8, input_size // 32
        self.d5 = DecoderBlock("D5", c5, c5, 2 * c4, 4, h5)
        self.d34 = DecoderBlock("D34", 2 * c4 + dsmm_ch, 2 * c4, 2 * c2, 4, h3)
        self.d12 = DecoderBlock("D12", 2 * c2 + esam_ch, 2 * c2, 2 * c2, 2, h1)
        self.head3 = SalHead(2 * c4, dropout)
        self.head2 = SalHead(2 * c2, dropout)
        self.head1 = SalHead(2 * c2, dropout)

    def forward(self, f5: Tensor, f_dsmm: Tensor | None, f_esam: Tensor | None) -> list[Tensor]:
        d5 = self.d5(f5)
        d34 = self.d34(d5 if f_dsmm is None else torch.cat([d5, f_dsmm], dim=1))
        d12 = self.d12(d34 if f_esam is None else torch.cat([d34, f_esam], dim=1))
        return [self.head1(d12), self.head2(d34), self.head3(d5)]
