"""Full SeaNet graph and its ablation variants."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from torch import Tensor, nn

from .backbone import build_backbone
from .decoder import Decoder, SaliencyOutputs
from .dynamic_matching import DSMM
from .edge_alignment import ESAM
from .layers import kaiming_init


class AblationError(ValueError):
    pass


@dataclass(frozen=True)
class Ablation:
    no_dsmm: bool = False
    no_esam: bool = False
    no_sm: bool = False
    no_dilation: bool = False
    no_ccorr1: bool = False
    no_ccorr2: bool = False
    no_eeu: bool = False
    no_alignment: bool = False

    def __post_init__(self):
        conflicts = {
            "no_dsmm": ("no_sm", "no_dilation", "no_ccorr1"),
            "no_esam": ("no_eeu", "no_ccorr2", "no_alignment"),
            "no_sm": ("no_dilation",),
        }
        for parent, children in conflicts.items():
            clash = [c for c in children if getattr(self, parent) and getattr(self, c)]
            if clash:
                raise AblationError(f"{parent} removes the component that {', '.join(clash)} modifies")

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def active(self) -> list[str]:
        return [n for n in self.names() if getattr(self, n)]


class SeaNet(nn.Module):
    """Encoder, DSMM, ESAM and decoder wired together.

    ``forward`` returns :class:`SaliencyOutputs` with logits ``[S1, S2, S3]``
    (finest first) and the ESAM edge maps, or ``None`` when ESAM is ablated.
    """

    def __init__(self, width: float = 1.0, input_size: int = 288,
                 ablation: Ablation = Ablation(), dropout: float = 0.1, pool_kernel: int = 3,
                 pretrained: bool = False, backbone_weights: str | Path | None = None):
        super().__init__()
        if input_size % 32:
            raise ValueError(f"input size must be a multiple of 32, got {input_size}")
        self.input_size = input_size
        self.ablation = ablation
        self.encoder = build_backbone(pretrained, backbone_weights, width, input_size)
        ch = self.encoder.channels
        self.channels = ch
        self.dsmm = None if ablation.no_dsmm else DSMM(
            ch, dilations=(1, 1, 1) if ablation.no_dilation else (1, 2, 3),
            use_sm=not ablation.no_sm, use_ccorr=not ablation.no_ccorr1)
        self.esam = None if ablation.no_esam else ESAM(
            ch, pool_kernel, use_eeu=not ablation.no_eeu, use_ccorr=not ablation.no_ccorr2)
        self.decoder = Decoder(
            ch, input_size,
            dsmm_ch=0 if self.dsmm is None else self.dsmm.out_channels,
            esam_ch=0 if self.esam is None else self.esam.out_channels,
            dropout=dropout)
        for part in (self.dsmm, self.esam, self.decoder):
            if part is not None:
                kaiming_init(part)

    def forward(self, x: Tensor) -> SaliencyOutputs:
        f1, f2, f3, f4, f5 = self.encoder(x)
        f_dsmm = None if self.dsmm is None else self.dsmm(f3, f4, f5)
        edges = None
        f_esam = None
        if self.esam is not None:
            f_esam, e1, e2 = self.esam(f1, f2)
            edges = (e1, e2)
        return SaliencyOutputs(self.decoder(f5, f_dsmm, f_esam), edges)


def build_model(width: float = 1.0, input_size: int = 288, ablation: Ablation | None = None,
                **kwargs) -> SeaNet:
    return SeaNet(width=width, input_size=input_size, ablation=ablation or Ablation(), **kwargs)
