"""Truncated MobileNet-V2 encoder with five output levels."""

from __future__ import annotations

import logging
from pathlib import Path

import torch
from torch import Tensor, nn
from torchvision.models import MobileNetV2

from .layers import check_shape

log = logging.getLogger(__name__)

# (expansion t, output channels c, repeats n, first stride s) for the 17 bottlenecks kept
BOTTLENECK_SETTING = [
    [1, 16, 1, 1],
    [6, 24, 2, 2],
    [6, 32, 3, 2],
    [6, 64, 4, 2],
    [6, 96, 3, 1],
    [6, 160, 3, 2],
    [6, 320, 1, 1],
]
# features[] slice boundaries; block t ends after bottleneck 1, 3, 6, 13, 17
BLOCK_BOUNDS = (0, 2, 4, 7, 14, 18)


class BackboneWeightsError(RuntimeError):
    pass


class Encoder(nn.Module):
    """MobileNet-V2 stem plus bottlenecks 1-17, split into five blocks.

    ``width`` < 1 builds a channel-shrunken clone with identical topology, which
    the gradient and overfit tests use.
    """

    def __init__(self, width: float = 1.0, input_size: int = 288):
        super().__init__()
        self.width = width
        self.input_size = input_size
        net = MobileNetV2(width_mult=width, inverted_residual_setting=BOTTLENECK_SETTING,
                          round_nearest=1)
        feats = list(net.features.children())[: BLOCK_BOUNDS[-1]]
        self.blocks = nn.ModuleList(
            nn.Sequential(*feats[a:b]) for a, b in zip(BLOCK_BOUNDS[:-1], BLOCK_BOUNDS[1:])
        )
        self.channels = tuple(
            [m for m in blk.modules() if isinstance(m, nn.Conv2d)][-1].out_channels
            for blk in self.blocks
        )

    def level_shapes(self) -> list[tuple[int, int, int]]:
        return [(c, self.input_size // 2 ** t, self.input_size // 2 ** t)
                for t, c in enumerate(self.channels, start=1)]

    def forward(self, x: Tensor) -> list[Tensor]:
        check_shape(x, (3, self.input_size, self.input_size), "encoder input")
        out = []
        for block in self.blocks:
            x = block(x)
            out.append(x)
        return out

    def load_mobilenet_state(self, state: dict[str, Tensor]) -> None:
        """Load a torchvision-style ``mobilenet_v2`` state dict (``features.N.*`` keys).

        Keys for the discarded head (``features.18``, ``classifier``) are ignored;
        any missing or mis-shaped key for a retained layer raises.
        """
        if any(k.startswith("blocks.") for k in state):
            self.load_state_dict(state, strict=True)
            return
        mapped = {}
        for key, value in state.items():
            parts = key.split(".")
            if parts[0] != "features" or int(parts[1]) >= BLOCK_BOUNDS[-1]:
                continue
            idx = int(parts[1])
            blk = next(i for i in range(5) if BLOCK_BOUNDS[i] <= idx < BLOCK_BOUNDS[i + 1])
            local = idx - BLOCK_BOUNDS[blk]
            mapped[".".join(["blocks", str(blk), str(local), *parts[2:]])] = value
        own = self.state_dict()
        missing = sorted(set(own) - set(mapped))
        bad = sorted(k for k in own if k in mapped and own[k].shape != mapped[k].shape)
        if missing or bad:
            raise BackboneWeightsError(
                f"pretrained weights do not match the encoder: {len(missing)} missing "
                f"(e.g. {missing[:3]}), {len(bad)} mis-shaped (e.g. {bad[:3]})"
            )
        self.load_state_dict(mapped, strict=True)


def build_backbone(pretrained: bool = False, weights_path: str | Path | None = None,
                   width: float = 1.0, input_size: int = 288) -> Encoder:
    """Build the encoder. With ``pretrained``, weights come from ``weights_path`` if
    given, otherwise from torchvision's ImageNet checkpoint; failures raise
    :class:`BackboneWeightsError` instead of falling back to random init."""
    enc = Encoder(width=width, input_size=input_size)
    if not pretrained:
        return enc
    if width != 1.0:
        raise BackboneWeightsError("pretrained weights exist only for width=1.0")
    try:
        if weights_path is not None:
            state = torch.load(weights_path, map_location="cpu", weights_only=True)
            if isinstance(state, dict) and "state_dict" in state:
                state = state["state_dict"]
        else:
            from torchvision.models import MobileNet_V2_Weights

            state = MobileNet_V2_Weights.IMAGENET1K_V1.get_state_dict(progress=False)
    except BackboneWeightsError:
        raise
    except Exception as exc:  # noqa: BLE001 - any I/O or unpickling failure
        src = weights_path or "torchvision IMAGENET1K_V1"
        raise BackboneWeightsError(f"could not load MobileNet-V2 weights from {src}: {exc}") from exc
    if not isinstance(state, dict):
        raise BackboneWeightsError(f"malformed weight file {weights_path}: not a state dict")
    enc.load_mobilenet_state(state)
    log.info("loaded MobileNet-V2 weights from %s", weights_path or "torchvision")
    return enc
