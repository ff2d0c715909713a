"""Channel-wise correlation between two equally shaped feature maps."""

from __future__ import annotations

import torch
from torch import Tensor, nn

from .layers import DSConv, ShapeError


class ChannelCorrelation(nn.Module):
    """Re-weight two feature maps by their channel affinity and fuse them.

    Flattening convention (row-major over H, W, round-trips exactly through
    ``reshape``)::

        f1_hat = f1.flatten(2).transpose(1, 2)   # (N, HW, C)
        f2_hat = f2.flatten(2)                   # (N, C, HW)
        A      = f2_hat @ (f1_hat @ Wm)          # (N, C, C)

    ``softmax(A, -1) @ f1_hat^T`` and ``softmax(A, -2)^T @ f2_hat`` are reshaped to
    ``(N, C, H, W)``, added to their inputs and passed through independent DSconvs.
    The output is ``cat([branch1, branch2], dim=1)`` with ``2C`` channels.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels
        self.weight = nn.Parameter(torch.empty(channels, channels))
        self.conv1 = DSConv(channels, channels)
        self.conv2 = DSConv(channels, channels)
        self.reset_parameters_kaiming()

    def reset_parameters_kaiming(self) -> None:
        # Wm acts as a 1x1 linear map C -> C
        nn.init.kaiming_normal_(self.weight, mode="fan_out", nonlinearity="relu")

    def affinity(self, f1: Tensor, f2: Tensor) -> Tensor:
        f1_hat = f1.flatten(2).transpose(1, 2)
        f2_hat = f2.flatten(2)
        # (f2_hat @ f1_hat) @ Wm == f2_hat @ (f1_hat @ Wm), with C*C*HW + C^3 MACs
        return (f2_hat @ f1_hat) @ self.weight

    def attended(self, f1: Tensor, f2: Tensor) -> tuple[Tensor, Tensor]:
        """Channel-enhanced maps before the residual sum, shaped like the inputs."""
        a = self.affinity(f1, f2)
        g1 = torch.softmax(a, dim=-1) @ f1.flatten(2)
        g2 = torch.softmax(a, dim=-2).transpose(1, 2) @ f2.flatten(2)
        return g1.reshape(f1.shape), g2.reshape(f2.shape)

    def forward(self, f1: Tensor, f2: Tensor) -> Tensor:
        if f1.shape != f2.shape:
            raise ShapeError(f"channel correlation: input shapes differ, "
                             f"{tuple(f1.shape)} vs {tuple(f2.shape)}")
        if f1.shape[1] != self.channels:
            raise ShapeError(f"channel correlation: expected {self.channels} channels, "
                             f"got {f1.shape[1]}")
        g1, g2 = self.attended(f1, f2)
        return torch.cat([self.conv1(g1 + f1), self.conv2(g2 + f2)], dim=1)

    def own_flops(self, inputs, output) -> int:
        n, c, h, w = inputs[0].shape
        hw = h * w
        matmuls = 3 * c * c * hw + c ** 3
        softmax = 2 * c * c
        residual = 2 * c * hw
        return n * (matmuls + softmax + residual)


class ConcatFusion(nn.Module):
    """Stand-in for :class:`ChannelCorrelation` in the no-correlation ablations."""

    def forward(self, f1: Tensor, f2: Tensor) -> Tensor:
        if f1.shape != f2.shape:
            raise ShapeError(f"concat fusion: input shapes differ, "
                             f"{tuple(f1.shape)} vs {tuple(f2.shape)}")
        return torch.cat([f1, f2], dim=1)

