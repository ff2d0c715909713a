"""Static parameter and FLOPs accounting per named sub-module.

Convention (embedded in every report as ``convention``): one multiply-accumulate
counts as one FLOP; element-wise ops (normalization, activations, residual sums,
gating) count once per output entry; pooling counts its window size per output
entry; bilinear resizing counts four per output entry; concatenation and
reshapes are free. Dynamic depthwise convolutions are counted like a depthwise
convolution of the same shape.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import torch
from torch import Tensor, nn
from torchvision.models.mobilenetv2 import InvertedResidual

CONVENTION = "MAC=1 FLOP; elementwise=1/output entry; pool=window/output entry; bilinear=4/output entry"


@dataclass
class ComplexityReport:
    params: dict[str, int] = field(default_factory=dict)
    flops: dict[str, int] = field(default_factory=dict)
    input_size: int | None = None
    convention: str = CONVENTION

    @property
    def total_params(self) -> int:
        return sum(self.params.values())

    @property
    def total_flops(self) -> int:
        return sum(self.flops.values())

    def group(self, prefix: str, kind: str = "params") -> int:
        table = self.params if kind == "params" else self.flops
        return sum(v for k, v in table.items() if k == prefix or k.startswith(prefix + "."))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total_params"] = self.total_params
        d["total_flops"] = self.total_flops
        return d


def _adaptive_windows(n_in: int, n_out: int) -> int:
    """Sum of adaptive-pool window lengths along one axis."""
    total = 0
    for i in range(n_out):
        start = (i * n_in) // n_out
        end = -((-(i + 1) * n_in) // n_out)
        total += end - start
    return total


def _conv_flops(m: nn.Conv2d, out: Tensor) -> int:
    kh, kw = m.kernel_size
    macs = out.numel() * (m.in_channels // m.groups) * kh * kw
    return macs + (out.numel() if m.bias is not None else 0)


def _leaf_flops(m: nn.Module, inputs: tuple, out) -> int:
    if isinstance(m, nn.Conv2d):
        return _conv_flops(m, out)
    if isinstance(m, nn.Linear):
        return out.numel() * m.in_features + (out.numel() if m.bias is not None else 0)
    if isinstance(m, (nn.BatchNorm2d, nn.ReLU, nn.ReLU6, nn.Sigmoid, nn.PReLU)):
        return out.numel()
    if isinstance(m, nn.AvgPool2d):
        kh, kw = (m.kernel_size,) * 2 if isinstance(m.kernel_size, int) else m.kernel_size
        return out.numel() * kh * kw
    if isinstance(m, nn.AdaptiveAvgPool2d):
        x = inputs[0]
        n, c, h, w = x.shape
        oh, ow = out.shape[-2:]
        return n * c * _adaptive_windows(h, oh) * _adaptive_windows(w, ow)
    return 0


def _own_flops(m: nn.Module, inputs: tuple, out) -> int:
    own = getattr(m, "own_flops", None)
    if own is not None:
        return int(own(inputs, out))
    if isinstance(m, InvertedResidual) and m.use_res_connect:
        return out.numel()
    return 0


def _bucket(name: str, depth: int) -> str:
    parts = name.split(".")
    return ".".join(parts[:depth]) if name else "(root)"


def count_params(model: nn.Module, depth: int = 2,
                 extra: dict[str, nn.Module] | None = None) -> ComplexityReport:
    """Trainable entries grouped by the first ``depth`` levels of parameter names."""
    report = ComplexityReport()
    for name, p in model.named_parameters():
        if p.requires_grad:
            key = _bucket(name.rsplit(".", 1)[0], depth)
            report.params[key] = report.params.get(key, 0) + p.numel()
    for prefix, module in (extra or {}).items():
        n = sum(p.numel() for p in module.parameters() if p.requires_grad)
        if n:
            report.params[prefix] = report.params.get(prefix, 0) + n
    return report


@torch.no_grad()
def count_flops(model: nn.Module, input_size: int | None = None, depth: int = 2,
                example: Tensor | None = None,
                call: Callable[[nn.Module, Tensor], object] | None = None) -> ComplexityReport:
    """Run one batch-1 forward pass in eval mode and attribute FLOPs per module.

    ``input_size`` defaults to ``model.input_size``.
    """
    if example is None:
        input_size = input_size or getattr(model, "input_size")
        example = torch.zeros(1, 3, input_size, input_size)
    report = ComplexityReport(input_size=example.shape[-1])
    names = {m: n for n, m in model.named_modules()}
    handles = []

    def hook(m, inputs, out):
        n = _leaf_flops(m, inputs, out) + _own_flops(m, inputs, out)
        if n:
            key = _bucket(names[m], depth)
            report.flops[key] = report.flops.get(key, 0) + n

    for m in model.modules():
        handles.append(m.register_forward_hook(hook))
    was_training = model.training
    model.eval()
    try:
        (call or (lambda mod, x: mod(x)))(model, example.to(next(model.parameters()).dtype))
    finally:
        for h in handles:
            h.remove()
        model.train(was_training)
    return report


def complexity_report(model: nn.Module, input_size: int | None = None, depth: int = 2,
                      extra: dict[str, nn.Module] | None = None) -> ComplexityReport:
    report = count_flops(model, input_size, depth)
    report.params = count_params(model, depth, extra).params
    return report
