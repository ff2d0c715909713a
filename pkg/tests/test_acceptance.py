"""Acceptance suite: one test and one PASS/FAIL line per criterion, at the pinned tolerances.

Run alone with ``pytest tests/test_acceptance.py -s``; the summary lines also appear
at the end of any pytest run that includes this file.
"""

import math

import numpy as np
import pytest
import torch

import oracles
from conftest import ACCEPTANCE_LINES
from seanet.complexity import complexity_report
from seanet.correlation import ChannelCorrelation
from seanet.data import SODDataset, make_synthetic_dataset
from seanet.dynamic_matching import SKC, SemanticMatch, ddconv
from seanet.edge_alignment import extract_edge
from seanet.engine import dataset_mae, make_optimizer, seed_everything, train_steps
from seanet.losses import EdgeAlignLoss, SeaNetLoss, bce_loss, iou_loss, resize_target
from seanet.metrics import e_measure, f_measure, mae, s_measure
from seanet.model import Ablation, build_model

M, G = 1e6, 1e9


def verdict(number, title, checks):
    """``checks``: list of (label, ok). Records one line and fails if any check failed."""
    ok = all(c for _, c in checks)
    detail = "; ".join(f"{label}{'' if c else ' [X]'}" for label, c in checks)
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def within(value, target, rel):
    return abs(value - target) <= rel * target


def rel_close(a, b, rtol, atol=1e-12):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return bool(np.all(np.abs(a - b) <= rtol * np.maximum(np.abs(a), np.abs(b)) + atol))


@pytest.fixture(scope="module")
def full_report():
    torch.manual_seed(0)
    return complexity_report(build_model(input_size=288), input_size=288)


def test_criterion_1_parameter_budget(full_report):
    r = full_report
    total, dsmm, esam, dec = (r.total_params, r.group("dsmm"), r.group("esam"), r.group("decoder"))
    verdict(1, "parameter budget", [
        (f"total {total / M:.3f}M vs 2.76M +-3%", within(total, 2.76 * M, 0.03)),
        (f"DSMM+SKC {dsmm / M:.4f}M vs 0.01M +-30%", within(dsmm, 0.01 * M, 0.30)),
        (f"ESAM {esam / M:.4f}M vs 0.06M +-30%", within(esam, 0.06 * M, 0.30)),
        (f"decoder {dec / M:.4f}M vs 0.47M +-30%", within(dec, 0.47 * M, 0.30)),
    ])


def test_criterion_2_flops_budget(full_report):
    r = full_report
    total, dsmm, esam, dec = (r.total_flops, r.group("dsmm", "flops"), r.group("esam", "flops"),
                              r.group("decoder", "flops"))
    verdict(2, "FLOPs budget @288 (MAC)", [
        (f"total {total / G:.3f}G vs 1.7G +-10%", within(total, 1.7 * G, 0.10)),
        (f"decoder {dec / G:.3f}G vs 0.95G +-30%", within(dec, 0.95 * G, 0.30)),
        (f"DSMM+SKC {dsmm / G:.3f}G vs 0.10G +-30%", within(dsmm, 0.10 * G, 0.30)),
        (f"ESAM {esam / G:.3f}G vs 0.07G +-30%", within(esam, 0.07 * G, 0.30)),
    ])


def test_criterion_3_shape_suite():
    torch.manual_seed(0)
    model = build_model(input_size=288).eval()
    seen = {}

    def grab(name):
        return lambda m, i, o: seen.__setitem__(name, (i, o))

    for name in ("dsmm", "dsmm.skc", "esam", "decoder.d5", "decoder.d34", "decoder.d12"):
        model.get_submodule(name).register_forward_hook(grab(name))
    with torch.no_grad():
        x = torch.randn(1, 3, 288, 288)
        feats = model.encoder(x)
        out = model(x)
    shape = lambda t: tuple(t.shape[1:])  # noqa: E731
    k3, k4 = seen["dsmm.skc"][1]
    fused = seen["esam"][1][0]
    expected = {
        "E1..E5": ([shape(f) for f in feats],
                   [(16, 144, 144), (24, 72, 72), (32, 36, 36), (96, 18, 18), (320, 9, 9)]),
        "SKC kernels": ([shape(k3), shape(k4)], [(32, 5, 5), (96, 5, 5)]),
        "f_dsmm": (shape(seen["dsmm"][1]), (192, 36, 36)),
        "f_esam": (shape(fused), (48, 144, 144)),
        "edges": ([shape(e) for e in out.edges], [(24, 144, 144)] * 2),
        "D5 in/out": ((shape(seen["decoder.d5"][0][0]), shape(seen["decoder.d5"][1])),
                      ((320, 9, 9), (192, 36, 36))),
        "D3-4 in/out": ((shape(seen["decoder.d34"][0][0]), shape(seen["decoder.d34"][1])),
                        ((384, 36, 36), (48, 144, 144))),
        "D1-2 in/out": ((shape(seen["decoder.d12"][0][0]), shape(seen["decoder.d12"][1])),
                        ((96, 144, 144), (48, 288, 288))),
        "S1,S2,S3": ([shape(m) for m in out.maps], [(1, 288, 288), (1, 144, 144), (1, 36, 36)]),
    }
    verdict(3, "shape suite", [(name, got == want) for name, (got, want) in expected.items()])


def test_criterion_4_operator_oracles():
    rng = np.random.default_rng(0)
    t = lambda a: torch.from_numpy(np.asarray(a, dtype=np.float64))  # noqa: E731
    checks = []

    f, k = rng.normal(size=(2, 3, 9, 8)), rng.normal(size=(2, 3, 5, 5))
    ok = all(rel_close(ddconv(t(f), t(k), r)[n].numpy(), oracles.ddconv_loop(f[n], k[n], r), 1e-6)
             for r in (1, 2, 3) for n in range(2))
    checks.append(("ddconv r=1,2,3", ok))

    e = extract_edge(t(f)).numpy()
    checks.append(("extract_edge", all(rel_close(e[n], f[n] - oracles.local_mean_loop(f[n]), 1e-6)
                                       for n in range(2))))

    cc = ChannelCorrelation(2).double().eval()
    f1, f2 = rng.normal(size=(2, 1, 2, 3, 4))
    g1, g2 = cc.attended(t(f1), t(f2))
    _, _, _, pre1, pre2 = oracles.ccorr_pre_conv(f1[0], f2[0], cc.weight.detach().numpy())
    checks.append(("ccorr C=2", rel_close(g1.detach()[0].numpy() + f1[0], pre1, 1e-6)
                   and rel_close(g2.detach()[0].numpy() + f2[0], pre2, 1e-6)))

    sm = SemanticMatch(3).double()
    fs, ks = rng.normal(size=(1, 3, 8, 8)), rng.normal(size=(1, 3, 5, 5))
    summed = sum(oracles.ddconv_loop(fs[0], ks[0], r) for r in (1, 2, 3))
    ref = oracles.pointwise_loop(summed, sm.pointwise.weight.detach()[:, :, 0, 0].numpy(),
                                 sm.pointwise.bias.detach().numpy())
    checks.append(("semantic_match", rel_close(sm(t(fs), t(ks)).detach()[0].numpy(), ref, 1e-6)))

    z = rng.normal(size=(1, 1, 3, 3))
    g = (rng.random((1, 1, 3, 3)) > 0.5).astype(float)
    s = 1 / (1 + np.exp(-z))
    checks.append(("bce", rel_close(bce_loss(t(z), t(g)).item(), oracles.bce_scalar(s, g), 1e-6)))
    s4, g4 = rng.random((1, 1, 4, 4)), (rng.random((1, 1, 4, 4)) > 0.5).astype(float)
    checks.append(("iou", rel_close(iou_loss(t(s4), t(g4)).item(), oracles.iou_scalar(s4, g4), 1e-6)))
    e1, e2 = rng.normal(size=(2, 1, 2, 4, 4))
    checks.append(("edge_align", rel_close(EdgeAlignLoss().double()(t(e1), t(e2)).item(),
                                           oracles.edge_align_scalar(e1, e2, 0.25), 1e-6)))
    neg = -np.abs(rng.normal(size=(1, 2, 3, 3)))
    checks.append(("edge_align e1=-e2<0", rel_close(EdgeAlignLoss().double()(t(neg), t(-neg)).item(),
                                                    1.25 ** 2 * np.mean(neg ** 2), 1e-6)))
    logits = [t(rng.normal(size=(1, 1, sz, sz))) for sz in (16, 8, 2)]
    edges = tuple(t(rng.normal(size=(1, 2, 8, 8))) for _ in range(2))
    gt = torch.zeros(1, 1, 16, 16, dtype=torch.float64)
    gt[..., 3:11, 5:13] = 1
    from seanet.decoder import SaliencyOutputs

    bundle = SeaNetLoss().double()(SaliencyOutputs(logits, edges), gt)
    ref_total = 0.0
    for zz in logits:
        gg = resize_target(gt, zz.shape[-2:]).numpy()
        ss = torch.sigmoid(zz).numpy()
        ref_total += oracles.bce_scalar(ss, gg) + oracles.iou_scalar(ss, gg)
    ref_total += 0.5 * oracles.edge_align_scalar(edges[0].numpy(), edges[1].numpy(), 0.25)
    checks.append(("total_loss", rel_close(bundle.total.item(), ref_total, 1e-6)))
    verdict(4, "operator oracles (rel 1e-6, float64)", checks)


def _fd_grad(fn, tensor, index, h=1e-6):
    with torch.no_grad():
        orig = tensor[index].item()
        tensor[index] = orig + h
        up = fn().item()
        tensor[index] = orig - h
        down = fn().item()
        tensor[index] = orig
    return (up - down) / (2 * h)


def test_criterion_5_gradient_checks(float64):
    checks = []
    gc = lambda fn, inputs: torch.autograd.gradcheck(  # noqa: E731
        fn, inputs, eps=1e-6, atol=1e-8, rtol=1e-3, raise_exception=False)

    f = torch.randn(2, 2, 6, 6, requires_grad=True)
    k = torch.randn(2, 2, 5, 5, requires_grad=True)
    checks.append(("ddconv d/df,d/dk", all(gc(lambda a, b: ddconv(a, b, r), (f, k)) for r in (1, 2, 3))))

    cc = ChannelCorrelation(2).double().eval()
    f1, f2 = torch.randn(2, 1, 2, 3, 3)
    cc(f1, f2).pow(2).sum().backward()
    analytic = cc.weight.grad.clone()
    numeric = torch.tensor([[_fd_grad(lambda: cc(f1, f2).pow(2).sum(), cc.weight.data, (i, j))
                             for j in range(2)] for i in range(2)])
    checks.append(("ccorr d/dWm", rel_close(analytic, numeric, 1e-3, 1e-8)))

    loss = EdgeAlignLoss().double()
    e1 = torch.randn(1, 2, 4, 4, requires_grad=True)
    e2 = torch.randn(1, 2, 4, 4, requires_grad=True)
    slope = loss.prelu.weight

    def align(a, b, w):
        return torch.mean((torch.nn.functional.prelu(a, w) - torch.nn.functional.prelu(b, w)) ** 2)

    checks.append(("edge_align d/de1,d/de2,d/dslope",
                   torch.equal(align(e1, e2, slope), loss(e1, e2)) and gc(align, (e1, e2, slope))))

    torch.manual_seed(0)
    model = build_model(width=0.25, input_size=64).double().eval()
    with torch.no_grad():
        # zero BN biases leave dead channels exactly on a ReLU kink; move to a generic point
        for m in model.modules():
            if isinstance(m, torch.nn.BatchNorm2d):
                m.bias.add_(0.05 * torch.randn_like(m.bias))
    crit = SeaNetLoss().double()
    x = torch.randn(2, 3, 64, 64)
    gt = torch.zeros(2, 1, 64, 64)
    gt[:, :, 16:40, 20:50] = 1

    def total():
        return crit(model(x), gt).total

    model.zero_grad()
    total().backward()
    rng = np.random.default_rng(0)
    ok = True
    for group in ("encoder", "dsmm", "esam", "decoder"):
        # sample among entries the loss actually depends on
        live = [(p, idx) for n, p in model.named_parameters() if n.startswith(group)
                for idx in map(tuple, torch.nonzero(p.grad.abs() > 1e-6).tolist())]
        for pick in rng.choice(len(live), 3, replace=False):
            p, idx = live[pick]
            # central difference round-off is about 1e-16 * loss / h, well under atol
            ok &= rel_close(p.grad[idx].item(), _fd_grad(total, p.data, idx, h=1e-5), 1e-3, 1e-9)
    checks.append(("total_loss d/dparams (12 sampled, width 0.25)", ok))
    verdict(5, "gradient checks (rel 1e-3, float64)", checks)


def test_criterion_6_metric_oracles():
    rng = np.random.default_rng(0)
    cases = [(rng.random((8, 8)), rng.random((8, 8)) < 0.35) for _ in range(5)]
    base = rng.random((8, 8))
    cases += [(base, np.zeros((8, 8), bool)), (base, np.ones((8, 8), bool)),
              (base, np.arange(64).reshape(8, 8) == 27), (np.full((8, 8), 0.3), rng.random((8, 8)) < 0.5)]
    ok_mae = ok_f = ok_e = ok_s = True
    for pred, gt in cases:
        ok_mae &= abs(mae(pred, gt) - np.abs(pred - gt).mean()) <= 1e-6
        ok_f &= rel_close(f_measure(pred, gt).curve, oracles.f_curve_bruteforce(pred, gt), 0, 1e-6)
        ok_e &= rel_close(e_measure(pred, gt).curve, oracles.e_curve_bruteforce(pred, gt), 0, 1e-6)
        ok_s &= abs(s_measure(pred, gt) - oracles.s_measure_reference(pred, gt)) <= 1e-6
    verdict(6, "metric oracles on 8x8 (1e-6, incl. empty/full/single-pixel GT)",
            [("MAE", ok_mae), ("F curve", ok_f), ("E curve", ok_e), ("S", ok_s)])


def _overfit(seed, root, steps=200, width=0.25, size=96, lr=1e-3):
    split = make_synthetic_dataset(root, n=10, size=size, seed=0)
    ds = SODDataset(split, size)
    batch = {"image": torch.stack([ds[i]["image"] for i in range(10)]),
             "gt": torch.stack([ds[i]["gt"] for i in range(10)])}
    seed_everything(seed)
    model = build_model(width=width, input_size=size)
    crit = SeaNetLoss()
    opt = make_optimizer(model, crit, lr)
    losses = [r.total for r in train_steps(model, crit, opt, [batch] * steps)]
    return dataset_mae(model, [batch]), np.array(losses)


def _spearman(y):
    ranks = np.argsort(np.argsort(y)).astype(float)
    steps = np.arange(len(y), dtype=float)
    return float(np.corrcoef(steps, ranks)[0, 1])


@pytest.mark.slow
def test_criterion_7_overfit_smoke(tmp_path):
    results = [_overfit(seed, tmp_path / f"s{seed}") for seed in range(3)]
    maes = [m for m, _ in results]
    rhos = [_spearman(l) for _, l in results]
    drops = [l[-20:].mean() < l[:20].mean() for _, l in results]
    med_mae, med_rho = float(np.median(maes)), float(np.median(rhos))
    verdict(7, "overfit smoke (10 images, 200 steps, width 0.25 @96, median of 3 seeds)", [
        (f"train MAE {med_mae:.4f} < 0.05 (seeds {', '.join(f'{m:.4f}' for m in maes)})", med_mae < 0.05),
        (f"loss trend Spearman rho {med_rho:.3f} <= -0.8", med_rho <= -0.8),
        ("last-20 mean < first-20 mean (all seeds)", all(drops)),
    ])


def test_criterion_8_ablation_structure():
    def params(**flags):
        torch.manual_seed(0)
        return sum(p.numel() for p in build_model(width=1.0, input_size=288,
                                                  ablation=Ablation(**flags)).parameters())

    full = params()
    # removing a module or sub-component never adds parameters; dilation and the
    # alignment loss carry none of their own
    expected_sign = {"no_dsmm": -1, "no_esam": -1, "no_sm": -1, "no_ccorr1": -1, "no_ccorr2": -1,
                     "no_eeu": -1, "no_dilation": 0, "no_alignment": 0}
    checks = []
    for flag in Ablation.names():
        delta = params(**{flag: True}) - full
        checks.append((f"{flag} {delta:+d}", int(np.sign(delta)) == expected_sign[flag]))
    verdict(8, "ablation structure (all 8 build, delta signs)", checks)
