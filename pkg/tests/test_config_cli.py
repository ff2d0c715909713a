import json

import numpy as np
import pytest
import torch
from PIL import Image

from seanet.cli import main
from seanet.config import ConfigError, from_dict, load_config
from seanet.data import SODDataset, make_synthetic_dataset
from seanet.engine import (
    LOG_HEADER, CheckpointError, criterion_from_config, load_checkpoint, lr_at, make_optimizer,
    model_from_config, save_checkpoint, seed_everything, train_steps,
)
from seanet.model import Ablation, AblationError

SMALL = ["width=0.25", "input_size=64", "pretrained=false", "batch_size=2"]


def test_step_schedule():
    assert all(lr_at(e) == pytest.approx(1e-4) for e in range(30))
    assert all(lr_at(e) == pytest.approx(1e-5) for e in range(30, 50))


def test_defaults_and_effective_lambda():
    cfg = load_config()
    assert (cfg.input_size, cfg.batch_size, cfg.base_lr, cfg.epochs, cfg.lam) == (288, 8, 1e-4, 50, 0.5)
    assert load_config(overrides=["ablation.no_alignment=true"]).effective_lam == 0.0


def test_yaml_file_and_overrides(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("batch_size: 4\ndataset:\n  root: /data\naugment:\n  max_angle: 15\n")
    cfg = load_config(path, ["batch_size=2", "ablation.no_esam=true"])
    assert cfg.batch_size == 2 and cfg.dataset.root == "/data" and cfg.augment.max_angle == 15
    assert cfg.ablation.no_esam


@pytest.mark.parametrize("data,match", [
    ({"input_size": 100}, "multiple of 32"),
    ({"bogus": 1}, "unknown config keys"),
    ({"ablation": {"no_frobnicate": True}}, "unknown config keys"),
    ({"dropout": 1.5}, "dropout"),
    ({"optimizer": "sgd"}, "adam"),
])
def test_invalid_configs(data, match):
    with pytest.raises(ConfigError, match=match):
        from_dict(data)


def test_malformed_override():
    with pytest.raises(ConfigError, match="key=value"):
        load_config(overrides=["batch_size"])


@pytest.mark.parametrize("flags", [
    {"no_dsmm": True, "no_sm": True}, {"no_esam": True, "no_eeu": True},
    {"no_sm": True, "no_dilation": True},
])
def test_conflicting_ablations_rejected(flags):
    with pytest.raises(AblationError):
        Ablation(**flags)
    with pytest.raises(ConfigError):
        from_dict({"ablation": flags})


def _batches(tmp_path, n=4, size=64):
    split = make_synthetic_dataset(tmp_path / "data", n=n, size=size)
    ds = SODDataset(split, size)
    return [{"image": torch.stack([ds[i]["image"] for i in range(n)]),
             "gt": torch.stack([ds[i]["gt"] for i in range(n)])}]


def _first_step(cfg, batches):
    seed_everything(0)
    model, crit = model_from_config(cfg), criterion_from_config(cfg)
    opt = make_optimizer(model, crit, cfg.base_lr)
    return next(train_steps(model, crit, opt, batches)), model, crit


def test_first_step_loss_is_deterministic(tmp_path):
    cfg = load_config(overrides=SMALL)
    batches = _batches(tmp_path)
    a, _, _ = _first_step(cfg, batches)
    b, _, _ = _first_step(cfg, batches)
    assert a == b and np.isfinite(a.total)


def test_optimizer_includes_prelu_slope():
    cfg = load_config(overrides=SMALL)
    model, crit = model_from_config(cfg), criterion_from_config(cfg)
    params = {id(p) for g in make_optimizer(model, crit, 1e-4).param_groups for p in g["params"]}
    assert id(crit.edge_align.prelu.weight) in params


def test_checkpoint_round_trip(tmp_path):
    cfg = load_config(overrides=SMALL)
    _, model, crit = _first_step(cfg, _batches(tmp_path))
    path = tmp_path / "m.pt"
    save_checkpoint(path, model, crit, cfg, epoch=0)
    restored, cfg2 = load_checkpoint(path)
    assert cfg2 == cfg
    x = torch.randn(1, 3, 64, 64)
    model.eval()
    with torch.no_grad():
        torch.testing.assert_close(restored(x).s1, model(x).s1)


def test_checkpoint_mismatch_raises(tmp_path):
    cfg = load_config(overrides=SMALL)
    model, crit = model_from_config(cfg), criterion_from_config(cfg)
    path = tmp_path / "m.pt"
    save_checkpoint(path, model, crit, cfg)
    other = load_config(overrides=[*SMALL, "ablation.no_esam=true"])
    with pytest.raises(CheckpointError, match="does not match"):
        load_checkpoint(path, other)
    (tmp_path / "junk.pt").write_bytes(b"junk")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "junk.pt")


def test_cli_complexity(tmp_path, capsys):
    out = tmp_path / "c.json"
    assert main(["complexity", "--input-size", "64", "--set", "width=0.25", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert set(data["groups"]) == {"encoder", "dsmm", "esam", "decoder"}
    assert data["total_params"] == sum(g["params"] for g in data["groups"].values())
    assert "MAC=1" in data["convention"]
    assert "params" in capsys.readouterr().out


def test_cli_train_infer_evaluate(tmp_path, capsys):
    make_synthetic_dataset(tmp_path / "data", n=3, size=48, split="train")
    make_synthetic_dataset(tmp_path / "data", n=2, size=48, split="test", seed=1)
    run = tmp_path / "run"
    common = [*SMALL, f"dataset.root={tmp_path / 'data'}", f"out_dir={run}"]
    args = ["train"] + [x for o in [*common, "epochs=5", "max_steps=3"] for x in ("--set", o)]
    assert main(args) == 0
    log = (run / "train.log").read_text().splitlines()
    assert log[0] == LOG_HEADER and len(log) == 4
    assert all(len(line.split()) == 5 for line in log[1:])
    assert (run / "best.pt").exists() and (run / "last.pt").exists()

    pred_dir = tmp_path / "pred"
    assert main(["infer", "--checkpoint", str(run / "last.pt"), "--images",
                 str(tmp_path / "data/test/images"), "--out", str(pred_dir), "--visualize"]) == 0
    maps = sorted(pred_dir.glob("scene_???.png"))
    assert len(maps) == 2
    with Image.open(maps[0]) as im:
        assert im.mode == "L" and im.size == (48, 48)
    assert len(list(pred_dir.glob("*_vis.png"))) == 2

    report = tmp_path / "report.json"
    curves = tmp_path / "curves.csv"
    assert main(["evaluate", "--pred", str(pred_dir), "--gt", str(tmp_path / "data/test/GT"),
                 "--out", str(report), "--curves", str(curves)]) == 0
    data = json.loads(report.read_text())
    assert data["n_images"] == 2 and 0 <= data["mae"] <= 1
    assert curves.read_text().startswith("threshold,f_measure,e_measure")


def test_shipped_config_matches_defaults():
    from pathlib import Path

    cfg = load_config(Path(__file__).parents[1] / "configs" / "eorssd.yaml")
    default = load_config()
    assert cfg.base_lr == default.base_lr and cfg.epochs == default.epochs
    assert cfg.out_dir == "runs/eorssd"
