"""Command line entry point: ``seanet {train,evaluate,infer,complexity}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. --set ablation.no_esam=true")


def cmd_train(args) -> int:
    from .engine import train

    cfg = load_config(args.config, args.overrides)
    result = train(cfg)
    print(json.dumps({"steps": len(result.history), "epoch_mae": result.epoch_mae,
                      "best": str(result.best_checkpoint), "last": str(result.last_checkpoint)}))
    return 0


def cmd_evaluate(args) -> int:
    from .metrics import evaluate_folder

    report = evaluate_folder(args.pred, args.gt, workers=args.workers)
    report.to_json(args.out)
    if args.curves:
        report.curves_csv(args.curves)
    print(json.dumps({**report.summary(), "n_images": report.n_images,
                      "missing": len(report.missing)}, indent=2))
    return 0


def cmd_infer(args) -> int:
    from .engine import infer, load_checkpoint

    cfg = load_config(args.config, args.overrides) if (args.config or args.overrides) else None
    model, cfg = load_checkpoint(args.checkpoint, cfg)
    written = infer(model, cfg, args.images, args.out, visualize=args.visualize)
    print(f"wrote {len(written)} saliency maps to {args.out}")
    return 0


def cmd_complexity(args) -> int:
    from .complexity import complexity_report
    from .engine import criterion_from_config, model_from_config

    overrides = [*args.overrides, f"input_size={args.input_size}", "pretrained=false"]
    cfg = load_config(args.config, overrides)
    model = model_from_config(cfg)
    extra = {"loss": criterion_from_config(cfg)} if args.include_loss else None
    report = complexity_report(model, depth=args.depth, extra=extra)
    data = report.to_dict()
    data["groups"] = {
        name: {"params": report.group(name, "params"), "flops": report.group(name, "flops")}
        for name in ("encoder", "dsmm", "esam", "decoder")
    }
    data["ablation"] = cfg.ablation.active()
    text = json.dumps(data, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(f"params {report.total_params / 1e6:.3f}M  FLOPs {report.total_flops / 1e9:.3f}G "
          f"@ {args.input_size}x{args.input_size}")
    for name, g in data["groups"].items():
        print(f"  {name:8s} {g['params'] / 1e6:7.3f}M  {g['flops'] / 1e9:6.3f}G")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seanet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model")
    _add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score saliency maps against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", default="report.json")
    p.add_argument("--curves", help="optional CSV dump of the 256-point F/E curves")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("infer", help="write saliency maps for a folder of images")
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--visualize", action="store_true", help="also write side-by-side images")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("complexity", help="parameter and FLOPs breakdown")
    _add_config_args(p)
    p.add_argument("--input-size", type=int, default=288)
    p.add_argument("--depth", type=int, default=2, help="module-name depth of the breakdown")
    p.add_argument("--include-loss", action="store_true", help="count the PReLU slope too")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_complexity)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
