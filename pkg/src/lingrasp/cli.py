"""Command-line interface.

Subcommands: gen-data, train, eval, infer, bench. Every command is
reproducible from its seed, config and data alone.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .bench import MODES, benchmark_scan, format_table
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .data import SceneConfig, load_dataset, make_dataset, save_dataset
from .evaluation import evaluate
from .inference import infer, load_image, predict_sample, save_heatmap
from .training import train
from .validation import check_image, check_prompt


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _str_list(text: str) -> list[str]:
    return [v for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lingrasp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic language-grasp dataset")
    g.add_argument("--out", required=True, help="output dataset directory")
    g.add_argument("--scenes", type=int, required=True, help="number of scenes")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--image-size", type=int, default=224)
    g.add_argument("--split-ratio", type=float, default=0.7)

    t = sub.add_parser("train", help="train a detector on the seen split")
    t.add_argument("--data", required=True, help="dataset directory")
    t.add_argument("--out", required=True, help="checkpoint path, e.g. ckpt.gmv")
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--config", default=None, help="JSON config file")
    t.add_argument("--no-fusion", action="store_true", help="ablation: ignore prompts")

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    e.add_argument("--data", required=True)
    e.add_argument("--ckpt", required=True)
    e.add_argument("--report", required=True, help="output JSON report path")

    i = sub.add_parser("infer", help="detect grasps on one image")
    i.add_argument("--ckpt", required=True)
    i.add_argument("--image", required=True, help="input PNG")
    i.add_argument("--prompt", required=True)
    i.add_argument("--topk", type=int, default=1)
    i.add_argument("--heatmap", default=None, help="output quality heatmap PNG")
    i.add_argument("--grasps", default=None, help="output grasp list JSON")

    b = sub.add_parser("bench", help="wall-time scaling of sequence operators")
    b.add_argument("--lengths", type=_int_list, default=[256, 1024, 4096])
    b.add_argument("--modes", type=_str_list, default=list(MODES))
    b.add_argument("--report", default=None, help="output JSON path")
    return parser


def cmd_gen_data(args) -> int:
    if args.seed < 0:
        raise ValueError("seed must be non-negative")
    cfg = SceneConfig(image_size=args.image_size)
    samples = make_dataset(args.scenes, args.seed, cfg, split_ratio=args.split_ratio)
    save_dataset(samples, args.out)
    n_seen = sum(s.split == "seen" for s in samples)
    print(f"wrote {len(samples)} scenes ({n_seen} seen / {len(samples) - n_seen} unseen) to {args.out}")
    return 0


def cmd_train(args) -> int:
    config = TrainConfig.from_json(args.config) if args.config else TrainConfig()
    updates = {}
    if args.epochs is not None:
        updates["epochs"] = args.epochs
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.no_fusion:
        updates["fusion"] = False
    if updates:
        config = config.replace(**updates)
    samples = load_dataset(args.data)
    model, history = train(config, samples)
    save_checkpoint(model, config, args.out)
    print(f"trained {config.epochs} epochs; loss {history[0]:.6f} -> {history[-1]:.6f}; saved {args.out}")
    return 0


def cmd_eval(args) -> int:
    model, config = load_checkpoint(args.ckpt)
    samples = load_dataset(args.data)
    report = evaluate(lambda s: predict_sample(model, config, s, k=1), samples)
    report.to_json(args.report)
    print(
        f"seen {report.seen_rate:.3f} ({report.n_seen})  "
        f"unseen {report.unseen_rate:.3f} ({report.n_unseen})  h {report.h:.3f}"
    )
    return 0


def cmd_infer(args) -> int:
    model, config = load_checkpoint(args.ckpt)
    image = check_image(load_image(args.image))
    prompt = check_prompt(args.prompt)
    decoded, quality = infer(model, config, image, prompt, k=args.topk)
    for d in decoded:
        r = d.rect
        print(f"grasp x={r.x:.1f} y={r.y:.1f} w={r.w:.1f} h={r.h:.1f} theta={r.theta:.3f} q={d.quality:.3f}")
    if not decoded:
        print("no grasp above the quality threshold")
    if args.heatmap:
        save_heatmap(quality, args.heatmap)
    if args.grasps:
        with open(args.grasps, "w", encoding="utf-8") as fh:
            json.dump([{**d.rect.to_dict(), "quality": d.quality} for d in decoded], fh, indent=2)
            fh.write("\n")
    return 0


def cmd_bench(args) -> int:
    rows = benchmark_scan(args.lengths, modes=args.modes)
    print(format_table(rows))
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    handlers = {
        "gen-data": cmd_gen_data,
        "train": cmd_train,
        "eval": cmd_eval,
        "infer": cmd_infer,
        "bench": cmd_bench,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
