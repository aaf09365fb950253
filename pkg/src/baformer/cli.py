"""``baformer`` command line: gen-data, train, infer, eval, bench."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import kernels
from .config import dump_config, load_config
from .data import _atomic_write, load_dataset, synthesize_dataset, write_dataset
from .errors import BaformerError, ConfigError
from .metrics import evaluate_run
from .model import BaFormer
from .training import BOUNDARY_SOURCES, VOTING_MODES, decode, model_from_checkpoint, save_checkpoint, train


def _write_json(path, obj):
    _atomic_write(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8"))


def _effective(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.train.seed = args.seed
    if getattr(args, "matching", None):
        cfg.train.matching = args.matching
    if getattr(args, "voting", None):
        cfg.inference.voting = args.voting
    if getattr(args, "boundary", None):
        cfg.inference.boundary = args.boundary
    return cfg.validate()


def write_predictions(path, labels):
    rows = "".join(f"{t},{int(c)}\n" for t, c in enumerate(labels, start=1))
    _atomic_write(path, ("frame,label\n" + rows).encode("utf-8"))


def read_predictions(path) -> np.ndarray:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "frame,label":
        raise BaformerError(f"{path}: expected header 'frame,label'")
    out = []
    for expect, line in enumerate(lines[1:], start=1):
        frame, label = line.split(",")
        if int(frame) != expect:
            raise BaformerError(f"{path}: frame {frame} out of order")
        out.append(int(label))
    return np.array(out, dtype=np.int64)


def _predict_all(model, videos, inf):
    preds = {}
    for v in videos:
        pc, pm, pb = model.forward(v.features).final()
        preds[v.video_id] = decode(pc, pm, pb, inf.voting, inf.boundary, v.labels, inf.nms_window, inf.min_prob)
    return preds


# ------------------------------------------------------------------ commands


def cmd_gen_data(args):
    cfg = _effective(args)
    out = Path(args.out)
    write_dataset(synthesize_dataset(cfg.data, cfg.train.seed), out)
    dump_config(cfg, out / "config.json")


def cmd_train(args):
    cfg = _effective(args)
    videos = load_dataset(args.data)
    ks = {v.num_classes for v in videos}
    dims = {v.features.shape[1] for v in videos}
    if len(ks) != 1 or len(dims) != 1:
        raise ConfigError("dataset mixes class counts or feature widths")
    cfg.model.num_classes, cfg.model.input_dim = ks.pop(), dims.pop()
    cfg.validate()
    model = BaFormer(cfg.model, seed=cfg.train.seed)
    _, history = train(model, videos, cfg.train, cfg.loss)
    out = Path(args.out)
    save_checkpoint(out, model, {"epoch": cfg.train.epochs, "seed": cfg.train.seed})
    _write_json(out.with_name(out.name + ".log.json"), history)
    dump_config(cfg, out.with_name(out.name + ".config.json"))


def cmd_infer(args):
    cfg = _effective(args)
    model, _ = model_from_checkpoint(args.checkpoint)
    out = Path(args.out)
    for vid, labels in _predict_all(model, load_dataset(args.data), cfg.inference).items():
        write_predictions(out / f"{vid}.csv", labels)
    dump_config(cfg, out / "config.json")


def cmd_eval(args):
    cfg = _effective(args)
    videos = load_dataset(args.data)
    if args.predictions:
        preds = {v.video_id: read_predictions(Path(args.predictions) / f"{v.video_id}.csv") for v in videos}
    elif args.checkpoint:
        model, _ = model_from_checkpoint(args.checkpoint)
        preds = _predict_all(model, videos, cfg.inference)
    else:
        raise ConfigError("eval needs --checkpoint or --predictions")
    report = evaluate_run(preds, {v.video_id: v.labels for v in videos})
    out = Path(args.out)
    _write_json(out, report.to_dict())
    dump_config(cfg, out.with_name(out.name + ".config.json"))


BENCH_MODES = [(v, b) for v in ("query", "frame") for b in BOUNDARY_SOURCES] + [("argmax", "none")]


def bench(model, videos, repetitions: int, nms_window=8, min_prob=None) -> dict:
    """Median per-video wall time of forward + decode for every mode."""
    if repetitions < 1:
        raise ConfigError("--repetitions must be >= 1")
    report = {"kernel_backend": kernels.BACKEND, "repetitions": repetitions, "modes": []}
    for voting, boundary in BENCH_MODES:
        samples, stable = [], True
        for v in videos:
            first = None
            for _ in range(repetitions):
                t0 = time.perf_counter()
                pc, pm, pb = model.forward(v.features).final()
                pred = decode(pc, pm, pb, voting, "peak" if boundary == "none" else boundary, v.labels,
                              nms_window, min_prob)
                samples.append(time.perf_counter() - t0)
                if first is None:
                    first = pred
                elif not np.array_equal(first, pred):
                    stable = False
        report["modes"].append({
            "voting": voting,
            "boundary": boundary,
            "median_seconds_per_video": float(np.median(samples)),
            "samples": len(samples),
            "deterministic": stable,
        })
    return report


def cmd_bench(args):
    cfg = _effective(args)
    model, _ = model_from_checkpoint(args.checkpoint)
    report = bench(model, load_dataset(args.data), args.repetitions, cfg.inference.nms_window, cfg.inference.min_prob)
    _write_json(args.out, report)


# ---------------------------------------------------------------------- main


def build_parser():
    parser = argparse.ArgumentParser(prog="baformer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("--config", help="run config JSON")
        p.add_argument("--out", required=True)
        if data:
            p.add_argument("--data", required=True, help="dataset directory or manifest.json")

    p = sub.add_parser("gen-data", help="synthesize a dataset")
    common(p, data=False)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train and write a checkpoint")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--matching", choices=("instance", "ordered_class", "transcript"))
    p.set_defaults(func=cmd_train)

    for name, func in (("infer", cmd_infer), ("eval", cmd_eval), ("bench", cmd_bench)):
        p = sub.add_parser(name)
        common(p)
        p.add_argument("--checkpoint", required=name != "eval")
        p.add_argument("--voting", choices=VOTING_MODES)
        p.add_argument("--boundary", choices=BOUNDARY_SOURCES)
        if name == "eval":
            p.add_argument("--predictions", help="directory of per-video CSV predictions")
        if name == "bench":
            p.add_argument("--repetitions", type=int, default=3)
        p.set_defaults(func=func)
    return parser


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 1
    try:
        args.func(args)
    except (BaformerError, ValueError, KeyError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
