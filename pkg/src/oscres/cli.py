"""Command-line entry point: ``oscres {encode,run,grid-sweep,size-sweep,report}``.

Settings come from ``ExperimentConfig`` defaults, then an optional JSON file
(``--config``), then explicit flags. Exit codes: 0 ok, 2 bad configuration,
3 bad or missing data, 4 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments, formats
from .encoder import encode_batch
from .errors import ConfigError, DataFormatError, OscresError
from .experiments import ExperimentConfig

log = logging.getLogger("oscres")

# config field -> value type; flags are the field names with dashes
OVERRIDES = {
    "n_rings": int, "size_lower": int, "size_upper": int, "epsilon": float, "p": float,
    "k": int, "input_ring_fraction": float, "n_in": int, "n_ts": int, "stride": int,
    "dt": float, "T": float, "v_thl": float, "v_thh": float, "warmup_max_steps": int,
    "n_snapshots": int, "snapshot_stride": int, "noise_sigma": float, "trials": int,
    "master_seed": int, "data_dir": str, "split_seed": int, "train_subset": int,
    "validation_subset": int, "test_subset": int, "sim_batch": int, "workers": int,
}
TRAIN_OVERRIDES = {"learning_rate": float, "epochs": int, "batch_size": int, "l2": float, "optimizer": str}


def _float_list(s: str) -> list[float]:
    try:
        return [float(v) for v in s.split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _int_list(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _add_config_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("experiment settings")
    g.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    for name, typ in {**OVERRIDES, **TRAIN_OVERRIDES}.items():
        g.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    g.add_argument("--augment", dest="augment", action="store_true", default=None)
    g.add_argument("--no-augment", dest="augment", action="store_false")
    g.add_argument("--full-scale", action="store_true", help="300 rings, full splits, 5 trials")


def build_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    if getattr(args, "full_scale", False):
        cfg = experiments.full_scale(cfg)
    changes = {k: getattr(args, k) for k in OVERRIDES if getattr(args, k, None) is not None}
    if getattr(args, "augment", None) is not None:
        changes["augment"] = args.augment
    train_changes = {k: getattr(args, k) for k in TRAIN_OVERRIDES if getattr(args, k, None) is not None}
    if train_changes:
        changes["train"] = dataclasses.replace(cfg.train, **train_changes)
    try:
        return cfg.replace(**changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_encode(args) -> int:
    cfg = build_config(args)
    tr, va, te = experiments.load_data(cfg)
    chosen = {"train": tr, "validation": va, "test": te}[args.split]
    images = chosen.images if args.limit is None else chosen.images[: args.limit]
    enc = cfg.encoder_params(augment=args.split == "train")
    rng = np.random.default_rng(cfg.master_seed)
    frames = encode_batch(images, enc, rng)
    out = args.out or formats.encoded_cache_path(args.cache_dir, args.split, dataclasses.asdict(enc))
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    formats.write_encoded(out, frames)
    print(f"wrote {len(frames)} encoded images to {out}")
    return 0


def _finish(sweep, out_dir) -> int:
    summary = experiments.report(sweep, out_dir)
    for cell in summary["cells"]:
        axes = ", ".join(f"{a}={cell[a]}" for a in sweep.axis_names)
        mean, std = cell["test_accuracy_mean"], cell["test_accuracy_std"]
        std_s = "n/a" if std is None else f"{std:.4f}"
        mean_s = "n/a" if mean is None else f"{mean:.4f}"
        print(f"{axes}: test {mean_s} +/- {std_s} over {cell['n_trials']} trials")
    if summary["failures"]:
        print(f"{len(summary['failures'])} trial(s) failed; see summary.json", file=sys.stderr)
    print(f"results in {out_dir}")
    return 0 if sweep.ok_rows() else 4


def cmd_run(args) -> int:
    cfg = build_config(args)
    return _finish(experiments.single_run(cfg), args.out)


def cmd_grid(args) -> int:
    cfg = build_config(args)
    sweep = experiments.grid_sweep(
        cfg, args.eps_values or experiments.GRID_VALUES, args.p_values or experiments.GRID_VALUES,
        trials=args.trials or 5,
    )
    return _finish(sweep, args.out)


def cmd_size(args) -> int:
    cfg = build_config(args)
    sweep = experiments.size_sweep(
        cfg, args.sizes or experiments.SIZE_VALUES, trials=args.trials or 10,
        epsilon=args.epsilon if args.epsilon is not None else 0.5,
        p=args.p if args.p is not None else 0.5,
    )
    return _finish(sweep, args.out)


def cmd_report(args) -> int:
    src = Path(args.input)
    if src.is_dir():
        src = src / "trials.csv"
    try:
        sweep = experiments.read_trials_csv(src)
    except (OSError, KeyError, ValueError) as exc:
        raise DataFormatError(f"cannot read trial table {src}: {exc}") from exc
    summary = experiments.report(sweep, args.out or src.parent)
    print(json.dumps(summary["cells"], indent=1))
    return 0


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oscres", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a split into sliding-window frames")
    _add_config_args(p)
    p.add_argument("--split", choices=["train", "validation", "test"], default="train")
    p.add_argument("--limit", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--cache-dir", type=Path, default=Path("cache"))
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("run", help="run trials of one configuration")
    _add_config_args(p)
    p.add_argument("--out", type=Path, default=Path("results/run"))
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grid-sweep", help="epsilon x p grid")
    _add_config_args(p)
    p.add_argument("--eps-values", type=_float_list)
    p.add_argument("--p-values", type=_float_list)
    p.add_argument("--out", type=Path, default=Path("results/grid"))
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("size-sweep", help="accuracy against ring count")
    _add_config_args(p)
    p.add_argument("--sizes", type=_int_list)
    p.add_argument("--out", type=Path, default=Path("results/size"))
    p.set_defaults(func=cmd_size)

    p = sub.add_parser("report", help="rebuild summary files from trials.csv")
    p.add_argument("input", help="trials.csv or a directory holding it")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except OscresError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, RuntimeError, MemoryError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
