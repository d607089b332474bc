#!/usr/bin/env python3
"""Desk-scale run: 100 rings, eps=0.2, p=0.4, 5k train / 1k test, 3 trials, plus the raw-sequence baseline.

Usage: python scripts/desk_scale.py [--data-dir DIR] [--out results/desk] [extra oscres flags]
"""
import argparse
import json
import sys
from pathlib import Path

from oscres import cli
from oscres.experiments import ExperimentConfig, baseline_trial


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data-dir")
    ap.add_argument("--out", default="results/desk")
    args, extra = ap.parse_known_args()
    data = ["--data-dir", args.data_dir] if args.data_dir else []
    code = cli.main(["run", *data, "--n-rings", "100", "--epsilon", "0.2", "--p", "0.4",
                     "--train-subset", "5000", "--validation-subset", "1000", "--test-subset", "1000",
                     "--trials", "3", "--out", args.out, *extra])
    if code:
        return code
    cfg = ExperimentConfig(data_dir=args.data_dir, train_subset=5000, validation_subset=1000, test_subset=1000)
    base = baseline_trial(cfg)
    summary = json.loads((Path(args.out) / "summary.json").read_text())
    summary["baseline_test_accuracy"] = base.test_accuracy
    (Path(args.out) / "summary.json").write_text(json.dumps(summary, indent=1))
    print(f"linear-on-sequence baseline: test {base.test_accuracy:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
