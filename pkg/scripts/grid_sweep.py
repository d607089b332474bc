#!/usr/bin/env python3
"""eps x p grid over 0.1..0.9 with 5 trials per cell at desk scale.

81 cells x 5 trials is several days on one core; pass --workers, or narrow the
grid with --eps-values/--p-values, or lower --trials.
"""
import sys

from oscres import cli

if __name__ == "__main__":
    sys.exit(cli.main(["grid-sweep", "--trials", "5", "--out", "results/grid", *sys.argv[1:]]))
