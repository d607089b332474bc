#!/usr/bin/env python3
"""Accuracy against ring count: 50..500 rings in steps of 50, eps = p = 0.5, 10 trials each."""
import sys

from oscres import cli

if __name__ == "__main__":
    sys.exit(cli.main(["size-sweep", "--trials", "10", "--out", "results/size", *sys.argv[1:]]))
