#!/usr/bin/env python3
"""Full-MNIST runs with 300 rings and 5 trials at (eps, p) = (0.2, 0.4) and (0.5, 0.5).

Each trial simulates 70,000 images; expect many hours per setting on one core.
"""
import sys

from oscres import cli


def main():
    for eps, p in (("0.2", "0.4"), ("0.5", "0.5")):
        code = cli.main(["run", "--full-scale", "--epsilon", eps, "--p", p,
                         "--out", f"results/full_eps{eps}_p{p}", *sys.argv[1:]])
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
