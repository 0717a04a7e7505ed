#!/usr/bin/env python3
"""Reproduce the headline strong-convergence tables.

Runs the splitting scheme on the non-commutative and commutative benchmark
problems over a step ladder, fits the empirical orders, and writes rate
tables under --out. The Euler baseline on scalar GBM is included for scale.
"""

import argparse

from nvlab.cli import main as nvlab_main


def run(args):
    ladder = "8,16,32,64,128,256,512"
    jobs = [
        ("heisenberg", "nv", "heis-nv"),
        ("diag-comm", "nv", "diag-nv"),
        ("gbm1d", "euler", "gbm-euler"),
    ]
    for problem, scheme, tag in jobs:
        argv = [
            "convergence",
            "--problem",
            problem,
            "--scheme",
            scheme,
            "--nladder",
            ladder,
            "--paths",
            str(args.paths),
            "--seed",
            str(args.seed),
            "--out",
            f"{args.out}/{tag}",
        ]
        code = nvlab_main(argv)
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", type=str, default="out/convergence")
    raise SystemExit(run(ap.parse_args()))
