#!/usr/bin/env python3
"""Profile multilevel correction variances on the benchmark problems.

The level-variance decay exponent beta is twice the strong order for
Lipschitz payoffs: about 1 on the non-commutative problem, about 2 on the
commutative one. Also runs the source-term diagnostic whose analytic
variance is T*t/2 at every resolution.
"""

import argparse

from nvlab.cli import main as nvlab_main


def run(args):
    jobs = [
        ["mlmc", "--problem", "heisenberg", "--payoff", "coord2"],
        ["mlmc", "--problem", "diag-comm", "--payoff", "norm2"],
    ]
    for argv in jobs:
        argv += [
            "--levels",
            str(args.levels),
            "--paths-per-level",
            str(args.paths_per_level),
            "--seed",
            str(args.seed),
            "--out",
            f"{args.out}/{argv[2]}",
        ]
        code = nvlab_main(argv)
        if code != 0:
            return code
    for N in (4, 64):
        argv = [
            "source-term",
            "--N",
            str(N),
            "--j",
            "2",
            "--m",
            "1",
            "--t",
            "1.0",
            "--paths",
            str(args.paths),
            "--seed",
            str(args.seed),
            "--out",
            f"{args.out}/source-N{N}",
        ]
        code = nvlab_main(argv)
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, default=6)
    ap.add_argument("--paths-per-level", type=int, default=10000)
    ap.add_argument("--paths", type=int, default=200000, help="paths for the source-term run")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", type=str, default="out/mlmc")
    raise SystemExit(run(ap.parse_args()))
