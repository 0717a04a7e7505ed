#!/usr/bin/env python3
"""Compare the rescaled scheme error against the simulated limiting law.

The rescaled terminal error sqrt(N)(X_T - X^nv_T) on the non-commutative
benchmark is matched, coordinate by coordinate, against samples of the
limiting affine SDE driven by the Lie-bracket source term; the second
coordinate has variance T^2/2 = 0.5 in closed form. The commutative problem
is included to show the collapse to zero.
"""

import argparse

from nvlab.cli import main as nvlab_main


def run(args):
    for problem, tag in [("heisenberg", "heis"), ("diag-comm", "diag")]:
        argv = [
            "limit-law",
            "--problem",
            problem,
            "--N",
            str(args.steps),
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
    ap.add_argument("--steps", type=int, default=256)
    ap.add_argument("--paths", type=int, default=100000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", type=str, default="out/limitlaw")
    raise SystemExit(run(ap.parse_args()))
