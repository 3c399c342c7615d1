#!/usr/bin/env python3
"""Run the production momentum-distribution ensemble.

1e5 microcanonical samples at shell energy -0.58 driven at peak field
0.137; writes histograms, per-trajectory rows, and the run manifest.
About ten minutes on one core; scale --threads to taste.
"""

import argparse
import sys

from nsdi.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=20260819)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--out-dir", default="data/ensemble")
    args = ap.parse_args()
    argv = ["ensemble", "--n", str(args.n), "--seed", str(args.seed),
            "--energy", "-0.58", "--field-strength", "0.137",
            "--out-dir", args.out_dir]
    if args.threads is not None:
        argv += ["--threads", str(args.threads)]
    sys.exit(main(argv))
