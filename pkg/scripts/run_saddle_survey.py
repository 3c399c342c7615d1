#!/usr/bin/env python3
"""Survey the saddle: location, curvature spectrum, perturbed launches,
and the ring-configuration existence table, all at the default field.

Prints JSON blocks to stdout and leaves the ring table in data/saddle/.
"""

import sys

from nsdi.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "data/saddle"
    for argv in (
        ["saddle", "--field-strength", "0.137"],
        ["stability", "--field-strength", "0.137"],
        ["perturb-scan", "--field-strength", "0.137",
         "--displacements", "0,0.2,0.4,-0.2,-0.4", "--out-dir", out],
        ["ngon-scan", "--n-min", "2", "--n-max", "20",
         "--field-strength", "0.137", "--out-dir", out],
    ):
        code = main(argv)
        if code != 0:
            sys.exit(code)
    sys.exit(0)
