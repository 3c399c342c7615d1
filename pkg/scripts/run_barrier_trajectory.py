#!/usr/bin/env python3
"""Integrate the reference over-the-barrier trajectory and dump its CSV.

The launch sits just outside the instantaneous saddle at the sixth
carrier extremum with a modest outward momentum; the resulting radius
grows monotonically while the energy climbs through zero, and the saddle
radius column lets the barrier be replotted next to it.
"""

import sys

from nsdi.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "data/trajectory"
    sys.exit(main(["trajectory", "--out-dir", out]))
