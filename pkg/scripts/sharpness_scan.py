"""Peak of x_{n+1} = x_n - a x_{n-1} over many steps next to the companion-matrix spectral radius.

Writes a, modulus, stable, peak_abs_x as CSV.
"""

import argparse
import csv
import sys

import numpy as np

from tsdde.presets import recurrence_peak
from tsdde.stability import eigen_sharpness


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lo", type=float, default=0.8)
    ap.add_argument("--hi", type=float, default=1.2)
    ap.add_argument("--count", type=int, default=17)
    ap.add_argument("--steps", type=int, default=10_000)
    args = ap.parse_args()

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["a", "modulus", "stable", "peak_abs_x"])
    for a in np.linspace(args.lo, args.hi, args.count):
        e = eigen_sharpness(float(a))
        w.writerow([format(a, ".6g"), format(e["modulus"], ".12g"), e["stable"], format(recurrence_peak(float(a), args.steps), ".6g")])


if __name__ == "__main__":
    main()
