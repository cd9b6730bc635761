"""Error of the dense-segment solver against a fine reference as the step shrinks.

Writes h, max_error, ratio_to_previous as CSV.
"""

import argparse
import csv
import sys

import numpy as np

from tsdde import DelayEquation, History, solve_ivp
from tsdde.timescale import reals


def solve(a: float, tau: float, horizon: float, h: float):
    eq = DelayEquation(reals(-tau, horizon), repr(a), f"t - {tau!r}", t0=0, h_max=h)
    return solve_ivp(eq, 0, History(1.0, "1"))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", type=float, default=0.3)
    ap.add_argument("--tau", type=float, default=3.0)
    ap.add_argument("--horizon", type=float, default=30.0)
    ap.add_argument("--levels", type=int, default=5, help="number of halvings starting from h=1")
    args = ap.parse_args()

    steps = [2.0**-k for k in range(args.levels)]
    ref = solve(args.a, args.tau, args.horizon, steps[-1] / 8)
    t = np.linspace(0, args.horizon, 121)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["h", "max_error", "ratio_to_previous"])
    prev = None
    for h in steps:
        err = float(np.max(np.abs(solve(args.a, args.tau, args.horizon, h)(t) - ref(t))))
        w.writerow([h, format(err, ".6g"), "" if prev is None else format(prev / err, ".4f")])
        prev = err


if __name__ == "__main__":
    main()
