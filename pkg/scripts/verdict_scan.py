"""Certificate verdicts of a preset across one parameter.

Example: python scripts/verdict_scan.py example_5_1 a 0.2 1.2 11
Writes value, verdict, route, strict, weak, lambda0, lambda1 as CSV.
"""

import argparse
import csv
import sys
import warnings

import numpy as np

from tsdde import stability as st
from tsdde.presets import get_preset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("preset")
    ap.add_argument("param")
    ap.add_argument("lo", type=float)
    ap.add_argument("hi", type=float)
    ap.add_argument("count", type=int)
    ap.add_argument("--horizon", type=float)
    ap.add_argument("--step", type=float)
    args = ap.parse_args()
    warnings.simplefilter("ignore")

    pr = get_preset(args.preset)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["value", "verdict", "route", "strict_A1", "weak_A1", "strict_A2", "weak_A2", "lambda0", "lambda1"])
    for v in np.linspace(args.lo, args.hi, args.count):
        eq = pr.setup({args.param: float(v)}, args.horizon, args.step).eq
        cert = st.classify(eq)
        vals = {r.name: r.value for r in cert.reports}
        w.writerow(
            [format(v, ".6g"), cert.verdict, cert.route or ""]
            + [format(vals[k], ".6g") if k in vals else "" for k in ("L31_strict", "L32_weak", "L41_strict", "L42_weak")]
            + ["" if cert.lambda0 is None else format(cert.lambda0, ".6g"), "" if cert.lambda1 is None else format(cert.lambda1, ".6g")]
        )


if __name__ == "__main__":
    main()
