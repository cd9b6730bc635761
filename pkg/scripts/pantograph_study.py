"""Fitted power-law bound |X(t,s)| <= M (t/s)^-lambda for x'(t) + (a/t) x(theta t) = 0.

Scans a ln(1/theta) below 1 and writes a_ln, verdict, M, lambda, worst_ratio as CSV.
"""

import argparse
import csv
import math
import sys
import warnings

from tsdde import fundamental_solution
from tsdde import stability as st
from tsdde.presets import pantograph_worst_ratio


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--theta", type=float, default=0.5)
    ap.add_argument("--horizon", type=float, default=100.0)
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--values", type=float, nargs="+", default=[0.2, 0.4, 0.6, 0.8, 0.95])
    args = ap.parse_args()
    warnings.simplefilter("ignore")

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["a_ln", "verdict", "M", "lambda", "worst_ratio"])
    log_inv = math.log(1 / args.theta)
    for v in args.values:
        eq = st.pantograph_transform(f"{v / log_inv!r}/t", args.theta, args.horizon, args.step)
        fld = fundamental_solution(eq)
        cert = st.classify(eq, fld=fld)
        if cert.verdict == st.UES:
            M, lam = st.pantograph_envelope(cert)
            worst = pantograph_worst_ratio(eq, fld, M, lam, args.horizon)
            w.writerow([v, cert.verdict, format(M, ".6g"), format(lam, ".6g"), format(worst, ".6f")])
        else:
            w.writerow([v, cert.verdict, "", "", ""])
        sys.stdout.flush()


if __name__ == "__main__":
    main()
