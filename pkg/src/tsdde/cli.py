"""Command-line entry point: ``tsdde <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import stability
from .config import RunConfig, apply, load_config
from .engine import FundamentalField, fundamental_solution, solve_ivp
from .errors import (
    BadTheta,
    ConfigError,
    DegenerateScale,
    EvalError,
    ExprSyntaxError,
    NegativeCoefficient,
    NotInScale,
    ReversedBounds,
    TsddeError,
    UnknownExample,
)
from .presets import PRESETS, verify_example

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_CONFIG_ERRORS = (
    ConfigError,
    ExprSyntaxError,
    UnknownExample,
    NegativeCoefficient,
    BadTheta,
    NotInScale,
    ReversedBounds,
    DegenerateScale,
    EvalError,
)


def _g(x: float) -> str:
    return format(float(x), ".17g")


class _Sink:
    """Writes to a file path, or to stdout when no path is given."""

    def __init__(self, path: str | None):
        self.path = path

    def write(self, text: str) -> None:
        if self.path is None or self.path == "-":
            sys.stdout.write(text)
        else:
            Path(self.path).write_text(text)


def simulation_csv(x) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x"])
    for t, v in zip(x.grid.points, x.values):
        w.writerow([_g(t), _g(v)])
    return buf.getvalue()


def decay_fit(t: np.ndarray, X: np.ndarray) -> float:
    """Least-squares rate lam in |X| ~ c exp(-lam (t - s)); nan when fewer than two nonzero samples."""
    keep = np.abs(X) > 0
    if np.count_nonzero(keep) < 2 or np.ptp(t[keep]) == 0:
        return math.nan
    slope = np.polyfit(t[keep], np.log(np.abs(X[keep])), 1)[0]
    return float(-slope)


def field_csvs(fld: FundamentalField) -> tuple[str, str]:
    long, summ = io.StringIO(), io.StringIO()
    w = csv.writer(long, lineterminator="\n")
    w.writerow(["s", "t", "X"])
    for s, t, x in fld.samples():
        w.writerow([_g(s), _g(t), _g(x)])
    w2 = csv.writer(summ, lineterminator="\n")
    w2.writerow(["s", "max_abs_X", "decay_fit_lambda"])
    p = fld.eq.grid.points
    for j, s in enumerate(fld.s_values):
        k = fld.start_idx[j]
        col = fld.X[k:, j]
        w2.writerow([_g(s), _g(np.max(np.abs(col))), _g(decay_fit(p[k:], col))])
    return long.getvalue(), summ.getvalue()


def summary_path(out: str) -> str:
    p = Path(out)
    return str(p.with_name(p.stem + "_summary.csv"))


def run_simulate(cfg: RunConfig) -> int:
    st = cfg.build()
    x = solve_ivp(st.eq, st.s, st.history)
    _Sink(cfg.output).write(simulation_csv(x))
    return EXIT_OK


def run_fundamental(cfg: RunConfig) -> int:
    st = cfg.build()
    fld = fundamental_solution(st.eq, cfg.samples(st.eq), parallel=cfg.parallel)
    long, summ = field_csvs(fld)
    if cfg.output is None or cfg.output == "-":
        sys.stdout.write(long)
        sys.stdout.write("\n")
        sys.stdout.write(summ)
    else:
        Path(cfg.output).write_text(long)
        Path(summary_path(cfg.output)).write_text(summ)
    return EXIT_OK


def run_classify(cfg: RunConfig) -> int:
    st = cfg.build()
    fld = fundamental_solution(st.eq, cfg.samples(st.eq), parallel=cfg.parallel)
    cert = stability.classify(st.eq, margin=cfg.margin, fld=fld)
    _Sink(cfg.output).write(cert.to_text())
    return EXIT_OK


def run_verify_example(name: str, params: dict | None = None) -> int:
    checks = verify_example(name, params)
    for c in checks:
        sys.stdout.write(f"{'PASS' if c.passed else 'FAIL'} {name}: {c.name} ({c.detail})\n")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_NUMERIC


def run_list_examples() -> int:
    for name, pr in PRESETS.items():
        params = ", ".join(f"{k}={v:g}" for k, v in pr.defaults.items())
        sys.stdout.write(f"{name}\t{pr.summary}" + (f"\t[{params}]" if params else "") + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tsdde", description="Delay dynamic equations on time scales.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file")
    common.add_argument("--preset", help="registered example to use as the equation")
    common.add_argument("--horizon", type=float)
    common.add_argument("--step", type=float, help="maximum grid step h_max")
    common.add_argument("--s-samples", dest="s_samples", help="count or comma-separated start times")
    common.add_argument("--out", help="output path (default: standard output)")
    common.add_argument("--parallel", type=int)
    common.add_argument("--margin", type=float)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a configuration key")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("simulate", "fundamental", "classify"):
        sub.add_parser(name, parents=[common])
    ve = sub.add_parser("verify-example", parents=[common])
    ve.add_argument("name")
    sub.add_parser("list-examples")
    return ap


def config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if args.preset:
        cfg.preset = args.preset
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        apply(cfg, k.strip(), v)
    if args.horizon is not None:
        cfg.horizon = args.horizon
    if args.step is not None:
        cfg.h_max = args.step
    if args.s_samples is not None:
        apply(cfg, "s_samples", args.s_samples)
    if args.out is not None:
        cfg.output = args.out
    if args.parallel is not None:
        cfg.parallel = args.parallel
    if args.margin is not None:
        cfg.margin = args.margin
    return cfg


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if args.command == "list-examples":
                return run_list_examples()
            cfg = config_from_args(args)
            if args.command == "verify-example":
                return run_verify_example(args.name, cfg.params)
            runner = {"simulate": run_simulate, "fundamental": run_fundamental, "classify": run_classify}[args.command]
            return runner(cfg)
    except _CONFIG_ERRORS as exc:
        _report(exc)
        return EXIT_CONFIG
    except TsddeError as exc:
        _report(exc)
        return EXIT_NUMERIC
    except (ArithmeticError, FloatingPointError) as exc:
        sys.stderr.write(f"ERROR NumericFailure: {' '.join(str(exc).split())}\n")
        return EXIT_NUMERIC


def _report(exc: TsddeError) -> None:
    msg = " ".join(str(exc).split())
    sys.stderr.write(f"ERROR {exc.code}: {msg}\n")


if __name__ == "__main__":
    sys.exit(main())
