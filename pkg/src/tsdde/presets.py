"""Registered example equations with their reproduction checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from . import stability as st
from .engine import DelayEquation, History, fundamental_solution, solve_ivp
from .errors import UnknownExample
from .expr import parse
from .timescale import integers, p11, reals, sinhcosh, z_mod3


@dataclass
class Setup:
    eq: DelayEquation
    history: History
    s: float


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class Preset:
    name: str
    summary: str
    defaults: dict
    build: Callable[..., Setup]
    checks: Callable[[dict], list[Check]]
    horizon: float
    h_max: float
    extra: dict = field(default_factory=dict)

    def params(self, overrides: dict | None = None) -> dict:
        out = dict(self.defaults)
        for k, v in (overrides or {}).items():
            if k not in out:
                raise UnknownExample(f"preset {self.name} has no parameter {k!r}")
            out[k] = float(v)
        return out

    def setup(self, overrides: dict | None = None, horizon: float | None = None, h_max: float | None = None) -> Setup:
        return self.build(self.params(overrides), horizon or self.horizon, h_max or self.h_max)


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


# -- x' + x(alpha) = 0 on the unit-gap scale, alpha = -1 at the jumps --------------

EX21_ALPHA = "if scattered(t) then -1 else t"


def closed_form_2_1(k: int, x0: float = 0.0) -> float:
    """x(2k) for x(0) = x0 and x = -1 on [-2, -1]."""
    e = math.e
    return math.exp(-k) * x0 + e / (e - 1) * (1 - math.exp(-k))


def _build_2_1(p, horizon, h_max):
    ts = p11(-2.0, horizon)
    eq = DelayEquation(ts, "1", EX21_ALPHA, t0=0.0, h_max=h_max)
    return Setup(eq, History(x0=0.0, phi="-1"), 0.0)


def _checks_2_1(p):
    out = []
    s = _build_2_1(p, 60.0, 1e-3)
    x = solve_ivp(s.eq, s.s, s.history)
    for k in (10, 20, 30):
        err = abs(float(x(2.0 * k)) - closed_form_2_1(k))
        out.append(Check(f"x({2 * k}) closed form", err <= 1e-9, f"error {err:.3g}"))
    eq = _build_2_1(p, 60.0, 0.01).eq
    fld = fundamental_solution(eq)
    cert = st.classify(eq, fld=fld)
    chi_k = cert.report("chi_K")
    out.append(Check("unweighted indicator integral divergent", not chi_k.satisfied, f"value {_fmt(chi_k.value)}"))
    out.append(Check("verdict Inconclusive", cert.verdict == st.INCONCLUSIVE, cert.verdict))
    H = eq.grid.points[-1]
    early = [j for j, s_ in enumerate(fld.s_values) if s_ <= H / 2]
    last = float(np.max(np.abs(fld.X[-1, early])))
    out.append(Check("X(H, s) has decayed for s <= H/2", last < 1e-3, f"max |X(H,s)| {last:.3g}"))
    return out


# -- unbounded coefficient on the unit-gap scale -------------------------------------

EX51_A = "if scattered(t) then {a} else {a}*4^floor(t)"
EX51_ALPHA = "t - (frac(t)*(1 - frac(t)))^floor(t)"


def _build_5_1(p, horizon, h_max):
    a = EX51_A.format(a=repr(p["a"]))
    ts = p11(0.0, horizon)
    return Setup(DelayEquation(ts, a, EX51_ALPHA, t0=1.0, h_max=h_max), History(), 1.0)


def _checks_5_1(p):
    out = []
    for a in sorted({p["a"], 1.0}):
        eq = _build_5_1({"a": a}, 40.0, 0.01).eq
        strict = st.strict_condition_A1(eq)
        out.append(Check(f"a={a:g} strict sup equals a", abs(strict.value - a) <= 1e-6, f"sup {_fmt(strict.value)}"))
        cert = st.classify(eq)
        want = st.UES if a < 1 else st.US
        out.append(Check(f"a={a:g} verdict", cert.verdict == want, f"{cert.verdict} via {cert.route}"))
        if a < 1 and cert.lambda1 is not None:
            rel = abs(cert.lambda1 - cert.lambda0 * a) / (cert.lambda0 * a)
            out.append(Check(f"a={a:g} fitted lambda1 = lambda0 a", rel <= 1e-6, f"lambda1 {_fmt(cert.lambda1)}"))
    return out


# -- segments [sinh n, cosh n] ---------------------------------------------------------

_N = "floor(ln(t + sqrt(t^2 + 1)) + 1e-9)"
EX52_ALPHA = f"t - (cosh({_N}) - t)*(t - sinh({_N}))/(cosh({_N}) - sinh({_N}))"
EX52_A = "if scattered(t) then {a}/mu(t) else {a}"


def _build_5_2(p, horizon, h_max):
    a = EX52_A.format(a=repr(p["a"]))
    ts = sinhcosh(1, horizon)
    return Setup(DelayEquation(ts, a, EX52_ALPHA, t0=math.sinh(1.0), h_max=h_max), History(), math.sinh(1.0))


def max_lag_on_segment(n: int) -> float:
    """Maximum of t - alpha(t) over [sinh n, cosh n]."""
    al = parse(EX52_ALPHA)
    lo, hi = math.sinh(n), math.cosh(n)
    f = lambda t: -(t - float(al.evaluate(t)))
    r = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * hi})
    return -float(r.fun)


def _checks_5_2(p):
    out = []
    for n in range(1, 6):
        m = max_lag_on_segment(n)
        want = 1 / (4 * math.exp(n))
        out.append(Check(f"segment {n} max lag", abs(m - want) <= 1e-8, f"{_fmt(m)} vs {_fmt(want)}"))
    eq = _build_5_2(p, math.cosh(6.0), 0.05).eq
    cert = st.classify(eq)
    out.append(Check("verdict GloballyAsymptoticallyStable", cert.verdict == st.GAS, f"{cert.verdict} via {cert.route}"))
    return out


# -- integers without multiples of 3, alpha = rho^2 ---------------------------------------

EX53_A = "if frac(t/3) < 0.5 then {a} else {b}"


def _build_5_3(p, horizon, h_max):
    a = EX53_A.format(a=repr(p["a"]), b=repr(p["b"]))
    ts = z_mod3(-2.0, horizon)
    return Setup(DelayEquation(ts, a, "rho2(t)", t0=1.0, h_max=h_max), History(), 1.0)


def _checks_5_3(p):
    out = []
    a, b = p["a"], p["b"]
    eq = _build_5_3(p, 100.0, 1.0).eq
    t, w = st.window_integrals(eq, "strict_A2")
    # windows reaching below t0 are cut there
    inside = eq.astar[eq.grid.index_of(t[0]) :][: t.size] >= eq.t0
    dev = float(np.max(np.abs(w[inside] - (a + 2 * b))))
    out.append(Check("window integral is a + 2b on every full window", dev <= 1e-12, f"max deviation {dev:.3g}"))
    fld = fundamental_solution(eq, [1.0])
    cert = st.classify(eq, fld=fld)
    want = st.UES if a + 2 * b < 1 else None
    out.append(Check("verdict", want is None or cert.verdict == want, f"{cert.verdict} via {cert.route}"))
    if cert.lambda0 is not None and cert.route in ("T4.1", "T4.2", "C4.1"):
        L = st.log_exp_prefix(eq, "neg", cert.lambda0)
        X = np.abs(fld.column(1.0).values)
        env = cert.M0 * np.exp(L[eq.i0 :] - L[eq.i0])
        ok = bool(np.all(X <= env * (1 + 1e-9)))
        out.append(Check("|X(t,1)| <= M0 e_{-lambda0 A}(t,1)", ok, f"max ratio {_fmt(np.max(X / env))}"))
    return out


# -- constant coefficient and delay on the reals -------------------------------------------


def _build_r_const(p, horizon, h_max):
    tau = p["tau"]
    ts = reals(-tau, horizon)
    return Setup(DelayEquation(ts, repr(p["a"]), f"t - {tau!r}", t0=0.0, h_max=h_max), History(), 0.0)


def _checks_r_const(p):
    out = []
    eq = _build_r_const(p, 40.0, 0.01).eq
    k0 = st.compute_K0(eq)
    want = p["a"] * p["tau"]
    out.append(Check("K0 = a tau", abs(k0.value - want) <= 1e-9, f"{_fmt(k0.value)}"))
    fld = fundamental_solution(eq)
    sup = float(np.max(fld.max_abs()))
    if want <= 1:
        out.append(Check("sup |X| <= 1", sup <= 1 + 1e-6, f"{_fmt(sup)}"))
    cert = st.classify(eq, fld=fld)
    if want < 1:
        out.append(Check("verdict exponential", cert.verdict == st.UES, f"{cert.verdict} via {cert.route}"))
    return out


# -- pantograph equation ---------------------------------------------------------------------


def _build_pantograph(p, horizon, h_max):
    eq = st.pantograph_transform(f"{p['a']!r}/t", p["theta"], horizon, h_max=h_max)
    return Setup(eq, History(), 0.0)


def _checks_pantograph(p):
    out = []
    a, theta = p["a"], p["theta"]
    eq = _build_pantograph(p, 100.0, 0.01).eq
    strict = st.strict_condition_A2(eq)
    want = a * math.log(1 / theta)
    out.append(Check("strict value a ln(1/theta)", abs(strict.value - want) <= 1e-6, f"{_fmt(strict.value)} vs {_fmt(want)}"))
    fld = fundamental_solution(eq)
    cert = st.classify(eq, fld=fld)
    out.append(Check("transformed verdict exponential", cert.verdict == st.UES, f"{cert.verdict} via {cert.route}"))
    if cert.verdict == st.UES:
        M, lam = st.pantograph_envelope(cert)
        worst = pantograph_worst_ratio(eq, fld, M, lam, 100.0)
        out.append(Check("|X(t,s)| <= M (t/s)^-lambda for t/s <= 100", worst <= 1 + 1e-9, f"M {_fmt(M)} lambda {_fmt(lam)} worst ratio {_fmt(worst)}"))
    return out


def pantograph_worst_ratio(eq: DelayEquation, fld, M: float, lam: float, max_ratio: float) -> float:
    """max |X| / (M (t/s)^-lam) over the pulled-back samples with t/s <= max_ratio."""
    u = eq.grid.points
    worst = 0.0
    for j, s in enumerate(fld.s_values):
        k = fld.start_idx[j]
        uu = u[k:]
        keep = np.exp(uu - s) <= max_ratio * (1 + 1e-12)
        X = np.abs(fld.X[k:, j][keep])
        bound = M * np.exp(-lam * (uu[keep] - s))
        worst = max(worst, float(np.max(X / bound)))
    return worst


# -- two-step recurrence ------------------------------------------------------------------


def _build_sharpness(p, horizon, h_max):
    ts = integers(-1.0, horizon)
    eq = DelayEquation(ts, f"{p['a']!r}/mu(t)", "rho(t)", t0=0.0, h_max=1.0)
    return Setup(eq, History(x0=1.0, phi="1"), 0.0)


def recurrence_peak(a: float, steps: int = 10_000) -> float:
    """max |x_n| for x_{n+1} = x_n - a x_{n-1}, x_{-1} = x_0 = 1, simulated as a delay equation on the integers."""
    s = _build_sharpness({"a": a}, float(steps), 1.0)
    x = solve_ivp(s.eq, s.s, s.history)
    return float(np.max(np.abs(x.values)))


def _checks_sharpness(p):
    out = []
    for a in (0.99, 1.0, 1.05):
        e = st.eigen_sharpness(a)
        peak = recurrence_peak(a)
        if a <= 1:
            ok = e["stable"] and peak <= 10
        else:
            ok = (not e["stable"]) and peak > 1e3
        out.append(Check(f"a={a:g}", ok, f"modulus {_fmt(e['modulus'])}, peak |x| {_fmt(peak)}"))
    return out


PRESETS: dict[str, Preset] = {
    "example_2_1": Preset(
        "example_2_1", "x + x(alpha) on the unit-gap scale; attraction fails though X decays",
        {}, _build_2_1, _checks_2_1, 60.0, 1e-3,
    ),
    "example_5_1": Preset(
        "example_5_1", "unbounded coefficient on the unit-gap scale, (A1) route",
        {"a": 0.5}, _build_5_1, _checks_5_1, 40.0, 0.01,
    ),
    "example_5_2": Preset(
        "example_5_2", "segments [sinh n, cosh n]; asymptotic but not exponential",
        {"a": 0.5}, _build_5_2, _checks_5_2, math.cosh(6.0), 0.05,
    ),
    "example_5_3": Preset(
        "example_5_3", "integers without multiples of 3, alpha = rho^2, (A2) route",
        {"a": 0.375, "b": 0.25}, _build_5_3, _checks_5_3, 100.0, 1.0,
    ),
    "r_const": Preset(
        "r_const", "constant coefficient and delay on the reals",
        {"a": 0.3, "tau": 3.0}, _build_r_const, _checks_r_const, 40.0, 0.01,
    ),
    "pantograph": Preset(
        "pantograph", "x'(t) + (a/t) x(theta t) = 0 through the logarithmic substitution",
        {"a": 0.6 / math.log(2.0), "theta": 0.5}, _build_pantograph, _checks_pantograph, 100.0, 0.01,
    ),
    "eigen_sharpness": Preset(
        "eigen_sharpness", "x_{n+1} = x_n - a x_{n-1}: bounded iff a <= 1",
        {"a": 1.0}, _build_sharpness, _checks_sharpness, 10_000.0, 1.0,
    ),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise UnknownExample(f"unknown example {name!r}; known: {', '.join(PRESETS)}") from None


def verify_example(name: str, overrides: dict | None = None) -> list[Check]:
    pr = get_preset(name)
    return pr.checks(pr.params(overrides))
