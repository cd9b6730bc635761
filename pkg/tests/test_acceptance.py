"""End-to-end acceptance criteria; each prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines, or as a
script: ``python tests/test_acceptance.py``.
"""

import io
import math
import sys
import time
import warnings
from contextlib import redirect_stdout

import numpy as np
import pytest

import tsdde.stability as st
from tsdde import cli
from tsdde.config import RunConfig
from tsdde.engine import DelayEquation, History, fundamental_solution, solve_ivp, variation_of_parameters
from tsdde.presets import closed_form_2_1, get_preset, max_lag_on_segment, pantograph_worst_ratio, recurrence_peak
from tsdde.timescale import DenseInterval, GridFunction, IsolatedPoint, TimeScale, build_grid, h_integers, integers, isolated, p11, q_scale, reals, z_mod3
from tsdde.tsexp import circle_plus, exp_fn

SEED = 20261019


def report(n: int, title: str, ok: bool, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {title} ({detail})")
    return ok


# -- 1 ---------------------------------------------------------------------------------


def criterion_1() -> bool:
    t = time.perf_counter()
    s = get_preset("example_2_1").setup(horizon=60.0, h_max=1e-3)
    x = solve_ivp(s.eq, s.s, s.history)
    errs = [abs(float(x(2.0 * k)) - closed_form_2_1(k)) for k in (10, 20, 30)]
    dt = time.perf_counter() - t
    return report(1, "unit-gap closed form x(2k)", max(errs) <= 1e-9 and dt < 5, f"max error {max(errs):.2e}, {dt:.2f} s")


# -- 2 ---------------------------------------------------------------------------------


def criterion_2() -> bool:
    t = time.perf_counter()
    pr = get_preset("example_5_1")
    parts, ok = [], True
    for a, want in ((0.5, st.UES), (1.0, st.US)):
        eq = pr.setup({"a": a}, horizon=40.0).eq
        sup = st.strict_condition_A1(eq).value
        cert = st.classify(eq)
        ok &= abs(sup - a) <= 1e-6 and cert.verdict == want
        parts.append(f"a={a:g}: sup {sup:.9g}, {cert.verdict}")
    dt = time.perf_counter() - t
    ok &= dt < 10
    return report(2, "unbounded coefficient on the unit-gap scale", ok, "; ".join(parts) + f"; {dt:.2f} s")


# -- 3 ---------------------------------------------------------------------------------


def criterion_3() -> bool:
    devs = [abs(max_lag_on_segment(n) - 1 / (4 * math.e**n)) for n in range(1, 6)]
    cert = st.classify(get_preset("example_5_2").setup({"a": 0.5}).eq)
    ok = max(devs) <= 1e-8 and cert.verdict == st.GAS
    return report(3, "segments [sinh n, cosh n]", ok, f"max lag deviation {max(devs):.2e}; {cert.verdict}")


# -- 4 ---------------------------------------------------------------------------------


def criterion_4() -> bool:
    a, b = 3 / 8, 1 / 4
    eq = get_preset("example_5_3").setup({"a": a, "b": b}, horizon=100.0).eq
    t, w = st.window_integrals(eq, "strict_A2")
    full = eq.astar[eq.grid.index_of(t[0]) :][: t.size] >= eq.t0
    dev = float(np.max(np.abs(w[full] - (a + 2 * b))))
    fld = fundamental_solution(eq, [1.0])
    cert = st.classify(eq, fld=fld)
    ratio = math.inf
    if cert.lambda0 is not None:
        L = st.log_exp_prefix(eq, "neg", cert.lambda0)
        env = cert.M0 * np.exp(L[eq.i0 :] - L[eq.i0])
        ratio = float(np.max(np.abs(fld.column(1.0).values) / env))
    ok = dev == 0.0 and cert.verdict == st.UES and ratio <= 1 + 1e-9
    return report(4, "integers without multiples of 3", ok, f"window deviation {dev:g}; {cert.verdict}; envelope ratio {ratio:.9f}")


# -- 5 ---------------------------------------------------------------------------------


def criterion_5() -> bool:
    p1, p2 = recurrence_peak(1.0, 10_000), recurrence_peak(1.05, 10_000)
    return report(5, "two-step recurrence threshold", p1 <= 10 and p2 > 1e3, f"a=1 peak {p1:.4g}; a=1.05 peak {p2:.4g}")


# -- 6 ---------------------------------------------------------------------------------


def _random_scale(rng) -> TimeScale:
    segs, t = [], float(rng.uniform(-5, 5))
    for _ in range(int(rng.integers(1, 7))):
        if rng.random() < 0.5:
            length = float(rng.uniform(0.1, 3.0))
            segs.append(DenseInterval(t, t + length))
            t += length
        else:
            segs.append(IsolatedPoint(t))
        t += float(rng.uniform(0.05, 2.0))
    segs.append(IsolatedPoint(t))
    return TimeScale(segs)


def criterion_6() -> bool:
    rng = np.random.default_rng(SEED)
    worst_closed = 0.0
    for h in (0.5, 1.0, 2.0):
        ts = h_integers(h, 0, 40)
        g = build_grid(ts, h)
        fn = lambda t: 0.4 * np.cos(t)
        f = GridFunction(g, fn(g.points))
        for n in range(1, int(40 / h) + 1):
            want = math.prod(1 + h * fn(h * k) for k in range(n))
            worst_closed = max(worst_closed, abs(exp_fn(ts, f, 0, n * h) / want - 1))
    ts = q_scale(2.0, 1, 2**12)
    g = build_grid(ts, 1.0)
    fn = lambda t: np.cos(t) / (2 * t)
    f = GridFunction(g, fn(g.points))
    for n in range(1, 13):
        want = math.prod(1 + 2.0**k * fn(2.0**k) for k in range(n))
        worst_closed = max(worst_closed, abs(exp_fn(ts, f, 1, 2.0**n) / want - 1))

    worst_alg = 0.0
    for _ in range(1000):
        ts = _random_scale(rng)
        g = build_grid(ts, 0.2)
        mu = g.mu
        c, d = rng.uniform(-0.4, 0.8, 2)
        fv = c + 0.3 * np.sin(g.points)
        gv = d * np.cos(g.points)
        floor = (0.05 - 1) / np.where(mu > 0, mu, 1)
        fv = np.where(1 + mu * fv <= 0.05, floor, fv)
        gv = np.where(1 + mu * gv <= 0.05, floor, gv)
        f, gg = GridFunction(g, fv), GridFunction(g, gv)
        fg = GridFunction(g, circle_plus(fv, gv, mu), left_values=fv + gv)
        r, s, t = np.sort(g.points[rng.integers(0, len(g.points), 3)])
        semi = abs(exp_fn(ts, f, s, t) * exp_fn(ts, f, r, s) / exp_fn(ts, f, r, t) - 1)
        prod = abs(exp_fn(ts, f, r, t) * exp_fn(ts, gg, r, t) / exp_fn(ts, fg, r, t) - 1)
        worst_alg = max(worst_alg, semi, prod)
    ok = worst_closed <= 1e-12 and worst_alg <= 1e-10
    return report(6, "exponential closed products and algebra", ok, f"closed-form rel {worst_closed:.2e}; semigroup/product rel {worst_alg:.2e} over 1000 cases")


# -- 7 ---------------------------------------------------------------------------------

H_VOP = 1 / 256


def _vop_instance(rng, kind):
    c0, c1, c2 = rng.uniform(0.1, 0.8), rng.uniform(0, 0.5), rng.uniform(0.1, 1)
    A = f"{c0!r} + {c1!r}*exp(-{c2!r}*t)"
    t0 = 0.0
    if kind == "reals":
        # breakpoints of a constant delay that is a multiple of the step fall on grid points
        tau = int(rng.integers(32, 257)) * H_VOP
        ts, alpha = reals(-tau, 3.0), f"t - {tau!r}"
    elif kind == "isolated":
        pts = np.round(np.cumsum(rng.uniform(0.1, 1.0, int(rng.integers(15, 40)))) - 2.0, 6)
        ts, alpha = isolated(sorted(set(pts.tolist()))), str(rng.choice(["rho(t)", "rho2(t)"]))
        t0 = float(ts.points_between(-10, 100)[2])
    else:
        ts, alpha = p11(-2, 6.0), str(rng.choice(["if scattered(t) then t-2 else t", "if scattered(t) then t-1 else t"]))
    d0, d1 = (float(v) for v in rng.uniform(-1, 1, 2))
    hist = History(float(rng.uniform(-1, 1)), f"{d0!r} + {d1!r}*exp(t)")
    forcing = f"{rng.uniform(-0.5, 0.5)!r}*exp(-{rng.uniform(0, 1)!r}*t)"
    return DelayEquation(ts, A, alpha, t0=t0, h_max=H_VOP), hist, forcing


def criterion_7() -> bool:
    rng = np.random.default_rng(SEED + 7)
    worst = 0.0
    for i in range(50):
        eq, hist, f = _vop_instance(rng, ("reals", "isolated", "p11")[i % 3])
        x = solve_ivp(eq, eq.t0, hist, forcing=f)
        y = variation_of_parameters(eq, eq.t0, hist, forcing=f)
        worst = max(worst, float(np.max(np.abs(x.values - y.values)) / (1 + np.max(np.abs(x.values)))))
    return report(7, "representation formula equals direct solution", worst <= 1e-8, f"worst scaled gap {worst:.2e} over 50 instances")


# -- 8 and 9 ---------------------------------------------------------------------------------

_CONDITIONS = {
    ("A1", "strict"): st.strict_condition_A1,
    ("A1", "weak"): st.weak_condition_A1,
    ("A2", "strict"): st.strict_condition_A2,
    ("A2", "weak"): st.weak_condition_A2,
}


def _random_family(rng):
    """Equation builder k -> equation with coefficient k times a random positive shape."""
    kind = rng.choice(["reals", "isolated", "p11", "integers", "zmod3"])
    c0, c1, c2 = rng.uniform(0.2, 1.0), rng.uniform(0, 0.5), rng.uniform(0.1, 1.0)
    shape = f"({c0!r} + {c1!r}*exp(-{c2!r}*t))"
    t0 = 0.0
    if kind == "reals":
        tau = float(rng.uniform(0.3, 2.0))
        ts, alpha, h = reals(-tau, 15.0), f"t - {tau!r}", 0.02
    elif kind == "isolated":
        pts = np.cumsum(rng.uniform(0.1, 1.0, 40)) - 2.0
        ts, alpha, h = isolated(pts.tolist()), str(rng.choice(["rho(t)", "rho2(t)"])), 1.0
        t0 = float(pts[2])
    elif kind == "p11":
        ts, h = p11(-2, 15.0), 0.05
        alpha = str(rng.choice(["if scattered(t) then t-2 else t", "if scattered(t) then t-1 else t-0.5"]))
    elif kind == "integers":
        ts, alpha, h = integers(-3, 30), str(rng.choice(["rho(t)", "rho2(t)", "t-3"])), 1.0
    else:
        ts, alpha, t0, h = z_mod3(-2, 30), "rho2(t)", 1.0, 1.0
    return lambda k: DelayEquation(ts, f"{k!r}*{shape}", alpha, t0=t0, h_max=h)


def _draw(rng, route, cond, target):
    """Random equation meeting the route's delay assumption, scaled so the condition value is `target`."""
    check = st.check_A1 if route == "A1" else st.check_A2
    fn = _CONDITIONS[route, cond]
    while True:
        make = _random_family(rng)
        eq = make(1.0)
        if not check(eq).satisfied:
            continue
        v = fn(eq).value
        if not (np.isfinite(v) and v > 0):
            continue
        eq = make(target / v)
        if route == "A2" and not st.is_minus_A_positively_regressive(eq):
            continue
        rep = fn(eq)
        if rep.satisfied if cond == "strict" else rep.value <= 1 + 1e-12:
            return eq


def criterion_8() -> bool:
    rng = np.random.default_rng(SEED + 8)
    worst_gap, worst_res = -math.inf, 0.0
    for route in ("A1", "A2"):
        find = st.find_lambda0_A1 if route == "A1" else st.find_lambda0_A2
        phi = st.phi_A1 if route == "A1" else st.phi_A2
        sides = st.lemma_inequality_A1 if route == "A1" else st.lemma_inequality_A2
        for _ in range(25):
            eq = _draw(rng, route, "strict", float(rng.uniform(0.2, 0.95)))
            nu0 = st.select_nu0(_CONDITIONS[route, "strict"](eq).value)
            lam = find(nu0)
            worst_res = max(worst_res, abs(phi(lam, nu0)))
            _, lhs, rhs = sides(eq, lam)
            worst_gap = max(worst_gap, float(np.max(lhs - rhs)))
    ok = worst_gap <= 0.0 and worst_res <= 1e-12
    return report(8, "technical inequalities with constructed constants", ok, f"max lhs - rhs {worst_gap:.3g}; phi residual {worst_res:.2e}; 25 + 25 equations")


def criterion_9() -> bool:
    rng = np.random.default_rng(SEED + 9)
    sup = 0.0
    for i in range(50):
        route = "A1" if i % 2 == 0 else "A2"
        target = 1.0 if i % 5 == 0 else float(rng.uniform(0.5, 1.0))
        eq = _draw(rng, route, "weak", target)
        sup = max(sup, float(np.max(np.abs(fundamental_solution(eq).X))))
    return report(9, "weak condition bounds the fundamental solution", sup <= 1 + 1e-6, f"sup |X| {sup:.12g} over 50 equations")


# -- 10 ---------------------------------------------------------------------------------------


def criterion_10() -> bool:
    eq = get_preset("pantograph").setup({"a": 0.6 / math.log(2), "theta": 0.5}).eq
    fld = fundamental_solution(eq)
    cert = st.classify(eq, fld=fld)
    if cert.verdict != st.UES:
        return report(10, "pantograph power-law bound", False, cert.verdict)
    M, lam = st.pantograph_envelope(cert)
    worst = pantograph_worst_ratio(eq, fld, M, lam, 100.0)
    return report(10, "pantograph power-law bound", worst <= 1.0, f"M {M:.6g}, lambda {lam:.6g}, worst ratio {worst:.6f}")


# -- 11 ---------------------------------------------------------------------------------------


def criterion_11() -> bool:
    def run(h):
        eq = DelayEquation(reals(-3, 30), "0.3", "t-3", t0=0, h_max=h)
        return solve_ivp(eq, 0, History(1.0, "1"))

    h = 0.5
    ref = run(h / 8)
    t = np.linspace(0, 30, 61)
    e1 = float(np.max(np.abs(run(h)(t) - ref(t))))
    e2 = float(np.max(np.abs(run(h / 2)(t) - ref(t))))
    ratio = e1 / e2
    return report(11, "fourth-order convergence", 8 <= ratio <= 32, f"error ratio {ratio:.3f}")


# -- 12 ---------------------------------------------------------------------------------------


def criterion_12() -> bool:
    cfg = RunConfig(preset="example_2_1")
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli.run_classify(cfg)
    kv = st.parse_certificate(buf.getvalue())
    eq = get_preset("example_2_1").setup(h_max=0.01).eq
    fld = fundamental_solution(eq)
    H = eq.grid.points[-1]
    early = [j for j, s in enumerate(fld.s_values) if s <= H / 2]
    tail = float(np.max(np.abs(fld.X[-1, early])))
    ok = code == 0 and kv["report.chi_K.satisfied"] == "false" and kv["verdict"] == st.INCONCLUSIVE and tail < 1e-3
    return report(12, "decay without attraction is Inconclusive", ok, f"verdict {kv['verdict']}, chi_K satisfied {kv['report.chi_K.satisfied']}, max |X(H,s)| {tail:.2e}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12]


@pytest.mark.parametrize("crit", CRITERIA, ids=[f"criterion_{k}" for k in range(1, 13)])
def test_criterion(crit):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert crit()


if __name__ == "__main__":
    warnings.simplefilter("ignore")
    results = [c() for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
