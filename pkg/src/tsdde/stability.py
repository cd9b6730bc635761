"""Explicit stability conditions, the lambda0/nu0/M0 construction, and verdicts.

Every supremum and every integral to infinity is evaluated on the working
horizon of the equation grid.  Finiteness and divergence are decided by how
the quantity behaves over the tail of the horizon, and each report carries
the horizon it was computed on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .engine import DelayEquation, FundamentalField, fundamental_solution
from .errors import BadTheta, NoBracket, NotRegressive, NotStrict
from .expr import parse
from .timescale import GridFunction, TimeScale, build_grid, reals
from .tsexp import LogExp

US = "UniformlyStable"
GAS = "GloballyAsymptoticallyStable"
UES = "UniformlyExponentiallyStable"
INCONCLUSIVE = "Inconclusive"
_RANK = {INCONCLUSIVE: 0, US: 1, GAS: 2, UES: 3}

TAIL_FRACTION = 0.75
GROWTH_TOL = 1e-3
LAMBDA_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))


@dataclass(frozen=True)
class ConditionReport:
    name: str
    satisfied: bool
    value: float
    attained_at: float
    horizon: float


@dataclass
class StabilityCertificate:
    verdict: str
    route: str | None
    reports: list[ConditionReport]
    nu0: float | None
    lambda0: float | None
    M0: float | None
    lambda1: float | None
    M1: float | None
    horizon: float
    numeric_validation: dict = field(default_factory=dict)
    margin: float = 0.0

    def report(self, name: str) -> ConditionReport:
        for r in self.reports:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_text(self) -> str:
        """Flat ``key = value`` document with a fixed key order."""
        lines = []

        def put(key, v):
            if v is None:
                s = "none"
            elif isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, float):
                s = format(v, ".17g")
            else:
                s = str(v)
            lines.append(f"{key} = {s}")

        put("verdict", self.verdict)
        put("route", self.route)
        put("horizon", float(self.horizon))
        put("margin", float(self.margin))
        put("nu0", self.nu0)
        put("lambda0", self.lambda0)
        put("M0", self.M0)
        put("lambda1", self.lambda1)
        put("M1", self.M1)
        for k in sorted(self.numeric_validation):
            v = self.numeric_validation[k]
            put(f"numeric_validation.{k}", float(v) if isinstance(v, (int, float, np.floating)) and not isinstance(v, bool) else v)
        for r in self.reports:
            put(f"report.{r.name}.satisfied", bool(r.satisfied))
            put(f"report.{r.name}.value", float(r.value))
            put(f"report.{r.name}.attained_at", float(r.attained_at))
            put(f"report.{r.name}.horizon", float(r.horizon))
        return "\n".join(lines) + "\n"


def parse_certificate(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


# -- quadrature on the equation grid ------------------------------------------

_I = (
    lambda th: 2 * th**3 / 3 - 1.5 * th**2 + th,
    lambda th: -4 * th**3 / 3 + 2 * th**2,
    lambda th: 2 * th**3 / 3 - th**2 / 2,
)


_DIRECT_SPAN = 64


class _Quad3:
    """Delta-integral of a function given at grid points, dense midpoints and left limits.

    Dense cells use the quadratic through the three samples (Simpson),
    scattered cells contribute mu*g.  Samples before t0 count as zero.
    """

    def __init__(self, eq: DelayEquation, pt, mid, end):
        g = eq.grid
        self.eq = eq
        self.p = g.points
        self.pt = np.nan_to_num(np.asarray(pt, dtype=float))
        self.mid = np.nan_to_num(np.asarray(mid, dtype=float))
        self.end = np.nan_to_num(np.asarray(end, dtype=float))
        h = np.diff(self.p)
        dense = h / 6 * (self.pt[:-1] + 4 * self.mid + self.end[1:])
        self.cells = np.where(g.scattered[:-1], g.mu[:-1] * self.pt[:-1], dense)
        self.cells[: eq.i0] = 0.0
        self.prefix = np.concatenate([[0.0], np.cumsum(self.cells)])

    def partial(self, j, th_lo, th_hi):
        h = self.p[j + 1] - self.p[j]
        out = 0.0
        for g, f in zip((self.pt[j], self.mid[j], self.end[j + 1]), _I):
            out = out + g * (f(th_hi) - f(th_lo))
        return h * out

    def _locate(self, x):
        p = self.p
        tol = self.eq.tol
        j = np.clip(np.searchsorted(p, x + tol, side="right") - 1, 0, len(p) - 1)
        inner = ((x - p[j]) > tol) & (j < len(p) - 1)
        th = np.zeros(x.shape)
        th[inner] = (x[inner] - p[j[inner]]) / (p[j[inner] + 1] - p[j[inner]])
        return j, th

    def between(self, lo, hi) -> np.ndarray:
        """Integral over [lo, hi] summed locally, so large integrals before lo do not cancel."""
        lo, hi = np.broadcast_arrays(np.atleast_1d(np.asarray(lo, dtype=float)), np.atleast_1d(np.asarray(hi, dtype=float)))
        lo = np.maximum(lo, self.eq.t0)
        hi = np.maximum(hi, lo)
        jl, tl = self._locate(lo)
        jh, th = self._locate(hi)
        out = np.zeros(lo.shape)
        same = (jl == jh) & (th > tl)
        if np.any(same):
            out[same] = self.partial(jl[same], tl[same], th[same])
        d = np.flatnonzero(jl != jh)
        if d.size:
            a, b = jl[d], jh[d]
            head = np.where(tl[d] > 0, self.partial(a, tl[d], 1.0), self.cells[a])
            tail = np.zeros(d.size)
            has = th[d] > 0
            if np.any(has):
                tail[has] = self.partial(b[has], 0.0, th[d][has])
            span = b - a - 1
            mid = np.where(span > _DIRECT_SPAN, self.prefix[b] - self.prefix[np.minimum(a + 1, b)], 0.0)
            short = span <= _DIRECT_SPAN
            for k in range(1, int(np.max(span[short], initial=0)) + 1):
                take = short & (a + k < b)
                mid[take] += self.cells[a[take] + k]
            out[d] = head + mid + tail
        return out

    def at(self, x) -> np.ndarray:
        """Integral from the first grid point to x; x inside dense cells is allowed."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = self.p
        tol = self.eq.tol
        x = np.maximum(x, self.eq.t0)
        j = np.clip(np.searchsorted(p, x + tol, side="right") - 1, 0, len(p) - 1)
        out = self.prefix[j].copy()
        off = (x - p[j]) > tol
        if np.any(off):
            jj = j[off]
            th = (x[off] - p[jj]) / (p[jj + 1] - p[jj])
            out[off] += self.partial(jj, 0.0, th)
        return out


def _A_quad(eq: DelayEquation) -> _Quad3:
    q = getattr(eq, "_A_quad", None)
    if q is None:
        q = _Quad3(eq, eq.A_pt, eq.A_mid, eq.A_end)
        eq._A_quad = q
    return q


def _horizon(eq: DelayEquation) -> float:
    return float(eq.grid.points[-1])


def tail_mark_index(eq: DelayEquation) -> int:
    """Largest grid index at or below the start of the tail window.

    The tail starts at t0 + 0.75 (H - t0), or earlier at the segment that
    begins the last quarter of the scale's segments when there are at least
    four of them (scales with fast-growing gaps).
    """
    p = eq.grid.points
    H = p[-1]
    mark = eq.t0 + TAIL_FRACTION * (H - eq.t0)
    ts = eq.ts
    lefts = [max(s.left, eq.t0) for s in ts.segments if s.right >= eq.t0 - eq.tol and s.left <= H + eq.tol]
    if len(lefts) >= 4:
        mark = min(mark, lefts[int(math.floor(TAIL_FRACTION * len(lefts)))])
    k = int(np.searchsorted(p, mark + eq.tol, side="right")) - 1
    return max(k, eq.i0)


# -- delay conditions ---------------------------------------------------------


def check_A1(eq: DelayEquation) -> ConditionReport:
    p = eq.grid.points
    idx = np.arange(eq.i0, len(p))
    gap = eq.al_pt[idx] - p[idx]
    k = int(np.argmax(gap))
    return ConditionReport("A1", bool(gap[k] <= eq.tol), float(gap[k]), float(p[idx[k]]), _horizon(eq))


def check_A2(eq: DelayEquation) -> ConditionReport:
    g = eq.grid
    p = g.points
    idx = np.arange(eq.i0, len(p) - 1)
    nxt = np.where(g.scattered[idx], idx + 1, idx)
    gap = eq.al_pt[nxt] - p[idx]
    if idx.size == 0:
        return ConditionReport("A2", True, 0.0, float(p[-1]), _horizon(eq))
    k = int(np.argmax(gap))
    return ConditionReport("A2", bool(gap[k] <= eq.tol), float(gap[k]), float(p[idx[k]]), _horizon(eq))


def _finite_sup(eq: DelayEquation, name: str, values: np.ndarray, s_idx: np.ndarray, capped: np.ndarray) -> ConditionReport:
    """Finite when the sup over uncapped windows stops growing.

    Growth compares the whole uncapped range with its first three quarters
    (cut further at the tail mark).  A capped window before the tail mark whose
    truncated value already exceeds the uncapped sup also counts as growth.
    """
    p = eq.grid.points
    mark = p[tail_mark_index(eq)]
    ok = ~capped
    if not np.any(ok):
        return ConditionReport(name, False, math.inf, float(p[s_idx[0]]), _horizon(eq))
    v = np.where(ok, values, -np.inf)
    k = int(np.argmax(v))
    total = float(v[k])
    last_ok = p[s_idx[ok][-1]]
    head_end = min(mark, eq.t0 + TAIL_FRACTION * (last_ok - eq.t0))
    head = ok & (p[s_idx] <= head_end + eq.tol)
    q = float(np.max(values[head])) if np.any(head) else total
    slack = GROWTH_TOL * max(1.0, abs(total))
    early = capped & (p[s_idx] <= mark + eq.tol)
    over = bool(np.any(values[early] > total + slack))
    finite = not over and total - q <= GROWTH_TOL * max(1.0, abs(q))
    return ConditionReport(name, bool(finite), total if finite else math.inf, float(p[s_idx[k]]), _horizon(eq))


def _alpha_inv_grid(eq: DelayEquation):
    p = eq.grid.points
    s_idx = np.arange(eq.i0, len(p))
    inv, capped = eq.alpha_inv_array(p[s_idx])
    return s_idx, inv, capped


def compute_K0(eq: DelayEquation) -> ConditionReport:
    """sup over s of the integral of A over [s, alpha_{-1}(s)]."""
    p = eq.grid.points
    s_idx, inv, capped = _alpha_inv_grid(eq)
    q = _A_quad(eq)
    vals = q.between(p[s_idx], inv)
    return _finite_sup(eq, "K0_finite", vals, s_idx, capped)


def compute_H0(eq: DelayEquation) -> ConditionReport:
    """sup over s of alpha_{-1}(s) - s."""
    p = eq.grid.points
    s_idx, inv, capped = _alpha_inv_grid(eq)
    return _finite_sup(eq, "H0_finite", inv - p[s_idx], s_idx, capped)


def _const_log_prefix(eq: DelayEquation, lam: float) -> np.ndarray:
    """log e_lam(p_k, t0) at every grid point (zero before t0)."""
    g = eq.grid
    h = np.diff(g.points)
    cell = np.where(g.scattered[:-1], np.log1p(lam * g.mu[:-1]), lam * h)
    cell[: eq.i0] = 0.0
    return np.concatenate([[0.0], np.cumsum(cell)])


def check_chi_conditions(eq: DelayEquation, lam: float = 1.0, max_s: int = 256) -> tuple[ConditionReport, ConditionReport]:
    """Indicator-weighted tails: sup_s of the integral over [s, H] of A(eta) [alpha(eta) < s],
    without and with the weight e_lam(sigma(eta), s).

    Each is declared finite when, for every s in the first half of the
    horizon, the part of the integral over the tail window is negligible.
    """
    g = eq.grid
    p = g.points
    n = len(p)
    H = p[-1]
    q = _A_quad(eq)
    cells = q.cells
    sc = g.scattered[:-1]
    al_cell = np.where(sc, eq.al_pt[:-1], eq.al_mid)
    C = _const_log_prefix(eq, lam)
    # weight position: sigma(eta) for jumps, the midpoint for dense cells
    cw = np.where(sc, C[1:], (C[:-1] + C[1:]) / 2)
    s_all = np.arange(eq.i0, n - 1)
    if s_all.size > max_s:
        s_all = s_all[np.unique(np.round(np.linspace(0, s_all.size - 1, max_s)).astype(int))]
    mark = tail_mark_index(eq)
    half = int(np.searchsorted(p, eq.t0 + 0.5 * (H - eq.t0) + eq.tol, side="right")) - 1
    out = []
    for name, weighted in (("chi_K", False), ("chi_H", True)):
        best, best_s, tail_max = -math.inf, p[eq.i0], 0.0
        for k in s_all:
            sel = slice(k, n - 1)
            ind = al_cell[sel] < p[k] - eq.tol
            contrib = cells[sel] * ind
            if weighted:
                with np.errstate(over="ignore"):
                    contrib = contrib * np.exp(cw[sel] - C[k])
            tot = float(np.sum(contrib))
            if tot > best:
                best, best_s = tot, p[k]
            if k <= half:
                tail = float(np.sum(contrib[max(mark - k, 0) :]))
                tail_max = max(tail_max, tail)
        finite = bool(np.isfinite(best) and tail_max <= GROWTH_TOL * max(1.0, abs(best)))
        out.append(ConditionReport(name, finite, best, float(best_s), float(H)))
    return out[0], out[1]


def window_integrals(eq: DelayEquation, kind: str) -> tuple[np.ndarray, np.ndarray]:
    """Grid times t and the window integral of A for each t.

    kind "strict_A1": [alpha_*(t), sigma(t)], "weak_A1": [alpha(t), sigma(t)],
    "strict_A2": [alpha_*(t), t], "weak_A2": [alpha(t), t].
    """
    t = _t_range(eq)
    lower = eq.astar[t] if kind.startswith("strict") else eq.al_pt[t]
    up = np.where(eq.grid.scattered[t], t + 1, t) if kind.endswith("A1") else t
    q = _A_quad(eq)
    return eq.grid.points[t], q.between(lower, eq.grid.points[up])


def _window_sup(eq: DelayEquation, name: str, kind: str, bound: float, strict: bool) -> ConditionReport:
    t, vals = window_integrals(eq, kind)
    k = int(np.argmax(vals))
    v = float(vals[k])
    ok = v < bound if strict else v <= bound
    return ConditionReport(name, bool(ok), v, float(t[k]), _horizon(eq))


def _t_range(eq: DelayEquation) -> np.ndarray:
    return np.arange(eq.i0, len(eq.grid.points) - 1)


def strict_condition_A1(eq: DelayEquation, margin: float = 0.0) -> ConditionReport:
    """sup of the integral of A over [alpha_*(t), sigma(t)]; needs < 1 - margin."""
    return _window_sup(eq, "L31_strict", "strict_A1", 1.0 - margin, True)


def weak_condition_A1(eq: DelayEquation) -> ConditionReport:
    """sup of the integral of A over [alpha(t), sigma(t)]; needs <= 1."""
    return _window_sup(eq, "L32_weak", "weak_A1", 1.0 + eq.tol, False)


def strict_condition_A2(eq: DelayEquation, margin: float = 0.0) -> ConditionReport:
    return _window_sup(eq, "L41_strict", "strict_A2", 1.0 - margin, True)


def weak_condition_A2(eq: DelayEquation) -> ConditionReport:
    return _window_sup(eq, "L42_weak", "weak_A2", 1.0 + eq.tol, False)


def check_divergence(eq: DelayEquation) -> ConditionReport:
    """Integral of A from t0 to the horizon, declared divergent when it still grows over the tail."""
    q = _A_quad(eq)
    mark = tail_mark_index(eq)
    total = float(q.prefix[-1])
    head = float(q.prefix[mark])
    growing = total - head > GROWTH_TOL * max(1.0, abs(head))
    return ConditionReport("divergence", bool(growing), total, _horizon(eq), _horizon(eq))


# -- lambda0, nu0, M0 ---------------------------------------------------------


def phi_A1(lam: float, nu0: float) -> float:
    return (1 - lam) / (1 + lam * nu0) - nu0 * math.exp(2 * lam * nu0)


def phi_A2(lam: float, nu0: float) -> float:
    return (1 - lam) - nu0 * math.exp(3 * lam * nu0 / (1 - nu0))


def select_nu0(strict_value: float) -> float:
    if not strict_value < 1:
        raise NotStrict(f"strict condition value {strict_value} is not below 1")
    return strict_value + (1 - strict_value) / 2


def _first_root(phi: Callable[[float], float], lo: float, hi: float, scan: int = 2000) -> float:
    xs = np.linspace(lo, hi, scan + 1)
    vals = np.array([phi(x) for x in xs])
    sign = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)
    if sign.size == 0:
        raise NoBracket(f"no sign change of phi on [{lo}, {hi}]")
    k = int(sign[0])
    if vals[k] == 0:
        return float(xs[k])
    return float(brentq(phi, xs[k], xs[k + 1], xtol=1e-16, rtol=1e-15, maxiter=200))


def find_lambda0_A1(nu0: float) -> float:
    """First root in (0, 1) of (1-l)/(1+l nu0) - nu0 exp(2 l nu0)."""
    if not 0 < nu0 < 1:
        raise NoBracket(f"nu0={nu0} is outside (0, 1)")
    return _first_root(lambda x: phi_A1(x, nu0), 0.0, 1.0)


def find_lambda0_A2(nu0: float) -> float:
    """First root in (0, 1 - nu0) of (1-l) - nu0 exp(3 l nu0 / (1 - nu0))."""
    if not 0 < nu0 < 1:
        raise NoBracket(f"nu0={nu0} is outside (0, 1)")
    return _first_root(lambda x: phi_A2(x, nu0), 0.0, 1.0 - nu0)


def compute_M0(eq_or_K0, lambda0: float, route: str, nu0: float | None = None) -> float:
    """exp(lambda0 K0) on the (A1) route, exp(lambda0 K0 / (1 - lambda0 nu0)) on (A2).

    The first argument is either an equation (K0 is then computed) or K0 itself.
    """
    K0 = compute_K0(eq_or_K0).value if isinstance(eq_or_K0, DelayEquation) else float(eq_or_K0)
    if route == "A1":
        return math.exp(lambda0 * K0)
    if route == "A2":
        return math.exp(lambda0 * K0 / (1 - lambda0 * nu0))
    raise ValueError(f"unknown route {route!r}")


# -- exponentials of multiples of A on the grid -----------------------------------


def log_exp_prefix(eq: DelayEquation, kind: str, lam: float) -> np.ndarray:
    """log e_g(p_k, t0) on the grid for g built from A.

    kind: "lamA" (g = lam A), "om_lamA" (g = (-)(lam A)), "neg" (g = -lam A),
    "lam_om_negA" (g = lam (-)(-A) = lam A / (1 - A mu)).
    """
    g = eq.grid
    q = _A_quad(eq)
    a = np.nan_to_num(eq.A_pt[:-1])
    m = g.mu[:-1]
    sc = g.scattered[:-1]
    dense = q.cells
    if kind == "lamA":
        cell = np.where(sc, np.log1p(lam * a * m), lam * dense)
    elif kind == "om_lamA":
        cell = -np.where(sc, np.log1p(lam * a * m), lam * dense)
    elif kind == "neg":
        fac = 1 - lam * a * m
        if np.any(sc & (fac <= 0)):
            raise NotRegressive("1 - lam A mu is not positive", witness=None)
        with np.errstate(divide="ignore", invalid="ignore"):
            cell = np.where(sc, np.log(np.where(sc, fac, 1.0)), -lam * dense)
    elif kind == "lam_om_negA":
        d = 1 - a * m
        if np.any(sc & (d <= 0)):
            raise NotRegressive("-A is not positively regressive", witness=None)
        with np.errstate(divide="ignore", invalid="ignore"):
            cell = np.where(sc, np.log1p(lam * m * a / np.where(sc, d, 1.0)), lam * dense)
    else:
        raise ValueError(kind)
    cell = np.where(np.arange(len(cell)) < eq.i0, 0.0, cell)
    return np.concatenate([[0.0], np.cumsum(cell)])


def _log_at(eq: DelayEquation, L: np.ndarray, lam_dense: float, x) -> np.ndarray:
    """Extend a grid log-prefix to points inside dense cells (linear in the A integral)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = eq.grid.points
    x = np.maximum(x, eq.t0)
    j = np.clip(np.searchsorted(p, x + eq.tol, side="right") - 1, 0, len(p) - 1)
    out = L[j].copy()
    off = (x - p[j]) > eq.tol
    if np.any(off):
        q = _A_quad(eq)
        jj = j[off]
        th = (x[off] - p[jj]) / (p[jj + 1] - p[jj])
        out[off] += lam_dense * q.partial(jj, 0.0, th)
    return out


def is_minus_A_positively_regressive(eq: DelayEquation) -> bool:
    g = eq.grid
    idx = np.arange(eq.i0, len(g.points))
    return bool(np.all(1 - np.nan_to_num(eq.A_pt[idx]) * g.mu[idx] > 0))


# -- technical-lemma inequalities ------------------------------------------------


def _window_nodes(eq: DelayEquation, lo: float, hi_idx: int):
    """Cells covering [lo, p[hi_idx]] as (cell index, theta_lo) pairs."""
    p = eq.grid.points
    lo = max(lo, eq.t0)
    j = int(np.clip(np.searchsorted(p, lo + eq.tol, side="right") - 1, 0, len(p) - 1))
    th = (lo - p[j]) / (p[j + 1] - p[j]) if lo - p[j] > eq.tol and j + 1 < len(p) else 0.0
    return j, th


def lemma_inequality_A1(eq: DelayEquation, lambda0: float):
    """Both sides of the (A1) technical inequality at every grid t.

    lhs(t) = int_{alpha_*(t)}^{sigma(t)} e_{lambda0 A}(t, alpha_*(eta)) A(eta) Delta eta
    rhs(t) = (1 - lambda0) / (1 + lambda0 A(t) mu(t))
    """
    L = log_exp_prefix(eq, "lamA", lambda0)
    return _lemma_sides(eq, L, lambda0, upper_sigma=True, eval_at_sigma=False, rhs=lambda k: (1 - lambda0) / (1 + lambda0 * eq.A_pt[k] * eq.grid.mu[k]))


def lemma_inequality_A2(eq: DelayEquation, lambda0: float):
    """Both sides of the (A2) technical inequality at every grid t.

    lhs(t) = int_{alpha_*(t)}^{t} e_{lambda0 (-)(-A)}(sigma(t), alpha_*(eta)) A(eta) Delta eta
    rhs(t) = 1 - lambda0
    """
    L = log_exp_prefix(eq, "lam_om_negA", lambda0)
    return _lemma_sides(eq, L, lambda0, upper_sigma=False, eval_at_sigma=True, rhs=lambda k: 1 - lambda0)


def _lemma_sides(eq, L, lam, upper_sigma, eval_at_sigma, rhs):
    g = eq.grid
    p = g.points
    sc = g.scattered
    mid_astar = np.minimum(eq.al_mid, eq.astar[1:])
    end_astar = np.minimum(eq.al_end, eq.astar)
    ts_idx = _t_range(eq)
    lhs = np.zeros(ts_idx.size)
    rh = np.zeros(ts_idx.size)
    for n, k in enumerate(ts_idx):
        up = k + 1 if (upper_sigma and sc[k]) else k
        at = k + 1 if (eval_at_sigma and sc[k]) else k
        Lt = L[at]
        j, th0 = _window_nodes(eq, eq.astar[k], up)
        total = 0.0
        for c in range(j, up):
            if sc[c]:
                a_ = eq.A_pt[c]
                w = math.exp(Lt - _log_at(eq, L, lam, eq.astar[c])[0])
                total += g.mu[c] * a_ * w
                continue
            th_lo = th0 if c == j else 0.0
            nodes = np.array([eq.astar[c], mid_astar[c], end_astar[c + 1]])
            la = _log_at(eq, L, lam, nodes)
            gv = np.exp(Lt - la) * np.array([eq.A_pt[c], eq.A_mid[c], eq.A_end[c + 1]])
            h = p[c + 1] - p[c]
            total += h * sum(v * (f(1.0) - f(th_lo)) for v, f in zip(gv, _I))
        lhs[n] = total
        rh[n] = rhs(k)
    return p[ts_idx], lhs, rh


# -- exponential domination --------------------------------------------------------


@dataclass(frozen=True)
class Domination:
    lam: float
    lambda1: float
    lambda1_head: float
    certified: bool


def _fit_lambda1(eq: DelayEquation, LE: np.ndarray, stop: int) -> float:
    """Largest lambda1 with LE(t) - LE(s) <= log e_{(-)lambda1}(t, s) for grid t >= s in [t0, p[stop]]."""
    g = eq.grid
    h = np.diff(g.points)
    sc = g.scattered[:-1]
    sl = slice(eq.i0, stop + 1)
    le = LE[sl]

    def ok(l1):
        cell = np.where(sc, np.log1p(l1 * g.mu[:-1]), l1 * h)
        cell[: eq.i0] = 0.0
        C = np.concatenate([[0.0], np.cumsum(cell)])[sl]
        F = le + C
        slack = 1e-12 * np.abs(F)
        Ft = F - slack
        suf = np.maximum.accumulate(Ft[::-1])[::-1]
        return bool(np.all(suf - (F + slack) <= 1e-12))

    if not ok(0.0):
        return 0.0
    hi = 1.0
    while ok(hi):
        hi *= 2
        if hi > 1e12:
            return hi
    lo = 0.0
    for _ in range(200):
        midv = 0.5 * (lo + hi)
        if ok(midv):
            lo = midv
        else:
            hi = midv
        if hi - lo <= 1e-13 * max(1.0, hi):
            break
    return lo


def check_domination(eq: DelayEquation, route: str, lam: float) -> Domination:
    """Fit lambda1 for e_g(t,s) <= e_{(-)lambda1}(t,s) (M1 = 1) with g = (-)(lam A) or -lam A.

    Certified when the fit over the full horizon is positive and has not
    degraded below 0.9 of the fit over the head of the horizon.
    """
    kind = "om_lamA" if route == "A1" else "neg"
    LE = log_exp_prefix(eq, kind, lam)
    n = len(eq.grid.points)
    full = _fit_lambda1(eq, LE, n - 1)
    head = _fit_lambda1(eq, LE, tail_mark_index(eq))
    cert = full > 1e-12 and full >= 0.9 * head
    return Domination(lam, full, head, bool(cert))


# -- numeric validation against the field -------------------------------------------


def validate_field(eq: DelayEquation, fld: FundamentalField, bound: str, M0: float = 1.0, lambda0: float | None = None, route: str | None = None) -> dict:
    """Compare |X(t, s)| with 1 ("unit") or with M0 times the lemma envelope ("envelope")."""
    X = np.abs(fld.X)
    p = eq.grid.points
    mask = np.arange(len(p))[:, None] >= fld.start_idx[None, :]
    if bound == "unit":
        excess = np.where(mask, X - 1.0, -np.inf)
        worst = float(np.max(excess)) if excess.size else -math.inf
        passed = worst <= 1e-6
        ratio = float(np.max(np.where(mask, X, 0.0))) if X.size else 0.0
    else:
        kind = "om_lamA" if route == "A1" else "neg"
        L = log_exp_prefix(eq, kind, lambda0)
        logenv = L[:, None] - L[fld.start_idx][None, :]
        with np.errstate(divide="ignore"):
            lx = np.log(X)
        gap = np.where(mask, lx - (math.log(M0) + logenv), -np.inf)
        worst_log = float(np.max(gap)) if gap.size else -math.inf
        passed = worst_log <= math.log1p(1e-6)
        ratio = math.exp(min(worst_log, 700.0)) if np.isfinite(worst_log) else 0.0
    mark = tail_mark_index(eq)
    tail = np.where(mask[mark:], X[mark:], 0.0)
    return {
        "bound": bound,
        "max_ratio": float(ratio),
        "passed": bool(passed),
        "columns": int(X.shape[1]),
        "sup_abs_X": float(np.max(np.where(mask, X, 0.0))) if X.size else 0.0,
        "tail_max_abs_X": float(np.max(tail)) if tail.size else 0.0,
    }


# -- classification ---------------------------------------------------------------


@dataclass
class _Route:
    name: str
    verdict: str = INCONCLUSIVE
    theorem: str | None = None
    nu0: float | None = None
    lambda0: float | None = None
    M0: float | None = None
    lambda1: float | None = None
    M1: float | None = None
    reports: list = field(default_factory=list)


def _run_route(eq, route, k0_ok, h0_ok, k0_value, div, margin) -> _Route:
    r = _Route(route)
    if route == "A1":
        strict, weak = strict_condition_A1(eq, margin), weak_condition_A1(eq)
        names = ("T3.1", "T3.2", "C3.1")
    else:
        strict, weak = strict_condition_A2(eq, margin), weak_condition_A2(eq)
        names = ("T4.1", "T4.2", "C4.1")
    r.reports = [strict, weak]
    if not k0_ok:
        return r
    if weak.satisfied:
        r.verdict, r.theorem, r.M0 = US, names[0], 1.0
    if not strict.satisfied:
        return r
    nu0 = select_nu0(strict.value)
    lam0 = find_lambda0_A1(nu0) if route == "A1" else find_lambda0_A2(nu0)
    r.nu0, r.lambda0 = nu0, lam0
    r.M0 = compute_M0(k0_value, lam0, route, nu0)
    r.verdict, r.theorem = US, names[0]
    if not div.satisfied:
        return r
    r.verdict, r.theorem = GAS, names[1]
    if not h0_ok:
        return r
    fits = [check_domination(eq, route, lam) for lam in LAMBDA_GRID]
    at0 = check_domination(eq, route, lam0)
    r.lambda1, r.M1 = at0.lambda1, 1.0
    if at0.certified and all(d.certified for d in fits):
        r.verdict, r.theorem = UES, names[2]
    return r


def classify(eq: DelayEquation, margin: float = 0.0, fld: FundamentalField | None = None, s_samples=None, parallel: int = 1, chi_lambda: float = 1.0) -> StabilityCertificate:
    """Strongest verdict whose hypotheses all hold on the horizon.

    The (A2) route is evaluated first, then the (A1) route; the stronger
    verdict wins and ties keep (A2).  The bounded-window hypothesis is met by
    a finite K0 or a finite unweighted indicator integral, the bounded-lag one
    by a finite H0 or a finite weighted indicator integral.
    """
    H = _horizon(eq)
    a1, a2 = check_A1(eq), check_A2(eq)
    K0, H0 = compute_K0(eq), compute_H0(eq)
    chiK, chiH = check_chi_conditions(eq, chi_lambda)
    div = check_divergence(eq)
    reports = [a1, a2, K0, H0, chiK, chiH, div]
    k0_ok = K0.satisfied or chiK.satisfied
    h0_ok = H0.satisfied or chiH.satisfied
    k0_value = K0.value if K0.satisfied else chiK.value
    best: _Route | None = None
    tried = []
    if a2.satisfied and is_minus_A_positively_regressive(eq):
        tried.append(_run_route(eq, "A2", k0_ok, h0_ok, k0_value, div, margin))
    if a1.satisfied:
        tried.append(_run_route(eq, "A1", k0_ok, h0_ok, k0_value, div, margin))
    for r in tried:
        reports.extend(r.reports)
        if best is None or _RANK[r.verdict] > _RANK[best.verdict]:
            best = r
    if best is None:
        best = _Route("none")
    cert = StabilityCertificate(
        verdict=best.verdict,
        route=best.theorem,
        reports=reports,
        nu0=best.nu0,
        lambda0=best.lambda0,
        M0=best.M0,
        lambda1=best.lambda1,
        M1=best.M1,
        horizon=H,
        margin=margin,
    )
    if fld is None:
        fld = fundamental_solution(eq, s_samples, parallel=parallel)
    if best.verdict != INCONCLUSIVE and best.lambda0 is not None:
        cert.numeric_validation = validate_field(eq, fld, "envelope", best.M0, best.lambda0, best.name)
    elif best.verdict != INCONCLUSIVE:
        cert.numeric_validation = validate_field(eq, fld, "unit")
    else:
        cert.numeric_validation = validate_field(eq, fld, "unit")
        cert.numeric_validation["bound"] = "none"
        cert.numeric_validation["passed"] = False
    return cert


# -- transforms -------------------------------------------------------------------


def pantograph_transform(a_expr, theta: float, horizon: float, h_max: float = 0.01) -> DelayEquation:
    """x'(t) + A(t) x(theta t) = 0 on [1, horizon] becomes, with u = ln t,
    y'(u) + e^u A(e^u) y(u - ln(1/theta)) = 0 on [0, ln horizon].

    The u-scale starts at ln(theta) so that the delayed argument of u = 0 is
    on the scale.
    """
    if not 0 < theta < 1:
        raise BadTheta(f"theta must lie in (0, 1), got {theta}")
    a = parse(a_expr) if isinstance(a_expr, str) else a_expr
    sub = a.substitute(parse("exp(t)"))
    coef = parse(f"exp(t)*({sub})")
    delay = math.log(1 / theta)
    ts = reals(math.log(theta), math.log(horizon))
    return DelayEquation(ts, coef, parse(f"t - {delay!r}"), t0=0.0, h_max=h_max)


def pantograph_envelope(cert: StabilityCertificate) -> tuple[float, float]:
    """(M, lam) with |X(t, s)| <= M (t/s)^(-lam) for the original pantograph equation."""
    if cert.verdict != UES:
        raise ValueError("the transformed equation has no exponential certificate")
    return cert.M0 * cert.M1, cert.lambda1


@dataclass(frozen=True)
class TwoTermEquation:
    """x^Delta + A x^sigma + B x(beta) = 0 (variant "sigma") or x^Delta + A x + B x(beta) = 0 ("plain")."""

    ts: TimeScale
    A: object
    B: object
    beta: object
    t0: float
    variant: str = "sigma"


class TwoTermCoefficient:
    """B(t) e_A(t, beta(t)) or B(t) e_{(-)(-A)}(sigma(t), beta(t)), evaluated through a fine grid of A."""

    def __init__(self, eq3: TwoTermEquation, h_max: float):
        self.eq3 = eq3
        self.h_max = h_max
        self._setup()

    def __getstate__(self):
        return {"eq3": self.eq3, "h_max": self.h_max}

    def __setstate__(self, st):
        self.__dict__.update(st)
        self._setup()

    def _setup(self):
        from .engine import as_function, evaluate_on

        e = self.eq3
        self.B = as_function(e.B)
        self.beta = as_function(e.beta)
        self._log = _two_term_log(e, self.h_max, "om_negA" if e.variant == "plain" else "A")
        self._evaluate_on = evaluate_on

    def evaluate(self, t, ts=None, left=False):
        e = self.eq3
        t = np.atleast_1d(np.asarray(t, dtype=float))
        b = self._evaluate_on(self.B, t, e.ts, left)
        beta, _ = e.ts.project_down(self._evaluate_on(self.beta, t, e.ts, left))
        top = e.ts.sigma_array(t, left) if e.variant == "plain" else t
        return b * np.exp(self._log.log(top) - self._log.log(beta))


def _two_term_log(eq3: TwoTermEquation, h_max: float, kind: str) -> LogExp:
    """log e_g along a grid of the whole scale for g = A, (-)(-A) or -A."""
    from .engine import as_function
    from .timescale import sample_function

    grid = build_grid(eq3.ts, h_max)
    a = sample_function(as_function(eq3.A), grid)
    vals, left = a.values, a._right_values()
    mu = grid.mu
    if kind == "A":
        return LogExp(GridFunction(grid, vals, "linear", left_values=left))
    d = 1 - mu * vals
    if np.any(d <= 0):
        k = int(np.flatnonzero(d <= 0)[0])
        p = grid.points
        raise NotRegressive(f"1 - A mu is not positive at t={p[k]!r}", witness=(float(p[k]), float(d[k])))
    if kind == "om_negA":
        return LogExp(GridFunction(grid, vals / d, "linear", left_values=left))
    return LogExp(GridFunction(grid, -vals, "linear", left_values=-left))


def two_term_reduction(eq3: TwoTermEquation, h_max: float = 0.01) -> DelayEquation:
    """Single-term equation for y = e_A(t, t0) x (sigma variant) or y = e_{(-)(-A)}(t, t0) x (plain)."""
    coef = TwoTermCoefficient(eq3, h_max)
    return DelayEquation(eq3.ts, coef, eq3.beta, t0=eq3.t0, h_max=h_max)


def two_term_envelope(eq3: TwoTermEquation, M: float, t, h_max: float = 0.01) -> np.ndarray:
    """Bound on |x(t)| implied by |y| <= M: M e_{(-)A}(t, t0), or M e_{-A}(t, t0) for the plain variant."""
    if eq3.variant == "plain":
        le = _two_term_log(eq3, h_max, "negA")
        return M * np.exp(le.log(t) - le.log(eq3.t0))
    le = _two_term_log(eq3, h_max, "A")
    return M * np.exp(-(le.log(t) - le.log(eq3.t0)))


def back_map(eq3: TwoTermEquation, y: GridFunction, h_max: float = 0.01) -> np.ndarray:
    """x = y / e_A(t, t0) (sigma variant) or y / e_{(-)(-A)}(t, t0) at the grid points of y."""
    le = _two_term_log(eq3, h_max, "om_negA" if eq3.variant == "plain" else "A")
    t = y.grid.points
    return y.values * np.exp(-(le.log(t) - le.log(eq3.t0)))


def eigen_sharpness(a: float) -> dict:
    """Spectral radius of [[1, -a], [1, 0]] for x_{n+1} = x_n - a x_{n-1}."""
    if not a > 0:
        raise ValueError("a must be positive")
    ev = np.linalg.eigvals(np.array([[1.0, -a], [1.0, 0.0]]))
    modulus = float(np.max(np.abs(ev)))
    return {"stable": bool(modulus <= 1 + 1e-12), "modulus": modulus}


__all__ = [
    "ConditionReport",
    "StabilityCertificate",
    "US",
    "GAS",
    "UES",
    "INCONCLUSIVE",
    "check_A1",
    "check_A2",
    "compute_K0",
    "compute_H0",
    "check_chi_conditions",
    "strict_condition_A1",
    "weak_condition_A1",
    "strict_condition_A2",
    "weak_condition_A2",
    "check_divergence",
    "window_integrals",
    "select_nu0",
    "find_lambda0_A1",
    "find_lambda0_A2",
    "phi_A1",
    "phi_A2",
    "compute_M0",
    "log_exp_prefix",
    "lemma_inequality_A1",
    "lemma_inequality_A2",
    "check_domination",
    "validate_field",
    "classify",
    "pantograph_transform",
    "pantograph_envelope",
    "TwoTermEquation",
    "two_term_reduction",
    "two_term_envelope",
    "back_map",
    "eigen_sharpness",
    "parse_certificate",
    "tail_mark_index",
]
