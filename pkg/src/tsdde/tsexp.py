"""Regressive algebra and the generalised exponential function.

The exponential is kept as (log-magnitude, sign): a factor ``1 + mu*f`` per
right-scattered point and ``exp(integral of f)`` over the dense parts.  This
survives coefficients large enough to overflow a plain product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotInScale, NotRegressive
from .timescale import GridFunction, TimeScale


def circle_plus(f_val, g_val, mu_val):
    return f_val + g_val + mu_val * f_val * g_val


def circle_minus(f_val, mu_val):
    d = 1 + mu_val * f_val
    if np.any(np.asarray(d) == 0):
        raise NotRegressive(f"1 + mu*f = 0 for f={f_val}, mu={mu_val}")
    return -f_val / d


@dataclass(frozen=True)
class RegressivityReport:
    is_regressive: bool
    is_positively_regressive: bool
    witness: tuple[float, float] | None = None


def check_regressive(ts: TimeScale, f: GridFunction, sign: str = "any") -> RegressivityReport:
    """Scan 1 + mu*f over the grid of `f`.

    With sign="positive" the witness is the first point where 1 + mu*f <= 0,
    otherwise the first point where it vanishes.
    """
    g = f.grid
    v = 1 + g.mu * f.values
    zero = np.flatnonzero(v == 0)
    nonpos = np.flatnonzero(v <= 0)
    regressive = zero.size == 0
    positive = nonpos.size == 0
    witness = None
    if not regressive and (sign != "positive" or positive):
        witness = (float(g.points[zero[0]]), float(v[zero[0]]))
    elif not positive:
        k = nonpos[0] if sign == "positive" or regressive else zero[0]
        witness = (float(g.points[k]), float(v[k]))
    return RegressivityReport(regressive, positive, witness)


class LogExp:
    """Cumulative log|e_f(., t_first)| and sign along the grid of a grid function."""

    def __init__(self, f: GridFunction):
        self.f = f
        g = f.grid
        jump = g.scattered[:-1]
        factor = 1 + g.mu[:-1] * f.values[:-1]
        bad = jump & (factor == 0)
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise NotRegressive(
                f"1 + mu*f vanishes at t={g.points[k]!r}", witness=(float(g.points[k]), 0.0)
            )
        with np.errstate(divide="ignore"):
            cell_log = np.where(jump, np.log(np.abs(np.where(jump, factor, 1.0))), f.cell_integrals)
        self.cell_log = cell_log
        self.prefix = np.concatenate([[0.0], np.cumsum(cell_log)])
        neg = jump & (factor < 0)
        self.neg_prefix = np.concatenate([[0], np.cumsum(neg)])

    def log(self, x) -> np.ndarray:
        """Log-magnitude accumulated from the first grid point to x (vectorised)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        f = self.f
        p = f.grid.points
        j, hit = f._cells(x)
        out = np.empty(x.shape)
        out[hit >= 0] = self.prefix[hit[hit >= 0]]
        rest = hit < 0
        if np.any(rest):
            jr, xr = j[rest], x[rest]
            bad = (xr < p[0]) | (xr > p[-1]) | (jr >= len(p) - 1) | f.grid.scattered[jr]
            if np.any(bad):
                raise NotInScale(f"{float(xr[bad][0])!r} is outside the grid or inside a scattered gap")
            out[rest] = self.prefix[jr] + f._partial(jr, p[jr], xr)
        return out

    def negatives(self, x) -> np.ndarray:
        """Number of negative factors strictly before x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        j, hit = self.f._cells(x)
        idx = np.where(hit >= 0, hit, j)
        return self.neg_prefix[idx]

    def log_e(self, t, s) -> np.ndarray:
        """log|e_f(t, s)| for arrays t, s (any order)."""
        return self.log(t) - self.log(s)

    def sign_e(self, t, s) -> np.ndarray:
        d = np.abs(self.negatives(t) - self.negatives(s))
        return np.where(d % 2 == 0, 1.0, -1.0)

    def e(self, t, s) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.sign_e(t, s) * np.exp(self.log_e(t, s))


def exp_log(ts: TimeScale, f: GridFunction, s: float, t: float) -> tuple[float, float]:
    """(log|e_f(t,s)|, sign) summed directly over [min(s,t), max(s,t)]."""
    flip = t < s
    lo, hi = (t, s) if flip else (s, t)
    _, lo = ts.locate(lo)
    _, hi = ts.locate(hi)
    g = f.grid
    p = g.points
    x = np.array([lo, hi])
    j, hit = f._cells(x)
    for k in range(2):
        if hit[k] < 0 and (x[k] < p[0] or x[k] > p[-1] or j[k] >= len(p) - 1 or g.scattered[j[k]]):
            raise NotInScale(f"{x[k]!r} is outside the grid of f")
    i0 = hit[0] if hit[0] >= 0 else j[0] + 1
    i1 = hit[1] if hit[1] >= 0 else j[1]
    terms = []
    sign = 1.0
    if hit[0] < 0 and hit[1] < 0 and j[0] == j[1]:
        terms.append(float(f._partial(j[0], lo, hi)))
    else:
        if hit[0] < 0:
            terms.append(float(f._partial(j[0], lo, p[j[0] + 1])))
        if hit[1] < 0:
            terms.append(float(f._partial(j[1], p[j[1]], hi)))
        cells = np.arange(i0, i1)
        jump = g.scattered[cells]
        if np.any(jump):
            fac = 1 + g.mu[cells[jump]] * f.values[cells[jump]]
            if np.any(fac == 0):
                k = cells[jump][np.flatnonzero(fac == 0)[0]]
                raise NotRegressive(f"1 + mu*f vanishes at t={p[k]!r}", witness=(float(p[k]), 0.0))
            terms.extend(np.log(np.abs(fac)).tolist())
            if np.count_nonzero(fac < 0) % 2:
                sign = -1.0
        terms.extend(f.cell_integrals[cells[~jump]].tolist())
    total = math.fsum(terms)
    return (-total if flip else total), sign


def exp_fn(ts: TimeScale, f: GridFunction, s: float, t: float) -> float:
    """Generalised exponential e_f(t, s); for t < s this is 1/e_f(s, t)."""
    logv, sign = exp_log(ts, f, s, t)
    with np.errstate(over="ignore"):
        return sign * math.exp(logv) if logv < 709.7 else sign * math.inf


# -- exponentials of constants, computed from the segment structure -------


class ConstExp:
    """log e_lam(x, t_min) for a constant lam, exact on the segment structure."""

    def __init__(self, ts: TimeScale, lam: float):
        self.ts = ts
        self.lam = float(lam)
        n = len(ts.segments)
        dense = ts._dense
        length = np.where(dense, ts._right - ts._left, 0.0)
        gaps = np.append(ts._left[1:] - ts._right[:-1], 0.0)
        step = lam * length + np.log1p(lam * gaps)
        if n:
            step[-1] = lam * length[-1]
        self.seg_prefix = np.concatenate([[0.0], np.cumsum(step)])

    def log(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        i, xs = self.ts._locate_array(x)
        inside = np.where(self.ts._dense[i], xs - self.ts._left[i], 0.0)
        return self.seg_prefix[i] + self.lam * inside

    def log_e(self, t, s) -> np.ndarray:
        return self.log(t) - self.log(s)


def exp_ominus(ts: TimeScale, lam: float, s: float, t: float) -> float:
    """e_{(-)lam}(t, s) = 1 / e_lam(t, s) for a positive constant lam."""
    ce = ConstExp(ts, lam)
    return float(np.exp(-ce.log_e(t, s)[0]))


def exp_const(ts: TimeScale, lam: float, s: float, t: float) -> float:
    ce = ConstExp(ts, lam)
    return float(np.exp(ce.log_e(t, s)[0]))


# -- helpers to build the usual derived functions on a grid ---------------


def scaled(f: GridFunction, c: float) -> GridFunction:
    lv = None if f.left_values is None else c * f.left_values
    return GridFunction(f.grid, c * f.values, f.interpolation, left_values=lv)


def ominus_of(f: GridFunction) -> GridFunction:
    """The grid function (-)f = -f / (1 + mu f)."""
    mu = f.grid.mu
    d = 1 + mu * f.values
    if np.any(d == 0):
        k = int(np.flatnonzero(d == 0)[0])
        raise NotRegressive(f"1 + mu*f vanishes at t={f.grid.points[k]!r}", witness=(float(f.grid.points[k]), 0.0))
    # left limits at right ends of dense runs see mu = 0
    return GridFunction(f.grid, -f.values / d, f.interpolation, left_values=-f._right_values())


def divergence_profile(f: GridFunction, s: float, big: float = 1e3, small: float = 1e-3) -> dict:
    """Numerical version of the divergence/decay equivalences for f >= 0 with -f positively regressive.

    Samples e_f(., s), e_{(-)(-f)}(., s), e_{(-)f}(., s) and e_{-f}(., s) along
    the grid from s to the horizon and records whether each is monotone and
    crosses the given threshold at the horizon.
    """
    g = f.grid
    k0 = g.require_index(s)
    t = g.points[k0:]
    integral = f.antiderivative(t) - f.antiderivative([s])[0]
    le_f = LogExp(f).log_e(t, s)
    le_om_negf = LogExp(ominus_of(scaled(f, -1.0))).log_e(t, s)
    le_om_f = LogExp(ominus_of(f)).log_e(t, s)
    le_negf = LogExp(scaled(f, -1.0)).log_e(t, s)
    inc = lambda v: bool(np.all(np.diff(v) >= -1e-12 * (1 + np.abs(v[1:]))))
    dec = lambda v: bool(np.all(np.diff(v) <= 1e-12 * (1 + np.abs(v[1:]))))
    return {
        "integral": float(integral[-1]),
        "integral_diverges": bool(integral[-1] > math.log(big)),
        "e_f_diverges": inc(le_f) and le_f[-1] > math.log(big),
        "e_ominus_neg_f_diverges": inc(le_om_negf) and le_om_negf[-1] > math.log(big),
        "e_ominus_f_decays": dec(le_om_f) and le_om_f[-1] < math.log(small),
        "e_neg_f_decays": dec(le_negf) and le_negf[-1] < math.log(small),
    }


__all__ = [
    "RegressivityReport",
    "circle_plus",
    "circle_minus",
    "check_regressive",
    "exp_fn",
    "exp_log",
    "exp_ominus",
    "exp_const",
    "LogExp",
    "ConstExp",
    "ominus_of",
    "scaled",
    "divergence_profile",
]
