"""Method-of-steps solver for x^Delta(t) + A(t) x(alpha(t)) = f(t).

Right-scattered points are updated exactly, dense cells take classical
four-stage steps.  Delayed values come from a cubic Hermite dense output
built from the right derivative at the start of each cell (`DL`) and the
left derivative at its end (`DR`).  All columns of the fundamental solution
share one grid, so they are marched together as a matrix.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DelayAheadError,
    EvalError,
    HorizonExceeded,
    LookupBeforeHistory,
    MissingFieldSample,
    NegativeCoefficient,
    NotInScale,
)
from .expr import const, parse
from .timescale import Grid, GridFunction, TimeScale, build_grid, left_limit_point

# h*A above this, with the delayed argument inside the current cell, switches
# the cell to an exponential step
STIFF_HA = 2.5
FIELD_CHUNK = 16


def as_function(spec):
    """Accept DSL text, a number, an Expr, or any object with ``evaluate(t, ts, left)``."""
    if isinstance(spec, str):
        return parse(spec)
    if isinstance(spec, (int, float)):
        return const(spec)
    return spec


def evaluate_on(fn, t, ts: TimeScale, left: bool = False) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if hasattr(fn, "evaluate"):
        v = fn.evaluate(t, ts, left=left)
    else:
        v = fn(t)
    return np.broadcast_to(np.asarray(v, dtype=float), t.shape).astype(float)


def grid_with_break(ts: TimeScale, h_max: float, t0: float) -> Grid:
    """Grid of the whole scale that also contains t0 as a grid point."""
    hi = build_grid(ts, h_max, t_lo=t0)
    if t0 <= ts.t_min + ts.membership_tol:
        return hi
    lo = build_grid(ts, h_max, t_hi=t0)
    pts = np.concatenate([lo.points[:-1], hi.points])
    sc = np.concatenate([lo.scattered[:-1], hi.scattered])
    return Grid(ts, pts, sc, float(h_max))


@dataclass(frozen=True)
class _Targets:
    """Where delayed arguments land on the grid, precomputed once per equation."""

    tau: np.ndarray
    hit: np.ndarray  # grid index within tolerance, or -1
    cell: np.ndarray  # dense cell holding tau when not a hit; -1 below the grid
    theta: np.ndarray
    w: np.ndarray  # Hermite weights for (x_j, DL_j, x_{j+1}, DR_j), h folded in


def _targets(grid: Grid, tau: np.ndarray) -> _Targets:
    p = grid.points
    n = len(p)
    tol = grid.ts.membership_tol
    tau = np.asarray(tau, dtype=float)
    j = np.searchsorted(p, tau, side="right") - 1
    jc = np.clip(j, 0, n - 1)
    hit = np.full(tau.shape, -1)
    near = (j >= 0) & (np.abs(tau - p[jc]) <= tol)
    hit[near] = jc[near]
    jn = np.minimum(jc + 1, n - 1)
    near = (hit < 0) & (np.abs(p[jn] - tau) <= tol)
    hit[near] = jn[near]
    below = (hit < 0) & (tau < p[0])
    cell = np.where(hit >= 0, -1, np.where(below, -1, jc))
    ok = cell >= 0
    inner = ok & (cell < n - 1)
    if np.any(inner & grid.scattered[np.minimum(cell, n - 1)]):
        k = np.flatnonzero(inner & grid.scattered[np.minimum(cell, n - 1)])[0]
        raise NotInScale(f"delayed argument {tau[k]!r} falls in a gap of the scale")
    h = np.ones(tau.shape)
    h[inner] = p[cell[inner] + 1] - p[cell[inner]]
    th = np.zeros(tau.shape)
    th[inner] = (tau[inner] - p[cell[inner]]) / h[inner]
    w = np.stack(
        [
            (1 + 2 * th) * (1 - th) ** 2,
            th * (1 - th) ** 2 * h,
            th**2 * (3 - 2 * th),
            th**2 * (th - 1) * h,
        ]
    )
    return _Targets(tau, hit, cell, th, w)


class DelayEquation:
    """x^Delta(t) + A(t) x(alpha(t)) = 0 on a time scale, started at t0.

    A and alpha are sampled once on the grid: at grid points, at midpoints of
    dense cells and as left limits at right ends of dense intervals.  Delay
    values that fall into gaps of the scale are projected down onto the
    scale (with a warning).
    """

    def __init__(self, ts: TimeScale, A, alpha, t0: float | None = None, h_max: float = 0.01, tol: float | None = None):
        self.ts = ts
        self.A = as_function(A)
        self.alpha = as_function(alpha)
        self.t0 = ts.t_min if t0 is None else ts.locate(t0)[1]
        self.h_max = float(h_max)
        self.tol = ts.membership_tol if tol is None else float(tol)
        self.grid = grid_with_break(ts, self.h_max, self.t0)
        self._sample()

    def __repr__(self):
        return f"DelayEquation(A={self.A}, alpha={self.alpha}, t0={self.t0:g}, {self.ts})"

    def __getstate__(self):
        return {k: self.__dict__[k] for k in ("ts", "A", "alpha", "t0", "h_max", "tol")}

    def __setstate__(self, state):
        self.__dict__.update(state)
        self.grid = grid_with_break(self.ts, self.h_max, self.t0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            self._sample()

    # -- sampling --------------------------------------------------------

    def sample3(self, fn, horizon_fallback=None):
        """Values of fn at grid points, dense-cell midpoints and left limits at right ends.

        Only indices at or after t0 are evaluated; earlier entries are NaN.
        The horizon point has mu = 0 by truncation; if fn cannot be evaluated
        there it receives ``horizon_fallback`` (the value never drives a step).
        """
        g = self.grid
        p = g.points
        n = len(p)
        i0 = self.i0
        pt = np.full(n, np.nan)
        mid = np.full(n - 1, np.nan)
        end = np.full(n, np.nan)
        try:
            pt[i0:] = evaluate_on(fn, p[i0:], self.ts)
        except EvalError:
            if horizon_fallback is None or n - 1 <= i0:
                raise
            pt[i0:-1] = evaluate_on(fn, p[i0:-1], self.ts)
            pt[-1] = horizon_fallback
        end[:] = pt
        dense = np.flatnonzero(~g.scattered[:-1])
        dense = dense[dense >= i0]
        mid[dense] = evaluate_on(fn, (p[dense] + p[dense + 1]) / 2, self.ts)
        ends = np.flatnonzero(g.right_end)
        ends = ends[ends > i0]
        if ends.size:
            end[ends] = evaluate_on(fn, left_limit_point(p[ends]), self.ts, left=True)
        return pt, mid, end

    def _sample(self):
        g = self.grid
        p = g.points
        self.i0 = g.require_index(self.t0)
        A_pt, A_mid, A_end = self.sample3(self.A, horizon_fallback=np.nan)
        for arr in (A_pt, A_mid, A_end):
            bad = arr < 0
            if np.any(bad):
                raise NegativeCoefficient(f"A is negative ({np.nanmin(arr):g}) on the grid")
        self.A_pt, self.A_mid, self.A_end = A_pt, A_mid, A_end
        raw = self.sample3(self.alpha, horizon_fallback=float(p[-1]))
        moved = 0
        proj = []
        for arr in raw:
            v, k = self.ts.project_down(arr)
            proj.append(v)
            moved += k
        if moved:
            warnings.warn(f"{moved} delay values fell in gaps of the scale and were projected down", stacklevel=3)
        self.al_pt, self.al_mid, self.al_end = proj
        self.mid = (p[:-1] + p[1:]) / 2
        tol = self.tol
        with np.errstate(invalid="ignore"):
            ahead_pt = self.al_pt > p + tol
            ahead_mid = self.al_mid > self.mid + tol
            ahead_end = self.al_end > p + tol
        dense = ~g.scattered[:-1]
        self.ahead_cell = ahead_pt[:-1] | (dense & (ahead_mid | ahead_end[1:]))
        safe = lambda v: np.where(np.isnan(v), -np.inf, v)
        self.T_pt = _targets(g, safe(self.al_pt))
        self.T_mid = _targets(g, safe(self.al_mid))
        self.T_end = _targets(g, safe(self.al_end))
        h = np.diff(p)
        cells = np.arange(len(p) - 1)
        in_step = (self.T_mid.cell == cells) | (self.T_end.cell[1:] == cells) | (self.T_end.hit[1:] == cells + 1)
        with np.errstate(invalid="ignore"):
            self.stiff = dense & in_step & (h * self.A_mid > STIFF_HA)
        astar = np.full(len(p), np.nan)
        astar[self.i0 :] = np.minimum.accumulate(self.al_pt[self.i0 :][::-1])[::-1]
        self.astar = astar

    # -- delay transforms ------------------------------------------------

    def _index_at_or_after(self, t: float) -> int:
        p = self.grid.points
        k = int(np.searchsorted(p, t - self.tol, side="left"))
        if k >= len(p):
            raise HorizonExceeded(f"no grid points in [{t}, {p[-1]}]")
        return k

    def alpha_star(self, t: float) -> float:
        k = self._index_at_or_after(t)
        if k < self.i0:
            raise ValueError(f"alpha_star needs t >= t0 = {self.t0}")
        return float(self.astar[k])

    def alpha_inv(self, t: float) -> tuple[float, bool]:
        """(alpha_{-1}(t), capped): capped means the set reaches the horizon."""
        v, capped = self.alpha_inv_array(np.array([t], dtype=float))
        return float(v[0]), bool(capped[0])

    def alpha_inv_array(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Inside a dense cell alpha_* is taken as linear between its end values."""
        g = self.grid
        p = g.points
        n = len(p)
        t = np.asarray(t, dtype=float)
        a = self.astar[self.i0 :]
        k = np.searchsorted(a, t + self.tol, side="right") - 1 + self.i0
        k = np.maximum(k, self.i0)
        # the last point carries the horizon's artificial mu = 0, so it cannot witness alpha_* > t
        capped = k >= n - 2
        inv = p[k].copy()
        kk = np.minimum(k, n - 2)
        lo, hi = self.astar[kk], self.astar[kk + 1]
        inner = ~capped & ~g.scattered[kk] & (hi > lo) & (t > lo)
        if np.any(inner):
            th = np.clip((t[inner] - lo[inner]) / (hi[inner] - lo[inner]), 0.0, 1.0)
            inv[inner] = p[kk[inner]] + th * (p[kk[inner] + 1] - p[kk[inner]])
        return inv, capped

    def forcing3(self, forcing):
        """Forcing samples (point, mid, left-end); zeros when forcing is None."""
        n = len(self.grid.points)
        if forcing is None:
            return None
        if isinstance(forcing, GridFunction):
            if forcing.grid is not self.grid and not np.array_equal(forcing.grid.points, self.grid.points):
                return self.sample3(lambda t: forcing(t))
            pt = forcing.values.copy()
            end = forcing._right_values().copy()
            mid = np.zeros(n - 1)
            dense = np.flatnonzero(~self.grid.scattered[:-1])
            mid[dense] = forcing(self.mid[dense])
            return pt, mid, end
        return self.sample3(as_function(forcing))


def alpha_star(eq: DelayEquation, t: float) -> float:
    """inf of alpha over grid points in [t, horizon]."""
    return eq.alpha_star(t)


def alpha_inv(eq: DelayEquation, t: float, strict: bool = False) -> float:
    """sup{eta >= t0 : alpha_*(eta) <= t}, capped at the horizon.

    With `strict=True` a capped value raises HorizonExceeded instead.
    """
    v, capped = eq.alpha_inv(t)
    if capped and strict:
        raise HorizonExceeded(f"alpha_inv({t}) reaches the horizon {v}")
    return v


# -- histories ------------------------------------------------------------


@dataclass(frozen=True)
class History:
    """Initial data: x(s) = x0 and x = phi before s.

    `phi` may be None (zero), a number, DSL text, an Expr, a callable or a
    GridFunction.
    """

    x0: float = 1.0
    phi: object = None


class _HistoryLookup:
    """phi with the rounding guard below alpha_*(s)."""

    def __init__(self, eq: DelayEquation, history: History, s: float):
        self.eq = eq
        self.s = s
        phi = history.phi
        if phi is None:
            self.fn = None
        elif isinstance(phi, GridFunction) or (callable(phi) and not hasattr(phi, "evaluate")):
            self.fn = phi
        else:
            fn = as_function(phi)
            self.fn = lambda t: fn.evaluate(t, eq.ts)
        self.astar = eq.alpha_star(s)
        self.guard = max(eq.tol, eq.h_max)
        self._cache: dict[float, float] = {}

    def __call__(self, tau: float) -> float:
        if self.fn is None:
            return 0.0
        v = self._cache.get(tau)
        if v is not None:
            return v
        if tau < self.astar - self.guard:
            raise LookupBeforeHistory(f"lookup at {tau!r} is below alpha_*(s) = {self.astar!r}")
        x = max(tau, self.astar) if tau < self.astar - self.eq.tol else tau
        x = min(x, self.s)
        v = float(np.asarray(self.fn(x), dtype=float))
        self._cache[tau] = v
        return v


# -- the marching core ----------------------------------------------------


def _march(eq: DelayEquation, starts: np.ndarray, x0: np.ndarray, history, forcing3, open_start: bool = False):
    """March columns that start at grid indices `starts`.

    `history(tau)` returns the pre-start value shared by every column (zero
    for fundamental solutions).  With `open_start` a jump whose delayed
    argument is exactly the start sees the history instead of x(s): this is
    the limit of X(., eta) as eta decreases to s.  Returns X, DL, DR of
    shape (N, m).
    """
    g = eq.grid
    p = g.points
    n = len(p)
    m = len(starts)
    X = np.zeros((n, m))
    DL = np.zeros((n, m))
    DR = np.zeros((n, m))
    first = int(starts.min())
    if np.any(eq.ahead_cell[first:]):
        k = first + int(np.flatnonzero(eq.ahead_cell[first:])[0])
        raise DelayAheadError(f"alpha(t) > t near t={p[k]!r}")
    sc = g.scattered
    mu = g.mu
    A_pt, A_mid, A_end = eq.A_pt, eq.A_mid, eq.A_end
    if forcing3 is None:
        f_pt = f_mid = f_end = None
    else:
        f_pt, f_mid, f_end = forcing3
    Tp, Tm, Te = eq.T_pt, eq.T_mid, eq.T_end

    def look(T, q, i, xi=None, Y=None, c=1.0, k1=None, h=None, from_left=False):
        hit = T.hit[q]
        if hit >= 0:
            sol = X[hit] if hit <= i else Y
            # a left limit that lands exactly on a start still sees the history
            ref = hit - 1 if from_left else hit
        else:
            j = T.cell[q]
            if j < 0:
                return np.full(m, history(T.tau[q]))
            if j < i:
                w = T.w[:, q]
                sol = w[0] * X[j] + w[1] * DL[j] + w[2] * X[j + 1] + w[3] * DR[j]
            else:
                th = T.theta[q]
                if th >= c - 1e-12:
                    sol = Y
                else:
                    sol = xi + h * k1 * th + (Y - xi - h * k1 * c) * (th / c) ** 2
            ref = j
        past = ref < starts
        if past.any():
            sol = np.where(past, history(T.tau[q]), sol)
        return sol

    for i in range(first, n - 1):
        new = starts == i
        if new.any():
            X[i, new] = x0[new]
        xi = X[i]
        if sc[i]:
            step = -A_pt[i] * look(Tp, i, i, from_left=open_start)
            if f_pt is not None:
                step = step + f_pt[i]
            X[i + 1] = xi + mu[i] * step
        elif eq.stiff[i]:
            h = p[i + 1] - p[i]
            am = A_mid[i]
            delta = max(eq.mid[i] - eq.al_mid[i], 0.0)
            rate = am / (1.0 - min(am * delta, 0.5))
            xs = 0.0 if f_mid is None else f_mid[i] / am
            X[i + 1] = xs + (xi - xs) * math.exp(-rate * h)
            DL[i] = -rate * (xi - xs)
            DR[i] = -rate * (X[i + 1] - xs)
        else:
            h = p[i + 1] - p[i]
            k1 = -A_pt[i] * look(Tp, i, i)
            if f_pt is not None:
                k1 = k1 + f_pt[i]
            fm = 0.0 if f_mid is None else f_mid[i]
            fe = 0.0 if f_end is None else f_end[i + 1]
            Y2 = xi + 0.5 * h * k1
            k2 = -A_mid[i] * look(Tm, i, i, xi, Y2, 0.5, k1, h) + fm
            Y3 = xi + 0.5 * h * k2
            k3 = -A_mid[i] * look(Tm, i, i, xi, Y3, 0.5, k1, h) + fm
            Y4 = xi + h * k3
            ae = A_end[i + 1]
            k4 = -ae * look(Te, i + 1, i, xi, Y4, 1.0, k1, h, from_left=True) + fe
            x1 = xi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            X[i + 1] = x1
            DL[i] = k1
            if Te.hit[i + 1] == i + 1:
                DR[i] = -ae * x1 + fe
            elif Te.hit[i + 1] < 0 and Te.cell[i + 1] == i:
                w = Te.w[:, i + 1]
                den = 1.0 + ae * w[3]
                if abs(den) >= 0.25:
                    P = w[0] * xi + w[1] * k1 + w[2] * x1
                    DR[i] = (-ae * P + fe) / den
                else:
                    DR[i] = k4
            else:
                DR[i] = k4
        late = starts > i
        if late.any():
            X[i + 1, late] = 0.0
            DL[i, late] = 0.0
            DR[i, late] = 0.0
    last = starts == n - 1
    if last.any():
        X[n - 1, last] = x0[last]
    return X, DL, DR


def _slopes(grid: Grid, DL: np.ndarray, DR: np.ndarray) -> np.ndarray:
    """Per-point slopes for GridFunction output: DL, except DR at ends of dense runs."""
    s = DL.copy()
    sc = grid.scattered
    n = len(sc)
    ends = np.zeros(n, dtype=bool)
    ends[1:] = ~sc[:-1] & np.append(sc[1:-1], True)
    s[ends] = DR[np.flatnonzero(ends) - 1]
    return s


def solve_ivp(eq: DelayEquation, s: float, history: History, forcing=None) -> GridFunction:
    """Solution of x^Delta + A x(alpha) = f with x(s) = x0 and x = phi before s."""
    g = eq.grid
    i0 = g.require_index(s)
    if i0 < eq.i0:
        raise ValueError(f"start {s} lies before t0 = {eq.t0}")
    s = float(g.points[i0])
    look = _HistoryLookup(eq, history, s)
    X, DL, DR = _march(eq, np.array([i0]), np.array([float(history.x0)]), look, eq.forcing3(forcing))
    tail = g.tail(i0)
    slopes = _slopes(tail, DL[i0:, 0], DR[i0:, 0])
    return GridFunction(tail, X[i0:, 0], "cubic", slopes=slopes)


# -- fundamental solution ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class FundamentalField:
    """Columns s -> X(., s) on the equation grid (zero before s)."""

    eq: DelayEquation
    s_values: np.ndarray
    start_idx: np.ndarray
    X: np.ndarray
    DL: np.ndarray
    DR: np.ndarray

    @cached_property
    def _col_of(self) -> dict[int, int]:
        return {int(k): c for c, k in enumerate(self.start_idx)}

    def column_index(self, s: float) -> int:
        k = self.eq.grid.index_of(s)
        if k is None or k not in self._col_of:
            raise MissingFieldSample(f"no fundamental-solution column at s={s!r}")
        return self._col_of[k]

    def has(self, s: float) -> bool:
        k = self.eq.grid.index_of(s)
        return k is not None and k in self._col_of

    def column(self, s: float) -> GridFunction:
        c = self.column_index(s)
        k = int(self.start_idx[c])
        tail = self.eq.grid.tail(k)
        return GridFunction(tail, self.X[k:, c], "cubic", slopes=_slopes(tail, self.DL[k:, c], self.DR[k:, c]))

    def value(self, t: float, s: float) -> float:
        if t < s - self.eq.tol:
            self.column_index(s)
            return 0.0
        return float(self.column(s)(t))

    def max_abs(self) -> np.ndarray:
        """sup over t of |X(t, s)| for every column."""
        return np.max(np.abs(self.X), axis=0)

    def samples(self):
        """Long-format (s, t, X) triples over the triangle t >= s."""
        p = self.eq.grid.points
        for c, k in enumerate(self.start_idx):
            for i in range(k, len(p)):
                yield float(self.s_values[c]), float(p[i]), float(self.X[i, c])


def default_s_samples(eq: DelayEquation, max_dense: int = 64) -> np.ndarray:
    """Right-scattered grid points from t0 on plus at most `max_dense` dense ones."""
    g = eq.grid
    idx = np.arange(eq.i0, len(g.points) - 1)
    sc = idx[g.scattered[idx]]
    dn = idx[~g.scattered[idx]]
    if dn.size > max_dense:
        dn = dn[np.unique(np.round(np.linspace(0, dn.size - 1, max_dense)).astype(int))]
    chosen = np.union1d(np.union1d(sc, dn), [eq.i0])
    return g.points[chosen]


def _field_chunk(eq: DelayEquation, starts: np.ndarray):
    zero = lambda tau: 0.0
    return _march(eq, starts, np.ones(len(starts)), zero, None)


def fundamental_solution(eq: DelayEquation, s_samples=None, parallel: int = 1) -> FundamentalField:
    """X(t, s) for each sampled s: x(s) = 1, zero history, no forcing.

    Columns are computed in fixed-size chunks, so the result does not depend
    on the number of worker processes.
    """
    if s_samples is None:
        s_samples = default_s_samples(eq)
    g = eq.grid
    idx = sorted({g.require_index(float(s)) for s in np.atleast_1d(s_samples)})
    if idx and idx[0] < eq.i0:
        raise ValueError(f"s samples must not precede t0 = {eq.t0}")
    starts = np.array(idx, dtype=int)
    chunks = [starts[k : k + FIELD_CHUNK] for k in range(0, len(starts), FIELD_CHUNK)]
    if parallel > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            parts = list(pool.map(_field_chunk, [eq] * len(chunks), chunks))
    else:
        parts = [_field_chunk(eq, c) for c in chunks]
    n = len(g.points)
    if parts:
        X, DL, DR = (np.concatenate([pt[k] for pt in parts], axis=1) for k in range(3))
    else:
        X = DL = DR = np.zeros((n, 0))
    return FundamentalField(eq, g.points[starts], starts, X, DL, DR)


# -- representation formula ---------------------------------------------------


def _newton_cotes(k: int) -> np.ndarray:
    """Weights (in units of the step) for k equal cells, fourth order for k >= 2."""
    if k == 1:
        return np.array([0.5, 0.5])
    if k == 2:
        return np.array([1.0, 4.0, 1.0]) / 3
    if k == 3:
        return np.array([3.0, 9.0, 9.0, 3.0]) / 8
    w = np.zeros(k + 1)
    even = k if k % 2 == 0 else k - 3
    for a in range(0, even, 2):
        w[a : a + 3] += np.array([1.0, 4.0, 1.0]) / 3
    if even < k:
        w[even:] += np.array([3.0, 9.0, 9.0, 3.0]) / 8
    return w


def variation_of_parameters(eq: DelayEquation, s: float, history: History, forcing=None, field: FundamentalField | None = None) -> GridFunction:
    """x(t) = X(t,s) x0 - int_s^t X(t, sigma(eta)) A(eta) phi(alpha(eta)) + int_s^t X(t, sigma(eta)) f(eta).

    Dense parts use piecewise Newton-Cotes rules split wherever the integrand
    may lose smoothness: where the history indicator switches, at alpha
    iterates of t, at changes of step size and at ends of dense runs.
    Right ends of dense intervals use left limits of A, alpha and f.  A
    dense point that a later jump's delay lands on exactly is a jump of
    X(t, .); rules starting there use the right limit of the field.
    """
    g = eq.grid
    p = g.points
    n = len(p)
    tol = eq.tol
    i0 = g.require_index(s)
    s = float(p[i0])
    if field is None:
        field = fundamental_solution(eq, p[i0:])
    col_of = np.full(n, -1)
    col_of[field.start_idx] = np.arange(len(field.start_idx))
    look = _HistoryLookup(eq, history, s)
    f3 = eq.forcing3(forcing)
    zeros = (np.zeros(n), np.zeros(n - 1), np.zeros(n))
    f_pt, f_mid, f_end = f3 if f3 is not None else zeros

    def phi_at(alv):
        out = np.zeros(alv.shape)
        need = alv < s + tol
        for k in np.flatnonzero(need):
            out[k] = look(float(alv[k]))
        return out

    idx = np.arange(i0, n)
    gh_pt = np.zeros(n)
    gh_end = np.zeros(n)
    gh_pt[idx] = -eq.A_pt[idx] * phi_at(eq.al_pt[idx])
    gh_end[idx] = -eq.A_end[idx] * phi_at(eq.al_end[idx])
    sc = g.scattered
    mu = g.mu
    right_end = g.right_end
    with np.errstate(invalid="ignore"):
        ind_pt = eq.al_pt < s - tol
        ind_cell = eq.al_mid < s - tol

    # dense points hit exactly by the delay of a later jump
    hits = eq.T_pt.hit
    jumps_after = np.flatnonzero(sc[i0:-1]) + i0
    opened = sorted({int(hits[u]) for u in jumps_after if i0 <= hits[u] < u and not sc[hits[u]]})
    open_col = {k: c for c, k in enumerate(opened)}
    X_open = _march(eq, np.array(opened, dtype=int), np.ones(len(opened)), lambda tau: 0.0, None, open_start=True)[0] if opened else None

    # breakpoints that do not depend on t
    h = np.diff(p)
    base = {i0} | set(opened)
    for k in range(i0 + 1, n - 1):
        if sc[k - 1] or sc[k]:
            base.add(k)
        elif ind_cell[k] != ind_cell[k - 1] or abs(h[k] - h[k - 1]) > 1e-9 * h[k]:
            base.add(k)

    def need_col(k):
        c = col_of[k]
        if c < 0:
            raise MissingFieldSample(f"variation of parameters needs the column at s={p[k]!r}")
        return c

    out = np.zeros(n - i0)
    c0 = need_col(i0)
    x0 = float(history.x0)
    out[0] = x0
    for t_idx in range(i0 + 1, n):
        row = field.X[t_idx]
        terms = [row[c0] * x0]
        # scattered points in [s, t)
        jumps = np.flatnonzero(sc[i0:t_idx]) + i0
        for k in jumps:
            gk = f_pt[k] + (gh_pt[k] if ind_pt[k] else 0.0)
            terms.append(mu[k] * row[need_col(k + 1)] * gk)
        # t-dependent breakpoints: iterates of alpha from t
        brk = set(b for b in base if b <= t_idx)
        brk.add(t_idx)
        for start in (eq.al_pt[t_idx], eq.al_end[t_idx]):
            tau = start
            for _ in range(4):
                k = g.index_of(tau) if np.isfinite(tau) else None
                if k is None or k < i0 or k >= t_idx:
                    break
                brk.add(k)
                tau = eq.al_pt[k]
        marks = sorted(brk)
        for a, b in zip(marks, marks[1:]):
            if sc[a]:
                continue
            nodes = np.arange(a, b + 1)
            cols = np.array([need_col(k) for k in nodes])
            ind = ind_cell[a]
            gv = f_pt[nodes] + (gh_pt[nodes] if ind else 0.0)
            if right_end[b]:
                gv[-1] = f_end[b] + (gh_end[b] if ind else 0.0)
            w = _newton_cotes(b - a) * h[a]
            xv = row[cols]
            if a in open_col:
                xv = xv.copy()
                xv[0] = X_open[t_idx, open_col[a]]
            terms.append(float(np.dot(w, xv * gv)))
        out[t_idx - i0] = math.fsum(terms)
    return GridFunction(g.tail(i0), out, "linear")


def continuity_bound(eq: DelayEquation, field: FundamentalField, s1: float, s2: float, r: float) -> float:
    """Growth bound M1 M2 (s2 - s1) exp(M2 (r - t0)) for max_t |X(t,s2) - X(t,s1)|.

    M1 bounds |X(., s1)| up to r, M2 bounds A on [t0, r].
    """
    g = eq.grid
    p = g.points
    kr = g.require_index(r)
    c1 = field.column_index(s1)
    m1 = float(np.max(np.abs(field.X[field.start_idx[c1] : kr + 1, c1])))
    seg = slice(eq.i0, kr + 1)
    vals = np.concatenate([eq.A_pt[seg], eq.A_end[seg], eq.A_mid[eq.i0 : kr]])
    m2 = float(np.max(np.abs(vals[np.isfinite(vals)]), initial=0.0))
    return m1 * m2 * abs(s2 - s1) * math.exp(m2 * (p[kr] - eq.t0))
