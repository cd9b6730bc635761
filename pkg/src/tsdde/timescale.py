"""Finite-horizon time scales, grids on them, and the delta-integral.

A time scale is stored as an ordered list of closed real intervals and
isolated points.  Everything here is immutable; the scalar operations
(`sigma`, `rho`, `mu`) follow the usual forward/backward jump conventions
and the vectorised variants are used by the expression evaluator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateScale, HorizonExceeded, NotInScale, ReversedBounds

SCATTERED = "scattered"
DENSE = "dense"

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class DenseInterval:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise DegenerateScale(f"interval needs a < b, got [{self.a}, {self.b}]; use IsolatedPoint")

    @property
    def left(self) -> float:
        return self.a

    @property
    def right(self) -> float:
        return self.b


@dataclass(frozen=True)
class IsolatedPoint:
    p: float

    @property
    def left(self) -> float:
        return self.p

    @property
    def right(self) -> float:
        return self.p


Segment = DenseInterval | IsolatedPoint


def left_limit_point(b):
    """A point just below `b`, used to sample left limits at right ends of intervals."""
    return b - 1e-12 * np.maximum(1.0, np.abs(b))


class TimeScale:
    """Closed subset of the reals given as disjoint intervals and points."""

    def __init__(self, segments: Iterable[Segment], membership_tol: float = DEFAULT_TOL):
        segs = sorted(segments, key=lambda s: s.left)
        if not segs:
            raise DegenerateScale("time scale has no points")
        for prev, nxt in zip(segs, segs[1:]):
            if nxt.left - prev.right <= membership_tol:
                raise ValueError(f"segments {prev} and {nxt} overlap or touch; merge them")
        self.segments: tuple[Segment, ...] = tuple(segs)
        self.membership_tol = float(membership_tol)
        self._left = np.array([s.left for s in segs], dtype=float)
        self._right = np.array([s.right for s in segs], dtype=float)
        self._dense = np.array([isinstance(s, DenseInterval) for s in segs], dtype=bool)

    @property
    def t_min(self) -> float:
        return float(self._left[0])

    @property
    def t_max(self) -> float:
        return float(self._right[-1])

    def __repr__(self):
        parts = []
        for s in self.segments[:4]:
            parts.append(f"[{s.a:g},{s.b:g}]" if isinstance(s, DenseInterval) else f"{{{s.p:g}}}")
        more = "" if len(self.segments) <= 4 else f" ... ({len(self.segments)} segments)"
        return f"TimeScale({' '.join(parts)}{more}, t_max={self.t_max:g})"

    def __getstate__(self):
        return {"segments": self.segments, "membership_tol": self.membership_tol}

    def __setstate__(self, state):
        self.__init__(state["segments"], state["membership_tol"])

    # -- scalar queries -------------------------------------------------

    def locate(self, t: float) -> tuple[int, float]:
        """Segment index holding `t` and `t` snapped onto segment endpoints."""
        tol = self.membership_tol
        i = int(np.searchsorted(self._left, t + tol, side="right")) - 1
        if i < 0 or t > self._right[i] + tol:
            raise NotInScale(f"{t!r} is not a point of the time scale")
        a, b = self._left[i], self._right[i]
        if abs(t - b) <= tol:
            return i, float(b)
        if abs(t - a) <= tol:
            return i, float(a)
        return i, float(t)

    def contains(self, t: float) -> bool:
        try:
            self.locate(t)
        except NotInScale:
            return False
        return True

    def sigma(self, t: float, left: bool = False) -> float:
        """Forward jump.  With `left=True` right ends of intervals act as left-dense limits."""
        i, ts = self.locate(t)
        if self._dense[i] and (left or ts < self._right[i]):
            return ts
        if i + 1 >= len(self.segments):
            raise HorizonExceeded(f"sigma undefined at the horizon end {ts!r}")
        return float(self._left[i + 1])

    def rho(self, t: float, left: bool = False) -> float:
        i, ts = self.locate(t)
        if self._dense[i] and (ts > self._left[i] or (left and ts == self._right[i])):
            return ts
        if i == 0:
            raise HorizonExceeded(f"rho undefined at the horizon start {ts!r}")
        return float(self._right[i - 1])

    def mu(self, t: float, left: bool = False) -> float:
        _, ts = self.locate(t)
        return self.sigma(ts, left) - ts

    def is_right_scattered(self, t: float) -> bool:
        i, ts = self.locate(t)
        if self._dense[i] and ts < self._right[i]:
            return False
        return i + 1 < len(self.segments)

    # -- vectorised queries (used by the evaluator) ---------------------

    def _locate_array(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        tol = self.membership_tol
        i = np.searchsorted(self._left, t + tol, side="right") - 1
        ok = (i >= 0) & (t <= self._right[np.maximum(i, 0)] + tol)
        if not np.all(ok):
            bad = t[~ok][0]
            raise NotInScale(f"{float(bad)!r} is not a point of the time scale")
        a, b = self._left[i], self._right[i]
        snapped = np.where(np.abs(t - b) <= tol, b, np.where(np.abs(t - a) <= tol, a, t))
        return i, snapped

    def sigma_array(self, t, left: bool = False) -> np.ndarray:
        """Vectorised sigma; at the top of the horizon it returns t (the scale simply ends)."""
        t = np.asarray(t, dtype=float)
        i, ts = self._locate_array(t)
        stay = self._dense[i] & (left | (ts < self._right[i]))
        nxt = np.minimum(i + 1, len(self.segments) - 1)
        jump = np.where(i + 1 < len(self.segments), self._left[nxt], ts)
        return np.where(stay, ts, jump)

    def rho_array(self, t, left: bool = False) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        i, ts = self._locate_array(t)
        stay = self._dense[i] & ((ts > self._left[i]) | (left & (ts == self._right[i])))
        prv = np.maximum(i - 1, 0)
        jump = np.where(i > 0, self._right[prv], ts)
        return np.where(stay, ts, jump)

    def mu_array(self, t, left: bool = False) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        _, ts = self._locate_array(t)
        return self.sigma_array(ts, left) - ts

    def project_down(self, values) -> tuple[np.ndarray, int]:
        """Move values that fall in gaps of the scale down to the nearest scale point.

        Values below t_min or above t_max are returned untouched.  Returns the
        projected array and the number of values that were moved.
        """
        v = np.array(values, dtype=float, copy=True)
        tol = self.membership_tol
        inside = (v >= self.t_min - tol) & (v <= self.t_max + tol)
        i = np.searchsorted(self._left, v + tol, side="right") - 1
        i = np.clip(i, 0, len(self.segments) - 1)
        gap = inside & (v > self._right[i] + tol)
        v[gap] = self._right[i[gap]]
        return v, int(np.count_nonzero(gap))

    def clip(self, horizon: float) -> "TimeScale":
        """Drop everything above `horizon`."""
        tol = self.membership_tol
        out: list[Segment] = []
        for s in self.segments:
            if s.left > horizon + tol:
                break
            if isinstance(s, DenseInterval) and s.b > horizon + tol:
                out.append(DenseInterval(s.a, horizon) if horizon - s.a > tol else IsolatedPoint(s.a))
            else:
                out.append(s)
        return TimeScale(out, tol)

    def points_between(self, lo: float, hi: float) -> list[float]:
        """Isolated points and interval endpoints in [lo, hi] (for tests and tables)."""
        out = []
        for s in self.segments:
            for p in {s.left, s.right}:
                if lo - self.membership_tol <= p <= hi + self.membership_tol:
                    out.append(p)
        return sorted(out)


def sigma(ts: TimeScale, t: float) -> float:
    return ts.sigma(t)


def rho(ts: TimeScale, t: float) -> float:
    return ts.rho(t)


def mu(ts: TimeScale, t: float) -> float:
    return ts.mu(t)


# -- generators ---------------------------------------------------------


def reals(a: float, b: float, tol: float = DEFAULT_TOL) -> TimeScale:
    return TimeScale([DenseInterval(a, b)], tol)


def isolated(points: Sequence[float], tol: float = DEFAULT_TOL) -> TimeScale:
    return TimeScale([IsolatedPoint(float(p)) for p in sorted(set(points))], tol)


def integers(a: float, b: float, tol: float = DEFAULT_TOL) -> TimeScale:
    return isolated(range(math.ceil(a - tol), math.floor(b + tol) + 1), tol)


def h_integers(h: float, a: float, b: float, tol: float = DEFAULT_TOL) -> TimeScale:
    k0, k1 = math.ceil(a / h - 1e-9), math.floor(b / h + 1e-9)
    return isolated([k * h for k in range(k0, k1 + 1)], tol)


def q_scale(q: float, a: float, b: float, tol: float = DEFAULT_TOL) -> TimeScale:
    """Powers q**k (q > 1) lying in [a, b], a > 0."""
    if q <= 1 or a <= 0:
        raise ValueError("q_scale needs q > 1 and a > 0")
    k0, k1 = math.ceil(math.log(a) / math.log(q) - 1e-9), math.floor(math.log(b) / math.log(q) + 1e-9)
    return isolated([q**k for k in range(k0, k1 + 1)], tol)


def p11(a: float, b: float, tol: float = DEFAULT_TOL) -> TimeScale:
    """Union of [2k, 2k+1] intersected with [a, b]."""
    segs: list[Segment] = []
    k = math.floor(a / 2)
    while 2 * k <= b + tol:
        lo, hi = max(2.0 * k, a), min(2.0 * k + 1, b)
        if hi - lo > tol:
            segs.append(DenseInterval(lo, hi))
        elif hi >= lo - tol:
            segs.append(IsolatedPoint(lo))
        k += 1
    return TimeScale(segs, tol)


def sinhcosh(n0: int, b: float, tol: float = DEFAULT_TOL) -> TimeScale:
    """Union of [sinh n, cosh n] for n >= n0, up to b."""
    segs: list[Segment] = []
    n = int(n0)
    while math.sinh(n) <= b + tol:
        lo, hi = math.sinh(n), min(math.cosh(n), b)
        segs.append(DenseInterval(lo, hi) if hi - lo > tol else IsolatedPoint(lo))
        n += 1
    return TimeScale(segs, tol)


def z_mod3(a: float, b: float, tol: float = DEFAULT_TOL) -> TimeScale:
    """Integers in [a, b] that are not multiples of 3."""
    return isolated([k for k in range(math.ceil(a), math.floor(b) + 1) if k % 3 != 0], tol)


GENERATORS = {
    # name: (number of leading parameters, defaults, builder)
    "reals": (1, (0.0,), lambda p, T, tol: reals(p[0], T, tol)),
    "integers": (1, (0.0,), lambda p, T, tol: integers(p[0], T, tol)),
    "h_integers": (2, (None, 0.0), lambda p, T, tol: h_integers(p[0], p[1], T, tol)),
    "q_scale": (2, (None, 1.0), lambda p, T, tol: q_scale(p[0], p[1], T, tol)),
    "p11": (1, (0.0,), lambda p, T, tol: p11(p[0], T, tol)),
    "sinhcosh": (1, (1,), lambda p, T, tol: sinhcosh(int(p[0]), T, tol)),
    "z_mod3": (1, (1.0,), lambda p, T, tol: z_mod3(p[0], T, tol)),
}


def parse_scale(text: str, horizon: float | None = None, tol: float = DEFAULT_TOL) -> TimeScale:
    """Read the line-oriented scale description.

    Lines are ``interval a b``, ``point p`` or ``generator NAME PARAMS upto T``;
    ``;`` may separate several entries on one line and ``#`` starts a comment.
    If `horizon` is given the result is clipped to it.
    """
    segs: list[Segment] = []
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        for piece in raw.split("#", 1)[0].split(";"):
            words = piece.split()
            if words:
                entries.append((lineno, words))
    for lineno, words in entries:
        kind = words[0].lower()
        try:
            if kind == "interval" and len(words) == 3:
                segs.append(DenseInterval(float(words[1]), float(words[2])))
            elif kind == "point" and len(words) == 2:
                segs.append(IsolatedPoint(float(words[1])))
            elif kind == "generator" and len(words) >= 4 and words[-2].lower() == "upto":
                name = words[1].lower()
                if name not in GENERATORS:
                    raise ValueError(f"unknown generator {name!r}")
                nparams, defaults, build = GENERATORS[name]
                given = [float(w) for w in words[2:-2]]
                if len(given) > nparams:
                    raise ValueError(f"too many parameters for {name}")
                params = given + list(defaults[len(given):])
                if any(p is None for p in params):
                    raise ValueError(f"generator {name} needs {nparams} parameter(s)")
                top = float(words[-1])
                if horizon is not None:
                    top = min(top, horizon)
                segs.extend(build(params, top, tol).segments)
            else:
                raise ValueError(f"cannot read {' '.join(words)!r}")
        except DegenerateScale:
            raise
        except ValueError as exc:
            raise ValueError(f"scale description line {lineno}: {exc}") from None
    ts = TimeScale(segs, tol)
    return ts.clip(horizon) if horizon is not None else ts


def format_scale(ts: TimeScale) -> str:
    lines = []
    for s in ts.segments:
        if isinstance(s, DenseInterval):
            lines.append(f"interval {s.a!r} {s.b!r}")
        else:
            lines.append(f"point {s.p!r}")
    return "\n".join(lines) + "\n"


# -- grids --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Grid:
    """Ordered sample points of a time scale.

    `scattered[i]` is True exactly when points[i] is right-scattered; then
    points[i+1] is its forward jump.  Every other consecutive pair lies in
    one dense interval (a "dense cell").
    """

    ts: TimeScale
    points: np.ndarray
    scattered: np.ndarray
    h_max: float

    def __len__(self):
        return len(self.points)

    @property
    def kinds(self) -> list[str]:
        return [SCATTERED if s else DENSE for s in self.scattered]

    @cached_property
    def mu(self) -> np.ndarray:
        m = np.zeros(len(self.points))
        m[:-1] = np.where(self.scattered[:-1], np.diff(self.points), 0.0)
        if self.scattered[-1]:
            m[-1] = self.ts.mu(self.points[-1])
        return m

    @cached_property
    def right_end(self) -> np.ndarray:
        """Right-scattered points reached by a dense cell from the left."""
        r = np.zeros(len(self.points), dtype=bool)
        r[1:] = ~self.scattered[:-1] & self.scattered[1:]
        return r

    @cached_property
    def _plist(self) -> list[float]:
        return self.points.tolist()

    def index_of(self, t: float) -> int | None:
        """Index of the grid point within tolerance of t, or None."""
        tol = self.ts.membership_tol
        j = int(np.searchsorted(self.points, t - tol, side="left"))
        if j < len(self.points) and abs(self.points[j] - t) <= tol:
            return j
        return None

    def require_index(self, t: float) -> int:
        j = self.index_of(t)
        if j is None:
            raise NotInScale(f"{t!r} is not a grid point (h_max={self.h_max:g})")
        return j

    def tail(self, start: int) -> "Grid":
        return Grid(self.ts, self.points[start:], self.scattered[start:], self.h_max)

    def head(self, stop: int) -> "Grid":
        return Grid(self.ts, self.points[:stop], self.scattered[:stop], self.h_max)


def build_grid(
    ts: TimeScale,
    h_max: float,
    t_lo: float | None = None,
    t_hi: float | None = None,
    even: bool = False,
) -> Grid:
    """Sample the scale on [t_lo, t_hi] with dense step at most h_max.

    Dense intervals are split uniformly and their endpoints are kept.  With
    `even=True` every dense piece gets an even number of cells, which lets
    callers use Simpson panels.
    """
    if not h_max > 0:
        raise ValueError("h_max must be positive")
    tol = ts.membership_tol
    lo = ts.t_min if t_lo is None else ts.locate(t_lo)[1]
    hi = ts.t_max if t_hi is None else ts.locate(t_hi)[1]
    if hi < lo:
        raise ReversedBounds(f"grid range [{lo}, {hi}] is reversed")
    pts: list[np.ndarray] = []
    kinds: list[np.ndarray] = []
    nseg = len(ts.segments)
    for i, s in enumerate(ts.segments):
        if s.right < lo - tol or s.left > hi + tol:
            continue
        has_next = i + 1 < nseg
        if isinstance(s, IsolatedPoint):
            pts.append(np.array([s.p]))
            kinds.append(np.array([has_next]))
            continue
        a, b = max(s.a, lo), min(s.b, hi)
        if b - a <= tol:
            pts.append(np.array([a]))
            kinds.append(np.array([has_next and abs(a - s.b) <= tol]))
            continue
        n = max(1, math.ceil((b - a) / h_max - 1e-9))
        if even and n % 2:
            n += 1
        p = a + (b - a) * np.arange(n + 1) / n
        p[-1] = b
        k = np.zeros(n + 1, dtype=bool)
        k[-1] = has_next and b == s.b
        pts.append(p)
        kinds.append(k)
    if not pts:
        raise DegenerateScale("no scale points in the requested range")
    return Grid(ts, np.concatenate(pts), np.concatenate(kinds), float(h_max))


# -- grid functions -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values on a grid with interpolation inside dense cells only.

    `left_values` optionally stores left limits at right ends of dense
    intervals (an rd-continuous function may jump there).  `slopes` are used
    by cubic Hermite interpolation; at right ends they are left derivatives.
    """

    grid: Grid
    values: np.ndarray
    interpolation: str = "linear"
    slopes: np.ndarray | None = None
    left_values: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.grid.points)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.shape != (n,):
            raise ValueError(f"expected {n} values, got shape {self.values.shape}")
        if self.interpolation not in ("linear", "cubic"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        if self.left_values is not None:
            lv = np.asarray(self.left_values, dtype=float)
            object.__setattr__(self, "left_values", np.where(self.grid.right_end, lv, self.values))
        if self.interpolation == "cubic" and self.slopes is None:
            object.__setattr__(self, "slopes", _estimate_slopes(self.grid, self._right_values()))
        elif self.slopes is not None:
            object.__setattr__(self, "slopes", np.asarray(self.slopes, dtype=float))

    def _right_values(self) -> np.ndarray:
        return self.values if self.left_values is None else self.left_values

    def _cell_value(self, j, x):
        """Interpolant of dense cell j evaluated at x (arrays allowed)."""
        p = self.grid.points
        y0, y1 = self.values[j], self._right_values()[j + 1]
        h = p[j + 1] - p[j]
        th = (x - p[j]) / h
        if self.interpolation == "linear":
            return y0 + (y1 - y0) * th
        d0, d1 = self.slopes[j], self.slopes[j + 1]
        return (
            (1 + 2 * th) * (1 - th) ** 2 * y0
            + th * (1 - th) ** 2 * h * d0
            + th**2 * (3 - 2 * th) * y1
            + th**2 * (th - 1) * h * d1
        )

    def _cells(self, x: np.ndarray):
        """Classify query points: (cell index, exact-hit index or -1)."""
        p = self.grid.points
        tol = self.grid.ts.membership_tol
        j = np.searchsorted(p, x, side="right") - 1
        j = np.clip(j, 0, len(p) - 1)
        hit = np.full(x.shape, -1)
        near_lo = np.abs(x - p[j]) <= tol
        hit[near_lo] = j[near_lo]
        jn = np.minimum(j + 1, len(p) - 1)
        near_hi = (hit < 0) & (np.abs(p[jn] - x) <= tol)
        hit[near_hi] = jn[near_hi]
        return j, hit

    def __call__(self, t):
        x = np.asarray(t, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        p = self.grid.points
        j, hit = self._cells(x)
        out = np.empty(x.shape)
        out[hit >= 0] = self.values[hit[hit >= 0]]
        rest = hit < 0
        if np.any(rest):
            jr = j[rest]
            xr = x[rest]
            bad = (xr < p[0]) | (xr > p[-1]) | (jr >= len(p) - 1) | self.grid.scattered[jr]
            if np.any(bad):
                raise NotInScale(f"{float(xr[bad][0])!r} is outside the grid or inside a scattered gap")
            out[rest] = self._cell_value(jr, xr)
        return float(out[0]) if scalar else out

    @cached_property
    def cell_integrals(self) -> np.ndarray:
        """Delta-integral over each cell [points[j], points[j+1]]."""
        g = self.grid
        p = g.points
        h = np.diff(p)
        y0, y1 = self.values[:-1], self._right_values()[1:]
        dense = h / 2 * (y0 + y1)
        if self.interpolation == "cubic":
            dense = dense + h**2 / 12 * (self.slopes[:-1] - self.slopes[1:])
        return np.where(g.scattered[:-1], h * y0, dense)

    @cached_property
    def prefix(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.cell_integrals)])

    def _partial(self, j, u, v):
        """Integral of the interpolant of dense cell j over [u, v]."""
        if self.interpolation == "linear":
            return (v - u) * (self._cell_value(j, u) + self._cell_value(j, v)) / 2
        return (v - u) / 6 * (self._cell_value(j, u) + 4 * self._cell_value(j, (u + v) / 2) + self._cell_value(j, v))

    def antiderivative(self, t) -> np.ndarray:
        """Delta-integral from the first grid point to each t (vectorised, prefix sums)."""
        x = np.atleast_1d(np.asarray(t, dtype=float))
        p = self.grid.points
        j, hit = self._cells(x)
        out = np.empty(x.shape)
        out[hit >= 0] = self.prefix[hit[hit >= 0]]
        rest = hit < 0
        if np.any(rest):
            jr, xr = j[rest], x[rest]
            bad = (xr < p[0]) | (xr > p[-1]) | (jr >= len(p) - 1) | self.grid.scattered[jr]
            if np.any(bad):
                raise NotInScale(f"{float(xr[bad][0])!r} is outside the grid or inside a scattered gap")
            out[rest] = self.prefix[jr] + self._partial(jr, p[jr], xr)
        return out

    def integral(self, s: float, t: float) -> float:
        """Delta-integral over [s, t] summed cell by cell (exactly additive up to rounding)."""
        if t < s - self.grid.ts.membership_tol:
            raise ReversedBounds(f"upper limit {t} is below lower limit {s}")
        p = self.grid.points
        (js, ht), (jt, htt) = self._cells(np.array([s])), self._cells(np.array([t]))
        js, hs_, jt, ht_ = int(js[0]), int(ht[0]), int(jt[0]), int(htt[0])
        for x, j, hit in ((s, js, hs_), (t, jt, ht_)):
            if hit < 0 and (x < p[0] or x > p[-1] or j >= len(p) - 1 or self.grid.scattered[j]):
                raise NotInScale(f"{x!r} is outside the grid or inside a scattered gap")
        if hs_ >= 0 and ht_ >= 0:
            return math.fsum(self.cell_integrals[hs_:ht_]) if ht_ > hs_ else 0.0
        if hs_ < 0 and ht_ < 0 and js == jt:
            return float(self._partial(js, s, t))
        terms = []
        if hs_ >= 0:
            first = hs_
        else:
            terms.append(float(self._partial(js, s, p[js + 1])))
            first = js + 1
        if ht_ >= 0:
            last = ht_
        else:
            terms.append(float(self._partial(jt, p[jt], t)))
            last = jt
        terms.extend(self.cell_integrals[first:last].tolist())
        return math.fsum(terms)


def _estimate_slopes(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Finite-difference slopes on each run of dense cells."""
    p = grid.points
    slopes = np.zeros(len(p))
    dense_cell = ~grid.scattered[:-1]
    j = 0
    n = len(p)
    while j < n - 1:
        if not dense_cell[j]:
            j += 1
            continue
        k = j
        while k < n - 1 and dense_cell[k]:
            k += 1
        seg = slice(j, k + 1)
        if k - j >= 2:
            slopes[seg] = np.gradient(values[seg], p[seg], edge_order=2)
        else:
            slopes[seg] = (values[k] - values[j]) / (p[k] - p[j])
        j = k
    return slopes


def sample_function(fn, grid: Grid, interpolation: str = "linear") -> GridFunction:
    """Sample an expression (anything with ``evaluate(t, ts, left)``) or a callable on a grid."""
    p = grid.points
    ends = grid.right_end
    if hasattr(fn, "evaluate"):
        vals = np.broadcast_to(np.asarray(fn.evaluate(p, grid.ts), dtype=float), p.shape).astype(float)
        left = vals.copy()
        if np.any(ends):
            q = left_limit_point(p[ends])
            left[ends] = np.broadcast_to(fn.evaluate(q, grid.ts, left=True), q.shape)
    else:
        vals = np.array([float(fn(x)) for x in p])
        left = None
    return GridFunction(grid, vals, interpolation, left_values=left)


def delta_integral(ts: TimeScale, f: GridFunction, s: float, t: float) -> float:
    """Delta-integral of a grid function over [s, t]."""
    if t < s - ts.membership_tol:
        raise ReversedBounds(f"upper limit {t} is below lower limit {s}")
    _, s = ts.locate(s)
    _, t = ts.locate(t)
    return f.integral(s, t)
