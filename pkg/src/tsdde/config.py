"""Run configuration: a flat ``key = value`` file with bracketed section headers."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import DelayEquation, History
from .errors import ConfigError, TsddeError
from .expr import parse
from .presets import Setup, get_preset
from .timescale import DEFAULT_TOL, parse_scale

_FLOAT_KEYS = ("t0", "horizon", "h_max", "membership_tol", "solver_tol", "margin", "x0")
_INT_KEYS = ("parallel",)
_TEXT_KEYS = ("scale", "A", "alpha", "phi", "output", "preset", "s_samples")


@dataclass
class RunConfig:
    scale: str | None = None
    A: str | None = None
    alpha: str | None = None
    t0: float | None = None
    horizon: float | None = None
    h_max: float | None = None
    s_samples: int | list[float] | None = None
    membership_tol: float = DEFAULT_TOL
    solver_tol: float | None = None
    margin: float = 0.0
    parallel: int = 1
    output: str | None = None
    x0: float = 1.0
    phi: str | None = None
    preset: str | None = None
    params: dict[str, float] = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def validate(self) -> None:
        if self.preset is None:
            for k in ("scale", "A", "alpha"):
                if getattr(self, k) is None:
                    raise ConfigError(f"missing key {k!r} (or give a preset)")
        else:
            given = [k for k in ("scale", "A", "alpha", "t0", "phi") if getattr(self, k) is not None]
            if given:
                raise ConfigError(f"preset {self.preset!r} fixes the equation; remove {', '.join(given)}")
        if self.h_max is not None and not self.h_max > 0:
            raise ConfigError("h_max must be positive")
        if self.horizon is not None and self.t0 is not None and not self.horizon > self.t0:
            raise ConfigError("horizon must exceed t0")
        if self.parallel < 1:
            raise ConfigError("parallel must be at least 1")
        for k in ("A", "alpha", "phi"):
            v = getattr(self, k)
            if v is not None:
                parse(v)

    def scale_text(self) -> str:
        text = self.scale.strip()
        if text.startswith("@"):
            path = Path(text[1:].strip())
            if not path.is_absolute():
                path = self.base_dir / path
            try:
                return path.read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read scale file {path}: {exc.strerror}") from None
        return text

    def build(self) -> Setup:
        """Equation, history and start time described by the configuration."""
        self.validate()
        if self.preset is not None:
            pr = get_preset(self.preset)
            st = pr.setup(self.params, self.horizon, self.h_max)
            if self.solver_tol is not None:
                st.eq = DelayEquation(st.eq.ts, st.eq.A, st.eq.alpha, st.eq.t0, st.eq.h_max, self.solver_tol)
            return st
        try:
            ts = parse_scale(self.scale_text(), self.horizon, self.membership_tol)
        except ValueError as exc:
            if isinstance(exc, TsddeError):
                raise
            raise ConfigError(str(exc)) from None
        h_max = self.h_max if self.h_max is not None else 0.01
        eq = DelayEquation(ts, self.A, self.alpha, t0=self.t0, h_max=h_max, tol=self.solver_tol)
        return Setup(eq, History(self.x0, self.phi), eq.t0)

    def samples(self, eq: DelayEquation):
        """Start times for the fundamental field: None (default set), a count, or a list."""
        s = self.s_samples
        if s is None or isinstance(s, list):
            return s
        p = eq.grid.points[eq.i0 : -1]
        if s >= p.size:
            return p.tolist()
        idx = np.unique(np.round(np.linspace(0, p.size - 1, s)).astype(int))
        return p[idx].tolist()


def _coerce(cfg: RunConfig, key: str, raw: str) -> None:
    raw = raw.strip()
    try:
        if key in _FLOAT_KEYS:
            setattr(cfg, key, float(raw))
        elif key in _INT_KEYS:
            setattr(cfg, key, int(raw))
        elif key == "s_samples":
            if "," in raw or "." in raw:
                cfg.s_samples = [float(v) for v in raw.replace(",", " ").split()]
            else:
                cfg.s_samples = int(raw)
        elif key in _TEXT_KEYS:
            setattr(cfg, key, raw)
        elif key == "name":
            cfg.preset = raw
        else:
            cfg.params[key] = float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from None


def apply(cfg: RunConfig, key: str, raw: str) -> RunConfig:
    _coerce(cfg, key, raw)
    return cfg


def load_config(path: str | Path | None = None, text: str | None = None) -> RunConfig:
    """Read a configuration file (or text); section names only group keys."""
    cfg = RunConfig()
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        cfg.base_dir = path.parent
    if text is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#",))
    parser.optionxform = str
    body = text if text.lstrip().startswith("[") else "[run]\n" + text
    try:
        parser.read_string(body)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from None
    for section in parser.sections():
        for key, raw in parser.items(section):
            _coerce(cfg, key, raw)
    return cfg


def config_fields() -> list[str]:
    return [f.name for f in dataclasses.fields(RunConfig) if f.name not in ("params", "base_dir")]
