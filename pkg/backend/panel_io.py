"""
Panel IO - Market panels and their CSV / JSON serialisation
Panel CSV header: t,p,q1,...,qI   latent sidecar: t,u,w,v1,...,vI
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import InvalidSpecError, ConfigError


@dataclass
class Panel:
    """T markets of observed price and quantity vector"""
    t: np.ndarray
    p: np.ndarray
    q: np.ndarray
    group_map: tuple = None
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).reshape(-1)
        self.q = np.asarray(self.q, dtype=float)
        if self.q.ndim != 2 or self.q.shape[0] != self.p.size:
            raise InvalidSpecError("q must be a (T, I) array matching p")
        self.t = (np.arange(1, self.p.size + 1) if self.t is None
                  else np.asarray(self.t, dtype=float).reshape(-1))
        if self.p.size < 1:
            raise InvalidSpecError("panel needs at least one row")
        if self.validate and (np.any(self.q < 0) or np.any(self.p < 0)):
            raise InvalidSpecError("panel quantities and prices must be nonnegative")

    @property
    def n_periods(self):
        return self.p.size

    @property
    def n_firms(self):
        return self.q.shape[1]

    @property
    def total_output(self):
        return self.q.sum(axis=1)

    def rival_output(self, i):
        return self.total_output - self.q[:, i]

    def demand_shock(self, beta):
        """u_t = p_t + beta * Q+_t"""
        return self.p + beta * self.total_output

    def rows(self, start, stop):
        """Contiguous sub-panel [start, stop)"""
        return Panel(self.t[start:stop], self.p[start:stop], self.q[start:stop],
                     self.group_map, validate=self.validate)

    def with_quantities(self, q):
        """Same periods and prices, new quantity matrix (detrended values may dip below zero)"""
        return Panel(self.t, self.p, q, self.group_map, validate=False)

    def to_frame(self):
        frame = pd.DataFrame({'t': self.t, 'p': self.p})
        for i in range(self.n_firms):
            frame[f'q{i + 1}'] = self.q[:, i]
        return frame

    @classmethod
    def from_frame(cls, frame, group_map=None):
        columns = list(frame.columns)
        q_cols = [f'q{i + 1}' for i in range(len(columns) - 2)]
        if columns[:2] != ['t', 'p'] or columns[2:] != q_cols or not q_cols:
            raise ConfigError(f"panel header must be t,p,q1..qI, got {','.join(columns)}")
        return cls(frame['t'].to_numpy(float), frame['p'].to_numpy(float),
                   frame[q_cols].to_numpy(float), group_map)


@dataclass
class LatentDraws:
    """Latent shocks behind a panel: u, v as the markets saw them, u_dt, v_dt without the trend"""
    t: np.ndarray
    u: np.ndarray
    w: np.ndarray
    v: np.ndarray
    u_dt: np.ndarray = None
    v_dt: np.ndarray = None

    def __post_init__(self):
        if self.u_dt is None:
            self.u_dt = self.u
        if self.v_dt is None:
            self.v_dt = self.v

    def to_frame(self):
        frame = pd.DataFrame({'t': self.t, 'u': self.u, 'w': self.w})
        for i in range(self.v.shape[1]):
            frame[f'v{i + 1}'] = self.v[:, i]
        return frame

    @classmethod
    def from_frame(cls, frame):
        v_cols = [c for c in frame.columns if c.startswith('v')]
        return cls(frame['t'].to_numpy(float), frame['u'].to_numpy(float),
                   frame['w'].to_numpy(float), frame[v_cols].to_numpy(float))


def write_panel(panel, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    panel.to_frame().to_csv(path, index=False, float_format='%.17g', encoding='utf-8')
    return path


def read_panel(path, group_map=None):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"panel file not found: {path}")
    try:
        frame = pd.read_csv(path, encoding='utf-8')
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse panel {path}: {e}")
    try:
        return Panel.from_frame(frame, group_map)
    except (ValueError, InvalidSpecError) as e:
        raise ConfigError(f"invalid panel {path}: {e}")


def write_latent(latent, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    latent.to_frame().to_csv(path, index=False, float_format='%.17g', encoding='utf-8')
    return path


def read_latent(path):
    return LatentDraws.from_frame(pd.read_csv(path, encoding='utf-8'))


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_json(data, path):
    """Deterministic JSON (sorted keys, fixed indent, non-finite -> null)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return path
