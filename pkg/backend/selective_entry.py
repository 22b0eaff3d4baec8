"""
Selective Entry - Second-stage Cournot outcomes after signal-based entry
Firms enter when their cost signal falls below a threshold set by the
entry cost; the conditional cost law is recovered from truncated laws
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.optimize import isotonic_regression

from .config import DEFAULT_TOLERANCES
from .distributions import PointMass, rng_stream
from .errors import InvalidSpecError
from .simulator import common_shock_draws
from .sources import probability_nodes


# Joint (signal, cost) families; signals are uniform on [0, 1]

@dataclass(frozen=True)
class IndependentSignal:
    """Signal carries no information: V independent of S"""
    v_spec: object

    @property
    def support(self):
        return self.v_spec.support

    def conditional_mean(self, s):
        return np.full_like(np.asarray(s, dtype=float), self.v_spec.mean())

    def conditional_cdf(self, v, s):
        v, s = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(s, dtype=float))
        return self.v_spec.cdf(v)

    def sample(self, rng, shape):
        s = rng.uniform(size=shape)
        return s, self.v_spec.sample(rng, int(np.prod(shape))).reshape(shape)


@dataclass(frozen=True)
class PerfectSignal:
    """V = v_lower + (v_upper - v_lower) S"""
    v_lower: float = 0.0
    v_upper: float = 1.0

    @property
    def support(self):
        return (self.v_lower, self.v_upper)

    def conditional_mean(self, s):
        return self.v_lower + (self.v_upper - self.v_lower) * np.asarray(s, dtype=float)

    def conditional_cdf(self, v, s):
        return (np.asarray(v, dtype=float) >= self.conditional_mean(s)).astype(float)

    def sample(self, rng, shape):
        s = rng.uniform(size=shape)
        return s, self.conditional_mean(s)


@dataclass(frozen=True)
class OrderedBetaSignal:
    """V | S = s ~ shift + scale * Beta(a + tilt s, b); tilt >= 0 orders costs by signal"""
    a: float
    b: float
    tilt: float
    scale: float = 1.0
    shift: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.tilt >= 0 and self.scale > 0):
            raise InvalidSpecError("need a, b, scale > 0 and tilt >= 0")

    @property
    def support(self):
        return (self.shift, self.shift + self.scale)

    def _shape(self, s):
        return self.a + self.tilt * np.asarray(s, dtype=float)

    def conditional_mean(self, s):
        a = self._shape(s)
        return self.shift + self.scale * a / (a + self.b)

    def conditional_cdf(self, v, s):
        x = (np.asarray(v, dtype=float) - self.shift) / self.scale
        return stats.beta.cdf(np.clip(x, 0.0, 1.0), self._shape(s), self.b)

    def sample(self, rng, shape):
        s = rng.uniform(size=shape)
        return s, self.shift + self.scale * rng.beta(self._shape(s), self.b)


@dataclass
class EntrySpec:
    """
    Signal/cost family, entry-cost law and the threshold function s(c)
    tabulated on a cost grid (nonincreasing, values in [0, 1])
    """
    family: object
    c_spec: object
    c_grid: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self):
        self.c_grid = np.asarray(self.c_grid, dtype=float)
        self.thresholds = np.asarray(self.thresholds, dtype=float)
        if self.c_grid.shape != self.thresholds.shape or self.c_grid.size < 1:
            raise InvalidSpecError("threshold table needs matching, nonempty cost and signal grids")
        if np.any(np.diff(self.c_grid) <= 0):
            raise InvalidSpecError("entry-cost grid must be strictly increasing")
        if np.any(np.diff(self.thresholds) > 0):
            raise InvalidSpecError("entry threshold must be nonincreasing in the entry cost")
        if np.any(self.thresholds < 0) or np.any(self.thresholds > 1):
            raise InvalidSpecError("entry thresholds must lie in [0, 1]")

    @classmethod
    def constant(cls, family, threshold, c_spec=None):
        """Threshold not moving with the entry cost"""
        return cls(family, c_spec or PointMass(0.0), np.array([0.0]), np.array([float(threshold)]))

    def threshold(self, c):
        return np.interp(c, self.c_grid, self.thresholds)


def entrant_mean_cost(entry, s, nodes=32):
    """E[V | S <= s] = (1/s) int_0^s mu_{V|S}(xi) d xi"""
    s = np.asarray(s, dtype=float)
    alpha, weight = probability_nodes(nodes)
    xi = s[..., None] * alpha
    mean = entry.family.conditional_mean(xi) @ weight
    # s = 0 has no entrants; the limit is the conditional mean at 0
    return np.where(s > 0, mean, entry.family.conditional_mean(np.zeros_like(s)))


def truncated_cost_cdf(entry, v, s, nodes=32):
    """F*(v; s) = P(V <= v | S <= s) on the outer grid of v and s"""
    v = np.asarray(v, dtype=float)
    s = np.asarray(s, dtype=float)
    alpha, weight = probability_nodes(nodes)
    xi = s[:, None] * alpha[None, :]
    cdf = entry.family.conditional_cdf(v[None, :, None], xi[:, None, :])
    return cdf @ weight


@dataclass
class EntryDraws:
    u: np.ndarray
    w: np.ndarray
    c: np.ndarray
    s: np.ndarray
    v: np.ndarray


def draw_entry_shocks(entry, u_spec, w_spec, n_firms, T, seed=0):
    """Independent streams for demand, common, entry-cost and (signal, cost) draws"""
    u = u_spec.sample(rng_stream(seed, (0, 0)), T)
    w = common_shock_draws(w_spec, np.asarray(u, float), rng_stream(seed, (0, 1)))
    c = entry.c_spec.sample(rng_stream(seed, (0, 2)), T)
    s, v = entry.family.sample(rng_stream(seed, (0, 3)), (T, n_firms))
    return EntryDraws(np.asarray(u, float), np.asarray(w, float), np.asarray(c, float), s, v)


@dataclass
class EntryOutcome:
    q: np.ndarray
    p: np.ndarray
    entered: np.ndarray
    mean_entrant_cost: np.ndarray
    threshold: np.ndarray

    @property
    def n_entrants(self):
        return self.entered.sum(axis=1)

    def entry_rates(self):
        """Entry frequency by firm"""
        return self.entered.mean(axis=0)

    def entry_frequency(self):
        """Share of potential entrants that enter, the estimate of s(C) averaged over markets"""
        return float(self.entered.mean())

    def to_dict(self):
        return {'n_periods': int(self.p.size), 'entry_rates': self.entry_rates().tolist(),
                'entry_frequency': self.entry_frequency(),
                'mean_entrants': float(self.n_entrants.mean()),
                'mean_price': float(self.p.mean()),
                'min_entrant_output': float(self.q[self.entered].min()) if self.entered.any() else None}


def selective_entry_outcomes(entry, prim, draws):
    """
    Entrants play the private-cost strategy of the entrant subgame with the
    entrant mean cost E[V | S <= s(c)]; non-entrants produce nothing
    """
    s_bar = entry.threshold(draws.c)
    entered = draws.s <= s_bar[:, None]
    mu = entrant_mean_cost(entry, s_bar)
    n_in = entered.sum(axis=1)
    beta, lam = prim.beta, prim.lam
    common = (draws.u - draws.w - mu) / (lam + (n_in + 1) * beta)
    q = common[:, None] - (draws.v - mu[:, None]) / (lam + 2 * beta)
    q = np.where(entered, q, 0.0)
    p = draws.u - beta * q.sum(axis=1)
    return EntryOutcome(q, p, entered, mu, s_bar)


@dataclass
class ConditionalCostTable:
    """F_{V|S}(v | s), rows over s and columns over v"""
    s: np.ndarray
    v: np.ndarray
    cdf: np.ndarray

    def at(self, s):
        k = int(np.argmin(np.abs(self.s - s)))
        return self.cdf[k]


def recover_fv_given_s(s_grid, v_grid, truncated_cdf, h_max=None, monotone=True,
                       tolerances=DEFAULT_TOLERANCES):
    """
    F_{V|S}(v | s) = d/ds [s F*(v; s)] by finite differences on the s-grid,
    clipped to [0, 1] and made nondecreasing in v
    """
    s = np.asarray(s_grid, dtype=float)
    v = np.asarray(v_grid, dtype=float)
    table = np.asarray(truncated_cdf, dtype=float)
    h_max = tolerances.entry_h_max if h_max is None else h_max
    if table.shape != (s.size, v.size):
        raise InvalidSpecError(f"truncated CDF table has shape {table.shape}, expected {(s.size, v.size)}")
    if s.size < 3 or np.any(np.diff(s) <= 0):
        raise InvalidSpecError("signal grid needs at least three strictly increasing points")
    if np.max(np.diff(s)) > h_max:
        raise InvalidSpecError(f"signal grid spacing {np.max(np.diff(s)):.4g} exceeds {h_max}")
    cdf = np.clip(np.gradient(s[:, None] * table, s, axis=0), 0.0, 1.0)
    if monotone:
        cdf = np.vstack([isotonic_regression(row).x for row in cdf])
    return ConditionalCostTable(s, v, cdf)
