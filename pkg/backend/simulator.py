"""
Simulator - Market panels from theta and the Monte Carlo runner
Exponential trends enter the demand shock and the private costs;
quantities follow the Bayesian Cournot-Nash strategies
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .config import DEFAULT_TOLERANCES
from .core_model import complete_info_batch, equilibrium_quantities
from .distributions import rng_stream
from .errors import CournotModelError, InvalidSpecError, NegativeQuantityError
from .estimation import estimate_pipeline
from .panel_io import LatentDraws, Panel

# stream ids inside one replication: U, W, then one per firm
U_STREAM, W_STREAM, FIRST_FIRM_STREAM = 0, 1, 2


@dataclass(frozen=True, eq=False)
class TrendSpec:
    """V_it = tau_s_i e^{-tau t} + V_it^dt and U_t = tau_d e^{-tau t} + U_t^dt"""
    tau: float = 0.0
    tau_s: np.ndarray = None

    def __post_init__(self):
        tau_s = np.zeros(0) if self.tau_s is None else np.asarray(self.tau_s, dtype=float).reshape(-1)
        object.__setattr__(self, 'tau_s', tau_s)
        if self.tau < 0 or np.any(tau_s < 0):
            raise InvalidSpecError("trend rates must be nonnegative")

    @classmethod
    def none(cls, n_firms):
        return cls(0.0, np.zeros(n_firms))

    @property
    def is_zero(self):
        return not np.any(self.tau_s)

    def tau_d(self, beta, lam):
        """Demand trend that keeps prices trend-free"""
        return -beta / (lam + beta) * float(self.tau_s.sum())

    def decay(self, t):
        return np.exp(-self.tau * np.asarray(t, dtype=float))

    def cost_shift(self, t, n_firms):
        s = self.tau_s if self.tau_s.size else np.zeros(n_firms)
        if s.size != n_firms:
            raise InvalidSpecError(f"tau_s has {s.size} entries for {n_firms} firms")
        return np.outer(self.decay(t), s)

    def to_dict(self):
        return {'tau': float(self.tau), 'tau_s': self.tau_s.tolist()}


def common_shock_draws(w_spec, u, rng):
    """W draws, conditional on U when the family supports it"""
    if hasattr(w_spec, 'sample_given'):
        return w_spec.sample_given(u, rng)
    return w_spec.sample(rng, u.size)


def draw_shocks(u_spec, w_spec, v_specs, T, seed, replication=0):
    """
    Stationary draws U, W | U and V_1..V_I from explicit shock families.
    Every shock has its own stream so firms can be added without moving the others
    """
    if T < 1:
        raise InvalidSpecError(f"T must be at least 1, got {T}")
    u = u_spec.sample(rng_stream(seed, (replication, U_STREAM)), T)
    w = common_shock_draws(w_spec, u, rng_stream(seed, (replication, W_STREAM)))
    v = np.column_stack([
        spec.sample(rng_stream(seed, (replication, FIRST_FIRM_STREAM + i)), T)
        for i, spec in enumerate(v_specs)])
    return u, w, v


def draw_latent(theta, T, seed, replication=0, trend=None):
    """Draws under theta plus their trend-inclusive values"""
    trend = trend or TrendSpec.none(theta.n_firms)
    u_dt, w, v_dt = draw_shocks(theta.demand_spec(), theta.common_shock_spec(),
                                theta.cost_specs(), T, seed, replication)
    t = np.arange(1, T + 1, dtype=float)
    u = u_dt + trend.tau_d(theta.beta, theta.lam) * trend.decay(t)
    v = v_dt + trend.cost_shift(t, theta.n_firms)
    return LatentDraws(t, u, w, v, u_dt, v_dt)


def _as_panel(latent, p, q, group_map):
    if np.any(q < 0) or np.any(p < 0):
        row = int(np.flatnonzero((q < 0).any(axis=1) | (p < 0))[0])
        raise NegativeQuantityError(
            f"negative quantity or price in period {int(latent.t[row])}; theta lies outside the admissible set")
    return Panel(latent.t, p, q, group_map)


def simulate_panel(theta, trend=None, T=350, seed=0, replication=0):
    """Panel of (P_t, Q_t) plus the latent draws behind it"""
    prim = theta.primitives(check=True)
    trend = trend or TrendSpec.none(theta.n_firms)
    latent = draw_latent(theta, T, seed, replication, trend)
    mu_t = prim.mu_v + trend.cost_shift(latent.t, theta.n_firms)
    q = equilibrium_quantities(prim, latent.v, latent.w, latent.u, mu_v=mu_t)
    p = latent.u - theta.beta * q.sum(axis=1)
    return _as_panel(latent, p, q, theta.group_map), latent


def simulate_complete_info_panel(theta, T=350, seed=0, replication=0, latent=None):
    """Same latent draws, but every firm sees every cost (complete information)"""
    prim = theta.primitives(check=True)
    latent = latent or draw_latent(theta, T, seed, replication)
    q = complete_info_batch(prim, latent.v, latent.w, latent.u)
    p = latent.u - theta.beta * q.sum(axis=1)
    return _as_panel(latent, p, q, theta.group_map), latent


def simulate_from_specs(prim, u_spec, w_spec, v_specs, T, seed=0, replication=0,
                        complete_info=False):
    """
    Panel from primitives and explicit shock families (no trend). The cost
    means in `prim` must be the means of `v_specs`
    """
    if len(v_specs) != prim.n_firms:
        raise InvalidSpecError(f"{len(v_specs)} cost families for {prim.n_firms} firms")
    u, w, v = draw_shocks(u_spec, w_spec, v_specs, T, seed, replication)
    latent = LatentDraws(np.arange(1, T + 1, dtype=float), u, w, v)
    if complete_info:
        q = complete_info_batch(prim, v, w, u)
    else:
        q = equilibrium_quantities(prim, v, w, u)
    p = u - prim.beta * q.sum(axis=1)
    return _as_panel(latent, p, q, None), latent


# Monte Carlo

@dataclass
class MCResult:
    names: tuple
    truth: np.ndarray
    estimates: np.ndarray
    n_periods: int
    n_reps: int
    failures: list = field(default_factory=list)

    @property
    def n_excluded(self):
        return len(self.failures)

    def _scale(self):
        return np.where(self.truth != 0, np.abs(self.truth), 1.0)

    @property
    def bias(self):
        return (self.estimates - self.truth).mean(axis=0) / self._scale()

    @property
    def sd(self):
        return self.estimates.std(axis=0, ddof=0) / self._scale()

    @property
    def rmse(self):
        return np.sqrt(((self.estimates - self.truth) ** 2).mean(axis=0)) / self._scale()

    def table(self):
        """Relative bias, SD and RMSE per parameter"""
        return pd.DataFrame({'parameter': list(self.names), 'true': self.truth,
                             'bias': self.bias, 'sd': self.sd, 'rmse': self.rmse})

    def to_dict(self):
        return {'n_periods': self.n_periods, 'n_reps': self.n_reps,
                'n_used': int(self.estimates.shape[0]), 'n_excluded': self.n_excluded,
                'failures': self.failures,
                'summary': self.table().to_dict(orient='records'),
                'estimates': {n: self.estimates[:, k].tolist() for k, n in enumerate(self.names)}}


class MonteCarloRunner:
    """Simulate, estimate and summarise; replications run on independent streams"""

    def __init__(self, theta_true, T=350, n_reps=50, seed=2024, trend=None, n_starts=None,
                 box=None, threads=1, tolerances=DEFAULT_TOLERANCES, verbose=True):
        if n_reps < 1:
            raise InvalidSpecError("need at least one replication")
        self.theta_true = theta_true
        self.T = int(T)
        self.n_reps = int(n_reps)
        self.seed = seed
        self.trend = trend or TrendSpec.none(theta_true.n_firms)
        self.n_starts = tolerances.multistart if n_starts is None else n_starts
        self.box = box
        self.threads = os.cpu_count() if threads == 0 else max(int(threads), 1)
        self.tolerances = tolerances
        self.verbose = verbose

    def _replicate(self, r):
        try:
            panel, _ = simulate_panel(self.theta_true, self.trend, self.T, self.seed, replication=r)
            result, _ = estimate_pipeline(panel, self.theta_true, self.box, self.n_starts,
                                          seed=self.seed + r, detrend_first=not self.trend.is_zero,
                                          tolerances=self.tolerances)
        except CournotModelError as e:
            if self.verbose:
                print(f"❌ Replication {r + 1} excluded: {e}")
            return r, None, str(e)
        if self.verbose:
            print(f"🔄 Replication {r + 1}/{self.n_reps} done (log-lik {result.log_likelihood:.2f})")
        return r, result.theta.to_vector(), None

    def run(self):
        if self.verbose:
            print(f"🎲 Monte Carlo: {self.n_reps} replications, T={self.T}, {self.threads} thread(s)")
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            outcomes = list(pool.map(self._replicate, range(self.n_reps)))

        outcomes.sort(key=lambda o: o[0])
        kept = [x for _, x, err in outcomes if err is None]
        failures = [{'replication': r, 'error': err} for r, _, err in outcomes if err is not None]
        truth = self.theta_true.to_vector()
        estimates = np.vstack(kept) if kept else np.empty((0, truth.size))
        result = MCResult(self.theta_true.names, truth, estimates, self.T, self.n_reps, failures)
        if self.verbose:
            print(f"📊 Monte Carlo finished: {estimates.shape[0]} used, {len(failures)} excluded")
        return result


def run_monte_carlo(theta_true, T=350, n_reps=50, seed=2024, **options):
    return MonteCarloRunner(theta_true, T, n_reps, seed, **options).run()
