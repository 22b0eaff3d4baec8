"""
Counterfactual - Firm grouping and information-regime comparison
k-means on (mean, SD) of output, and private- versus complete-information
markets simulated on common random numbers
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.integrate import quad

from .config import DEFAULT_TOLERANCES
from .core_model import complete_info_batch, consumer_surplus, equilibrium_quantities
from .distributions import rng_stream
from .errors import InvalidSpecError
from .simulator import draw_shocks


# Grouping

@dataclass
class GroupingResult:
    k: int
    centroids: np.ndarray
    assignment: np.ndarray
    within_ss: float
    features: np.ndarray

    def to_dict(self):
        return {'k': self.k, 'centroids': self.centroids.tolist(),
                'assignment': [int(g) for g in self.assignment],
                'within_ss': self.within_ss}


def _plus_plus(x, k, rng):
    centers = [x[rng.integers(x.shape[0])]]
    for _ in range(1, k):
        d2 = np.min(((x[:, None, :] - np.array(centers)[None]) ** 2).sum(axis=2), axis=1)
        total = d2.sum()
        pick = rng.integers(x.shape[0]) if total == 0 else rng.choice(x.shape[0], p=d2 / total)
        centers.append(x[pick])
    return np.array(centers, dtype=float)


def _lloyd(x, centers, max_iter):
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centers[None]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        updated = centers.copy()
        for g in range(centers.shape[0]):
            members = labels == g
            if members.any():
                updated[g] = x[members].mean(axis=0)
            else:
                # empty cluster takes the point farthest from its centre
                updated[g] = x[np.argmax(d2[np.arange(x.shape[0]), labels])]
        if np.allclose(updated, centers, rtol=0, atol=1e-12):
            break
        centers = updated
    d2 = ((x[:, None, :] - centers[None]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    return centers, labels, float(d2[np.arange(x.shape[0]), labels].sum())


def kmeans_firms(panel, k, seed=0, restarts=None, tolerances=DEFAULT_TOLERANCES):
    """Lloyd iterations from k-means++ starts on each firm's (mean, SD) of output"""
    n = panel.n_firms
    if not 1 <= k <= n:
        raise InvalidSpecError(f"k must lie in [1, {n}], got {k}")
    x = np.column_stack([panel.q.mean(axis=0), panel.q.std(axis=0)])
    restarts = tolerances.kmeans_restarts if restarts is None else restarts
    rng = rng_stream(seed, 11)

    best = None
    for _ in range(restarts):
        fit = _lloyd(x, _plus_plus(x, k, rng), tolerances.kmeans_max_iter)
        if best is None or fit[2] < best[2] - 1e-12:
            best = fit
    centers, labels, ss = best

    # groups numbered by increasing mean output
    order = np.argsort(centers[:, 0], kind='stable')
    relabel = np.empty(k, dtype=int)
    relabel[order] = np.arange(k)
    return GroupingResult(k, centers[order], relabel[labels], ss, x)


# Information regimes

def consumer_surplus_by_quadrature(beta, u, total_output):
    """int_0^Q (u - beta x) dx - (u - beta Q) Q"""
    value, _ = quad(lambda x: u - beta * x, 0.0, total_output, epsabs=1e-13, epsrel=1e-13)
    return value - (u - beta * total_output) * total_output


@dataclass
class RegimeComparison:
    q_incomplete: np.ndarray
    q_complete: np.ndarray
    p_incomplete: np.ndarray
    p_complete: np.ndarray
    cs_incomplete: np.ndarray
    cs_complete: np.ndarray
    group_map: np.ndarray
    n_sims: int

    @property
    def cs_ratio(self):
        return float(self.cs_complete.sum() / self.cs_incomplete.sum())

    def group_series(self, regime='incomplete'):
        """Per-period output averaged over firms within each group"""
        q = self.q_incomplete if regime == 'incomplete' else self.q_complete
        groups = np.unique(self.group_map)
        return np.column_stack([q[:, self.group_map == g].mean(axis=1) for g in groups])

    def to_frame(self):
        frames = []
        for regime, p, cs in (('incomplete', self.p_incomplete, self.cs_incomplete),
                              ('complete', self.p_complete, self.cs_complete)):
            frame = pd.DataFrame({'period': np.arange(1, p.size + 1), 'regime': regime,
                                  'p': p, 'cs': cs})
            series = self.group_series(regime)
            for g in range(series.shape[1]):
                frame[f'q_group{g + 1}'] = series[:, g]
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)

    def to_dict(self):
        return {'n_sims': self.n_sims, 'n_periods': int(self.p_incomplete.size),
                'cs_ratio': self.cs_ratio,
                'mean_cs_incomplete': float(self.cs_incomplete.mean()),
                'mean_cs_complete': float(self.cs_complete.mean()),
                'mean_total_incomplete': float(self.q_incomplete.sum(axis=1).mean()),
                'mean_total_complete': float(self.q_complete.sum(axis=1).mean())}


def _one_simulation(prim, u_spec, w_spec, v_specs, T, seed, s):
    u, w, v = draw_shocks(u_spec, w_spec, v_specs, T, seed, replication=s)
    q_inc = equilibrium_quantities(prim, v, w, u)
    q_com = complete_info_batch(prim, v, w, u)
    p_inc = u - prim.beta * q_inc.sum(axis=1)
    p_com = u - prim.beta * q_com.sum(axis=1)
    return (q_inc, q_com, p_inc, p_com,
            consumer_surplus(prim.beta, q_inc.sum(axis=1)), consumer_surplus(prim.beta, q_com.sum(axis=1)))


def compare_regimes_for(prim, u_spec, w_spec, v_specs, T_sim=336, n_sims=100, seed=0,
                        group_map=None, threads=1):
    """Both regimes on the same shock draws; averages over simulations per period"""
    if n_sims < 1 or T_sim < 1:
        raise InvalidSpecError("need n_sims >= 1 and T_sim >= 1")
    workers = os.cpu_count() if threads == 0 else max(int(threads), 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        runs = list(pool.map(lambda s: _one_simulation(prim, u_spec, w_spec, v_specs, T_sim, seed, s),
                             range(n_sims)))
    stacked = [np.mean([run[k] for run in runs], axis=0) for k in range(6)]
    groups = np.zeros(prim.n_firms, dtype=int) if group_map is None else np.asarray(group_map, dtype=int)
    return RegimeComparison(*stacked, groups, n_sims)


def compare_regimes(theta_hat, T_sim=336, n_sims=100, seed=0, group_map=None, threads=1):
    """Private- versus complete-information outcomes under the estimated theta"""
    group_map = theta_hat.group_map if group_map is None else group_map
    return compare_regimes_for(theta_hat.primitives(check=True), theta_hat.demand_spec(),
                               theta_hat.common_shock_spec(), theta_hat.cost_specs(),
                               T_sim, n_sims, seed, group_map, threads)
