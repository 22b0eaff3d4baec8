"""
Estimation - Parametric pipeline for the private-cost Cournot model
Exponential-trend removal by nonlinear least squares, the (H1, H2) change of
variables, the latent-shock likelihood, multistart Nelder-Mead MLE and
subsampling confidence intervals
"""

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import minimize, minimize_scalar
from scipy.special import expit, logit, logsumexp

from .config import DEFAULT_TOLERANCES
from .distributions import beta_log_density, rng_stream
from .errors import (BlockSizeError, CournotModelError, FlatObjectiveWarning,
                     InvalidSpecError, NoImprovementError)
from .panel_io import Panel


# Trend removal

@dataclass
class DetrendResult:
    tau_hat: float
    c1_hat: np.ndarray
    c2_hat: np.ndarray
    panel: Panel
    rss: float
    rss_no_trend: float
    trend_detected: bool

    def to_dict(self):
        return {'tau_hat': self.tau_hat, 'c1_hat': self.c1_hat.tolist(),
                'c2_hat': self.c2_hat.tolist(), 'rss': self.rss,
                'rss_no_trend': self.rss_no_trend, 'trend_detected': self.trend_detected}


def _profile_trend(t, q, tau):
    """Per-firm OLS of Q_t on (1, -exp(-tau t)); returns (rss, c1, c2)"""
    design = np.column_stack([np.ones_like(t), -np.exp(-tau * t)])
    coef, _, _, _ = np.linalg.lstsq(design, q, rcond=None)
    resid = q - design @ coef
    return float(np.sum(resid ** 2)), coef[1], coef[0]


def detrend(panel, tolerances=DEFAULT_TOLERANCES):
    """
    argmin over (tau, c1, c2) of sum_t ||Q_t + c1 exp(-tau t) - c2||^2, profiled in tau.
    The trend is kept only when it beats the intercept-only fit on BIC
    """
    T, n = panel.n_periods, panel.n_firms
    if T < n + 2:
        raise InvalidSpecError(f"detrending needs T >= I + 2, got T={T}, I={n}")
    t = panel.t - panel.t.min() + 1
    q = panel.q
    c2_flat = q.mean(axis=0)
    rss0 = float(np.sum((q - c2_flat) ** 2))

    log_grid = np.linspace(np.log(tolerances.tau_min), np.log(tolerances.tau_max), tolerances.tau_grid)
    profile = np.array([_profile_trend(t, q, np.exp(x))[0] for x in log_grid])
    k = int(np.argmin(profile))
    lo, hi = log_grid[max(k - 1, 0)], log_grid[min(k + 1, log_grid.size - 1)]
    refined = minimize_scalar(lambda x: _profile_trend(t, q, np.exp(x))[0],
                              bounds=(lo, hi), method='bounded')
    best_x = refined.x if refined.fun <= profile[k] else log_grid[k]
    rss, c1, c2 = _profile_trend(t, q, np.exp(best_x))

    total = T * n
    gain = total * np.log(max(rss0, 1e-300) / max(rss, 1e-300))
    penalty = tolerances.trend_bic_weight * (n + 1) * np.log(total)
    if rss0 <= 0 or gain <= penalty:
        warnings.warn("no exponential trend detected; tau set to 0", FlatObjectiveWarning, stacklevel=2)
        return DetrendResult(0.0, np.zeros(n), c2_flat, panel.with_quantities(q.copy()),
                             rss0, rss0, False)

    tau = float(np.exp(best_x))
    q_dt = q + np.outer(np.exp(-tau * t), c1)
    return DetrendResult(tau, c1, c2, panel.with_quantities(q_dt), rss, rss0, True)


# Change of variables

def h1_matrix(beta, lam, n_firms):
    """(I+1) x (I+1) map from (U, W/(lam+(I+1)beta) + V/(lam+2beta)) to (P, Q)"""
    L = lam + (n_firms + 1) * beta
    h1 = np.zeros((n_firms + 1, n_firms + 1))
    h1[0, 0] = (lam + beta) / L
    h1[0, 1:] = beta
    h1[1:, 0] = 1.0 / L
    h1[1:, 1:] = -np.eye(n_firms)
    return h1


def h2_vector(prim):
    """Intercepts: quantity part from the cost means, price part -beta * sum"""
    tail = -prim.mean_shift / prim.total_slope + prim.mu_v / prim.own_slope
    return np.concatenate([[-prim.beta * tail.sum()], tail])


def observables_from_latent(prim, u, v_star):
    """(p, q) = H1 (u, v*) + H2, vectorised over rows"""
    h2 = h2_vector(prim)
    u = np.asarray(u, dtype=float)
    v_star = np.atleast_2d(np.asarray(v_star, dtype=float))
    q = u[..., None] / prim.total_slope - v_star + h2[1:]
    p = (prim.lam + prim.beta) / prim.total_slope * u + prim.beta * v_star.sum(axis=-1) + h2[0]
    return p, q


def latent_from_observables(prim, p, q):
    """Inverse map: u = p + beta Q+, v*_i = u / (lam+(I+1)beta) + H2_{i+1} - q_i"""
    h2 = h2_vector(prim)
    q = np.atleast_2d(np.asarray(q, dtype=float))
    u = np.asarray(p, dtype=float) + prim.beta * q.sum(axis=-1)
    v_star = u[..., None] / prim.total_slope + h2[1:] - q
    return u, v_star


def composite_cost(prim, w, v):
    """v* = W / (lam+(I+1)beta) + V / (lam+2beta)"""
    return np.asarray(w, dtype=float)[..., None] / prim.total_slope + np.asarray(v) / prim.own_slope


# Likelihood

@dataclass
class RowLikelihood:
    values: np.ndarray
    violation: np.ndarray

    @property
    def valid(self):
        return self.violation == 0


def row_log_likelihood(theta, panel, nodes=None, tolerances=DEFAULT_TOLERANCES):
    """
    Per-row log f_U(u) + log f_{V*|U}(v*|u). The common-shock integral runs over
    the w~ window where every implied Beta draw stays inside its truncation
    """
    nodes = nodes or tolerances.gl_nodes
    prim = theta.primitives(check=False)
    L, D, wb = prim.total_slope, prim.own_slope, theta.w_bar
    t_lo, t_hi = theta.truncation
    u, v_star = latent_from_observables(prim, panel.p, panel.q)
    T = u.size

    w_min, w_max = wb * (2 * t_lo - 1) / L, wb * (2 * t_hi - 1) / L
    lo = np.maximum(v_star.max(axis=1) - (1 + t_hi) * wb / D, w_min)
    hi = np.minimum(v_star.min(axis=1) - (1 + t_lo) * wb / D, w_max)
    violation = np.maximum(lo - hi, 0.0) + np.maximum(theta.u_lower - u, 0.0)

    values = np.full(T, -np.inf)
    ok = violation == 0
    if np.any(ok):
        x, wts = leggauss(nodes)
        mid, half = 0.5 * (hi[ok] + lo[ok]), 0.5 * (hi[ok] - lo[ok])
        w_nodes = mid[:, None] + half[:, None] * x
        shapes = np.array([theta.group_shapes[g] for g in theta.group_map])
        b_draw = (v_star[ok][:, None, :] - w_nodes[..., None]) * D / wb - 1
        log_v = np.sum(beta_log_density(b_draw, shapes[:, 0], shapes[:, 1], t_lo, t_hi), axis=-1)
        log_v += theta.n_firms * np.log(D / wb)
        a_w = theta.common_shock_spec().shape(u[ok])[:, None]
        log_w = beta_log_density(w_nodes * L / (2 * wb) + 0.5, a_w, a_w, t_lo, t_hi) + np.log(L / (2 * wb))
        inner = logsumexp(log_v + log_w + np.log(wts) + np.log(half)[:, None], axis=1)
        values[ok] = theta.demand_spec().log_density(u[ok]) + inner
    return RowLikelihood(values, violation)


def log_likelihood(theta, panel, penalized=True, nodes=None, tolerances=DEFAULT_TOLERANCES):
    """Sum of row log-likelihoods; with penalized=True unsupported rows cost
    log_penalty - penalty_slope * violation instead of -inf"""
    rows = row_log_likelihood(theta, panel, nodes, tolerances)
    if not penalized:
        return float(np.sum(rows.values))
    penalty = tolerances.log_penalty - tolerances.penalty_slope * rows.violation
    return float(np.sum(np.where(np.isfinite(rows.values), rows.values, penalty)))


# Parameter box and transforms

@dataclass
class ThetaBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or np.any(self.lower > self.upper):
            raise InvalidSpecError("box lower bounds must not exceed upper bounds")

    @classmethod
    def around(cls, theta, halfwidth=None):
        """Default box: +/- halfwidth relative to each start value"""
        h = DEFAULT_TOLERANCES.box_halfwidth if halfwidth is None else halfwidth
        x0 = theta.to_vector()
        spread = h * np.where(x0 != 0, np.abs(x0), 1.0)
        lower = x0 - spread
        # positive parameters stay positive; lambda may reach zero
        lower = np.where(x0 > 0, np.maximum(lower, 0.0), lower)
        return cls(lower, x0 + spread)

    @property
    def free(self):
        return self.upper > self.lower

    def contains(self, x):
        return bool(np.all(x >= self.lower - 1e-12) and np.all(x <= self.upper + 1e-12))

    def to_unconstrained(self, x):
        """logit inside finite boxes, log above a finite lower bound"""
        x = np.asarray(x, dtype=float)[self.free]
        lo, hi = self.lower[self.free], self.upper[self.free]
        finite = np.isfinite(hi)
        y = np.empty_like(x)
        frac = np.clip((x[finite] - lo[finite]) / (hi[finite] - lo[finite]), 1e-9, 1 - 1e-9)
        y[finite] = logit(frac)
        y[~finite] = np.log(np.maximum(x[~finite] - lo[~finite], 1e-12))
        return y

    def from_unconstrained(self, y, template):
        x = np.asarray(template, dtype=float).copy()
        lo, hi = self.lower[self.free], self.upper[self.free]
        finite = np.isfinite(hi)
        free_x = np.empty_like(y)
        free_x[finite] = lo[finite] + (hi[finite] - lo[finite]) * expit(y[finite])
        free_x[~finite] = lo[~finite] + np.exp(y[~finite])
        x[self.free] = free_x
        return x

    def jitter(self, rng):
        x = rng.uniform(self.lower, self.upper)
        return np.where(self.free, x, self.lower)


@dataclass
class EstimationResult:
    theta: object
    log_likelihood: float
    penalized_log_likelihood: float
    starts: list = field(default_factory=list)

    @property
    def converged(self):
        return any(s['success'] for s in self.starts)

    def to_dict(self):
        return {'theta': self.theta.to_dict(),
                'log_likelihood': self.log_likelihood,
                'penalized_log_likelihood': self.penalized_log_likelihood,
                'converged': self.converged,
                'starts': self.starts}


class MaximumLikelihoodEstimator:
    """Multistart Nelder-Mead over a transformed box"""

    def __init__(self, box=None, n_starts=None, seed=0, tolerances=DEFAULT_TOLERANCES,
                 nodes=None, verbose=True):
        self.box = box
        self.n_starts = tolerances.multistart if n_starts is None else n_starts
        self.seed = seed
        self.tolerances = tolerances
        self.nodes = nodes
        self.verbose = verbose

    def _objective(self, y, start, box, panel):
        try:
            theta = start.from_vector(box.from_unconstrained(y, start.to_vector()))
            value = log_likelihood(theta, panel, True, self.nodes, self.tolerances)
        except (CournotModelError, FloatingPointError, ValueError):
            return 1e300
        return -value if np.isfinite(value) else 1e300

    def fit(self, panel, start):
        box = self.box or ThetaBox.around(start, self.tolerances.box_halfwidth)
        if not box.contains(start.to_vector()):
            raise InvalidSpecError("start lies outside the parameter box")
        rng = rng_stream(self.seed, 99)
        origins = [start.to_vector()] + [box.jitter(rng) for _ in range(max(self.n_starts - 1, 0))]
        tol = self.tolerances

        best, best_value, records = None, np.inf, []
        for k, x0 in enumerate(origins):
            try:
                res = minimize(self._objective, box.to_unconstrained(x0), args=(start, box, panel),
                               method='Nelder-Mead',
                               options={'xatol': tol.nm_xatol, 'fatol': tol.nm_fatol,
                                        'maxiter': tol.nm_maxiter, 'adaptive': True})
            except (CournotModelError, ValueError) as e:
                if self.verbose:
                    print(f"❌ Start {k + 1} failed: {e}")
                records.append({'start': k, 'success': False, 'value': None, 'message': str(e)})
                continue
            records.append({'start': k, 'success': bool(res.success), 'value': float(-res.fun),
                            'n_evals': int(res.nfev), 'message': str(res.message)})
            if self.verbose:
                print(f"🔄 Start {k + 1}/{len(origins)}: log-lik {-res.fun:.4f} ({res.nfev} evals)")
            if res.fun < best_value:
                best, best_value = res, res.fun

        if best is None or best_value >= 1e300:
            raise NoImprovementError("every optimiser start failed")
        theta_hat = start.from_vector(box.from_unconstrained(best.x, start.to_vector()))
        plain = log_likelihood(theta_hat, panel, False, self.nodes, self.tolerances)
        if self.verbose:
            print(f"✅ MLE finished: log-lik {plain:.4f}")
        return EstimationResult(theta_hat, plain, float(-best_value), records)


def estimate(panel, start, box=None, n_starts=None, seed=0, tolerances=DEFAULT_TOLERANCES,
             nodes=None, verbose=False):
    """argmax of the log-likelihood over the box (theta_hat plus diagnostics)"""
    estimator = MaximumLikelihoodEstimator(box, n_starts, seed, tolerances, nodes, verbose)
    return estimator.fit(panel, start)


def estimate_pipeline(panel, start, box=None, n_starts=None, seed=0, detrend_first=True,
                      tolerances=DEFAULT_TOLERANCES, verbose=False):
    """Detrend (optional) then estimate"""
    trend = None
    if detrend_first:
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', FlatObjectiveWarning)
            trend = detrend(panel, tolerances)
        panel = trend.panel
    result = estimate(panel, start, box, n_starts, seed, tolerances, verbose=verbose)
    return result, trend


# Subsampling

@dataclass
class ConfidenceIntervals:
    names: tuple
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    block_size: int
    n_blocks: int
    method: str
    replicates: np.ndarray = field(repr=False, default=None)
    failures: list = field(default_factory=list)

    @property
    def n_excluded(self):
        return len(self.failures)

    def to_dict(self):
        return {'level': self.level, 'block_size': self.block_size, 'n_blocks': self.n_blocks,
                'n_excluded': self.n_excluded, 'failures': self.failures, 'method': self.method,
                'intervals': {name: {'estimate': float(e), 'lower': float(lo), 'upper': float(hi)}
                              for name, e, lo, hi in zip(self.names, self.estimate, self.lower, self.upper)}}


def default_block_size(n_periods, exponent=None):
    exponent = DEFAULT_TOLERANCES.block_exponent if exponent is None else exponent
    return int(np.floor(n_periods ** exponent + 1e-9))


def block_starts(n_periods, block_size, max_blocks=None, seed=0):
    """Start rows of contiguous blocks; a random subset when there are too many"""
    if block_size > n_periods:
        raise BlockSizeError(f"block size {block_size} exceeds sample size {n_periods}")
    max_blocks = DEFAULT_TOLERANCES.max_blocks if max_blocks is None else max_blocks
    starts = np.arange(n_periods - block_size + 1)
    if starts.size > max_blocks:
        starts = np.sort(rng_stream(seed, 7).choice(starts, size=max_blocks, replace=False))
    return starts


def subsample_ci(panel, theta_hat, block_size=None, level=0.95, estimator=None, max_blocks=None,
                 seed=0, method='symmetric', threads=1, n_starts=None,
                 tolerances=DEFAULT_TOLERANCES, verbose=False):
    """
    Subsampling intervals with root sqrt(b) (theta_b - theta_hat) rescaled by sqrt(T).
    'symmetric' uses the |root| quantile; 'equal-tailed' the two root quantiles.
    Blocks whose re-estimation fails are reported and left out
    """
    T = panel.n_periods
    b = default_block_size(T, tolerances.block_exponent) if block_size is None else int(block_size)
    max_blocks = tolerances.max_blocks if max_blocks is None else max_blocks
    starts = block_starts(T, b, max_blocks, seed)
    if estimator is None:
        def estimator(block):
            return estimate(block, theta_hat, n_starts=n_starts, seed=seed,
                            tolerances=tolerances).theta.to_vector()
    center = theta_hat.to_vector() if hasattr(theta_hat, 'to_vector') else np.asarray(theta_hat, float)
    names = getattr(theta_hat, 'names', tuple(f'theta_{k}' for k in range(center.size)))

    def run_block(s):
        try:
            return s, np.asarray(estimator(panel.rows(s, s + b)), float), None
        except CournotModelError as e:
            if verbose:
                print(f"❌ Block starting at row {s} excluded: {e}")
            return s, None, str(e)

    workers = os.cpu_count() if threads == 0 else max(int(threads), 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(run_block, starts))
    kept = [x for _, x, err in outcomes if err is None]
    failures = [{'start': int(s), 'error': err} for s, _, err in outcomes if err is not None]
    if not kept:
        raise NoImprovementError(f"re-estimation failed on all {len(starts)} blocks")
    draws = np.vstack(kept)
    if verbose:
        print(f"📊 Subsampling: {len(kept)} blocks of length {b}, {len(failures)} excluded")

    roots = np.sqrt(b) * (draws - center)
    if method == 'symmetric':
        c = np.quantile(np.abs(roots), level, axis=0)
        lower, upper = center - c / np.sqrt(T), center + c / np.sqrt(T)
    elif method == 'equal-tailed':
        a = (1 - level) / 2
        lower = center - np.quantile(roots, 1 - a, axis=0) / np.sqrt(T)
        upper = center - np.quantile(roots, a, axis=0) / np.sqrt(T)
    else:
        raise InvalidSpecError(f"unknown interval method '{method}'")
    return ConfidenceIntervals(tuple(names), center, lower, upper, level, b, len(kept), method, draws,
                               failures)
