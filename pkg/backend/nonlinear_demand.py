"""
Nonlinear Demand - Cournot with private costs under a nonlinear inverse demand
Grid best-response solver, an analytic population source and the
closed-form identification of the log-linear case
"""

from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from .config import DEFAULT_TOLERANCES
from .distributions import rng_stream
from .errors import (AssumptionViolationError, InvalidSpecError, NonConvergenceError,
                     SingularSystemError, ZeroDenominatorError)
from .sources import BoundaryEvent, _w_given, probability_nodes


@dataclass(frozen=True)
class NonlinearDemandSpec:
    """
    Inverse demand p(c, u; beta) with c total output and u the demand shock.
    'loglinear': p = exp(u - beta c); 'linear': p = u - beta c
    """
    beta: float
    form: str = 'loglinear'

    FORMS = ('loglinear', 'linear')

    def __post_init__(self):
        if self.form not in self.FORMS:
            raise InvalidSpecError(f"unknown demand form '{self.form}', expected one of {self.FORMS}")
        if not self.beta > 0:
            raise InvalidSpecError(f"beta must be positive, got {self.beta}")

    def with_beta(self, beta):
        return replace(self, beta=float(beta))

    def price(self, c, u):
        c = np.asarray(c, dtype=float)
        if self.form == 'loglinear':
            return np.exp(u - self.beta * c)
        return u - self.beta * c

    def d_price(self, c, u):
        """Partial derivative in total output"""
        if self.form == 'loglinear':
            return -self.beta * self.price(c, u)
        return np.full_like(np.asarray(c, dtype=float), -self.beta)

    def d2_price(self, c, u):
        if self.form == 'loglinear':
            return self.beta ** 2 * self.price(c, u)
        return np.zeros_like(np.asarray(c, dtype=float))

    def demand_shock(self, c, p):
        """Functional inverse of p in u: the shock that rationalises price p at output c"""
        c, p = np.asarray(c, dtype=float), np.asarray(p, dtype=float)
        if self.form == 'loglinear':
            if np.any(p <= 0):
                raise InvalidSpecError("log-linear demand needs strictly positive prices")
            return np.log(p) + self.beta * c
        return p + self.beta * c

    def quantity_cap(self, u):
        """Output beyond which marginal revenue is negative whatever the rivals do"""
        if self.form == 'loglinear':
            return 1.0 / self.beta
        return max(float(u), 0.0) / self.beta

    def check(self, c_grid, u_grid, step=1e-6):
        """Positive, decreasing in output and increasing in the shock, by finite differences"""
        c, u = np.meshgrid(np.asarray(c_grid, float), np.asarray(u_grid, float))
        p = self.price(c, u)
        if self.form == 'loglinear' and np.any(p <= 0):
            raise AssumptionViolationError("inverse demand is not positive on the grid")
        if np.any(self.price(c + step, u) - p >= 0):
            raise AssumptionViolationError("inverse demand is not decreasing in output")
        if np.any(self.price(c, u + step) - p <= 0):
            raise AssumptionViolationError("inverse demand is not increasing in the demand shock")
        return True


@dataclass
class StrategyGrid:
    """One firm's strategy v -> q at fixed (w, u), linear between nodes"""
    firm: int
    v_nodes: np.ndarray
    q: np.ndarray
    w: float
    u: float

    def __post_init__(self):
        self.v_nodes = np.asarray(self.v_nodes, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        if self.v_nodes.shape != self.q.shape:
            raise InvalidSpecError("strategy grid nodes and values differ in shape")

    def at(self, v):
        if self.v_nodes.size == 1 or self.v_nodes[0] == self.v_nodes[-1]:
            return np.full_like(np.asarray(v, dtype=float), self.q[0])
        return np.interp(v, self.v_nodes, self.q)

    @property
    def is_monotone(self):
        return bool(np.all(np.diff(self.q) <= 0))

    def to_frame(self):
        return pd.DataFrame({'firm': self.firm + 1, 'w': self.w, 'u': self.u,
                             'v': self.v_nodes, 'q': self.q})


@dataclass
class RivalSupport:
    """Discrete law of Q+_{-i}: values with probability weights"""
    values: np.ndarray
    weights: np.ndarray

    def quantile(self, alphas):
        order = np.argsort(self.values, kind='stable')
        values, cum = self.values[order], np.cumsum(self.weights[order])
        mid = cum - 0.5 * self.weights[order]
        return np.interp(np.asarray(alphas, dtype=float), mid, values)


def _rival_nodes(v_specs, n_nodes):
    alpha, weight = probability_nodes(n_nodes)
    return [(spec.quantile(alpha), weight) for spec in v_specs]


class NonlinearEquilibrium:
    """Converged strategy grids at one (w, u) and the best replies they imply"""

    def __init__(self, spec, prim, v_specs, w, u, grids, sweeps, residual, tolerances, rival_nodes, seed):
        self.spec = spec
        self.prim = prim
        self.v_specs = list(v_specs)
        self.w = float(w)
        self.u = float(u)
        self.grids = grids
        self.sweeps = sweeps
        self.residual = residual
        self.tolerances = tolerances
        self.rival_nodes = rival_nodes
        self.seed = seed
        self._supports = {}

    @property
    def n_firms(self):
        return self.prim.n_firms

    def rival_support(self, i):
        if i not in self._supports:
            self._supports[i] = rival_support(self.grids, i, self.v_specs, self.rival_nodes,
                                              self.tolerances, self.seed)
        return self._supports[i]

    def best_reply(self, i, v):
        return best_reply(self.spec, self.prim.lam, v, self.w, self.u, self.rival_support(i),
                          self.tolerances)

    def marginal_revenue(self, i, q):
        """E[q dp(q + R) + p(q + R)] over rivals, vectorised over q"""
        support = self.rival_support(i)
        q = np.atleast_1d(np.asarray(q, dtype=float))
        c = q[:, None] + support.values[None, :]
        mr = (q[:, None] * self.spec.d_price(c, self.u) + self.spec.price(c, self.u)) @ support.weights
        return mr

    def foc_residual(self, i, v):
        q = np.atleast_1d(self.best_reply(i, v))
        return self.marginal_revenue(i, q) - (np.atleast_1d(v) + self.w) - self.prim.lam * q

    def to_frame(self):
        return pd.concat([g.to_frame() for g in self.grids], ignore_index=True)


def rival_support(grids, i, v_specs, n_nodes, tolerances=DEFAULT_TOLERANCES, seed=0):
    """
    Law of rivals' total output given their grids: tensor Gauss-Legendre in
    probability space up to tensor_max_firms firms, Monte Carlo beyond
    """
    rivals = [j for j in range(len(grids)) if j != i]
    if len(grids) <= tolerances.tensor_max_firms:
        values, weights = np.zeros(1), np.ones(1)
        for j, (v, wt) in zip(rivals, _rival_nodes([v_specs[j] for j in rivals], n_nodes)):
            values = np.add.outer(values, grids[j].at(v)).ravel()
            weights = np.multiply.outer(weights, wt).ravel()
        return RivalSupport(values, weights)
    # one fixed set of draws per firm so the mapping is deterministic across sweeps
    n = tolerances.rival_mc_draws
    values = np.zeros(n)
    for j in rivals:
        values += grids[j].at(v_specs[j].sample(rng_stream(seed, (17, j)), n))
    return RivalSupport(values, np.full(n, 1.0 / n))


def best_reply(spec, lam, v, w, u, support, tolerances=DEFAULT_TOLERANCES):
    """argmax_q q E[p(q + R, u)] - (v + w) q - lam q^2 / 2 on [0, cap], one search per v"""
    cap = spec.quantity_cap(u)
    values, weights = support.values, support.weights
    v_arr = np.atleast_1d(np.asarray(v, dtype=float))
    out = np.empty_like(v_arr)
    mr_zero = spec.price(values, u) @ weights
    for k, vk in enumerate(v_arr):
        marginal = vk + w
        if mr_zero - marginal <= 0:
            out[k] = 0.0
            continue

        def loss(q):
            return -(q * (spec.price(q + values, u) @ weights) - marginal * q - 0.5 * lam * q * q)

        res = minimize_scalar(loss, bounds=(0.0, cap), method='bounded',
                              options={'xatol': tolerances.best_reply_xatol})
        out[k] = res.x
    return out if np.ndim(v) else float(out[0])


def solve_nonlinear_equilibrium(spec, prim, v_specs, w, u, nodes=None, rival_nodes=None,
                                tolerances=DEFAULT_TOLERANCES, seed=0, damping=1.0):
    """
    Iterated best response on per-firm value grids; every firm replies to
    the previous sweep's grids, so symmetric firms stay exactly symmetric
    """
    if len(v_specs) != prim.n_firms:
        raise InvalidSpecError(f"{len(v_specs)} cost families for {prim.n_firms} firms")
    if not 0 < damping <= 1:
        raise InvalidSpecError("damping must lie in (0, 1]")
    nodes = tolerances.strategy_nodes if nodes is None else int(nodes)
    rival_nodes = tolerances.rival_nodes if rival_nodes is None else int(rival_nodes)
    n = prim.n_firms
    v_nodes = [np.linspace(*spec_i.support, nodes) for spec_i in v_specs]
    grids = [StrategyGrid(i, v_nodes[i], np.zeros(nodes), w, u) for i in range(n)]

    change = np.inf
    for sweep in range(1, tolerances.max_sweeps + 1):
        replies = []
        for i in range(n):
            support = rival_support(grids, i, v_specs, rival_nodes, tolerances, seed)
            replies.append(best_reply(spec, prim.lam, v_nodes[i], w, u, support, tolerances))
        change = max(float(np.max(np.abs(r - g.q))) for r, g in zip(replies, grids))
        grids = [StrategyGrid(i, v_nodes[i], (1 - damping) * grids[i].q + damping * replies[i], w, u)
                 for i in range(n)]
        if change < tolerances.sweep_tol:
            return NonlinearEquilibrium(spec, prim, v_specs, w, u, grids, sweep, change,
                                        tolerances, rival_nodes, seed)
    raise NonConvergenceError(
        f"best-response iteration did not settle after {tolerances.max_sweeps} sweeps "
        f"(last change {change:.3e})", residual=change, iterations=tolerances.max_sweeps)


# Population source

class NonlinearPopulation:
    """
    Population laws of (P, Q) when firms play the grid equilibrium.
    Needs a compact demand-shock support; own output is the exact best
    reply to the rivals' grid strategies
    """

    mode = 'analytic'

    def __init__(self, spec, prim, u_spec, w_spec, v_specs, nodes=None, rival_nodes=None,
                 n_w=4, n_u=4, seed=0, tolerances=DEFAULT_TOLERANCES):
        if len(v_specs) != prim.n_firms:
            raise InvalidSpecError(f"{len(v_specs)} cost families for {prim.n_firms} firms")
        self.u_lower, self.u_upper = (float(x) for x in u_spec.support)
        if not np.isfinite(self.u_upper):
            raise InvalidSpecError("nonlinear demand needs a bounded demand-shock support")
        self.spec = spec
        self.prim = prim
        self.u_spec = u_spec
        self.w_spec = w_spec
        self.v_specs = list(v_specs)
        self.nodes = nodes
        self.rival_nodes = tolerances.rival_nodes if rival_nodes is None else int(rival_nodes)
        self.n_w = n_w
        self.n_u = n_u
        self.seed = seed
        self.tolerances = tolerances
        self._cache = {}
        c_max = prim.n_firms * spec.quantity_cap(self.u_upper)
        spec.check(np.linspace(0.0, c_max, 25), np.linspace(self.u_lower, self.u_upper, 25))

    @property
    def n_firms(self):
        return self.prim.n_firms

    def equilibrium(self, w, u):
        key = (round(float(w), 12), round(float(u), 12))
        if key not in self._cache:
            self._cache[key] = solve_nonlinear_equilibrium(
                self.spec, self.prim, self.v_specs, w, u, self.nodes, self.rival_nodes,
                self.tolerances, self.seed)
        return self._cache[key]

    def _boundary(self, upper):
        lo, hi = _w_given(self.w_spec, self.u_upper if upper else self.u_lower).support
        return (self.equilibrium(lo, self.u_upper) if upper else self.equilibrium(hi, self.u_lower))

    def boundary_event(self, i, upper=False):
        """Q_i at its floor (v_bar, w_bar, u_lower) or ceiling (v_lower, w_lower, u_upper)"""
        q = self._boundary(upper).grids[i].q
        return BoundaryEvent(i, float(q[0] if upper else q[-1]), 0.0)

    def rival_draws(self, i, upper=False):
        return self._boundary(upper).rival_support(i)

    def _rival_quantiles(self, eq, i, alphas):
        rivals = [j for j in range(self.n_firms) if j != i]
        if len(rivals) == 1:
            j = rivals[0]
            return eq.grids[j].at(self.v_specs[j].quantile(1 - alphas))
        return eq.rival_support(i).quantile(alphas)

    def boundary_quantiles(self, i, alphas, upper=False):
        """Quantiles of P and of Q+_{-i} given Q_i at its floor (or ceiling)"""
        alphas = np.asarray(alphas, dtype=float)
        eq = self._boundary(upper)
        q_i = self.boundary_event(i, upper).q_floor
        rival_q = self._rival_quantiles(eq, i, alphas)
        price_q = self.spec.price(q_i + self._rival_quantiles(eq, i, 1 - alphas), eq.u)
        return price_q, rival_q

    def conditional_quantity_quantiles(self, i, j, alphas, upper=False):
        """Quantiles and mean of Q_i given Q_j at its floor (or ceiling)"""
        eq = self._boundary(upper)
        alphas = np.asarray(alphas, dtype=float)
        quantiles = eq.best_reply(i, self.v_specs[i].quantile(1 - alphas))
        a, wt = probability_nodes(self.rival_nodes)
        mean = float(wt @ eq.best_reply(i, self.v_specs[i].quantile(a)))
        return np.atleast_1d(quantiles), mean

    def firm_draws(self, i, u=None):
        """
        Discrete joint law of (Q_i, Q+_{-i}, U) given U = u, or unconditionally
        when u is None; returns (q_i, rivals, u, weights)
        """
        if u is None:
            a_u, wt_u = probability_nodes(self.n_u)
            u_values = self.u_spec.quantile(a_u)
        else:
            u_values, wt_u = np.array([float(u)]), np.ones(1)
        a_v, wt_v = probability_nodes(self.rival_nodes)
        a_w, wt_w = probability_nodes(self.n_w)
        v_nodes = self.v_specs[i].quantile(a_v)
        parts = []
        for u_k, pu in zip(u_values, wt_u):
            w_nodes = np.atleast_1d(_w_given(self.w_spec, u_k).quantile(a_w))
            for w_k, pw in zip(w_nodes, wt_w):
                eq = self.equilibrium(w_k, u_k)
                q = eq.best_reply(i, v_nodes)
                support = eq.rival_support(i)
                parts.append((np.repeat(q, support.values.size),
                              np.tile(support.values, q.size),
                              np.full(q.size * support.values.size, u_k),
                              pu * pw * np.multiply.outer(wt_v, support.weights).ravel()))
        return tuple(np.concatenate(col) for col in zip(*parts))


# Identification

@dataclass
class LogLinearDemand:
    beta: float
    u_lower: float
    firm: int
    alpha: float
    alpha_prime: float

    def to_dict(self):
        return {'beta': self.beta, 'u_lower': self.u_lower, 'firm': self.firm + 1,
                'alpha': self.alpha, 'alpha_prime': self.alpha_prime}


def loglinear_from_quantiles(p_alpha, p_alpha_prime, rival_one_minus_alpha,
                             rival_one_minus_alpha_prime, q_floor, tolerances=DEFAULT_TOLERANCES):
    """(beta, u_lower) from log-price and rival-output quantile gaps at Q_i's floor"""
    if p_alpha <= 0 or p_alpha_prime <= 0:
        raise InvalidSpecError("log-linear identification needs strictly positive prices")
    denom = rival_one_minus_alpha - rival_one_minus_alpha_prime
    if abs(denom) < tolerances.algebraic:
        raise ZeroDenominatorError("rival-output quantiles coincide; choose alpha further from alpha'")
    beta = (np.log(p_alpha_prime) - np.log(p_alpha)) / denom
    u_lower = np.log(p_alpha) + beta * (q_floor + rival_one_minus_alpha)
    return float(beta), float(u_lower)


def identify_loglinear(source, i, alpha=0.25, alpha_prime=0.75, tolerances=DEFAULT_TOLERANCES):
    if alpha == alpha_prime:
        raise ZeroDenominatorError("alpha and alpha' must differ")
    levels = np.array([alpha, alpha_prime])
    p_q, _ = source.boundary_quantiles(i, levels)
    _, r_q = source.boundary_quantiles(i, 1 - levels)
    beta, u_lower = loglinear_from_quantiles(p_q[0], p_q[1], r_q[0], r_q[1],
                                             source.boundary_event(i).q_floor, tolerances)
    return LogLinearDemand(beta, u_lower, i, float(alpha), float(alpha_prime))


def loglinear_dispersion(source, alpha_pairs=((0.1, 0.9), (0.25, 0.75), (0.4, 0.6)),
                         firms=None, tolerances=DEFAULT_TOLERANCES):
    """beta over every firm and quantile pair; a wide spread signals a misspecified demand form"""
    firms = range(source.n_firms) if firms is None else firms
    betas = np.array([identify_loglinear(source, i, a, b, tolerances).beta
                      for i in firms for a, b in alpha_pairs])
    return betas, float(betas.std())


def recover_loglinear_shock(panel, beta):
    """U = log P + beta Q+"""
    return NonlinearDemandSpec(beta).demand_shock(panel.total_output, panel.p)


def _revenue_moments(spec, q, rivals, u, weights):
    c = q + rivals
    mr = q * spec.d_price(c, u) + spec.price(c, u)
    total = weights.sum()
    return float(weights @ mr / total), float(weights @ q / total)


def identify_lambda_nonlinear_by_firm(source, spec, u_values=None, tolerances=DEFAULT_TOLERANCES):
    """Expected marginal revenue against mean output at two demand levels, per firm"""
    if u_values is None:
        u_values = source.u_spec.quantile(np.array([0.25, 0.75]))
    u, u2 = (float(x) for x in u_values)
    if abs(u - u2) < tolerances.algebraic:
        raise ZeroDenominatorError("the two demand levels coincide")
    lams = []
    for i in range(source.n_firms):
        mr, mq = _revenue_moments(spec, *source.firm_draws(i, u))
        mr2, mq2 = _revenue_moments(spec, *source.firm_draws(i, u2))
        if abs(mq2 - mq) < tolerances.algebraic:
            raise ZeroDenominatorError(f"firm {i + 1}: mean output does not move with demand")
        lams.append((mr2 - mr) / (mq2 - mq))
    return np.array(lams)


def identify_lambda_nonlinear(source, spec, u_values=None, tolerances=DEFAULT_TOLERANCES):
    return float(identify_lambda_nonlinear_by_firm(source, spec, u_values, tolerances).mean())


def identify_mu_v_nonlinear(source, spec, lam):
    """mu_V_i = E[marginal revenue] - lam E[Q_i]"""
    out = []
    for i in range(source.n_firms):
        mr, mq = _revenue_moments(spec, *source.firm_draws(i))
        out.append(mr - lam * mq)
    return np.array(out)


@dataclass
class NonlinearCostTable:
    firm: int
    reference_firm: int
    alpha: np.ndarray
    quantiles: np.ndarray
    w_lower: np.ndarray
    w_upper: np.ndarray

    @property
    def w_bar(self):
        return float(np.mean(self.w_upper))

    def cdf(self, v):
        return np.interp(v, self.quantiles, self.alpha, left=0.0, right=1.0)

    def to_dict(self):
        return {'firm': self.firm + 1, 'reference_firm': self.reference_firm + 1,
                'alpha': self.alpha.tolist(), 'quantiles': self.quantiles.tolist(),
                'w_bar': self.w_bar, 'w_bar_spread': float(np.ptp(self.w_upper))}


# rows: floor display, ceiling display, symmetric support; unknowns (v, w_lower, w_upper)
BOUNDARY_SYSTEM = np.array([[1.0, 0.0, 1.0],
                            [1.0, 1.0, 0.0],
                            [0.0, 1.0, 1.0]])


def _boundary_marginal_cost(spec, lam, q, support, u):
    c = q[:, None] + support.values[None, :]
    revenue = (q[:, None] * spec.d_price(c, u) + spec.price(c, u)) @ support.weights
    return revenue - lam * q


def identify_fv_nonlinear(source, i, j, alpha_grid, spec, lam, u_lower, u_upper, monotone=True):
    """
    Per alpha, solve for (F_V_i^{-1}(alpha), w_lower, w_upper) from the
    first-order conditions at the floor and at the ceiling plus w_upper = -w_lower
    """
    if i == j:
        raise InvalidSpecError("reference firm j must differ from i")
    alpha = np.asarray(alpha_grid, dtype=float)
    q_lo, _ = source.conditional_quantity_quantiles(i, j, 1 - alpha, upper=False)
    q_hi, _ = source.conditional_quantity_quantiles(i, j, 1 - alpha, upper=True)
    a1 = _boundary_marginal_cost(spec, lam, q_lo, source.rival_draws(i, upper=False), u_lower)
    a2 = _boundary_marginal_cost(spec, lam, q_hi, source.rival_draws(i, upper=True), u_upper)
    rhs = np.column_stack([a1, a2, np.zeros_like(a1)])
    try:
        solution = np.linalg.solve(BOUNDARY_SYSTEM, rhs.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"boundary system for firm {i + 1} is singular") from exc
    if not np.all(np.isfinite(solution)):
        raise SingularSystemError(f"boundary system for firm {i + 1} has no finite solution")
    quantiles = solution[:, 0]
    if monotone:
        quantiles = np.maximum.accumulate(quantiles)
    return NonlinearCostTable(i, j, alpha, quantiles, solution[:, 1], solution[:, 2])
