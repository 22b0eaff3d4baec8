"""
Core Model - Linear-demand Cournot market with private costs
Closed-form Bayesian Cournot-Nash strategies, the complete-information
benchmark and the conduct-parameter variant
"""

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLERANCES
from .errors import (AssumptionViolationError, InvalidSpecError, NonConvergenceError,
                     SingularSystemError, ZeroDenominatorError)


@dataclass(frozen=True, eq=False)
class ModelPrimitives:
    """
    Structural primitives: inverse demand P = U - beta * Q+, variable cost
    (V_i + W) q + lam q^2 / 2, private-cost means and shock supports
    """
    n_firms: int
    beta: float
    lam: float
    mu_v: np.ndarray
    v_bounds: np.ndarray
    w_bounds: tuple
    u_lower: float

    def __post_init__(self):
        mu_v = np.asarray(self.mu_v, dtype=float).reshape(-1)
        v_bounds = np.asarray(self.v_bounds, dtype=float).reshape(-1, 2)
        object.__setattr__(self, 'mu_v', mu_v)
        object.__setattr__(self, 'v_bounds', v_bounds)
        object.__setattr__(self, 'w_bounds', (float(self.w_bounds[0]), float(self.w_bounds[1])))
        if self.n_firms < 2:
            raise InvalidSpecError(f"need at least two firms, got {self.n_firms}")
        if mu_v.size != self.n_firms or v_bounds.shape[0] != self.n_firms:
            raise InvalidSpecError("mu_v and v_bounds must have one entry per firm")
        if not self.beta > 0:
            raise InvalidSpecError(f"beta must be positive, got {self.beta}")
        if not self.lam >= 0:
            raise InvalidSpecError(f"lambda must be nonnegative, got {self.lam}")
        if np.any(v_bounds[:, 0] > v_bounds[:, 1]) or np.any(v_bounds[:, 0] < 0):
            raise InvalidSpecError("private-cost bounds must satisfy 0 <= lower <= upper")
        if np.any(mu_v < v_bounds[:, 0] - 1e-12) or np.any(mu_v > v_bounds[:, 1] + 1e-12):
            raise InvalidSpecError("private-cost means must lie inside their bounds")
        if self.w_bounds[0] > self.w_bounds[1]:
            raise InvalidSpecError("common-shock bounds reversed")

    @property
    def total_slope(self):
        """lambda + (I+1) beta"""
        return self.lam + (self.n_firms + 1) * self.beta

    @property
    def own_slope(self):
        """lambda + 2 beta"""
        return self.lam + 2 * self.beta

    @property
    def mean_shift(self):
        """[(lam + I beta) mu_i - beta sum_{j!=i} mu_j] / (lam + beta), one entry per firm"""
        return self.shift_for(self.mu_v)

    def shift_for(self, mu):
        """mean_shift evaluated at arbitrary cost means (trailing axis = firms)"""
        mu = np.asarray(mu, dtype=float)
        total = mu.sum(axis=-1, keepdims=True)
        k = (self.lam + self.n_firms * self.beta) * mu - self.beta * (total - mu)
        return k / (self.lam + self.beta)

    def with_values(self, **changes):
        fields = dict(n_firms=self.n_firms, beta=self.beta, lam=self.lam, mu_v=self.mu_v,
                      v_bounds=self.v_bounds, w_bounds=self.w_bounds, u_lower=self.u_lower)
        fields.update(changes)
        return ModelPrimitives(**fields)


@dataclass
class MarketDraw:
    """One market: latent state and realised outcome"""
    v: np.ndarray
    w: float
    u: float
    q: np.ndarray
    p: float

    def to_dict(self):
        return {'v': self.v.tolist(), 'w': self.w, 'u': self.u,
                'q': self.q.tolist(), 'p': self.p}


@dataclass
class Assumption2Report:
    holds: bool
    demand_floor_lhs: float
    quantity_floor_lhs: np.ndarray

    def __bool__(self):
        return bool(self.holds)

    def to_dict(self):
        return {'holds': bool(self.holds),
                'demand_floor_lhs': float(self.demand_floor_lhs),
                'quantity_floor_lhs': [float(x) for x in self.quantity_floor_lhs]}


def check_assumption2(prim):
    """Both inequalities guaranteeing nonnegative quantities and price"""
    L, D = prim.total_slope, prim.own_slope
    w_lo, w_hi = prim.w_bounds
    v_lo, v_hi = prim.v_bounds[:, 0], prim.v_bounds[:, 1]
    shift = prim.mean_shift

    demand_lhs = ((prim.lam + prim.beta) * prim.u_lower / L
                  + prim.beta * np.sum((v_lo - prim.mu_v) / D + (w_lo + shift) / L))
    quantity_lhs = (prim.u_lower - w_hi - shift) / L - (v_hi - prim.mu_v) / D
    holds = bool(demand_lhs >= 0 and np.all(quantity_lhs >= 0))
    return Assumption2Report(holds, float(demand_lhs), quantity_lhs)


def equilibrium_quantities(prim, v, w, u, mu_v=None):
    """
    Equilibrium strategies, vectorised: v has trailing axis of length I,
    w and u broadcast against v[..., 0]; no precondition checks.
    mu_v overrides the cost means (time-varying means under trends)
    """
    mu = prim.mu_v if mu_v is None else np.asarray(mu_v, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)[..., None]
    u = np.asarray(u, dtype=float)[..., None]
    return (u - w - prim.shift_for(mu)) / prim.total_slope - (v - mu) / prim.own_slope


def _check_inputs(prim, v, w, u, firms=None):
    tol = DEFAULT_TOLERANCES.algebraic
    bounds = prim.v_bounds if firms is None else prim.v_bounds[firms]
    if np.any(v < bounds[..., 0] - tol) or np.any(v > bounds[..., 1] + tol):
        raise AssumptionViolationError(f"private cost {v} outside its support")
    if w < prim.w_bounds[0] - tol or w > prim.w_bounds[1] + tol:
        raise AssumptionViolationError(f"common shock {w} outside {prim.w_bounds}")
    if u < prim.u_lower - tol:
        raise AssumptionViolationError(f"demand shock {u} below u_lower={prim.u_lower}")
    report = check_assumption2(prim)
    if not report:
        raise AssumptionViolationError("Assumption 2 fails for these primitives", report.to_dict())


def equilibrium_quantity(prim, i, v_i, w, u):
    """q_i(v_i, w, u) of the unique Bayesian Cournot-Nash equilibrium"""
    _check_inputs(prim, np.asarray(v_i, dtype=float), float(w), float(u), firms=i)
    v = prim.mu_v.copy()
    v[i] = v_i
    return float(equilibrium_quantities(prim, v, w, u)[i])


def expected_rival_output(prim, i, w, u):
    """E[Q+_{-i} | w, u]: rivals evaluated at their mean types"""
    q_mean = equilibrium_quantities(prim, prim.mu_v, w, u)
    return float(q_mean.sum() - q_mean[i])


def foc_residuals(prim, v, w, u):
    """(lam + 2 beta) q_i - (u - beta E[Q+_{-i}|w,u] - w - v_i) for every firm"""
    v = np.asarray(v, dtype=float)
    q = equilibrium_quantities(prim, v, w, u)
    q_mean = equilibrium_quantities(prim, prim.mu_v, w, u)
    rivals = q_mean.sum(axis=-1, keepdims=True) - q_mean
    w = np.asarray(w, dtype=float)[..., None]
    u = np.asarray(u, dtype=float)[..., None]
    return prim.own_slope * q - (u - prim.beta * rivals - w - v)


def market_outcome(prim, v, w, u):
    """Equilibrium quantities and the market-clearing price"""
    v = np.asarray(v, dtype=float)
    q = equilibrium_quantities(prim, v, w, u)
    return MarketDraw(v=v, w=float(w), u=float(u), q=q, p=float(u - prim.beta * q.sum()))


def minimum_quantity(prim, i):
    """q_floor_i: output at (v_upper_i, w_upper, u_lower)"""
    v = prim.mu_v.copy()
    v[i] = prim.v_bounds[i, 1]
    return float(equilibrium_quantities(prim, v, prim.w_bounds[1], prim.u_lower)[i])


def maximum_quantity(prim, i, u_upper):
    """Output at (v_lower_i, w_lower, u_upper); needs compact demand support"""
    v = prim.mu_v.copy()
    v[i] = prim.v_bounds[i, 0]
    return float(equilibrium_quantities(prim, v, prim.w_bounds[0], u_upper)[i])


def mean_type_matrix(prim):
    """Identity + [beta / (lam + 2 beta)] M1, M1 = ones off the diagonal"""
    n = prim.n_firms
    m1 = np.ones((n, n)) - np.eye(n)
    return np.eye(n) + prim.beta / prim.own_slope * m1


def mean_type_matrix_inverse(prim):
    """Sherman-Morrison inverse of a I + b 11'"""
    n = prim.n_firms
    a = (prim.lam + prim.beta) / prim.own_slope
    b = prim.beta / prim.own_slope
    denom = a + n * b
    if abs(a) < DEFAULT_TOLERANCES.algebraic or abs(denom) < DEFAULT_TOLERANCES.algebraic:
        raise SingularSystemError("mean-type system is singular")
    return (np.eye(n) - b / denom * np.ones((n, n))) / a


# Complete information

def _complete_info_active(prim, v, w, u, active):
    n = int(active.sum())
    v_avg = v[active].mean()
    q = np.zeros_like(v)
    q[active] = (-(v[active] - v_avg) / (prim.lam + prim.beta)
                 + (u - w - v_avg) / (prim.lam + (n + 1) * prim.beta))
    return q


def complete_info_quantities(prim, v, w, u):
    """
    Cournot equilibrium when all costs are public. Firms with negative
    unconstrained output are removed one at a time (most negative first)
    """
    tol = DEFAULT_TOLERANCES.foc
    v = np.asarray(v, dtype=float)
    active = np.ones(prim.n_firms, dtype=bool)

    for _ in range(prim.n_firms + 1):
        if not active.any():
            q = np.zeros_like(v)
        else:
            q = _complete_info_active(prim, v, w, u, active)
            if np.any(q[active] < 0):
                worst = np.flatnonzero(active)[np.argmin(q[active])]
                active[worst] = False
                continue
        margin = u - w - v - prim.beta * q.sum()
        if np.any(margin[~active] > tol):
            raise NonConvergenceError("complementary slackness fails for an inactive firm",
                                      residual=float(margin[~active].max()))
        return q

    raise NonConvergenceError("support search exceeded the number of firms",
                              iterations=prim.n_firms + 1)


def complete_info_batch(prim, v, w, u):
    """
    Row-wise complete-information outcomes for v of shape (T, I).
    The surviving set is always a lowest-cost prefix, so it is found by sorting
    """
    v = np.asarray(v, dtype=float)
    w = np.broadcast_to(np.asarray(w, dtype=float), v.shape[:1])
    u = np.broadcast_to(np.asarray(u, dtype=float), v.shape[:1])
    order = np.argsort(v, axis=1, kind='stable')
    v_sorted = np.take_along_axis(v, order, axis=1)
    counts = np.arange(1, prim.n_firms + 1)
    prefix_mean = np.cumsum(v_sorted, axis=1) / counts
    slope = prim.lam + (counts + 1) * prim.beta
    last_q = (-(v_sorted - prefix_mean) / (prim.lam + prim.beta)
              + (u[:, None] - w[:, None] - prefix_mean) / slope)
    feasible = last_q >= 0
    n_active = np.where(feasible.any(axis=1),
                        prim.n_firms - np.argmax(feasible[:, ::-1], axis=1), 0)

    rows = np.arange(v.shape[0])
    idx = np.maximum(n_active - 1, 0)
    v_avg = prefix_mean[rows, idx]
    total_slope = prim.lam + (n_active + 1) * prim.beta
    q_sorted = (-(v_sorted - v_avg[:, None]) / (prim.lam + prim.beta)
                + ((u - w - v_avg) / total_slope)[:, None])
    q_sorted = np.where(counts[None, :] <= n_active[:, None], q_sorted, 0.0)
    q = np.empty_like(q_sorted)
    np.put_along_axis(q, order, q_sorted, axis=1)
    return q


def consumer_surplus(beta, total_output):
    """Area between linear inverse demand and price: beta Q+^2 / 2"""
    return 0.5 * beta * np.asarray(total_output, dtype=float) ** 2


# Conduct-parameter variant

@dataclass(frozen=True, eq=False)
class ConductProfile:
    """Conjectural response slopes kappa_i <= 0"""
    kappa: np.ndarray

    def __post_init__(self):
        kappa = np.asarray(self.kappa, dtype=float).reshape(-1)
        if np.any(kappa > 0):
            raise InvalidSpecError("conduct slopes must be nonpositive")
        object.__setattr__(self, 'kappa', kappa)

    @property
    def theta(self):
        """theta_i = 1 + (I - 1) kappa_i"""
        return 1 + (self.kappa.size - 1) * self.kappa

    def denominators(self, prim):
        if self.kappa.size != prim.n_firms:
            raise InvalidSpecError("one conduct slope per firm required")
        denom = prim.lam + prim.beta * (prim.n_firms - 1) * self.kappa + 2 * prim.beta
        if np.any(denom <= 0):
            raise ZeroDenominatorError(f"nonpositive conduct denominator {denom}")
        return denom


def conduct_quantity(prim, conduct, i, v_i, w, u, expected_rivals):
    """(u - beta E[Q+_{-i}|w,u] - w - v_i) / (lam + beta (I-1) kappa_i + 2 beta)"""
    denom = conduct.denominators(prim)[i]
    return float((u - prim.beta * expected_rivals - w - v_i) / denom)


def solve_conduct_equilibrium(prim, conduct, w, u):
    """Interim expected quantities E[q_j | w, u] from the I x I linear system"""
    denom = conduct.denominators(prim)
    n = prim.n_firms
    system = np.diag(denom - prim.beta) + prim.beta * np.ones((n, n))
    if np.linalg.cond(system) > 1 / DEFAULT_TOLERANCES.algebraic:
        raise SingularSystemError("conduct system is singular")
    rhs = (u - w) - prim.mu_v
    return np.linalg.solve(system, rhs)


def conduct_quantities(prim, conduct, v, w, u):
    """Quantities for one market under the conduct profile"""
    means = solve_conduct_equilibrium(prim, conduct, w, u)
    rivals = means.sum() - means
    return (u - prim.beta * rivals - w - np.asarray(v, dtype=float)) / conduct.denominators(prim)
