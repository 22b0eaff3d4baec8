"""
Sources - Where identification reads its distributions from
MarketPopulation evaluates the model's population laws exactly;
BandedPanel approximates the same conditional laws with boundary bands
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import stats
from scipy.signal import fftconvolve

from .config import DEFAULT_TOLERANCES
from .distributions import quantile_table_cf
from .errors import BandOccupancyError, InvalidSpecError


@dataclass(frozen=True)
class BoundaryEvent:
    """{Q_i <= q_floor + epsilon}; epsilon = 0 is the exact population event"""
    firm: int
    q_floor: float
    epsilon: float
    n_obs: int = None

    def __post_init__(self):
        if self.epsilon < 0:
            raise InvalidSpecError("band width must be nonnegative")

    def to_dict(self):
        return {'firm': self.firm, 'q_floor': self.q_floor, 'epsilon': self.epsilon,
                'n_obs': self.n_obs}


def probability_nodes(n):
    """Gauss-Legendre nodes and weights mapped to (0, 1)"""
    x, w = leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def sum_quantiles(specs, alphas, bins_per_spec=2048):
    """Quantiles of a sum of independent bounded shocks by FFT convolution of cell masses"""
    alphas = np.asarray(alphas, dtype=float)
    if len(specs) == 1:
        return specs[0].quantile(alphas)
    supports = np.array([s.support for s in specs])
    widths = supports[:, 1] - supports[:, 0]
    h = max(widths.max(), 1e-12) / bins_per_spec
    mass = np.ones(1)
    for spec, (lo, hi) in zip(specs, supports):
        edges = lo + h * np.arange(int(np.ceil((hi - lo) / h)) + 2)
        cell = np.diff(spec.cdf(edges))
        mass = np.clip(fftconvolve(mass, cell), 0.0, None)
    cum = np.cumsum(mass)
    cum /= cum[-1]
    # cell k of each shock is centred at lo + (k + 1/2) h, so the sum's cell
    # k ends at sum(lo) + (k + len(specs)/2 + 1/2) h
    right_edges = supports[:, 0].sum() + h * (np.arange(cum.size) + 0.5 * len(specs) + 0.5)
    keep = np.concatenate([[True], np.diff(cum) > 0])
    return np.interp(alphas, np.concatenate([[0.0], cum[keep]]),
                     np.concatenate([[right_edges[0] - h], right_edges[keep]]))


def _w_given(w_spec, u):
    return w_spec.conditional(u) if hasattr(w_spec, 'conditional') else w_spec


class MarketPopulation:
    """Population laws of (P, Q) implied by primitives and shock families"""

    mode = 'analytic'

    def __init__(self, prim, u_spec, w_spec, v_specs, tolerances=DEFAULT_TOLERANCES):
        if len(v_specs) != prim.n_firms:
            raise InvalidSpecError(f"{len(v_specs)} cost families for {prim.n_firms} firms")
        self.prim = prim
        self.u_spec = u_spec
        self.w_spec = w_spec
        self.v_specs = list(v_specs)
        self.tolerances = tolerances

    @classmethod
    def from_theta(cls, theta, tolerances=DEFAULT_TOLERANCES):
        return cls(theta.primitives(check=True), theta.demand_spec(), theta.common_shock_spec(),
                   theta.cost_specs(), tolerances)

    @property
    def n_firms(self):
        return self.prim.n_firms

    def _intercepts(self, u, w):
        """Equilibrium output at mean costs for given (w, u)"""
        prim = self.prim
        return (u - w - prim.mean_shift) / prim.total_slope

    def boundary_event(self, i):
        prim = self.prim
        a = self._intercepts(prim.u_lower, self.w_spec.support[1])
        q_floor = a[i] - (self.v_specs[i].support[1] - prim.mu_v[i]) / prim.own_slope
        return BoundaryEvent(i, float(q_floor), 0.0)

    def boundary_quantiles(self, i, alphas):
        """Quantiles of P and of Q+_{-i} given Q_i at its floor"""
        prim = self.prim
        alphas = np.asarray(alphas, dtype=float)
        rivals = [j for j in range(self.n_firms) if j != i]
        a = self._intercepts(prim.u_lower, self.w_spec.support[1])
        base = a[rivals].sum() + prim.mu_v[rivals].sum() / prim.own_slope
        rival_q = base - sum_quantiles([self.v_specs[j] for j in rivals], 1 - alphas) / prim.own_slope
        q_floor = self.boundary_event(i).q_floor
        price_base = base - sum_quantiles([self.v_specs[j] for j in rivals], alphas) / prim.own_slope
        p_q = prim.u_lower - prim.beta * (q_floor + price_base)
        return p_q, rival_q

    def _w_moments(self):
        """E W, E W^2 and E[U W] by quadrature over the demand shock"""
        alpha, weight = probability_nodes(self.tolerances.gl_nodes)
        u = self.u_spec.quantile(alpha)
        means = np.array([_w_given(self.w_spec, x).mean() for x in u])
        second = np.array([_w_given(self.w_spec, x).variance() for x in u]) + means ** 2
        return weight @ means, weight @ second, weight @ (u * means)

    def moments(self, beta=None):
        """Mean vector and covariance matrix of (P, Q_1..Q_I)"""
        prim = self.prim
        n, L, D = self.n_firms, prim.total_slope, prim.own_slope
        ew, ew2, euw = self._w_moments()
        eu, vu = self.u_spec.mean(), self.u_spec.variance()
        mean_x = np.concatenate([[eu, ew], [s.mean() for s in self.v_specs]])
        cov_x = np.diag(np.concatenate([[vu, ew2 - ew ** 2], [s.variance() for s in self.v_specs]]))
        cov_x[0, 1] = cov_x[1, 0] = euw - eu * ew

        a_q = np.zeros((n, n + 2))
        a_q[:, 0], a_q[:, 1] = 1 / L, -1 / L
        a_q[:, 2:] = -np.eye(n) / D
        b_q = -prim.mean_shift / L + prim.mu_v / D
        a_p = np.zeros(n + 2)
        a_p[0] = 1.0
        a_p -= prim.beta * a_q.sum(axis=0)
        b_p = -prim.beta * b_q.sum()

        A = np.vstack([a_p, a_q])
        b = np.concatenate([[b_p], b_q])
        return A @ mean_x + b, A @ cov_x @ A.T

    def conditional_quantity_quantiles(self, i, j, alphas):
        """Quantiles and mean of Q_i given Q_j at its floor"""
        prim = self.prim
        a = self._intercepts(prim.u_lower, self.w_spec.support[1])[i]
        v_q = self.v_specs[i].quantile(1 - np.asarray(alphas, dtype=float))
        return a - (v_q - prim.mu_v[i]) / prim.own_slope, float(a)

    def conditional_cf(self, i, u_value, scale, z, beta=None):
        """E[exp(-i z scale Q_i) | U = u]"""
        prim = self.prim
        z = np.asarray(z, dtype=float)
        size = self.tolerances.quantile_table_size
        L, D = prim.total_slope, prim.own_slope
        phase = np.exp(-1j * z * scale * ((u_value - prim.mean_shift[i]) / L + prim.mu_v[i] / D))
        w_part = _w_given(self.w_spec, u_value).characteristic_function(z * scale / L, size)
        v_part = quantile_table_cf(self.v_specs[i], z * scale / D, size)
        return phase * w_part * v_part

    def demand_quantile(self, beta, alphas):
        return self.u_spec.quantile(alphas)

    def demand_cdf(self, beta, grid):
        return self.u_spec.cdf(grid)

    def demand_density(self, beta, u):
        return self.u_spec.density(u)

    def w_span(self, i, scale):
        lo, hi = self.w_spec.support
        return float(max(abs(lo), abs(hi), 1e-12))


class BandedPanel:
    """Sample laws from a panel; zero-probability events become boundary bands"""

    mode = 'sample'

    def __init__(self, panel, epsilon=None, n_min=None, percentile=None, tolerances=DEFAULT_TOLERANCES):
        self.panel = panel
        self.epsilon = epsilon
        self.n_min = tolerances.band_n_min if n_min is None else int(n_min)
        self.percentile = tolerances.band_percentile if percentile is None else percentile
        self.tolerances = tolerances

    @property
    def n_firms(self):
        return self.panel.n_firms

    def _band_width(self, distance):
        """max(percentile width, width holding n_min rows) unless epsilon is fixed"""
        if distance.size < self.n_min:
            raise BandOccupancyError(
                f"band needs {self.n_min} observations, panel has {distance.size}")
        if self.epsilon is not None:
            return float(self.epsilon)
        by_share = np.percentile(distance, self.percentile)
        by_count = np.partition(distance, self.n_min - 1)[self.n_min - 1]
        return float(max(by_share, by_count))

    def band(self, i):
        q = self.panel.q[:, i]
        q_floor = float(q.min())
        eps = self._band_width(q - q_floor)
        rows = q <= q_floor + eps
        if rows.sum() < self.n_min:
            raise BandOccupancyError(
                f"firm {i + 1}: band of width {eps:.4g} holds {int(rows.sum())} rows, "
                f"need {self.n_min}")
        return BoundaryEvent(i, q_floor, eps, int(rows.sum())), rows

    def boundary_event(self, i):
        return self.band(i)[0]

    def boundary_quantiles(self, i, alphas):
        _, rows = self.band(i)
        alphas = np.asarray(alphas, dtype=float)
        return (np.quantile(self.panel.p[rows], alphas),
                np.quantile(self.panel.rival_output(i)[rows], alphas))

    def moments(self, beta=None):
        data = np.column_stack([self.panel.p, self.panel.q])
        return data.mean(axis=0), np.cov(data, rowvar=False, ddof=0)

    def conditional_quantity_quantiles(self, i, j, alphas):
        _, rows = self.band(j)
        q_i = self.panel.q[rows, i]
        return np.quantile(q_i, np.asarray(alphas, dtype=float)), float(q_i.mean())

    def demand_band(self, u_value, beta):
        distance = np.abs(self.panel.demand_shock(beta) - u_value)
        eps = self._band_width(distance)
        return distance <= eps

    def conditional_cf(self, i, u_value, scale, z, beta):
        rows = self.demand_band(u_value, beta)
        q_i = self.panel.q[rows, i]
        z = np.asarray(z, dtype=float)
        out = np.empty(z.shape, dtype=complex)
        for start in range(0, z.size, 512):
            zc = z[start:start + 512, None]
            out[start:start + 512] = np.exp(-1j * zc * scale * q_i).mean(axis=1)
        return out

    def demand_quantile(self, beta, alphas):
        return np.quantile(self.panel.demand_shock(beta), alphas)

    def demand_cdf(self, beta, grid):
        u = np.sort(self.panel.demand_shock(beta))
        return np.searchsorted(u, np.asarray(grid, dtype=float), side='right') / u.size

    def demand_density(self, beta, u):
        return stats.gaussian_kde(self.panel.demand_shock(beta))(np.atleast_1d(u))

    def w_span(self, i, scale):
        q = self.panel.q[:, i]
        return float(scale * (np.quantile(q, 0.99) - np.quantile(q, 0.01)) / 2)
