"""
Identification - Testable restrictions and nonparametric recovery
Private-information diagnostics on the boundary band, then beta, F_U,
lambda, cost means, private-cost quantiles and F_{W|U} by deconvolution
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOLERANCES
from .distributions import CharFnGrid, gil_pelaez_invert, piecewise_uniform_cf, z_grid
from .errors import (InvalidSpecError, NonPositiveVarianceError, SmallDenominatorWarning,
                     ZeroDenominatorError)
from .sources import BandedPanel, probability_nodes


# Private-information diagnostics

@dataclass
class FirmDiagnostic:
    firm: int
    q_floor: float
    epsilon: float
    n_band: int
    rival_spread_ratio: float
    price_spread_ratio: float
    zero_share: float
    mass_point: bool
    passed: bool

    def to_dict(self):
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                for k, v in self.__dict__.items()}


@dataclass
class PrivateInfoDiagnostics:
    firms: list
    density_floor: float

    @property
    def passed(self):
        return all(f.passed for f in self.firms)

    @property
    def mass_point(self):
        return any(f.mass_point for f in self.firms)

    def to_dict(self):
        return {'verdict': 'PASS' if self.passed else 'FAIL',
                'mass_point': self.mass_point,
                'density_floor': self.density_floor,
                'firms': [f.to_dict() for f in self.firms]}


def _spread_ratio(values, rows):
    total = values.std()
    return float(values[rows].std() / total) if total > 0 else 0.0


def test_private_information(panel, epsilon=None, density_floor=None, percentile=None,
                             tolerances=DEFAULT_TOLERANCES):
    """
    For each firm, compare the spread of rival output and price inside the
    lowest-output band with their unconditional spread. Under private costs
    both stay spread out; under complete information they collapse
    """
    floor = tolerances.density_floor if density_floor is None else density_floor
    source = BandedPanel(panel, epsilon, percentile=percentile, tolerances=tolerances)
    firms = []
    for i in range(panel.n_firms):
        event, rows = source.band(i)
        rival = _spread_ratio(panel.rival_output(i), rows)
        price = _spread_ratio(panel.p, rows)
        zeros = float(np.mean(panel.q[:, i] <= tolerances.algebraic))
        firms.append(FirmDiagnostic(i, event.q_floor, event.epsilon, event.n_obs, rival, price,
                                    zeros, zeros > tolerances.mass_point_share,
                                    rival > floor and price > floor))
    return PrivateInfoDiagnostics(firms, floor)


test_private_information.__test__ = False  # not a pytest test


# Demand side

def beta_from_quantiles(p_alpha, p_alpha_prime, rival_one_minus_alpha, rival_one_minus_alpha_prime,
                        tolerances=DEFAULT_TOLERANCES):
    denom = rival_one_minus_alpha - rival_one_minus_alpha_prime
    if abs(denom) < tolerances.algebraic:
        raise ZeroDenominatorError("rival-output quantiles coincide; choose alpha further from alpha'")
    return float((p_alpha_prime - p_alpha) / denom)


def identify_beta(source, i, alpha=0.25, alpha_prime=0.75, tolerances=DEFAULT_TOLERANCES):
    """Ratio of conditional price and rival-output quantile differences at Q_i's floor"""
    if not (0 <= alpha <= 1 and 0 <= alpha_prime <= 1):
        raise InvalidSpecError("quantile levels must lie in [0, 1]")
    if alpha == alpha_prime:
        raise ZeroDenominatorError("alpha and alpha' must differ")
    levels = np.array([alpha, alpha_prime, 1 - alpha, 1 - alpha_prime])
    p_q, _ = source.boundary_quantiles(i, levels[:2])
    _, r_q = source.boundary_quantiles(i, levels[2:])
    return beta_from_quantiles(p_q[0], p_q[1], r_q[0], r_q[1], tolerances)


@dataclass
class DemandShockRecovery:
    u: np.ndarray
    grid: np.ndarray
    cdf: np.ndarray


def recover_demand_shock(panel, beta, n_grid=201):
    """u_t = p_t + beta Q+_t and its empirical CDF"""
    u = panel.demand_shock(beta)
    ordered = np.sort(u)
    grid = np.quantile(u, np.linspace(0, 1, n_grid))
    cdf = np.searchsorted(ordered, grid, side='right') / u.size
    return DemandShockRecovery(u, grid, cdf)


def lambda_from_gamma(gamma1, beta, n_firms):
    """lambda = 1 / gamma_1 - (I + 1) beta"""
    if gamma1 == 0:
        raise ZeroDenominatorError("gamma_1 is zero")
    return 1.0 / gamma1 - (n_firms + 1) * beta


def _demand_moments(source, beta):
    mean, cov = source.moments(beta)
    n = source.n_firms
    weights = np.concatenate([[1.0], np.full(n, beta)])
    mean_y = float(weights @ mean)
    var_y = float(weights @ cov @ weights)
    cov_qy = cov[1:] @ weights
    return mean, mean_y, var_y, cov_qy


def identify_lambda_by_firm(source, beta, tolerances=DEFAULT_TOLERANCES):
    _, _, var_y, cov_qy = _demand_moments(source, beta)
    if var_y <= tolerances.algebraic:
        raise NonPositiveVarianceError(f"var(P + beta Q+) = {var_y:.3e}")
    return np.array([lambda_from_gamma(c / var_y, beta, source.n_firms) for c in cov_qy])


def identify_lambda(source, beta, tolerances=DEFAULT_TOLERANCES):
    """OLS slope of Q_i on P + beta Q+, inverted and averaged across firms"""
    return float(identify_lambda_by_firm(source, beta, tolerances).mean())


def identify_mu_v(source, beta, lam):
    """mu_V_i = E[P + beta Q+] - beta E[Q+_{-i}] - (lam + 2 beta) E[Q_i]"""
    mean, mean_y, _, _ = _demand_moments(source, beta)
    q = mean[1:]
    return mean_y - beta * (q.sum() - q) - (lam + 2 * beta) * q


# Private-cost distributions

@dataclass
class CostQuantileTable:
    firm: int
    reference_firm: int
    alpha: np.ndarray
    quantiles: np.ndarray

    def cdf(self, v):
        """Piecewise-linear CDF through the table"""
        return np.interp(v, self.quantiles, self.alpha, left=0.0, right=1.0)


def identify_fv(source, i, j, alpha_grid, beta, lam, mu_v_i, monotone=True):
    """
    F_V_i^{-1}(alpha) = mu_V_i - (lam + 2 beta) [F^{-1}_{Q_i|Q_j}(1 - alpha) - E(Q_i | Q_j floor)]
    """
    if i == j:
        raise InvalidSpecError("reference firm j must differ from i")
    alpha = np.asarray(alpha_grid, dtype=float)
    q_cond, q_mean = source.conditional_quantity_quantiles(i, j, 1 - alpha)
    quantiles = mu_v_i - (lam + 2 * beta) * (q_cond - q_mean)
    if monotone:
        quantiles = np.maximum.accumulate(quantiles)
    return CostQuantileTable(i, j, alpha, quantiles)


# Common shock given demand

def _bridge_small(z, ratio, small, max_gap):
    """Interpolate isolated masked points; return the index where a long run starts"""
    if not small.any():
        return ratio, z.size
    edges = np.diff(np.concatenate([[0], small.astype(int), [0]]))
    starts, stops = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)
    cut = z.size
    for s, e in zip(starts, stops):
        if e - s > max_gap or s == 0 or e == z.size:
            cut = s
            break
    good = ~small[:cut]
    bridged = ratio[:cut].copy()
    if good.all() or not good.any():
        return bridged, cut
    bridged[~good] = (np.interp(z[:cut][~good], z[:cut][good], ratio[:cut][good].real)
                      + 1j * np.interp(z[:cut][~good], z[:cut][good], ratio[:cut][good].imag))
    return bridged, cut


def identify_phi_w(source, i, u_value, z, beta, lam, mu_v, cost_table, tolerances=DEFAULT_TOLERANCES):
    """
    phi_{W|U}(z|u) = exp(iz[u - shift_i]) E[exp(-izL Q_i) | U=u] / E[exp(izL (V_i - mu_i)/D)]
    with the denominator computed from the recovered cost quantile table
    """
    n = source.n_firms
    L, D = lam + (n + 1) * beta, lam + 2 * beta
    mu_v = np.asarray(mu_v, dtype=float)
    shift = ((lam + n * beta) * mu_v[i] - beta * (mu_v.sum() - mu_v[i])) / (lam + beta)
    z = np.asarray(z, dtype=float)

    numerator = source.conditional_cf(i, u_value, L, z, beta)
    denominator = (piecewise_uniform_cf(cost_table.quantiles, cost_table.alpha, z * L / D)
                   * np.exp(-1j * z * L * mu_v[i] / D))
    small = np.abs(denominator) < tolerances.phi_floor
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.exp(1j * z * (u_value - shift)) * numerator / denominator
    ratio, cut = _bridge_small(z, ratio, small, tolerances.phi_max_gap)
    if cut < z.size:
        warnings.warn(f"|denominator| below {tolerances.phi_floor} from z={z[cut]:.4g}; grid truncated",
                      SmallDenominatorWarning, stacklevel=2)
    if cut < 2:
        raise ZeroDenominatorError(f"denominator vanishes near z=0 for firm {i + 1}")
    return CharFnGrid(z[:cut], ratio, float(u_value))


def conditional_w_cdf(phi, w_grid, tolerances=DEFAULT_TOLERANCES):
    """F_{W|U}(w|u) by Gil-Pelaez inversion of the recovered characteristic function"""
    return gil_pelaez_invert(phi, w_grid, tolerances.gp_tail_tol)


def assemble_joint_cdf(source, i, w_grid, u_value, beta, lam, mu_v, cost_table, z=None,
                       nodes=16, tolerances=DEFAULT_TOLERANCES):
    """F_{W,U}(w, u) = int_{u_lower}^u F_{W|U}(w|s) f_U(s) ds (zero below u_lower)"""
    z = z_grid(tolerances.gp_dz, tolerances.gp_zmax) if z is None else z
    u_lower = float(source.demand_quantile(beta, 0.0))
    w_grid = np.asarray(w_grid, dtype=float)
    if u_value <= u_lower:
        return np.zeros_like(w_grid)
    x, wts = probability_nodes(nodes)
    s = u_lower + (u_value - u_lower) * x
    density = source.demand_density(beta, s)
    total = np.zeros_like(w_grid)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', SmallDenominatorWarning)
        for s_k, f_k, w_k in zip(s, density, wts):
            phi = identify_phi_w(source, i, s_k, z, beta, lam, mu_v, cost_table, tolerances)
            total += w_k * f_k * conditional_w_cdf(phi, w_grid, tolerances)
    return (u_value - u_lower) * total


# Full pipeline

@dataclass
class IdentificationReport:
    mode: str
    beta_hat: float
    beta_by_choice: list
    u_grid: np.ndarray
    u_cdf: np.ndarray
    lambda_hat: float
    lambda_by_firm: np.ndarray
    mu_v_hat: np.ndarray
    fv_tables: list
    fv_dispersion: np.ndarray
    phi_w: dict = field(default_factory=dict)
    w_grid: np.ndarray = None
    fw_given_u: dict = field(default_factory=dict)
    diagnostics: dict = None

    def to_dict(self):
        return {
            'mode': self.mode,
            'beta_hat': self.beta_hat,
            'beta_by_choice': self.beta_by_choice,
            'beta_dispersion': float(np.std([b['beta'] for b in self.beta_by_choice])),
            'u_cdf': {'grid': self.u_grid, 'cdf': self.u_cdf},
            'lambda_hat': self.lambda_hat,
            'lambda_by_firm': self.lambda_by_firm,
            'mu_v_hat': self.mu_v_hat,
            'fv_quantiles': [{'firm': t.firm + 1, 'reference_firm': t.reference_firm + 1,
                              'alpha': t.alpha, 'quantiles': t.quantiles} for t in self.fv_tables],
            'fv_dispersion': self.fv_dispersion,
            'phi_w': {f'{u:.6g}': {'z': g.z_points, 'real': g.values.real, 'imag': g.values.imag}
                      for u, g in self.phi_w.items()},
            'w_grid': self.w_grid,
            'fw_given_u': {f'{u:.6g}': cdf for u, cdf in self.fw_given_u.items()},
            'diagnostics': self.diagnostics,
        }


def identify_all(source, alpha_pairs=((0.25, 0.75),), alpha_grid=None, u_levels=(0.25, 0.5, 0.75),
                 w_firm=0, z=None, n_w=201, reference_firms=3, tolerances=DEFAULT_TOLERANCES):
    """Run every identification step in order on one source"""
    n = source.n_firms
    alpha_grid = np.linspace(0, 1, tolerances.quantile_table_size) if alpha_grid is None else alpha_grid

    choices = []
    for i in range(n):
        for a, a_prime in alpha_pairs:
            choices.append({'firm': i + 1, 'alpha': a, 'alpha_prime': a_prime,
                            'beta': identify_beta(source, i, a, a_prime, tolerances)})
    beta = float(np.mean([c['beta'] for c in choices]))

    levels = np.linspace(0.001, 0.999, 201)
    u_grid = source.demand_quantile(beta, levels)
    u_cdf = source.demand_cdf(beta, u_grid)

    lam_by_firm = identify_lambda_by_firm(source, beta, tolerances)
    lam = float(lam_by_firm.mean())
    mu_v = identify_mu_v(source, beta, lam)

    tables, dispersion = [], np.zeros(n)
    for i in range(n):
        others = [(i + k) % n for k in range(1, min(reference_firms, n - 1) + 1)]
        fits = [identify_fv(source, i, j, alpha_grid, beta, lam, mu_v[i]) for j in others]
        tables.append(fits[0])
        spread = np.ptp(np.vstack([f.quantiles for f in fits]), axis=0)
        dispersion[i] = float(spread.max())

    z = z_grid(tolerances.gp_dz, tolerances.gp_zmax) if z is None else z
    L = lam + (n + 1) * beta
    span = source.w_span(w_firm, L)
    w_grid = np.linspace(-span, span, n_w)
    phi_w, fw = {}, {}
    for u_value in source.demand_quantile(beta, np.asarray(u_levels, dtype=float)):
        u_value = float(u_value)
        phi = identify_phi_w(source, w_firm, u_value, z, beta, lam, mu_v, tables[w_firm], tolerances)
        phi_w[u_value] = phi
        fw[u_value] = conditional_w_cdf(phi, w_grid, tolerances)

    diagnostics = None
    if isinstance(source, BandedPanel):
        diagnostics = test_private_information(source.panel, source.epsilon,
                                               tolerances=tolerances).to_dict()
    return IdentificationReport(source.mode, beta, choices, u_grid, u_cdf, lam, lam_by_firm, mu_v,
                                tables, dispersion, phi_w, w_grid, fw, diagnostics)
