"""
Distributions - Shock families, random streams and characteristic functions
Truncated normal demand shocks, truncated/scaled Beta cost shocks,
the W|U common-shock family and Gil-Pelaez CDF inversion
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats, special
from scipy.integrate import trapezoid

from .config import DEFAULT_TOLERANCES
from .errors import InvalidSpecError, GridTooCoarseWarning


def rng_stream(seed, stream_id=0):
    """Counter-based generator keyed by (seed, stream id)"""
    key = stream_id if isinstance(stream_id, (tuple, list)) else (stream_id,)
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class PointMass:
    """Degenerate shock: all probability at `value`"""
    value: float

    @property
    def support(self):
        return (float(self.value), float(self.value))

    def sample(self, rng, n):
        return np.full(int(n), float(self.value))

    def density(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def cdf(self, x):
        return (np.asarray(x, dtype=float) >= self.value).astype(float)

    def quantile(self, alpha):
        return np.full_like(np.asarray(alpha, dtype=float), float(self.value))

    def mean(self):
        return float(self.value)

    def variance(self):
        return 0.0

    def characteristic_function(self, z, table_size=None):
        return np.exp(1j * np.asarray(z, dtype=float) * self.value)


@dataclass(frozen=True)
class TruncNormalSpec:
    """Normal(mu, sigma2) left-truncated at `lower`, support [lower, inf)"""
    mu: float
    sigma2: float
    lower: float

    def __post_init__(self):
        if not np.isfinite(self.sigma2) or self.sigma2 <= 0:
            raise InvalidSpecError(f"sigma2 must be positive, got {self.sigma2}")
        if not (np.isfinite(self.mu) and np.isfinite(self.lower)):
            raise InvalidSpecError("mu and lower must be finite")

    @property
    def sigma(self):
        return float(np.sqrt(self.sigma2))

    @property
    def support(self):
        return (float(self.lower), np.inf)

    def frozen(self):
        a = (self.lower - self.mu) / self.sigma
        return stats.truncnorm(a, np.inf, loc=self.mu, scale=self.sigma)

    def sample(self, rng, n):
        return self.frozen().rvs(size=int(n), random_state=rng)

    def density(self, x):
        return self.frozen().pdf(x)

    def log_density(self, x):
        return self.frozen().logpdf(x)

    def cdf(self, x):
        return self.frozen().cdf(x)

    def quantile(self, alpha):
        return self.frozen().ppf(alpha)

    def mean(self):
        return float(self.frozen().mean())

    def variance(self):
        return float(self.frozen().var())

    def characteristic_function(self, z, table_size=None):
        return quantile_table_cf(self, z, table_size)


@dataclass(frozen=True)
class BetaSpec:
    """Beta(a, b) truncated to [t_lo, t_hi], then mapped x -> shift + scale * x"""
    a: float
    b: float
    t_lo: float = 0.0
    t_hi: float = 1.0
    scale: float = 1.0
    shift: float = 0.0
    mass: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise InvalidSpecError(f"Beta shapes must be positive, got ({self.a}, {self.b})")
        if not (0.0 <= self.t_lo < self.t_hi <= 1.0):
            raise InvalidSpecError(f"bad truncation interval [{self.t_lo}, {self.t_hi}]")
        if not self.scale > 0:
            raise InvalidSpecError(f"scale must be positive, got {self.scale}")
        mass = special.betainc(self.a, self.b, self.t_hi) - special.betainc(self.a, self.b, self.t_lo)
        if mass < DEFAULT_TOLERANCES.truncation_mass_min:
            raise InvalidSpecError(
                f"degenerate truncation: Beta({self.a}, {self.b}) has mass {mass:.3e} "
                f"on [{self.t_lo}, {self.t_hi}]")
        object.__setattr__(self, 'mass', float(mass))

    @property
    def truncated(self):
        return self.t_lo > 0.0 or self.t_hi < 1.0

    @property
    def support(self):
        return (self.shift + self.scale * self.t_lo, self.shift + self.scale * self.t_hi)

    def _unit(self, x):
        return (np.asarray(x, dtype=float) - self.shift) / self.scale

    def sample(self, rng, n):
        lo = special.betainc(self.a, self.b, self.t_lo)
        draws = rng.uniform(lo, lo + self.mass, size=int(n))
        unit = np.clip(special.betaincinv(self.a, self.b, draws), self.t_lo, self.t_hi)
        return self.shift + self.scale * unit

    def density(self, x):
        y = self._unit(x)
        inside = (y >= self.t_lo) & (y <= self.t_hi)
        with np.errstate(divide='ignore', invalid='ignore'):
            pdf = stats.beta.pdf(np.clip(y, 0.0, 1.0), self.a, self.b) / (self.mass * self.scale)
        return np.where(inside, pdf, 0.0)

    def cdf(self, x):
        y = np.clip(self._unit(x), self.t_lo, self.t_hi)
        lo = special.betainc(self.a, self.b, self.t_lo)
        return np.clip((special.betainc(self.a, self.b, y) - lo) / self.mass, 0.0, 1.0)

    def quantile(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        if np.any((alpha < 0) | (alpha > 1)):
            raise InvalidSpecError("quantile level outside [0, 1]")
        lo = special.betainc(self.a, self.b, self.t_lo)
        unit = special.betaincinv(self.a, self.b, lo + alpha * self.mass)
        return self.shift + self.scale * np.clip(unit, self.t_lo, self.t_hi)

    def mean(self):
        return self.shift + self.scale * truncated_beta_mean(self.a, self.b, self.t_lo, self.t_hi)

    def variance(self):
        return self.scale ** 2 * truncated_beta_variance(self.a, self.b, self.t_lo, self.t_hi)

    def characteristic_function(self, z, table_size=None):
        return quantile_table_cf(self, z, table_size)


def _partial_mass(a, b, t_lo, t_hi):
    return special.betainc(a, b, t_hi) - special.betainc(a, b, t_lo)


def truncated_beta_mean(a, b, t_lo=0.0, t_hi=1.0):
    """E[B | t_lo <= B <= t_hi] for B ~ Beta(a, b)"""
    return a / (a + b) * _partial_mass(a + 1, b, t_lo, t_hi) / _partial_mass(a, b, t_lo, t_hi)


def truncated_beta_variance(a, b, t_lo=0.0, t_hi=1.0):
    second = (a * (a + 1) / ((a + b) * (a + b + 1))
              * _partial_mass(a + 2, b, t_lo, t_hi) / _partial_mass(a, b, t_lo, t_hi))
    return second - truncated_beta_mean(a, b, t_lo, t_hi) ** 2


@dataclass(frozen=True)
class WShockSpec:
    """
    Common technology shock given demand: W | U=u ~ w_bar * (2 B - 1),
    B ~ Beta(a_w(u), a_w(u)) truncated to [t_lo, t_hi], a_w(u) = exp(a_tilde1 + a_tilde2 u)
    """
    w_bar: float
    a_tilde1: float
    a_tilde2: float
    t_lo: float = 0.0
    t_hi: float = 1.0

    def __post_init__(self):
        if not self.w_bar > 0:
            raise InvalidSpecError(f"w_bar must be positive, got {self.w_bar}")
        if not (0.0 <= self.t_lo < self.t_hi <= 1.0):
            raise InvalidSpecError(f"bad truncation interval [{self.t_lo}, {self.t_hi}]")

    @property
    def support(self):
        return (self.w_bar * (2 * self.t_lo - 1), self.w_bar * (2 * self.t_hi - 1))

    def shape(self, u):
        return np.exp(self.a_tilde1 + self.a_tilde2 * np.asarray(u, dtype=float))

    def conditional(self, u):
        """BetaSpec of W given one value of U"""
        a = float(self.shape(u))
        return BetaSpec(a, a, self.t_lo, self.t_hi, scale=2 * self.w_bar, shift=-self.w_bar)

    def sample_given(self, u, rng):
        """One W draw per entry of u"""
        a = self.shape(u)
        lo = special.betainc(a, a, self.t_lo)
        mass = special.betainc(a, a, self.t_hi) - lo
        draws = lo + rng.uniform(size=a.shape) * mass
        unit = np.clip(special.betaincinv(a, a, draws), self.t_lo, self.t_hi)
        return self.w_bar * (2 * unit - 1)

    def log_density_given(self, w, u):
        """log f_{W|U}(w|u), broadcasting w against u; -inf outside the support"""
        a = self.shape(u)
        y = (np.asarray(w, dtype=float) / self.w_bar + 1) / 2
        return beta_log_density(y, a, a, self.t_lo, self.t_hi) - np.log(2 * self.w_bar)


def beta_log_density(y, a, b, t_lo=0.0, t_hi=1.0):
    """Vectorised log density of a truncated Beta on the unit interval"""
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    inside = (y >= t_lo) & (y <= t_hi) & (y > 0) & (y < 1)
    yc = np.clip(y, 1e-300, 1 - 1e-16)
    log_mass = np.log(_partial_mass(a, b, t_lo, t_hi))
    value = (special.xlogy(a - 1, yc) + special.xlog1py(b - 1, -yc)
             - special.betaln(a, b) - log_mass)
    return np.where(inside, value, -np.inf)


# Thin functional surface over the distribution objects

def sample(spec, rng, n):
    return spec.sample(rng, n)


def density(spec, x):
    return spec.density(x)


def cdf(spec, x):
    return spec.cdf(x)


def quantile(spec, alpha):
    return spec.quantile(alpha)


@dataclass
class CharFnGrid:
    """Characteristic function sampled on nonnegative z points"""
    z_points: np.ndarray
    values: np.ndarray
    u_condition: float = None

    def __post_init__(self):
        self.z_points = np.asarray(self.z_points, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.z_points.shape != self.values.shape:
            raise InvalidSpecError("z_points and values differ in length")
        if np.any(np.diff(self.z_points) <= 0):
            raise InvalidSpecError("z_points must be strictly increasing")
        at_zero = np.isclose(self.z_points, 0.0)
        if np.any(at_zero) and not np.allclose(self.values[at_zero], 1.0, atol=1e-8):
            raise InvalidSpecError("phi(0) must equal 1")

    def at(self, z):
        """phi at arbitrary z, using phi(-z) = conj(phi(z))"""
        z = np.asarray(z, dtype=float)
        re = np.interp(np.abs(z), self.z_points, self.values.real)
        im = np.interp(np.abs(z), self.z_points, self.values.imag)
        return re + 1j * np.sign(z) * im


def z_grid(dz=None, z_max=None):
    tol = DEFAULT_TOLERANCES
    dz = tol.gp_dz if dz is None else dz
    z_max = tol.gp_zmax if z_max is None else z_max
    return np.arange(1, int(round(z_max / dz)) + 1) * dz


def piecewise_uniform_cf(knots, probs, z, chunk=256):
    """
    Exact characteristic function of the distribution whose CDF is linear
    between quantile knots (probs[k], knots[k]); stays accurate at large z
    """
    knots = np.asarray(knots, dtype=float)
    dp = np.diff(np.asarray(probs, dtype=float))
    lo, hi = knots[:-1], knots[1:]
    width = hi - lo
    flat = width < 1e-14
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty(z.shape, dtype=complex)
    for start in range(0, z.size, chunk):
        zc = z[start:start + chunk, None]
        e_lo = np.exp(1j * zc * lo)
        with np.errstate(divide='ignore', invalid='ignore'):
            piece = (np.exp(1j * zc * hi) - e_lo) / (1j * zc * np.where(flat, 1.0, width))
        piece = np.where(flat | (zc == 0), e_lo, piece)
        out[start:start + chunk] = piece @ dp
    return out


def quantile_table_cf(spec, z, table_size=None):
    """Forward transform of any family through its quantile table"""
    size = table_size or DEFAULT_TOLERANCES.quantile_table_size
    probs = np.linspace(0.0, 1.0, size)
    # unbounded upper tail: stop the table just short of 1
    probs[-1] = 1.0 - 1e-12 if not np.isfinite(spec.support[1]) else 1.0
    knots = spec.quantile(probs)
    probs[-1] = 1.0
    return piecewise_uniform_cf(knots, probs, z)


def characteristic_function(spec, z, table_size=None):
    return spec.characteristic_function(z, table_size)


def gil_pelaez_invert(phi, w_grid, tail_tol=None):
    """
    CDF on w_grid from phi on a positive z grid:
    F(w) = 1/2 - (1/pi) int_0^inf Im(exp(-izw) phi(z)) / z dz  (trapezoid, truncated)
    """
    tail_tol = DEFAULT_TOLERANCES.gp_tail_tol if tail_tol is None else tail_tol
    keep = phi.z_points > 0
    z = phi.z_points[keep]
    values = phi.values[keep]
    if z.size < 2:
        raise InvalidSpecError("need at least two positive z points")
    if abs(values[-1]) > tail_tol:
        warnings.warn(f"|phi(Z_max={z[-1]:.3g})| = {abs(values[-1]):.3g} exceeds {tail_tol}",
                      GridTooCoarseWarning, stacklevel=2)

    w = np.atleast_1d(np.asarray(w_grid, dtype=float))
    order = np.argsort(w)
    ws = w[order]
    F = np.empty(ws.shape)
    for start in range(0, ws.size, 64):
        block = ws[start:start + 64, None]
        integrand = np.imag(np.exp(-1j * block * z) * values) / z
        # linear extrapolation of the integrand to z = 0 for the first panel
        g0 = integrand[:, 0] - z[0] * (integrand[:, 1] - integrand[:, 0]) / (z[1] - z[0])
        integral = trapezoid(integrand, z, axis=1) + 0.5 * z[0] * (g0 + integrand[:, 0])
        F[start:start + 64] = 0.5 - integral / np.pi
    F = np.maximum.accumulate(np.clip(F, 0.0, 1.0))
    out = np.empty_like(F)
    out[order] = F
    return out
