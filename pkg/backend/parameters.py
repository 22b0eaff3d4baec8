"""
Parameters - Parametric vector theta and its mapping to model primitives
Flat-vector order: beta, lambda, u_lower, mu_u, sigma2_u, w_bar,
a_tilde1, a_tilde2, then (a_g, b_g) for every cost group
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .config import THETA_SCALARS, MONTE_CARLO_DESIGN
from .core_model import ModelPrimitives, check_assumption2
from .distributions import BetaSpec, TruncNormalSpec, WShockSpec
from .errors import InvalidSpecError, AssumptionViolationError


@dataclass(frozen=True, eq=False)
class ThetaParam:
    beta: float
    lam: float
    u_lower: float
    mu_u: float
    sigma2_u: float
    w_bar: float
    a_tilde1: float
    a_tilde2: float
    group_shapes: tuple
    group_map: tuple
    truncation: tuple = (0.025, 0.975)
    names: tuple = field(init=False, repr=False)

    def __post_init__(self):
        shapes = tuple((float(a), float(b)) for a, b in self.group_shapes)
        groups = tuple(int(g) for g in self.group_map)
        object.__setattr__(self, 'group_shapes', shapes)
        object.__setattr__(self, 'group_map', groups)
        object.__setattr__(self, 'truncation', tuple(float(t) for t in self.truncation))
        names = ['beta', 'lambda', 'u_lower', 'mu_u', 'sigma2_u', 'w_bar', 'a_tilde1', 'a_tilde2']
        for g in range(len(shapes)):
            names += [f'a_{g + 1}', f'b_{g + 1}']
        object.__setattr__(self, 'names', tuple(names))

        if not self.beta > 0 or not self.lam >= 0:
            raise InvalidSpecError("need beta > 0 and lambda >= 0")
        if not (self.u_lower > 0 and self.sigma2_u > 0 and self.w_bar > 0):
            raise InvalidSpecError("u_lower, sigma2_u and w_bar must be positive")
        if any(a <= 0 or b <= 0 for a, b in shapes):
            raise InvalidSpecError("group shapes must be positive")
        if len(groups) < 2 or min(groups) < 0 or max(groups) >= len(shapes):
            raise InvalidSpecError("group_map must assign each of >= 2 firms to a listed group")

    @property
    def n_firms(self):
        return len(self.group_map)

    @property
    def n_groups(self):
        return len(self.group_shapes)

    def to_vector(self):
        scalars = [self.beta, self.lam, self.u_lower, self.mu_u, self.sigma2_u,
                   self.w_bar, self.a_tilde1, self.a_tilde2]
        return np.array(scalars + [x for pair in self.group_shapes for x in pair], dtype=float)

    def from_vector(self, vector):
        """New theta with the same group structure and values from `vector`"""
        vector = np.asarray(vector, dtype=float)
        if vector.size != len(self.names):
            raise InvalidSpecError(f"expected {len(self.names)} values, got {vector.size}")
        shapes = tuple(zip(vector[8::2], vector[9::2]))
        return replace(self, beta=vector[0], lam=vector[1], u_lower=vector[2], mu_u=vector[3],
                       sigma2_u=vector[4], w_bar=vector[5], a_tilde1=vector[6],
                       a_tilde2=vector[7], group_shapes=shapes)

    def to_dict(self):
        out = dict(zip(self.names, (float(x) for x in self.to_vector())))
        out['group_map'] = list(self.group_map)
        out['truncation'] = list(self.truncation)
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        missing = [k for k in THETA_SCALARS + ('group_shapes', 'group_map') if k not in data]
        if missing:
            raise InvalidSpecError(f"theta is missing {missing}")
        return cls(beta=data['beta'], lam=data['lambda'], u_lower=data['u_lower'],
                   mu_u=data['mu_u'], sigma2_u=data['sigma2_u'], w_bar=data['w_bar'],
                   a_tilde1=data['a_tilde1'], a_tilde2=data['a_tilde2'],
                   group_shapes=data['group_shapes'], group_map=data['group_map'],
                   truncation=data.get('truncation', (0.025, 0.975)))

    @classmethod
    def monte_carlo_design(cls):
        """20 firms in two groups of 10 with truncated Beta costs"""
        return cls.from_dict(MONTE_CARLO_DESIGN)

    # Shock families implied by theta

    def demand_spec(self):
        return TruncNormalSpec(self.mu_u, self.sigma2_u, self.u_lower)

    def common_shock_spec(self):
        t_lo, t_hi = self.truncation
        return WShockSpec(self.w_bar, self.a_tilde1, self.a_tilde2, t_lo, t_hi)

    def cost_spec(self, i):
        """Stationary private cost of firm i: w_bar (B + 1), B ~ Beta(a_g, b_g)"""
        a, b = self.group_shapes[self.group_map[i]]
        t_lo, t_hi = self.truncation
        return BetaSpec(a, b, t_lo, t_hi, scale=self.w_bar, shift=self.w_bar)

    def cost_specs(self):
        return [self.cost_spec(i) for i in range(self.n_firms)]

    def mean_costs(self):
        """mu_V^dt per firm from the truncated Beta means"""
        return np.array([spec.mean() for spec in self.cost_specs()])

    def primitives(self, check=True):
        specs = self.cost_specs()
        prim = ModelPrimitives(
            n_firms=self.n_firms, beta=self.beta, lam=self.lam,
            mu_v=np.array([s.mean() for s in specs]),
            v_bounds=np.array([s.support for s in specs]),
            w_bounds=self.common_shock_spec().support,
            u_lower=self.u_lower)
        if check:
            report = check_assumption2(prim)
            if not report:
                raise AssumptionViolationError("theta violates Assumption 2", report.to_dict())
        return prim
