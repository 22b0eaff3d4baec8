"""
Conduct - Identification of lambda and conduct slopes
Uses the conditional means of own and rival output at two demand levels
"""

from dataclasses import dataclass

import numpy as np

from .core_model import solve_conduct_equilibrium
from .errors import ZeroDenominatorError


def conduct_means_given_u(prim, conduct, u):
    """E[Q_i | U=u] and E[Q+_{-i} | U=u] with E[W | U] = 0"""
    means = solve_conduct_equilibrium(prim, conduct, 0.0, u)
    return means, means.sum() - means


@dataclass
class ConductEstimate:
    lam: float
    kappa: np.ndarray
    denominators: np.ndarray
    kappa_1: float

    def to_dict(self):
        return {'lambda': self.lam, 'kappa': self.kappa.tolist(),
                'denominators': self.denominators.tolist(), 'kappa_1': self.kappa_1}


def identify_conduct(own_u, rival_u, own_u2, rival_u2, u, u2, beta, kappa_1=0.0, tol=1e-12):
    """
    D_i = [(u - u') - beta (m_-i(u) - m_-i(u'))] / (m_i(u) - m_i(u')), then
    lambda from firm 1's normalised slope and kappa_i from the rest
    """
    own_u, own_u2 = np.asarray(own_u, float), np.asarray(own_u2, float)
    rival_u, rival_u2 = np.asarray(rival_u, float), np.asarray(rival_u2, float)
    gap = own_u - own_u2
    if abs(u - u2) < tol or np.any(np.abs(gap) < tol):
        raise ZeroDenominatorError("conditional means coincide at the two demand levels")
    denom = ((u - u2) - beta * (rival_u - rival_u2)) / gap
    n = denom.size
    lam = float(denom[0] - beta * (n - 1) * kappa_1 - 2 * beta)
    kappa = (denom - lam - 2 * beta) / (beta * (n - 1))
    kappa[0] = kappa_1
    return ConductEstimate(lam, kappa, denom, float(kappa_1))


def identify_conduct_from_model(prim, conduct, u, u2, kappa_1=None):
    """Round trip through model-implied conditional means"""
    own, rival = conduct_means_given_u(prim, conduct, u)
    own2, rival2 = conduct_means_given_u(prim, conduct, u2)
    k1 = conduct.kappa[0] if kappa_1 is None else kappa_1
    return identify_conduct(own, rival, own2, rival2, u, u2, prim.beta, k1)


def kappa_1_sensitivity(own_u, rival_u, own_u2, rival_u2, u, u2, beta, kappa_1_values):
    """Recovered lambda for each candidate normalisation of kappa_1"""
    return {float(k): identify_conduct(own_u, rival_u, own_u2, rival_u2, u, u2, beta, k).lam
            for k in kappa_1_values}
