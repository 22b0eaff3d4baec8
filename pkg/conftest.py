"""
Shared pytest fixtures and the --runslow switch
"""

import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from backend.core_model import ModelPrimitives
from backend.distributions import BetaSpec, TruncNormalSpec
from backend.parameters import ThetaParam


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help="also run tests marked slow")


def pytest_configure(config):
    config.addinivalue_line('markers', "slow: long-running statistical check")


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def two_firm_prim():
    """Two symmetric firms, uniform costs on [0, 20], demand floor 40"""
    return ModelPrimitives(n_firms=2, beta=1.0, lam=1.0, mu_v=np.array([10.0, 10.0]),
                           v_bounds=np.array([[0.0, 20.0], [0.0, 20.0]]),
                           w_bounds=(-0.5, 0.5), u_lower=40.0)


@pytest.fixture
def two_firm_specs():
    """(u_spec, w_spec, v_specs) matching two_firm_prim"""
    v_spec = BetaSpec(1.0, 1.0, scale=20.0, shift=0.0)
    w_spec = BetaSpec(1.0, 1.0, scale=1.0, shift=-0.5)
    u_spec = TruncNormalSpec(40.0, 4.0, 40.0)
    return u_spec, w_spec, [v_spec, v_spec]


@pytest.fixture
def small_theta():
    return ThetaParam(beta=1.0, lam=0.5, u_lower=30.0, mu_u=40.0, sigma2_u=25.0, w_bar=1.0,
                      a_tilde1=0.3, a_tilde2=0.01, group_shapes=[[2.0, 2.0], [1.5, 3.0]],
                      group_map=[0, 1], truncation=(0.025, 0.975))


@pytest.fixture
def mc_theta():
    return ThetaParam.monte_carlo_design()
