#!/usr/bin/env python3
"""
Tests for the linear-demand Bayesian Cournot model
"""

import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from backend.core_model import (ConductProfile, ModelPrimitives, check_assumption2,
                                complete_info_batch, complete_info_quantities, conduct_quantities,
                                equilibrium_quantities, equilibrium_quantity, expected_rival_output,
                                foc_residuals, mean_type_matrix, mean_type_matrix_inverse, market_outcome,
                                maximum_quantity, minimum_quantity, solve_conduct_equilibrium)
from backend.distributions import rng_stream
from backend.errors import (AssumptionViolationError, InvalidSpecError, ZeroDenominatorError)


def conduct_prim(n=2, lam=0.5):
    return ModelPrimitives(n, 0.5, lam, np.ones(n), np.tile([0.0, 2.0], (n, 1)), (0.0, 0.0), 5.0)


def hand_prim(u_lower=10.0):
    return ModelPrimitives(2, 0.5, 0.0, [1.0, 1.0], [[0.0, 2.0], [0.0, 2.0]], (-0.5, 0.5), u_lower)


def test_hand_solved_symmetric_market():
    prim = hand_prim()
    assert equilibrium_quantity(prim, 0, 1.0, 0.0, 10.0) == pytest.approx(6.0, abs=1e-12)
    assert market_outcome(prim, [1.0, 1.0], 0.0, 10.0).p == pytest.approx(4.0, abs=1e-12)
    assert complete_info_quantities(prim, [1.0, 1.0], 0.0, 10.0) == pytest.approx([17 / 3, 17 / 3])


def test_hand_solved_asymmetric_market():
    prim = hand_prim()
    draw = market_outcome(prim, [1.0, 2.0], 0.0, 10.0)
    assert draw.q == pytest.approx([6.0, 5.0], abs=1e-12)
    assert draw.p == pytest.approx(4.5, abs=1e-12)
    assert np.abs(foc_residuals(prim, [1.0, 2.0], 0.0, 10.0)).max() < 1e-12
    q_full = complete_info_quantities(prim, [1.0, 2.0], 0.0, 10.0)
    assert q_full == pytest.approx([20 / 3, 14 / 3])
    # complete-information first-order conditions
    assert 10 - 0.5 * q_full[::-1] - q_full - np.array([1.0, 2.0]) == pytest.approx([0, 0], abs=1e-10)


def test_hand_solved_assumption2():
    assert check_assumption2(hand_prim(10.0))
    assert not check_assumption2(hand_prim(0.1))
    degenerate = ModelPrimitives(2, 0.5, 0.0, [1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]], (0.0, 0.0), 50.0)
    assert check_assumption2(degenerate)


def test_strategies_satisfy_first_order_conditions(two_firm_prim):
    rng = rng_stream(3)
    v = rng.uniform(0, 20, size=(10_000, 2))
    w = rng.uniform(-0.5, 0.5, size=10_000)
    u = 40 + rng.exponential(2.0, size=10_000)
    assert np.max(np.abs(foc_residuals(two_firm_prim, v, w, u))) < 1e-10


def test_mean_types_solve_the_linear_system():
    prim = ModelPrimitives(3, 0.5, 0.2, [1.0, 2.0, 3.0], [[0, 2], [0, 4], [0, 6]], (-1, 1), 50.0)
    u, w = 60.0, 0.3
    means = equilibrium_quantities(prim, prim.mu_v, w, u)
    rhs = (u - w - prim.mu_v) / prim.own_slope
    assert np.allclose(mean_type_matrix(prim) @ means, rhs, atol=1e-12)
    assert np.allclose(mean_type_matrix_inverse(prim) @ mean_type_matrix(prim), np.eye(3), atol=1e-12)


def test_quantity_falls_with_own_cost_at_rate_one_over_d(two_firm_prim):
    q_lo = equilibrium_quantity(two_firm_prim, 0, 5.0, 0.0, 45.0)
    q_hi = equilibrium_quantity(two_firm_prim, 0, 6.0, 0.0, 45.0)
    assert q_lo - q_hi == pytest.approx(1 / two_firm_prim.own_slope, abs=1e-12)


def test_quantities_fall_with_common_cost_and_rise_with_demand(two_firm_prim):
    rng = rng_stream(17)
    h = 1e-3
    for _ in range(200):
        i = int(rng.integers(2))
        v = rng.uniform(0, 20)
        w = rng.uniform(-0.5, 0.5 - h)
        u = rng.uniform(40, 60)
        q = equilibrium_quantity(two_firm_prim, i, v, w, u)
        assert equilibrium_quantity(two_firm_prim, i, v, w + h, u) < q
        assert equilibrium_quantity(two_firm_prim, i, v, w, u + h) > q


def test_rival_expectation_uses_mean_types(two_firm_prim):
    expected = equilibrium_quantity(two_firm_prim, 1, 10.0, 0.1, 42.0)
    assert expected_rival_output(two_firm_prim, 0, 0.1, 42.0) == pytest.approx(expected)


def test_market_price_clears(two_firm_prim):
    draw = market_outcome(two_firm_prim, [3.0, 17.0], 0.2, 41.0)
    assert draw.p == pytest.approx(41.0 - two_firm_prim.beta * draw.q.sum())
    assert np.all(draw.q > 0)


def test_floor_and_ceiling_bracket_outputs(two_firm_prim):
    floor = minimum_quantity(two_firm_prim, 0)
    ceiling = maximum_quantity(two_firm_prim, 0, 50.0)
    assert 0 <= floor < ceiling
    assert equilibrium_quantity(two_firm_prim, 0, 20.0, 0.5, 40.0) == pytest.approx(floor)


def test_assumption2_report(two_firm_prim):
    assert check_assumption2(two_firm_prim)
    thin = two_firm_prim.with_values(u_lower=12.0)
    report = check_assumption2(thin)
    assert not report
    assert report.to_dict()['holds'] is False
    with pytest.raises(AssumptionViolationError):
        equilibrium_quantity(thin, 0, 5.0, 0.0, 20.0)


def test_inputs_outside_support_are_rejected(two_firm_prim):
    with pytest.raises(AssumptionViolationError):
        equilibrium_quantity(two_firm_prim, 0, 25.0, 0.0, 45.0)
    with pytest.raises(AssumptionViolationError):
        equilibrium_quantity(two_firm_prim, 0, 5.0, 0.0, 39.0)


@pytest.mark.parametrize('changes', [{'n_firms': 1, 'mu_v': [1.0], 'v_bounds': [[0, 2]]},
                                     {'beta': 0.0}, {'lam': -0.1},
                                     {'mu_v': [30.0, 10.0]}])
def test_bad_primitives(two_firm_prim, changes):
    with pytest.raises(InvalidSpecError):
        two_firm_prim.with_values(**changes)


def test_complete_info_with_equal_costs_matches_private_strategies(two_firm_prim):
    q_full = complete_info_quantities(two_firm_prim, two_firm_prim.mu_v, 0.1, 44.0)
    q_private = equilibrium_quantities(two_firm_prim, two_firm_prim.mu_v, 0.1, 44.0)
    assert np.allclose(q_full, q_private, atol=1e-12)


def test_complete_info_drops_the_expensive_firm():
    prim = ModelPrimitives(2, 1.0, 0.0, [5.0, 5.0], [[0, 10], [0, 10]], (0.0, 0.0), 10.0)
    q = complete_info_quantities(prim, [1.0, 9.5], 0.0, 10.0)
    assert q[1] == 0.0
    assert q[0] == pytest.approx(4.5)


def test_complete_info_batch_matches_row_solver():
    prim = ModelPrimitives(4, 1.0, 0.2, np.full(4, 5.0), np.tile([0.0, 10.0], (4, 1)), (0.0, 0.0), 8.0)
    rng = rng_stream(5)
    v = rng.uniform(0, 10, size=(200, 4))
    u = rng.uniform(8, 20, size=200)
    batch = complete_info_batch(prim, v, 0.0, u)
    rows = np.array([complete_info_quantities(prim, v[t], 0.0, u[t]) for t in range(200)])
    assert np.allclose(batch, rows, atol=1e-10)
    assert (batch == 0).any()


def test_conduct_means_asymmetric():
    means = solve_conduct_equilibrium(conduct_prim(), ConductProfile([-1.0, 0.0]), 0.0, 10.0)
    assert means == pytest.approx([7.2, 3.6], abs=1e-10)


def test_conduct_means_symmetric():
    means = solve_conduct_equilibrium(conduct_prim(lam=0.0), ConductProfile([-0.2, -0.2]), 0.0, 10.0)
    assert means == pytest.approx([6.428571428571, 6.428571428571], abs=1e-9)


def test_cournot_conduct_reproduces_private_cost_means(two_firm_prim):
    means = solve_conduct_equilibrium(two_firm_prim, ConductProfile([0.0, 0.0]), 0.2, 45.0)
    assert means == pytest.approx(equilibrium_quantities(two_firm_prim, two_firm_prim.mu_v, 0.2, 45.0))
    q = conduct_quantities(two_firm_prim, ConductProfile([0.0, 0.0]), [4.0, 12.0], 0.2, 45.0)
    assert q == pytest.approx(equilibrium_quantities(two_firm_prim, np.array([4.0, 12.0]), 0.2, 45.0))


def test_conduct_rejects_positive_slopes_and_zero_denominators():
    with pytest.raises(InvalidSpecError):
        ConductProfile([0.1, 0.0])
    with pytest.raises(ZeroDenominatorError):
        ConductProfile([-2.0, 0.0]).denominators(conduct_prim(lam=0.0))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, '-v']))
