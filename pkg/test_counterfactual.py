#!/usr/bin/env python3
"""
Tests for firm grouping and the information-regime comparison
"""

import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from backend.core_model import consumer_surplus
from backend.counterfactual import (compare_regimes, compare_regimes_for,
                                    consumer_surplus_by_quadrature, kmeans_firms)
from backend.distributions import PointMass, rng_stream
from backend.errors import InvalidSpecError
from backend.panel_io import Panel


def two_group_panel():
    rng = rng_stream(3)
    q = np.column_stack([rng.normal(10, 1, 400), rng.normal(2, 0.2, 400), rng.normal(10.5, 1, 400),
                         rng.normal(2.2, 0.2, 400), rng.normal(9.5, 1, 400)]).clip(0)
    return Panel(None, 80 - q.sum(axis=1), q)


def test_consumer_surplus_closed_form_matches_quadrature():
    for beta, u, total in ((0.5, 10.0, 12.0), (1.0, 40.0, 25.0), (2.3, 100.0, 0.0)):
        assert consumer_surplus(beta, total) == pytest.approx(
            consumer_surplus_by_quadrature(beta, u, total), abs=1e-9)


def test_kmeans_groups_by_output_level():
    grouping = kmeans_firms(two_group_panel(), 2, seed=1)
    assert grouping.assignment.tolist() == [1, 0, 1, 0, 1]
    assert grouping.centroids[0, 0] < grouping.centroids[1, 0]
    assert grouping.to_dict()['k'] == 2


def test_kmeans_single_group_and_bounds():
    panel = two_group_panel()
    grouping = kmeans_firms(panel, 1)
    assert np.all(grouping.assignment == 0)
    assert grouping.centroids[0, 0] == pytest.approx(panel.q.mean())
    for k in (0, 6):
        with pytest.raises(InvalidSpecError):
            kmeans_firms(panel, k)


def test_degenerate_costs_make_regimes_identical(two_firm_prim, two_firm_specs):
    u_spec, w_spec, _ = two_firm_specs
    point = PointMass(10.0)
    comparison = compare_regimes_for(two_firm_prim, u_spec, w_spec, [point, point],
                                     T_sim=50, n_sims=3, seed=2)
    assert comparison.q_complete == pytest.approx(comparison.q_incomplete, abs=1e-10)
    assert comparison.cs_ratio == pytest.approx(1.0, abs=1e-12)


def test_regimes_share_mean_total_output(small_theta):
    comparison = compare_regimes(small_theta, T_sim=336, n_sims=5, seed=4, threads=2)
    summary = comparison.to_dict()
    assert summary['n_sims'] == 5 and summary['n_periods'] == 336
    assert summary['mean_total_complete'] == pytest.approx(summary['mean_total_incomplete'], rel=1e-3)
    assert comparison.cs_ratio > 0


def test_regime_frame_layout(small_theta):
    comparison = compare_regimes(small_theta, T_sim=20, n_sims=2, seed=4)
    frame = comparison.to_frame()
    assert list(frame.columns) == ['period', 'regime', 'p', 'cs', 'q_group1', 'q_group2']
    assert len(frame) == 40
    assert set(frame['regime']) == {'incomplete', 'complete'}


def test_regime_comparison_rejects_empty_runs(small_theta):
    with pytest.raises(InvalidSpecError):
        compare_regimes(small_theta, T_sim=10, n_sims=0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, '-v']))
