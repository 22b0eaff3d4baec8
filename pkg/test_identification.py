#!/usr/bin/env python3
"""
Tests for the private-information check and nonparametric identification
"""

import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from backend.config import DEFAULT_TOLERANCES
from backend.distributions import BetaSpec, rng_stream, z_grid
from backend.errors import BandOccupancyError, InvalidSpecError, ZeroDenominatorError
from backend.identification import (assemble_joint_cdf, beta_from_quantiles, conditional_w_cdf,
                                    identify_all, identify_beta, identify_fv, identify_lambda,
                                    identify_lambda_by_firm, identify_mu_v, identify_phi_w,
                                    lambda_from_gamma, recover_demand_shock,
                                    test_private_information as check_private_information)
from backend.panel_io import Panel, write_json
from backend.simulator import simulate_from_specs, simulate_panel
from backend.sources import BandedPanel, MarketPopulation, sum_quantiles


def test_check_passes_under_private_costs(two_firm_prim, two_firm_specs):
    panel, _ = simulate_from_specs(two_firm_prim, *two_firm_specs, T=5000, seed=21)
    report = check_private_information(panel)
    assert report.passed
    assert not report.mass_point
    assert report.to_dict()['verdict'] == 'PASS'


def test_check_fails_under_complete_information(two_firm_prim, two_firm_specs):
    panel, _ = simulate_from_specs(two_firm_prim, *two_firm_specs, T=5000, seed=21,
                                   complete_info=True)
    report = check_private_information(panel)
    assert not report.passed
    assert report.to_dict()['verdict'] == 'FAIL'


def test_check_flags_mass_point_at_zero():
    rng = rng_stream(8)
    q = rng.uniform(1, 5, size=(1000, 2))
    q[:50, 0] = 0.0
    panel = Panel(None, 30 - q.sum(axis=1), q)
    assert check_private_information(panel).mass_point


def test_band_needs_enough_rows(small_theta):
    panel, _ = simulate_panel(small_theta, T=100, seed=1)
    with pytest.raises(BandOccupancyError):
        BandedPanel(panel).band(0)


def test_sum_quantiles_of_two_uniforms():
    specs = [BetaSpec(1.0, 1.0), BetaSpec(1.0, 1.0)]
    # triangular law on [0, 2]
    alphas = np.array([0.125, 0.5, 0.875])
    assert sum_quantiles(specs, alphas) == pytest.approx([0.5, 1.0, 1.5], abs=2e-3)


def test_population_beta_is_exact(mc_theta):
    source = MarketPopulation.from_theta(mc_theta)
    for i in (0, 15):
        assert identify_beta(source, i, 0.25, 0.75) == pytest.approx(mc_theta.beta, rel=1e-8)
    assert identify_beta(source, 3, 0.1, 0.9) == pytest.approx(mc_theta.beta, rel=1e-8)


def test_beta_rejects_degenerate_levels(mc_theta):
    source = MarketPopulation.from_theta(mc_theta)
    with pytest.raises(ZeroDenominatorError):
        identify_beta(source, 0, 0.5, 0.5)
    with pytest.raises(InvalidSpecError):
        identify_beta(source, 0, -0.1, 0.5)
    with pytest.raises(ZeroDenominatorError):
        beta_from_quantiles(1.0, 2.0, 3.0, 3.0)


def test_population_lambda_and_cost_means_are_exact(mc_theta):
    source = MarketPopulation.from_theta(mc_theta)
    lam_by_firm = identify_lambda_by_firm(source, mc_theta.beta)
    assert lam_by_firm == pytest.approx(np.full(20, mc_theta.lam), abs=1e-8)
    lam = identify_lambda(source, mc_theta.beta)
    mu_v = identify_mu_v(source, mc_theta.beta, lam)
    assert mu_v == pytest.approx(mc_theta.mean_costs(), abs=1e-7)


def test_lambda_from_gamma():
    assert lambda_from_gamma(1 / 3.5, 1.0, 2) == pytest.approx(0.5)
    with pytest.raises(ZeroDenominatorError):
        lambda_from_gamma(0.0, 1.0, 2)


def test_population_cost_quantiles_are_exact(mc_theta):
    source = MarketPopulation.from_theta(mc_theta)
    alpha = np.linspace(0, 1, 101)
    mu_v = mc_theta.mean_costs()
    for i, j in ((0, 1), (18, 2)):
        table = identify_fv(source, i, j, alpha, mc_theta.beta, mc_theta.lam, mu_v[i])
        assert table.quantiles == pytest.approx(mc_theta.cost_spec(i).quantile(alpha), abs=1e-8)
        assert table.cdf(table.quantiles[50]) == pytest.approx(0.5)
    with pytest.raises(InvalidSpecError):
        identify_fv(source, 0, 0, alpha, mc_theta.beta, mc_theta.lam, mu_v[0])


def test_common_shock_law_recovered_by_deconvolution(mc_theta):
    source = MarketPopulation.from_theta(mc_theta)
    i = 18
    alpha = np.linspace(0, 1, DEFAULT_TOLERANCES.quantile_table_size)
    mu_v = mc_theta.mean_costs()
    table = identify_fv(source, i, 0, alpha, mc_theta.beta, mc_theta.lam, mu_v[i])
    phi = identify_phi_w(source, i, 300.0, z_grid(0.005, 60.0), mc_theta.beta, mc_theta.lam,
                         mu_v, table)
    w = np.linspace(-4.5, 4.5, 37)
    truth = mc_theta.common_shock_spec().conditional(300.0).cdf(w)
    assert np.max(np.abs(conditional_w_cdf(phi, w) - truth)) <= 1e-2


def test_demand_shock_recovery(small_theta):
    panel, latent = simulate_panel(small_theta, T=300, seed=4)
    recovered = recover_demand_shock(panel, small_theta.beta)
    assert recovered.u == pytest.approx(latent.u)
    assert np.all(np.diff(recovered.cdf) >= 0)
    assert recovered.cdf[-1] == pytest.approx(1.0)


def test_identify_all_on_population(small_theta, tmp_path):
    tol = DEFAULT_TOLERANCES.updated(quantile_table_size=1001)
    source = MarketPopulation.from_theta(small_theta, tol)
    report = identify_all(source, alpha_pairs=((0.25, 0.75), (0.1, 0.9)), z=z_grid(0.01, 20.0),
                          n_w=41, reference_firms=1, tolerances=tol)
    assert report.beta_hat == pytest.approx(1.0, rel=1e-8)
    assert report.lambda_hat == pytest.approx(0.5, abs=1e-8)
    assert report.mu_v_hat == pytest.approx(small_theta.mean_costs(), abs=1e-7)
    assert report.fv_dispersion == pytest.approx([0.0, 0.0], abs=1e-8)
    assert len(report.fw_given_u) == 3
    inner = np.abs(report.w_grid) <= 0.8
    for u_value, cdf in report.fw_given_u.items():
        truth = small_theta.common_shock_spec().conditional(u_value).cdf(report.w_grid)
        assert np.max(np.abs(cdf - truth)[inner]) <= 0.02
    path = write_json(report.to_dict(), tmp_path / 'identification_report.json')
    assert path.exists()


def test_identify_all_on_sample_runs(small_theta):
    panel, _ = simulate_panel(small_theta, T=3000, seed=6)
    tol = DEFAULT_TOLERANCES.updated(quantile_table_size=401)
    report = identify_all(BandedPanel(panel, tolerances=tol), z=z_grid(0.02, 10.0), n_w=21,
                          reference_firms=1, tolerances=tol)
    assert report.mode == 'sample'
    assert report.diagnostics['verdict'] in ('PASS', 'FAIL')
    assert report.beta_hat > 0


def test_joint_cdf_marginalises_to_demand(small_theta):
    source = MarketPopulation.from_theta(small_theta)
    mu_v = small_theta.mean_costs()
    table = identify_fv(source, 0, 1, np.linspace(0, 1, 1001), 1.0, 0.5, mu_v[0])
    joint = assemble_joint_cdf(source, 0, [-5.0, 0.0, 5.0], 45.0, 1.0, 0.5, mu_v, table,
                               z=z_grid(0.01, 20.0), nodes=8)
    f_u = small_theta.demand_spec().cdf(45.0)
    assert joint == pytest.approx([0.0, 0.5 * f_u, f_u], abs=0.03)
    below = assemble_joint_cdf(source, 0, [0.0], 29.0, 1.0, 0.5, mu_v, table)
    assert below == pytest.approx([0.0])


@pytest.mark.slow
def test_sample_lambda_on_monte_carlo_design(mc_theta):
    panel, _ = simulate_panel(mc_theta, T=100_000, seed=11)
    lam = identify_lambda(BandedPanel(panel), mc_theta.beta)
    assert lam == pytest.approx(mc_theta.lam, abs=0.01)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, '-v']))
