#!/usr/bin/env python3
"""
Tests for shock families, random streams and characteristic-function inversion
"""

import os
import sys
import warnings

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import trapezoid

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from backend import distributions as dist
from backend.distributions import (BetaSpec, CharFnGrid, PointMass, TruncNormalSpec, WShockSpec,
                                   gil_pelaez_invert, piecewise_uniform_cf, quantile_table_cf,
                                   rng_stream, truncated_beta_mean, z_grid)
from backend.errors import GridTooCoarseWarning, InvalidSpecError
from backend.sources import probability_nodes


def test_streams_are_reproducible_and_independent():
    a = rng_stream(7, (0, 2)).uniform(size=5)
    b = rng_stream(7, (0, 2)).uniform(size=5)
    c = rng_stream(7, (0, 3)).uniform(size=5)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_truncated_normal_moments_and_support():
    spec = TruncNormalSpec(300.0, 800.0, 200.0)
    reference = stats.truncnorm((200 - 300) / np.sqrt(800), np.inf, loc=300, scale=np.sqrt(800))
    assert spec.mean() == pytest.approx(reference.mean())
    assert spec.variance() == pytest.approx(reference.var())
    draws = spec.sample(rng_stream(1), 5000)
    assert draws.min() >= 200.0
    assert spec.support == (200.0, np.inf)


@pytest.mark.parametrize('args', [(0.0, -1.0, 0.0), (0.0, np.inf, 0.0), (np.nan, 1.0, 0.0)])
def test_truncated_normal_rejects_bad_parameters(args):
    with pytest.raises(InvalidSpecError):
        TruncNormalSpec(*args)


def test_beta_quantile_inverts_cdf():
    spec = BetaSpec(0.8, 0.9, 0.025, 0.975, scale=5.0, shift=5.0)
    alpha = np.linspace(0, 1, 21)
    assert spec.cdf(spec.quantile(alpha)) == pytest.approx(alpha, abs=1e-10)
    assert spec.quantile(0.0) == pytest.approx(spec.support[0])
    assert spec.quantile(1.0) == pytest.approx(spec.support[1])
    with pytest.raises(InvalidSpecError):
        spec.quantile(1.5)


def test_truncated_beta_mean_matches_quadrature():
    spec = BetaSpec(0.6, 0.6, 0.025, 0.975)
    alpha, weight = probability_nodes(200)
    assert spec.mean() == pytest.approx(weight @ spec.quantile(alpha), abs=1e-6)
    assert truncated_beta_mean(2.0, 2.0) == pytest.approx(0.5)


def test_beta_sample_stays_in_truncated_support():
    spec = BetaSpec(1.5, 3.0, 0.025, 0.975, scale=2.0, shift=1.0)
    draws = spec.sample(rng_stream(2), 20000)
    lo, hi = spec.support
    assert draws.min() >= lo and draws.max() <= hi
    assert draws.mean() == pytest.approx(spec.mean(), abs=0.01)


@pytest.mark.parametrize('kwargs', [dict(a=0.0, b=1.0), dict(a=1.0, b=1.0, t_lo=0.6, t_hi=0.4),
                                    dict(a=1.0, b=1.0, scale=-1.0),
                                    dict(a=0.5, b=50.0, t_lo=0.99, t_hi=1.0)])
def test_beta_rejects_bad_parameters(kwargs):
    with pytest.raises(InvalidSpecError):
        BetaSpec(**kwargs)


def test_common_shock_is_centred_and_normalised():
    spec = WShockSpec(5.0, 0.001, 0.001, 0.025, 0.975)
    assert spec.support == pytest.approx((-4.75, 4.75))
    for u in (200.0, 300.0, 450.0):
        assert spec.conditional(u).mean() == pytest.approx(0.0, abs=1e-12)
    w = np.linspace(-4.75, 4.75, 20001)
    density = np.exp(spec.log_density_given(w, 300.0))
    assert trapezoid(density, w) == pytest.approx(1.0, abs=1e-3)
    assert np.isneginf(spec.log_density_given(4.9, 300.0))


def test_common_shock_shape_moves_with_demand():
    spec = WShockSpec(1.0, 0.3, 0.01)
    assert spec.shape(60.0) > spec.shape(30.0)
    narrow, wide = spec.conditional(60.0), spec.conditional(30.0)
    assert narrow.variance() < wide.variance()
    draws = spec.sample_given(np.full(5000, 40.0), rng_stream(4))
    assert np.all(np.abs(draws) <= 1.0)


def test_point_mass():
    spec = PointMass(2.5)
    assert spec.sample(rng_stream(0), 3) == pytest.approx([2.5, 2.5, 2.5])
    assert spec.cdf([2.0, 2.5, 3.0]) == pytest.approx([0.0, 1.0, 1.0])
    assert spec.characteristic_function(1.0) == pytest.approx(np.exp(2.5j))


def test_functional_surface_delegates():
    spec = BetaSpec(2.0, 2.0)
    assert dist.cdf(spec, 0.5) == pytest.approx(0.5)
    assert dist.quantile(spec, 0.5) == pytest.approx(0.5)
    assert dist.density(spec, 0.5) == pytest.approx(1.5)
    assert dist.sample(spec, rng_stream(0), 4).shape == (4,)


def test_uniform_characteristic_function_is_exact():
    z = np.linspace(0.0, 200.0, 801)
    exact = np.ones_like(z, dtype=complex)
    exact[1:] = (np.exp(1j * z[1:]) - 1) / (1j * z[1:])
    assert piecewise_uniform_cf([0.0, 1.0], [0.0, 1.0], z) == pytest.approx(exact, abs=1e-12)
    assert quantile_table_cf(BetaSpec(1.0, 1.0), z, 11) == pytest.approx(exact, abs=1e-12)


def test_gil_pelaez_recovers_normal_cdf():
    z = z_grid(0.01, 40.0)
    phi = CharFnGrid(z, np.exp(-0.5 * z ** 2))
    w = np.linspace(-3, 3, 61)
    assert gil_pelaez_invert(phi, w) == pytest.approx(stats.norm.cdf(w), abs=1e-4)


def test_gil_pelaez_recovers_uniform_cdf():
    w_bar = 2.0
    z = z_grid(0.01, 200.0 / w_bar)
    phi = CharFnGrid(z, np.sin(z * w_bar) / (z * w_bar))
    w = np.linspace(-1.5 * w_bar, 1.5 * w_bar, 61)
    truth = np.clip((w + w_bar) / (2 * w_bar), 0.0, 1.0)
    assert np.max(np.abs(gil_pelaez_invert(phi, w) - truth)) < 1e-3


def test_gil_pelaez_warns_on_short_grid():
    z = z_grid(0.01, 5.0)
    phi = CharFnGrid(z, piecewise_uniform_cf([0.0, 1.0], [0.0, 1.0], z))
    with pytest.warns(GridTooCoarseWarning):
        gil_pelaez_invert(phi, [0.5])


def test_char_fn_grid_validation():
    with pytest.raises(InvalidSpecError):
        CharFnGrid([0.0, 1.0], [0.9, 0.5])
    with pytest.raises(InvalidSpecError):
        CharFnGrid([1.0, 0.5], [0.5, 0.9])
    grid = CharFnGrid([0.0, 1.0, 2.0], [1.0, 0.5 + 0.2j, 0.1 + 0.1j])
    assert grid.at(-1.0) == pytest.approx(np.conj(grid.at(1.0)))


def test_z_grid_excludes_zero():
    z = z_grid(0.5, 2.0)
    assert z == pytest.approx([0.5, 1.0, 1.5, 2.0])
    with warnings.catch_warnings():
        warnings.simplefilter('error')
        z_grid()


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, '-v']))
