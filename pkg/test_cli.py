#!/usr/bin/env python3
"""
Tests for the run configuration and the command-line front end
"""

import json
import os
import sys

import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import frontend.cli as cli
import main as entry_point
from backend.errors import ConfigError
from backend.panel_io import read_panel
from frontend.cli import main
from frontend.run_config import RunConfig


SMALL_THETA = {'beta': 1.0, 'lambda': 0.5, 'u_lower': 30.0, 'mu_u': 40.0, 'sigma2_u': 25.0,
               'w_bar': 1.0, 'a_tilde1': 0.3, 'a_tilde2': 0.01,
               'group_shapes': [[2.0, 2.0], [1.5, 3.0]], 'group_map': [0, 1],
               'truncation': [0.025, 0.975]}


def write_config(tmp_path, data, name='run.json'):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding='utf-8')
    return str(path)


def test_unknown_key_names_its_path(tmp_path, capsys):
    config = write_config(tmp_path, {'simulation': {'T': 10, 'periods': 5}})
    assert main(['simulate', '--config', config]) == 1
    assert 'simulation.periods' in capsys.readouterr().out
    with pytest.raises(ConfigError) as info:
        RunConfig.from_dict({'estimation': {'n_start': 2}})
    assert info.value.key_path == 'estimation.n_start'


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{\n  "simulation": {"T": }\n}\n', encoding='utf-8')
    with pytest.raises(ConfigError) as info:
        RunConfig.load(path)
    assert info.value.line == 2
    assert info.value.column is not None
    assert main(['simulate', '--config', str(path)]) == 1


def test_missing_config_and_panel(tmp_path):
    assert main(['simulate', '--config', str(tmp_path / 'absent.json')]) == 1
    assert main(['check', '--out', str(tmp_path)]) == 1


def test_simulate_writes_panel_and_latent(tmp_path):
    assert main(['simulate', '--T', '50', '--seed', '3', '--out', str(tmp_path)]) == 0
    panel = read_panel(tmp_path / 'panel.csv')
    assert panel.n_periods == 50
    assert panel.n_firms == 20
    assert (tmp_path / 'latent.csv').exists()


def test_simulate_to_named_file(tmp_path):
    config = write_config(tmp_path, {'theta': SMALL_THETA})
    target = tmp_path / 'runs' / 'small.csv'
    assert main(['simulate', '--config', config, '--T', '40', '--out', str(target)]) == 0
    assert read_panel(target).n_firms == 2
    assert (tmp_path / 'runs' / 'small_latent.csv').exists()


def test_cluster_on_simulated_panel(tmp_path):
    config = write_config(tmp_path, {'theta': SMALL_THETA})
    assert main(['simulate', '--config', config, '--T', '100', '--out', str(tmp_path)]) == 0
    assert main(['cluster', '--config', config, '--panel', str(tmp_path / 'panel.csv'),
                 '--k', '2', '--out', str(tmp_path)]) == 0
    groups = json.loads((tmp_path / 'groups.json').read_text(encoding='utf-8'))
    assert sorted(groups['assignment']) == [0, 1]


def test_conduct_extension(tmp_path):
    config = write_config(tmp_path, {'extensions': {'run': ['conduct']}})
    assert main(['extensions', '--config', config, '--out', str(tmp_path)]) == 0
    results = json.loads((tmp_path / 'extensions.json').read_text(encoding='utf-8'))
    assert results['conduct']['recovered']['lambda'] == pytest.approx(0.1, abs=1e-9)
    bad = write_config(tmp_path, {'extensions': {'run': ['auction']}}, 'bad.json')
    assert main(['extensions', '--config', bad, '--out', str(tmp_path)]) == 1


def test_ci_forwards_configured_numerics(tmp_path, monkeypatch):
    estimates = tmp_path / 'estimates.json'
    estimates.write_text(json.dumps({'theta': SMALL_THETA}), encoding='utf-8')
    config = write_config(tmp_path, {'theta': SMALL_THETA,
                                     'numerics': {'gl_nodes': 16, 'max_blocks': 5},
                                     'estimation': {'n_starts': 2, 'box_halfwidth': 0.2}})
    assert main(['simulate', '--config', config, '--T', '100', '--out', str(tmp_path)]) == 0

    real_ci = cli.subsample_ci
    seen = {}

    def recording_ci(panel, theta_hat, *args, **options):
        seen.update(options)
        return real_ci(panel, theta_hat, *args, estimator=lambda block: theta_hat.to_vector(), **options)

    monkeypatch.setattr(cli, 'subsample_ci', recording_ci)
    assert main(['ci', '--config', config, '--panel', str(tmp_path / 'panel.csv'),
                 '--theta', str(estimates), '--out', str(tmp_path)]) == 0
    assert seen['n_starts'] == 2
    assert seen['tolerances'].gl_nodes == 16 and seen['tolerances'].box_halfwidth == 0.2
    result = json.loads((tmp_path / 'ci.json').read_text(encoding='utf-8'))
    assert result['n_blocks'] == 5 and result['n_excluded'] == 0


def test_montecarlo_starts_default_to_multistart():
    assert RunConfig()['montecarlo']['n_starts'] is None


def test_interrupt_exits_cleanly(monkeypatch, capsys):
    def interrupted(argv):
        raise KeyboardInterrupt

    monkeypatch.setattr(entry_point, 'run_cli', interrupted)
    assert entry_point.main(['simulate']) == 0
    assert 'Interrupted' in capsys.readouterr().out


def test_override_ignores_unset_flags():
    cfg = RunConfig()
    cfg.override(simulation__T=None, simulation__seed=7)
    assert cfg['simulation']['T'] == 350
    assert cfg['simulation']['seed'] == 7
    with pytest.raises(ConfigError):
        cfg.override(simulation__horizon=3)


def test_typed_views():
    cfg = RunConfig.from_dict({'numerics': {'gl_nodes': 16, 'threads': 2},
                               'estimation': {'box_halfwidth': 0.25},
                               'theta': SMALL_THETA})
    tol = cfg.tolerances()
    assert tol.gl_nodes == 16 and tol.box_halfwidth == 0.25
    assert cfg.threads == 2
    assert cfg.theta().n_firms == 2
    assert cfg.trend(2).is_zero
    bad_trend = RunConfig.from_dict({'trend': {'tau': 0.1, 'tau_s': [1.0]}})
    with pytest.raises(ConfigError):
        bad_trend.trend(2)


def test_theta_read_from_estimates_file(tmp_path):
    path = tmp_path / 'estimates.json'
    path.write_text(json.dumps({'theta': SMALL_THETA, 'log_likelihood': -1.0}), encoding='utf-8')
    cfg = RunConfig().override(paths__theta=str(path))
    assert cfg.theta().beta == 1.0
    start = RunConfig.from_dict({'theta': SMALL_THETA, 'estimation': {'start': {'beta': 1.2}}})
    assert start.start(start.theta()).beta == 1.2


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, '-v']))
