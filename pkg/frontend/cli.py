"""
CLI - Command-line front end
simulate | check | identify | estimate | ci | counterfactual | montecarlo |
cluster | extensions, each reading one JSON config plus flag overrides
"""

import argparse
import json
from pathlib import Path

import numpy as np

from backend.conduct import identify_conduct_from_model, kappa_1_sensitivity, conduct_means_given_u
from backend.core_model import ConductProfile, ModelPrimitives
from backend.counterfactual import compare_regimes, kmeans_firms
from backend.distributions import BetaSpec, TruncNormalSpec
from backend.errors import ConfigError, CournotModelError
from backend.estimation import estimate_pipeline, subsample_ci
from backend.identification import identify_all, test_private_information
from backend.nonlinear_demand import (NonlinearDemandSpec, NonlinearPopulation, identify_fv_nonlinear,
                                      identify_lambda_nonlinear, identify_loglinear,
                                      identify_mu_v_nonlinear)
from backend.panel_io import read_panel, write_latent, write_panel
from backend.selective_entry import (EntrySpec, OrderedBetaSignal, draw_entry_shocks,
                                     recover_fv_given_s, selective_entry_outcomes, truncated_cost_cdf)
from backend.simulator import run_monte_carlo, simulate_complete_info_panel, simulate_panel
from backend.sources import BandedPanel, MarketPopulation

from .reports import (banner, estimates_table, output_path, print_diagnostics, print_table,
                      save_frame, save_json)
from .run_config import RunConfig


COMMANDS = ('simulate', 'check', 'identify', 'estimate', 'ci', 'counterfactual',
            'montecarlo', 'cluster', 'extensions')


def build_parser():
    parser = argparse.ArgumentParser(prog='cournot-private-costs',
                                     description="Cournot oligopoly with private costs")
    parser.add_argument('command', choices=COMMANDS)
    parser.add_argument('--config', help="JSON run configuration")
    parser.add_argument('--out', help="output directory, or the main output file")
    parser.add_argument('--panel', help="panel CSV (t,p,q1..qI)")
    parser.add_argument('--theta', help="theta JSON (e.g. a previous estimates.json)")
    parser.add_argument('--T', type=int, help="number of periods")
    parser.add_argument('--reps', type=int, help="Monte Carlo replications")
    parser.add_argument('--seed', type=int, help="random seed")
    parser.add_argument('--threads', type=int, help="worker threads (0 = all cores)")
    parser.add_argument('--k', type=int, help="number of firm groups")
    parser.add_argument('--mode', choices=('sample', 'analytic'), help="identification source")
    parser.add_argument('--complete-info', action='store_true', help="simulate complete information")
    return parser


def _apply_flags(cfg, args):
    out_file = None
    if args.out:
        out = Path(args.out)
        if out.suffix:
            out_file = out
            cfg.override(paths__out_dir=str(out.parent))
        else:
            cfg.override(paths__out_dir=str(out))
    cfg.override(paths__panel=args.panel, paths__theta=args.theta, numerics__threads=args.threads,
                 identification__mode=args.mode, counterfactual__k=args.k)
    if args.command == 'montecarlo':
        cfg.override(montecarlo__T=args.T, montecarlo__reps=args.reps, montecarlo__seed=args.seed)
    elif args.command == 'counterfactual':
        cfg.override(counterfactual__T_sim=args.T, counterfactual__seed=args.seed)
    else:
        cfg.override(simulation__T=args.T, simulation__seed=args.seed)
    if args.complete_info:
        cfg.override(simulation__complete_info=True)
    return out_file


def _panel(cfg, group_map=None):
    path = cfg['paths']['panel']
    if not path:
        raise ConfigError("this command needs a panel", key_path='paths.panel')
    return read_panel(path, group_map)


# Commands

def cmd_simulate(cfg, out_file):
    theta = cfg.theta()
    sim = cfg['simulation']
    if sim['complete_info']:
        panel, latent = simulate_complete_info_panel(theta, sim['T'], sim['seed'], sim['replication'])
    else:
        panel, latent = simulate_panel(theta, cfg.trend(theta.n_firms), sim['T'], sim['seed'],
                                       sim['replication'])
    path = write_panel(panel, out_file or output_path(cfg.out_dir(), 'panel'))
    # an explicit panel file gets its latent sidecar next to it
    latent_target = (path.with_name(path.stem + '_latent.csv') if out_file
                     else output_path(cfg.out_dir(), 'latent'))
    latent_path = write_latent(latent, latent_target)
    print(f"🎲 Simulated {panel.n_periods} periods for {panel.n_firms} firms")
    print(f"💾 Saved {path} and {latent_path}")
    return 0


def cmd_check(cfg, out_file):
    block = cfg['identification']
    tol = cfg.tolerances()
    report = test_private_information(_panel(cfg), block['epsilon'], block['density_floor'],
                                      block['percentile'], tol)
    print_diagnostics(report)
    save_json(report.to_dict(), cfg.out_dir(), 'check', out_file)
    return 0


def cmd_identify(cfg, out_file):
    block = cfg['identification']
    tol = cfg.tolerances()
    if block['mode'] == 'analytic':
        source = MarketPopulation.from_theta(cfg.theta(), tol)
    else:
        source = BandedPanel(_panel(cfg), block['epsilon'], block['n_min'], block['percentile'], tol)
    alpha_grid = np.linspace(0.0, 1.0, int(block['alpha_grid_size']))
    report = identify_all(source, tuple(tuple(p) for p in block['alpha_pairs']), alpha_grid,
                          tuple(block['u_levels']), int(block['w_firm']) - 1, None, int(block['n_w']),
                          int(block['reference_firms']), tol)
    print(f"📊 beta {report.beta_hat:.4f}, lambda {report.lambda_hat:.4f} ({report.mode})")
    save_json(report.to_dict(), cfg.out_dir(), 'identification', out_file)
    return 0


def _estimate(cfg, panel):
    theta = cfg.theta()
    block = cfg['estimation']
    result, trend = estimate_pipeline(panel, cfg.start(theta), n_starts=block['n_starts'],
                                      seed=block['seed'], detrend_first=block['detrend'],
                                      tolerances=cfg.tolerances(), verbose=True)
    return result, trend


def cmd_estimate(cfg, out_file):
    theta = cfg.theta()
    panel = _panel(cfg, theta.group_map)
    result, trend = _estimate(cfg, panel)
    print_table(estimates_table(result.theta), "Estimates")
    data = result.to_dict()
    data['trend'] = trend.to_dict() if trend is not None else None
    save_json(data, cfg.out_dir(), 'estimates', out_file)
    return 0


def cmd_ci(cfg, out_file):
    theta = cfg.theta()
    panel = _panel(cfg, theta.group_map)
    block = cfg['estimation']
    if cfg['paths']['theta']:
        theta_hat = theta
    else:
        theta_hat = _estimate(cfg, panel)[0].theta
    tol = cfg.tolerances()
    intervals = subsample_ci(panel, theta_hat, block['block_size'], block['level'],
                             max_blocks=block['max_blocks'] or tol.max_blocks, seed=block['seed'],
                             method=block['ci_method'], threads=cfg.threads,
                             n_starts=block['n_starts'], tolerances=tol, verbose=True)
    print_table(estimates_table(theta_hat, intervals), f"{block['level']:.0%} subsampling intervals")
    save_json(intervals.to_dict(), cfg.out_dir(), 'ci', out_file)
    return 0


def cmd_counterfactual(cfg, out_file):
    theta = cfg.theta()
    block = cfg['counterfactual']
    group_map = None
    if block['k'] is not None:
        grouping = kmeans_firms(_panel(cfg), int(block['k']), block['seed'], tolerances=cfg.tolerances())
        group_map = grouping.assignment
    comparison = compare_regimes(theta, block['T_sim'], block['n_sims'], block['seed'],
                                 group_map, cfg.threads)
    print(f"📊 Consumer surplus ratio (complete / private): {comparison.cs_ratio:.4f}")
    save_frame(comparison.to_frame(), cfg.out_dir(), 'regimes', out_file)
    save_json(comparison.to_dict(), cfg.out_dir(), 'regime_summary')
    return 0


def cmd_montecarlo(cfg, out_file):
    theta = cfg.theta()
    block = cfg['montecarlo']
    result = run_monte_carlo(theta, block['T'], block['reps'], block['seed'],
                             trend=cfg.trend(theta.n_firms), n_starts=block['n_starts'],
                             threads=cfg.threads, tolerances=cfg.tolerances())
    table = result.table()
    print_table(table, "Monte Carlo (bias, SD and RMSE relative to the true value)")
    save_frame(table, cfg.out_dir(), 'mc_table', out_file)
    save_json(result.to_dict(), cfg.out_dir(), 'mc_result')
    return 0


def cmd_cluster(cfg, out_file):
    k = cfg['counterfactual']['k'] or 2
    grouping = kmeans_firms(_panel(cfg), int(k), cfg['counterfactual']['seed'],
                            tolerances=cfg.tolerances())
    print(f"📊 {grouping.k} groups, within sum of squares {grouping.within_ss:.4f}")
    save_json(grouping.to_dict(), cfg.out_dir(), 'groups', out_file)
    return 0


# Extensions

def conduct_demo(block):
    """Recover (lambda, kappa) from model-implied conditional means"""
    mu = np.asarray(block['mu_v'], dtype=float)
    prim = ModelPrimitives(mu.size, block['beta'], block['lambda'], mu,
                           np.column_stack([np.zeros_like(mu), 2 * mu]), (-1.0, 1.0), block['u'])
    conduct = ConductProfile(block['kappa'])
    fit = identify_conduct_from_model(prim, conduct, block['u'], block['u_prime'])
    own, rival = conduct_means_given_u(prim, conduct, block['u'])
    own2, rival2 = conduct_means_given_u(prim, conduct, block['u_prime'])
    sensitivity = kappa_1_sensitivity(own, rival, own2, rival2, block['u'], block['u_prime'],
                                      prim.beta, block['kappa_1_grid'])
    return {'truth': {'lambda': prim.lam, 'kappa': conduct.kappa},
            'recovered': fit.to_dict(), 'kappa_1_sensitivity': sensitivity}


def nonlinear_demo(block, tolerances):
    """Solve the grid equilibrium, then run the closed-form identification on it"""
    n = int(block['n_firms'])
    u_lo, u_hi = block['u_bounds']
    v_lo, v_hi = block['v_bounds']
    w_bar = block['w_bar']
    v_specs = [BetaSpec(2.0, 2.0, scale=v_hi - v_lo, shift=v_lo) for _ in range(n)]
    u_spec = BetaSpec(2.0, 2.0, scale=u_hi - u_lo, shift=u_lo)
    w_spec = BetaSpec(2.0, 2.0, scale=2 * w_bar, shift=-w_bar)
    prim = ModelPrimitives(n, block['beta'], block['lambda'], [s.mean() for s in v_specs],
                           [s.support for s in v_specs], w_spec.support, u_lo)
    spec = NonlinearDemandSpec(block['beta'], block['form'])
    source = NonlinearPopulation(spec, prim, u_spec, w_spec, v_specs, block['nodes'],
                                 block['rival_nodes'], tolerances=tolerances)
    out = {'form': spec.form}
    if spec.form == 'loglinear':
        demand = identify_loglinear(source, 0, tolerances=tolerances)
        out['demand'] = demand.to_dict()
        spec = spec.with_beta(demand.beta)
    lam = identify_lambda_nonlinear(source, spec, tolerances=tolerances)
    alpha = np.linspace(0.05, 0.95, int(block['alpha_grid_size']))
    table = identify_fv_nonlinear(source, 0, 1, alpha, spec, lam, u_lo, u_hi)
    out.update({'lambda': lam, 'mu_v': identify_mu_v_nonlinear(source, spec, lam),
                'fv': table.to_dict(), 'fv_truth': v_specs[0].quantile(alpha),
                'truth': {'beta': block['beta'], 'lambda': block['lambda'], 'u_lower': u_lo,
                          'w_bar': w_bar, 'mu_v': prim.mu_v}})
    return out


def entry_demo(block, tolerances):
    """Second-stage outcomes under selective entry and the conditional-cost recovery"""
    n = int(block['n_firms'])
    a, b, tilt = block['signal']
    family = OrderedBetaSignal(a, b, tilt, scale=block['cost_scale'])
    c_grid = np.asarray(block['c_grid'], dtype=float)
    entry = EntrySpec(family, BetaSpec(1.0, 1.0, scale=c_grid[-1] - c_grid[0], shift=c_grid[0]),
                      c_grid, block['thresholds'])
    w_bar = block['w_bar']
    u_spec = TruncNormalSpec(block['mu_u'], block['sigma2_u'], block['u_lower'])
    w_spec = BetaSpec(2.0, 2.0, scale=2 * w_bar, shift=-w_bar)
    mean_v = float(family.conditional_mean(np.linspace(0, 1, 2001)).mean())
    prim = ModelPrimitives(n, block['beta'], block['lambda'], np.full(n, mean_v),
                           np.tile(family.support, (n, 1)), w_spec.support, block['u_lower'])
    draws = draw_entry_shocks(entry, u_spec, w_spec, n, int(block['T']), block['seed'])
    outcome = selective_entry_outcomes(entry, prim, draws)

    s_lo, s_hi, n_s = block['s_grid']
    s_grid = np.linspace(s_lo, s_hi, int(n_s))
    v_grid = np.linspace(*family.support, int(block['v_points']))
    table = recover_fv_given_s(s_grid, v_grid, truncated_cost_cdf(entry, v_grid, s_grid),
                               tolerances=tolerances)
    truth = family.conditional_cdf(v_grid[None, :], s_grid[:, None])
    return {'outcomes': outcome.to_dict(),
            'fv_given_s_max_error': float(np.max(np.abs(table.cdf - truth)))}


def cmd_extensions(cfg, out_file):
    block = cfg['extensions']
    tol = cfg.tolerances()
    runners = {'conduct': lambda: conduct_demo(block['conduct']),
               'nonlinear': lambda: nonlinear_demo(block['nonlinear'], tol),
               'entry': lambda: entry_demo(block['entry'], tol)}
    results = {}
    for name in block['run']:
        if name not in runners:
            raise ConfigError(f"unknown extension '{name}'", key_path='extensions.run')
        print(f"🔄 Extension: {name}")
        results[name] = runners[name]()
        print(f"✅ {name} done")
    save_json(results, cfg.out_dir(), 'extensions', out_file)
    return 0


HANDLERS = {'simulate': cmd_simulate, 'check': cmd_check, 'identify': cmd_identify,
            'estimate': cmd_estimate, 'ci': cmd_ci, 'counterfactual': cmd_counterfactual,
            'montecarlo': cmd_montecarlo, 'cluster': cmd_cluster, 'extensions': cmd_extensions}


def main(argv=None):
    """Run one command; 0 success, 1 validation error, 2 numerical failure"""
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        out_file = _apply_flags(cfg, args)
        banner(f"{args.command.upper()}")
        return HANDLERS[args.command](cfg, out_file)
    except CournotModelError as e:
        print(f"❌ {type(e).__name__}: {e}")
        return e.exit_code
    except (OSError, json.JSONDecodeError) as e:
        print(f"❌ {e}")
        return 1
