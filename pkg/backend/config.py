"""
Config - Numerical tolerances, named designs and output file names
Every tolerance the library and the tests share lives here
"""

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    """Single record of numerical tolerances and grid defaults"""

    # core model
    foc: float = 1e-10
    algebraic: float = 1e-12

    # distributions / deconvolution
    truncation_mass_min: float = 1e-12
    gp_dz: float = 0.01
    gp_zmax: float = 400.0
    gp_tail_tol: float = 1e-2
    phi_floor: float = 1e-3
    phi_max_gap: int = 8
    quantile_table_size: int = 4001

    # identification bands
    band_n_min: int = 200
    band_percentile: float = 1.0
    density_floor: float = 0.5
    mass_point_share: float = 0.01

    # likelihood / optimiser
    gl_nodes: int = 64
    log_penalty: float = -1e4
    penalty_slope: float = 1e3
    nm_xatol: float = 1e-6
    nm_fatol: float = 1e-8
    nm_maxiter: int = 4000
    multistart: int = 5
    box_halfwidth: float = 0.5

    # detrending
    tau_min: float = 1e-4
    tau_max: float = 1.0
    tau_grid: int = 60
    trend_bic_weight: float = 1.0

    # subsampling
    block_exponent: float = 0.9
    max_blocks: int = 150

    # nonlinear demand solver
    strategy_nodes: int = 101
    rival_nodes: int = 32
    max_sweeps: int = 500
    sweep_tol: float = 1e-8
    best_reply_xatol: float = 1e-11
    tensor_max_firms: int = 4
    rival_mc_draws: int = 10_000

    # k-means
    kmeans_restarts: int = 20
    kmeans_max_iter: int = 300

    # selective entry
    entry_h_max: float = 0.05

    def to_dict(self):
        """Plain dict view (used for JSON reports)"""
        return asdict(self)

    def updated(self, **overrides):
        """Copy with some fields replaced; unknown names raise TypeError"""
        return replace(self, **overrides)


DEFAULT_TOLERANCES = Tolerances()


# Monte Carlo design: 20 firms in two groups of 10, truncated Beta costs
MONTE_CARLO_DESIGN = {
    'beta': 0.5,
    'lambda': 0.03,
    'u_lower': 200.0,
    'mu_u': 300.0,
    'sigma2_u': 800.0,
    'w_bar': 5.0,
    'a_tilde1': 0.001,
    'a_tilde2': 0.001,
    'group_shapes': [[0.6, 0.6], [0.8, 0.9]],
    'group_map': [0] * 10 + [1] * 10,
    'truncation': [0.025, 0.975],
}

# Parameter order of the flat θ vector (shape pairs are appended per group)
THETA_SCALARS = ('beta', 'lambda', 'u_lower', 'mu_u', 'sigma2_u',
                 'w_bar', 'a_tilde1', 'a_tilde2')

OUTPUT_FILES = {
    'panel': 'panel.csv',
    'latent': 'latent.csv',
    'estimates': 'estimates.json',
    'ci': 'ci.json',
    'identification': 'identification_report.json',
    'regimes': 'regime_comparison.csv',
    'regime_summary': 'regime_summary.json',
    'mc_table': 'mc_table.csv',
    'mc_result': 'mc_result.json',
    'check': 'check_report.json',
    'groups': 'groups.json',
    'extensions': 'extensions.json',
}

