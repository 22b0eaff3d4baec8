"""
Run Config - JSON run configuration for the command-line front end
Defaults for every block, unknown-key rejection and flag overrides
"""

import copy
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from backend.config import DEFAULT_TOLERANCES, MONTE_CARLO_DESIGN, Tolerances
from backend.errors import ConfigError, InvalidSpecError
from backend.parameters import ThetaParam
from backend.simulator import TrendSpec


TOLERANCE_KEYS = tuple(f.name for f in fields(Tolerances))

# Every accepted key with its default; None means "unset"
DEFAULTS = {
    'theta': copy.deepcopy(MONTE_CARLO_DESIGN),
    'trend': {'tau': 0.0, 'tau_s': None},
    'simulation': {'T': 350, 'seed': 12345, 'replication': 0, 'complete_info': False},
    'numerics': dict({'threads': 1}, **{k: None for k in TOLERANCE_KEYS}),
    'estimation': {'start': None, 'n_starts': None, 'seed': 0, 'detrend': True,
                   'box_halfwidth': None, 'block_size': None, 'level': 0.95,
                   'max_blocks': None, 'ci_method': 'symmetric'},
    'identification': {'mode': 'sample', 'alpha_pairs': [[0.25, 0.75]], 'alpha_grid_size': 201,
                       'u_levels': [0.25, 0.5, 0.75], 'w_firm': 1, 'n_w': 201,
                       'reference_firms': 3, 'epsilon': None, 'n_min': None,
                       'percentile': None, 'density_floor': None},
    'counterfactual': {'T_sim': 336, 'n_sims': 100, 'seed': 0, 'k': None},
    'montecarlo': {'T': 350, 'reps': 50, 'seed': 2024, 'n_starts': None},
    'extensions': {
        'run': ['conduct', 'nonlinear', 'entry'],
        'conduct': {'beta': 0.5, 'lambda': 0.1, 'mu_v': [1.0, 1.0, 1.0],
                    'kappa': [0.0, -0.1, -0.2], 'u': 10.0, 'u_prime': 12.0,
                    'kappa_1_grid': [0.0, -0.05, -0.1]},
        'nonlinear': {'form': 'loglinear', 'beta': 1.0, 'lambda': 1.0, 'n_firms': 2,
                      'u_bounds': [2.0, 3.0], 'w_bar': 0.1, 'v_bounds': [0.2, 1.0],
                      'nodes': 41, 'rival_nodes': 16, 'alpha_grid_size': 9},
        'entry': {'n_firms': 3, 'beta': 1.0, 'lambda': 1.0, 'mu_u': 40.0, 'sigma2_u': 16.0,
                  'u_lower': 30.0, 'w_bar': 0.5, 'signal': [2.0, 2.0, 1.0], 'cost_scale': 10.0,
                  'c_grid': [0.0, 1.0], 'thresholds': [0.8, 0.4], 'T': 2000, 'seed': 0,
                  's_grid': [0.2, 0.8, 61], 'v_points': 41},
    },
    'paths': {'out_dir': 'output', 'panel': None, 'latent': None, 'theta': None},
}

# blocks whose value is replaced wholesale rather than key-checked
OPAQUE = {('theta', 'group_shapes'), ('theta', 'group_map'), ('theta', 'truncation'),
          ('estimation', 'start')}


def _merge(base, update, path=()):
    """Recursive update that rejects keys absent from the defaults"""
    if not isinstance(update, dict):
        raise ConfigError("expected an object", key_path='.'.join(path) or '<root>')
    merged = dict(base)
    for key, value in update.items():
        here = path + (key,)
        if key not in base:
            raise ConfigError("unknown configuration key", key_path='.'.join(here))
        if isinstance(base[key], dict) and here not in OPAQUE:
            merged[key] = _merge(base[key], value, here)
        else:
            merged[key] = value
    return merged


@dataclass
class RunConfig:
    """Parsed configuration; every block is a plain dict"""
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    source: str = None

    @classmethod
    def from_dict(cls, data, source=None):
        return cls(_merge(copy.deepcopy(DEFAULTS), data), source)

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text(encoding='utf-8')
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path}: {e.msg}", line=e.lineno, column=e.colno)
        return cls.from_dict(data, str(path))

    def __getitem__(self, block):
        return self.data[block]

    def override(self, **flags):
        """Apply command-line flags given as block__key=value; None leaves the value alone"""
        update = {}
        for name, value in flags.items():
            if value is None:
                continue
            block, key = name.split('__', 1)
            update.setdefault(block, {})[key] = value
        self.data = _merge(self.data, update)
        return self

    # Typed views

    @property
    def threads(self):
        return int(self.data['numerics']['threads'])

    def tolerances(self):
        changes = {k: v for k, v in self.data['numerics'].items()
                   if k in TOLERANCE_KEYS and v is not None}
        if self.data['estimation']['box_halfwidth'] is not None:
            changes['box_halfwidth'] = self.data['estimation']['box_halfwidth']
        try:
            return DEFAULT_TOLERANCES.updated(**changes)
        except TypeError as e:
            raise ConfigError(str(e), key_path='numerics')

    def theta(self):
        path = self.data['paths']['theta']
        data = json.loads(Path(path).read_text(encoding='utf-8')) if path else self.data['theta']
        # estimates.json stores theta under its own key
        data = data.get('theta', data)
        try:
            return ThetaParam.from_dict(data)
        except (InvalidSpecError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid theta: {e}", key_path='theta')

    def start(self, theta):
        start = self.data['estimation']['start']
        if start is None:
            return theta
        try:
            return ThetaParam.from_dict(dict(self.data['theta'], **start))
        except (InvalidSpecError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid start: {e}", key_path='estimation.start')

    def trend(self, n_firms):
        block = self.data['trend']
        tau_s = block['tau_s']
        if tau_s is not None and len(tau_s) != n_firms:
            raise ConfigError(f"trend needs {n_firms} tau_s values, got {len(tau_s)}",
                              key_path='trend.tau_s')
        return TrendSpec(float(block['tau']), None if tau_s is None else np.asarray(tau_s, float))

    def out_dir(self):
        return Path(self.data['paths']['out_dir'])

    def to_dict(self):
        return copy.deepcopy(self.data)
