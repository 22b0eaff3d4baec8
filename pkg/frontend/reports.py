"""
Reports - Console tables and output files
"""

from pathlib import Path

import pandas as pd

from backend.config import OUTPUT_FILES
from backend.panel_io import write_json


def banner(title):
    print("=" * 50)
    print(f"🚀 {title}")
    print("=" * 50)


def output_path(out_dir, key):
    return Path(out_dir) / OUTPUT_FILES[key]


def save_json(data, out_dir, key, path=None):
    path = write_json(data, path or output_path(out_dir, key))
    print(f"💾 Saved {path}")
    return path


def save_frame(frame, out_dir, key, path=None):
    path = Path(path or output_path(out_dir, key))
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format='%.10g', encoding='utf-8')
    print(f"💾 Saved {path}")
    return path


def estimates_table(theta_hat, intervals=None):
    """parameter, estimate and (when available) the interval bounds"""
    frame = pd.DataFrame({'parameter': list(theta_hat.names), 'estimate': theta_hat.to_vector()})
    if intervals is not None:
        frame['lower'] = intervals.lower
        frame['upper'] = intervals.upper
    return frame


def print_table(frame, title, digits=4):
    print(f"📊 {title}")
    with pd.option_context('display.float_format', lambda x: f"{x:.{digits}f}"):
        print(frame.to_string(index=False))


def print_diagnostics(diagnostics):
    for firm in diagnostics.firms:
        mark = "✅" if firm.passed else "❌"
        print(f"{mark} Firm {firm.firm + 1}: rival spread {firm.rival_spread_ratio:.3f}, "
              f"price spread {firm.price_spread_ratio:.3f} ({firm.n_band} rows in band)")
    verdict = "PASS" if diagnostics.passed else "FAIL"
    print(f"📊 Private-information check: {verdict}")
