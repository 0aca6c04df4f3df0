import functools
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import click
import pandas as pd

from config.config import Config
from config.scenario import Scenario, load_scenario
from simulation.errors import SqueezingError
from utils.numerics import SIGNIFICANT_DIGITS, to_serializable

logger = logging.getLogger(__name__)

FLOAT_FORMAT = f'%.{SIGNIFICANT_DIGITS}g'


def handle_errors(func):
    """Map simulation errors to the exit-code contract (2 validation, 3 instability, 4 convergence)."""
    @functools.wraps(func)
    @click.pass_context
    def wrapper(ctx, *args, **kwargs):
        try:
            return ctx.invoke(func, *args, **kwargs)
        except SqueezingError as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.secho(f"Error: {e}", fg='red', bold=True, err=True)
            ctx.exit(e.exit_code)
    return wrapper


def config_option(func):
    return click.option('-c', '--config', 'config_path', required=True,
                        help='Scenario file or preset name (e.g. modulated_drive).')(func)


def output_options(func):
    func = click.option('--format', 'fmt', type=click.Choice(['csv', 'json']), default='csv',
                        help='Format of tabular output.')(func)
    func = click.option('-o', '--out-dir', type=click.Path(file_okay=False, path_type=Path), default=None,
                        help='Output directory (default: $SQUEEZE_OUTPUT_DIR or ./output).')(func)
    return func


def read_scenario(config_path: str, overrides: Optional[Dict[str, str]] = None) -> Scenario:
    return load_scenario(Config.scenario_path(config_path), overrides)


def write_table(frame: pd.DataFrame, out_dir: Path, stem: str, fmt: str = 'csv') -> Path:
    """Write a table with 12-significant-digit floats."""
    out_dir = Config.ensure_directories(out_dir)
    if fmt == 'json':
        path = out_dir / f'{stem}.json'
        payload = {column: to_serializable(frame[column].to_numpy()) for column in frame.columns}
        with open(path, 'w') as f:
            json.dump(payload, f, indent=2)
    else:
        path = out_dir / f'{stem}.csv'
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    logger.info(f"Wrote {path}")
    return path


def write_report(report: Dict[str, Any], out_dir: Path, stem: str) -> Path:
    """Write a JSON report."""
    out_dir = Config.ensure_directories(out_dir)
    path = out_dir / f'{stem}.json'
    with open(path, 'w') as f:
        json.dump(to_serializable(report), f, indent=2)
        f.write('\n')
    logger.info(f"Wrote {path}")
    return path


def echo_variances(label: str, var_q: float, var_p: float, db_q: Optional[float], db_p: Optional[float]):
    def dB(value):
        return 'n/a' if value is None else f'{value:.3f} dB'

    click.echo(f"{label}: var_q = {var_q:.6g} ({dB(db_q)}), var_p = {var_p:.6g} ({dB(db_p)})")
