import os
from pathlib import Path


class Config:
    """Base config."""
    # Base paths
    BASE_DIR = Path(__file__).resolve().parent.parent
    SCENARIO_DIR = BASE_DIR / 'scenarios'
    OUTPUT_DIR = BASE_DIR / 'output'

    # Mean-field orbit detection
    SETTLE_PERIODS = 200
    SAMPLE_PERIODS = 2
    ORBIT_TOL = 1e-6
    ORBIT_GRID = 256
    FOURIER_ORDER = 6
    FOURIER_HARMONICS = 1

    # Covariance propagation
    COVARIANCE_SETTLE_PERIODS = 300
    COVARIANCE_TOL = 1e-5
    CHECK_PERIODS = 3
    MAX_EXTENSIONS = 3
    EXTENSION_PERIODS = 100
    RTOL = 1e-9
    ATOL = 1e-12

    # Frequency-domain route
    QUADRATURE_WIDTH_FACTOR = 50.0
    QUADRATURE_EPSREL = 1e-10
    SPECTRUM_GRID = 2001

    # Route comparison
    COMPARE_BOUND = 0.1
    ADIABATICITY_RATIO = 10.0

    # Scenario used by `rwa` and `sweep` when no --config is given
    RWA_BASE = {
        'kappa': '0.1',
        'gamma_m': '1e-6',
        'theta': 'pi',
        'n_a': '0',
        'n_m': '0',
        'coupling.cooperativity': '1e4',
        'coupling.ratio': '0.6',
    }

    @staticmethod
    def output_dir() -> Path:
        """Output directory, re-read so that a .env loaded after import is honoured."""
        override = os.getenv('SQUEEZE_OUTPUT_DIR')
        return Path(override) if override else Config.OUTPUT_DIR

    @staticmethod
    def ensure_directories(out_dir: Path = None) -> Path:
        """Ensure the output directory exists and return it."""
        target = Path(out_dir) if out_dir is not None else Config.output_dir()
        target.mkdir(parents=True, exist_ok=True)
        return target

    @staticmethod
    def scenario_path(name: str) -> Path:
        """Resolve a preset name ('modulated_drive') or a path to a scenario file."""
        path = Path(name)
        if path.suffix or path.exists():
            return path
        return Config.SCENARIO_DIR / f'{name}.cfg'
