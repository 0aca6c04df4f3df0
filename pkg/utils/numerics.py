import math
from typing import Any

import numpy as np

# Index pairs of the 10 independent entries of a symmetric 4x4 matrix
UPPER = np.triu_indices(4)

SIGNIFICANT_DIGITS = 12


def symplectic_form(n_modes: int = 2) -> np.ndarray:
    """
    Block-diagonal symplectic form for `n_modes` bosonic modes.

    Args:
        n_modes (int): Number of modes

    Returns:
        np.ndarray: (2n, 2n) matrix with blocks [[0, 1], [-1, 0]]
    """
    block = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.kron(np.eye(n_modes), block)


def pack_symmetric(matrix: np.ndarray) -> np.ndarray:
    """Upper-triangular entries of a symmetric 4x4 matrix as a flat vector."""
    return np.asarray(matrix)[UPPER]


def unpack_symmetric(vector: np.ndarray) -> np.ndarray:
    """Inverse of `pack_symmetric`."""
    matrix = np.zeros((4, 4))
    matrix[UPPER] = vector
    return matrix + np.triu(matrix, 1).T


def wrap_phase(phase: float) -> float:
    """Map an angle to the interval (-pi, pi]."""
    wrapped = math.remainder(phase, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def round_significant(value: float, digits: int = SIGNIFICANT_DIGITS) -> float:
    """Round to a fixed number of significant digits (nan/inf pass through)."""
    if not math.isfinite(value) or value == 0.0:
        return value
    return float(f"{value:.{digits}g}")


def to_serializable(obj: Any) -> Any:
    """
    Convert numpy scalars, complex numbers and nested containers to JSON-ready
    values with deterministic float formatting.

    Args:
        obj (Any): Value to convert

    Returns:
        Any: JSON-serializable structure
    """
    if isinstance(obj, dict):
        return {str(k): to_serializable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_serializable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_serializable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_serializable(float(obj.real)), to_serializable(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return round_significant(value)
    return obj


def parse_complex(text: str) -> complex:
    """
    Parse a complex number written as `re,im`, `mag@phase`, `mag∠phase` or a
    bare real number.

    Args:
        text (str): Value as written in a scenario file

    Returns:
        complex: Parsed value
    """
    text = text.strip()
    for separator in ('∠', '@'):
        if separator in text:
            magnitude, phase = text.split(separator, 1)
            return complex(float(magnitude) * np.exp(1j * parse_angle(phase)))
    if ',' in text:
        real, imag = text.split(',', 1)
        return complex(float(real), float(imag))
    return complex(float(text), 0.0)


def parse_angle(text: str) -> float:
    """Parse an angle in radians; accepts `pi`, `-pi`, `0.5*pi`, `0.5pi`."""
    text = text.strip().replace(' ', '')
    if text.endswith('pi'):
        factor = text[:-2].rstrip('*')
        if factor in ('', '+'):
            return math.pi
        if factor == '-':
            return -math.pi
        return float(factor) * math.pi
    return float(text)


def axis_values(spec: str) -> np.ndarray:
    """
    Parse a sweep axis `start:stop:count` (inclusive) or a comma list.

    Args:
        spec (str): Axis specification

    Returns:
        np.ndarray: Axis values
    """
    if ':' in spec:
        parts = spec.split(':')
        if len(parts) != 3:
            raise ValueError(f"Axis '{spec}' must read start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError(f"Axis '{spec}' needs a positive point count")
        return np.linspace(start, stop, count)
    return np.array([float(v) for v in spec.split(',') if v.strip()])


def relative_difference(a: float, b: float) -> float:
    """Symmetric relative difference |a - b| / max(|a|, |b|)."""
    scale = max(abs(a), abs(b))
    if scale == 0.0:
        return 0.0
    return abs(a - b) / scale
