import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.linalg import expm, solve_discrete_lyapunov

from simulation.errors import (ConfigurationError, ConvergenceError, DomainError,
                               InstabilityError, PhysicalityError, ValidationError)
from simulation.meanfield import DEFAULT_ATOL, DEFAULT_RTOL, EffectiveCoupling, MeanFieldOrbit
from simulation.params import PhysicalParams
from utils.numerics import UPPER, pack_symmetric, symplectic_form, unpack_symmetric

logger = logging.getLogger(__name__)

VACUUM_VARIANCE = 0.5
PHYSICALITY_TOL = 1e-8
SYMMETRY_TOL = 1e-10
TRACE_GUARD = 1e12
FRAMES = ('lab', 'rotating_rwa', 'rotating_crt')

_SIGMA = symplectic_form(2)
_DIAGONAL = np.flatnonzero(UPPER[0] == UPPER[1])


def squeezing_db(variance: float) -> float:
    """
    Squeezing in dB relative to the vacuum variance 1/2.

    Args:
        variance (float): Quadrature variance

    Returns:
        float: -10 log10(variance / 0.5); negative for anti-squeezing
    """
    if not variance > 0:
        raise DomainError(f"Variance must be positive to express in dB, got {variance}")
    return -10.0 * math.log10(variance / VACUUM_VARIANCE)


def mode_to_quadrature(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """
    Real quadrature drift of dc/dt = A c + B c* over modes c_k = (Q_k + i P_k)/sqrt(2).

    Args:
        A (np.ndarray): (n, n) complex coefficients of c
        B (np.ndarray): (n, n) complex coefficients of c*

    Returns:
        np.ndarray: (2n, 2n) real matrix in the order (Q_1, P_1, Q_2, P_2, ...)
    """
    n = A.shape[0]
    S, T = A + B, A - B
    M = np.empty((2 * n, 2 * n))
    M[0::2, 0::2] = S.real
    M[0::2, 1::2] = -T.imag
    M[1::2, 0::2] = S.imag
    M[1::2, 1::2] = T.real
    return M


@dataclass(frozen=True)
class DriftMatrix:
    """
    4x4 drift over (q, p, x, y), either constant (`period` is None) or
    tau-periodic through `evaluator`.
    """
    evaluator: Callable[[float], np.ndarray]
    frame: str
    period: Optional[float] = None
    constant: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise ValidationError(f"Unknown frame '{self.frame}'", field='frame')

    def __call__(self, t: float) -> np.ndarray:
        return self.evaluator(t)

    @property
    def is_constant(self) -> bool:
        return self.period is None

    @classmethod
    def from_constant(cls, matrix: np.ndarray, frame: str = 'rotating_rwa') -> 'DriftMatrix':
        matrix = np.array(matrix, dtype=float)
        matrix.setflags(write=False)
        return cls(evaluator=lambda t: matrix, frame=frame, period=None, constant=matrix)

    def time_average(self, samples: int = 512) -> np.ndarray:
        if self.is_constant:
            return self.constant
        times = np.arange(samples) * self.period / samples
        return np.mean([self(t) for t in times], axis=0)

    def periodicity_residual(self, samples: int = 64) -> float:
        if self.is_constant:
            return 0.0
        times = np.linspace(0.0, self.period, samples, endpoint=False)
        scale = max(np.max(np.abs(self(t))) for t in times) or 1.0
        return max(float(np.max(np.abs(self(t + self.period) - self(t)))) for t in times) / scale


@dataclass(frozen=True)
class NoiseDiffusion:
    """Diagonal diffusion matrix; `equilibrium` is the thermal state of the baths that produced it."""
    matrix: np.ndarray
    equilibrium: Optional['CovarianceMatrix'] = None

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if matrix.shape != (4, 4) or np.any(matrix != np.diag(np.diag(matrix))):
            raise ValidationError("Diffusion matrix must be 4x4 diagonal", field='D')
        if np.any(np.diag(matrix) < 0):
            raise ValidationError("Diffusion entries must be nonnegative", field='D')
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)

    @classmethod
    def lab(cls, params: PhysicalParams) -> 'NoiseDiffusion':
        """diag[0, gamma_m(2 n_m + 1), kappa(2 n_a + 1), kappa(2 n_a + 1)]."""
        optical = params.kappa * (2.0 * params.n_a + 1.0)
        return cls(np.diag([0.0, params.gamma_m * (2.0 * params.n_m + 1.0), optical, optical]),
                   equilibrium=CovarianceMatrix.thermal(params))

    @classmethod
    def rotating(cls, params: PhysicalParams) -> 'NoiseDiffusion':
        """Period average of the lab diffusion in the frame rotating at omega_m."""
        mechanical = params.gamma_m * (params.n_m + 0.5)
        optical = params.kappa * (2.0 * params.n_a + 1.0)
        return cls(np.diag([mechanical, mechanical, optical, optical]), equilibrium=CovarianceMatrix.thermal(params))


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric second moments over (q, p, x, y) or their rotating-frame counterparts."""
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if matrix.shape != (4, 4):
            raise ValidationError("Covariance matrix must be 4x4", field='V')
        scale = max(np.max(np.abs(matrix)), 1e-300)
        if np.max(np.abs(matrix - matrix.T)) > SYMMETRY_TOL * scale:
            raise ValidationError("Covariance matrix is not symmetric", field='V')
        matrix = 0.5 * (matrix + matrix.T)
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)

    @classmethod
    def thermal(cls, params: PhysicalParams) -> 'CovarianceMatrix':
        return cls(np.diag([params.n_m + 0.5] * 2 + [params.n_a + 0.5] * 2))

    @classmethod
    def vacuum(cls) -> 'CovarianceMatrix':
        return cls(0.5 * np.eye(4))

    @property
    def var_q(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def var_p(self) -> float:
        return float(self.matrix[1, 1])

    def physicality_margin(self) -> float:
        """Smallest eigenvalue of V + i sigma/2 (>= 0 for a physical state)."""
        return float(np.linalg.eigvalsh(self.matrix + 0.5j * _SIGMA).min())

    def min_mechanical_variance(self) -> float:
        """Smallest variance over all rotated mechanical quadratures."""
        return float(np.linalg.eigvalsh(self.matrix[:2, :2]).min())

    def check(self) -> 'CovarianceMatrix':
        if np.any(np.diag(self.matrix) < 0):
            raise PhysicalityError("Negative variance on the covariance diagonal")
        margin = self.physicality_margin()
        if margin < -PHYSICALITY_TOL:
            raise PhysicalityError(f"Uncertainty principle violated: min eig(V + i sigma/2) = {margin:.3e}")
        return self


@dataclass
class SqueezingReport:
    """
    Variances and dB values of one evaluation route. In periodic frames the
    variances are the minima over a period.
    """
    method: str
    var_q: float
    var_p: float
    stable: bool
    var_q_min: Optional[float] = None
    var_q_max: Optional[float] = None
    var_p_min: Optional[float] = None
    var_p_max: Optional[float] = None
    residuals: Dict[str, float] = field(default_factory=dict)
    multipliers: List[float] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    extra: Dict = field(default_factory=dict)

    @property
    def db_q(self) -> Optional[float]:
        return squeezing_db(self.var_q) if self.var_q and self.var_q > 0 else None

    @property
    def db_p(self) -> Optional[float]:
        return squeezing_db(self.var_p) if self.var_p and self.var_p > 0 else None

    def to_dict(self) -> Dict:
        out = {
            'method': self.method,
            'stable': self.stable,
            'var_q': self.var_q,
            'var_p': self.var_p,
            'db_q': self.db_q,
            'db_p': self.db_p,
        }
        for name in ('var_q_min', 'var_q_max', 'var_p_min', 'var_p_max'):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.multipliers:
            out['floquet_multipliers'] = self.multipliers
        out['residuals'] = self.residuals
        out['warnings'] = self.warnings
        out.update(self.extra)
        return out


def lab_drift(params: PhysicalParams, orbit: MeanFieldOrbit) -> DriftMatrix:
    """
    Time-periodic lab-frame drift of the linearized fluctuations.

    Args:
        params (PhysicalParams): System parameters
        orbit (MeanFieldOrbit): Converged first-moment orbit

    Returns:
        DriftMatrix: tau-periodic evaluator over (dq, dp, dx, dy)
    """
    tau = orbit.period
    knots = np.append(orbit.t, tau)
    values = np.column_stack([orbit.q, orbit.a.real, orbit.a.imag])
    values = np.vstack([values, values[:1]])
    spline = CubicSpline(knots, values, axis=0, bc_type='periodic')

    omega, gamma, kappa = params.omega_m, params.gamma_m, params.kappa
    g, delta0, two_lambda = params.g, params.delta0, 2.0 * params.lambda_gain
    omega_mod, theta = params.omega_mod, params.theta
    root2 = math.sqrt(2.0)

    def evaluator(t: float) -> np.ndarray:
        q, ax, ay = spline(t % tau)
        gx, gy = g * ax / root2, g * ay / root2
        detuning = delta0 - g * q
        phase = omega_mod * t - theta
        c, s = two_lambda * math.cos(phase), two_lambda * math.sin(phase)
        return np.array([
            [0.0, omega, 0.0, 0.0],
            [-omega, -gamma, 2.0 * gx, 2.0 * gy],
            [-2.0 * gy, 0.0, -kappa + c, detuning - s],
            [2.0 * gx, 0.0, -detuning - s, -kappa - c],
        ])

    if not np.any(orbit.a) and not np.any(orbit.q) and params.lambda_gain == 0:
        return DriftMatrix.from_constant(evaluator(0.0), frame='lab')
    return DriftMatrix(evaluator=evaluator, frame='lab', period=tau)


def rotating_crt_drift(coupling: EffectiveCoupling, params: PhysicalParams,
                       frame_tol: float = 0.1) -> DriftMatrix:
    """
    Drift in the frame rotating at omega_m with the counter-rotating terms kept.

    Mode order is (mechanics, cavity) so the quadratures read (q~, p~, x~, y~).

    Args:
        coupling (EffectiveCoupling): Sideband couplings
        params (PhysicalParams): System parameters (Omega = 2 omega_m, Delta ~ omega_m)
        frame_tol (float): Accepted |Delta_0 - omega_m|

    Returns:
        DriftMatrix: tau-periodic evaluator whose period average is the RWA drift
    """
    if abs(params.omega_mod - 2.0 * params.omega_m) > 1e-9:
        raise ConfigurationError(f"Rotating frame requires omega_mod = 2 omega_m, got {params.omega_mod}")
    if abs(params.delta0 - params.omega_m) > frame_tol:
        raise ConfigurationError(
            f"Rotating frame requires delta0 ~ omega_m (|{params.delta0} - 1| > {frame_tol})")

    g0, g1, gm1 = coupling.g_0, coupling.g_plus1, coupling.g_minus1
    half_gamma, kappa = params.gamma_m / 2.0, params.kappa
    pump = 2.0 * params.lambda_gain * np.exp(1j * params.theta)
    omega = params.omega_m

    def evaluator(t: float) -> np.ndarray:
        e2 = np.exp(2j * omega * t)
        e4 = e2 * e2
        e2c = np.conj(e2)
        squeezer = 1j * (g1 + g0 * e2 + gm1 * e4)
        A = np.array([
            [-half_gamma, 1j * (np.conj(g0) + np.conj(g1) * e2 + np.conj(gm1) * e2c)],
            [1j * (g0 + g1 * e2c + gm1 * e2), -kappa],
        ])
        B = np.array([
            [half_gamma * e2, squeezer],
            [squeezer, pump],
        ])
        return mode_to_quadrature(A, B)

    return DriftMatrix(evaluator=evaluator, frame='rotating_crt', period=math.pi / omega)


@dataclass(frozen=True)
class CovarianceTrajectory:
    t: np.ndarray
    V: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def at(self, i: int) -> CovarianceMatrix:
        return CovarianceMatrix(self.V[i])

    @property
    def var_q(self) -> np.ndarray:
        return self.V[:, 0, 0]

    @property
    def var_p(self) -> np.ndarray:
        return self.V[:, 1, 1]

    def to_frame(self) -> pd.DataFrame:
        columns = {'t': self.t}
        for (i, j), name in _CSV_ENTRIES.items():
            columns[name] = self.V[:, i, j]
        return pd.DataFrame(columns)


_CSV_ENTRIES = {
    (0, 0): 'Vqq', (1, 1): 'Vpp', (2, 2): 'Vxx', (3, 3): 'Vyy',
    (0, 1): 'Vqp', (0, 2): 'Vqx', (0, 3): 'Vqy', (1, 2): 'Vpx', (1, 3): 'Vpy', (2, 3): 'Vxy',
}


def _trace_guard(t, y):
    return TRACE_GUARD - np.sum(y[_DIAGONAL])


_trace_guard.terminal = True


def evolve_covariance(drift: DriftMatrix, D: NoiseDiffusion, V0: CovarianceMatrix, t_end: float,
                      tol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL, t0: float = 0.0,
                      t_eval: Optional[np.ndarray] = None, check: bool = True) -> CovarianceTrajectory:
    """
    Integrate dV/dt = M V + V M^T + D on the 10 independent entries of V.

    Args:
        drift (DriftMatrix): Drift matrix M(t)
        D (NoiseDiffusion): Diffusion matrix
        V0 (CovarianceMatrix): Covariance at t0
        t_end (float): Final time
        tol (float): Relative tolerance
        atol (float): Absolute tolerance
        t0 (float): Start time
        t_eval (np.ndarray): Sampling times (solver steps when omitted)
        check (bool): Validate physicality of every stored sample

    Returns:
        CovarianceTrajectory: Sampled covariance matrices
    """
    if t_end <= t0:
        raise ValidationError(f"t_end={t_end} must exceed t0={t0}", field='t_end')
    diffusion = D.matrix

    def rhs(t, y):
        V = unpack_symmetric(y)
        M = drift(t)
        MV = M @ V
        return (MV + MV.T + diffusion)[UPPER]

    sol = solve_ivp(rhs, (t0, t_end), pack_symmetric(V0.matrix), method='RK45',
                    rtol=tol, atol=atol, t_eval=t_eval, events=_trace_guard)
    if sol.t_events[0].size > 0:
        t_blow = float(sol.t_events[0][0])
        raise InstabilityError(f"Covariance diverged (tr V > {TRACE_GUARD:g}) at t={t_blow:.6g}", time=t_blow)
    if sol.status != 0:
        raise ConvergenceError(f"Covariance integration failed: {sol.message}")

    V = np.array([unpack_symmetric(y) for y in sol.y.T])
    if check:
        for matrix in V:
            CovarianceMatrix(matrix).check()
    return CovarianceTrajectory(t=sol.t, V=V)


def monodromy(drift: DriftMatrix, period: Optional[float] = None,
              tol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> np.ndarray:
    """Fundamental matrix of dx/dt = M(t) x over one period (expm for constant drifts)."""
    period = period or drift.period or 2.0 * math.pi
    if drift.is_constant:
        return expm(drift.constant * period)

    def rhs(t, y):
        return (drift(t) @ y.reshape(4, 4)).ravel()

    sol = solve_ivp(rhs, (0.0, period), np.eye(4).ravel(), method='RK45', rtol=tol, atol=atol)
    if sol.status != 0:
        raise ConvergenceError(f"Monodromy integration failed: {sol.message}")
    return sol.y[:, -1].reshape(4, 4)


def floquet_multipliers(drift: DriftMatrix, period: Optional[float] = None) -> np.ndarray:
    return np.linalg.eigvals(monodromy(drift, period))


def _periodic_residual(V: np.ndarray, grid_size: int, periods: int) -> float:
    scale = np.max(np.abs(V)) or 1.0
    worst = 0.0
    for k in range(1, periods):
        now = V[k * grid_size:(k + 1) * grid_size]
        before = V[(k - 1) * grid_size:k * grid_size]
        worst = max(worst, float(np.max(np.abs(now - before))))
    return worst / scale


def covariance_report(trajectory: CovarianceTrajectory, method: str, stable: bool = True,
                      multipliers: Optional[np.ndarray] = None,
                      residuals: Optional[Dict[str, float]] = None) -> SqueezingReport:
    var_q, var_p = trajectory.var_q, trajectory.var_p
    mechanical_min = min(CovarianceMatrix(V).min_mechanical_variance() for V in trajectory.V)
    return SqueezingReport(
        method=method,
        var_q=float(var_q.min()),
        var_p=float(var_p.min()),
        stable=stable,
        var_q_min=float(var_q.min()),
        var_q_max=float(var_q.max()),
        var_p_min=float(var_p.min()),
        var_p_max=float(var_p.max()),
        residuals=dict(residuals or {}),
        multipliers=sorted((float(abs(m)) for m in multipliers), reverse=True) if multipliers is not None else [],
        extra={
            'var_q_mean': float(var_q.mean()),
            'var_p_mean': float(var_p.mean()),
            'min_rotated_variance': mechanical_min,
        },
    )


def periodic_steady_covariance(drift: DriftMatrix, D: NoiseDiffusion, settle_periods: int = 300,
                               tol: float = 1e-5, V0: Optional[CovarianceMatrix] = None,
                               grid_size: int = 256, check_periods: int = 3, strategy: str = 'settle',
                               max_extensions: int = 3, extension_periods: int = 100,
                               rtol: float = DEFAULT_RTOL,
                               atol: float = DEFAULT_ATOL) -> Tuple[CovarianceTrajectory, SqueezingReport]:
    """
    Periodic steady state V(t + tau) = V(t) of the covariance equation.

    'settle' integrates `settle_periods` periods and checks periodicity over
    `check_periods` consecutive periods. 'monodromy' solves the one-period
    fixed point V0 = Phi V0 Phi^T + V_p directly.

    Args:
        drift (DriftMatrix): tau-periodic drift
        D (NoiseDiffusion): Diffusion matrix
        settle_periods (int): Settling periods ('settle' strategy)
        tol (float): Acceptance tolerance of the periodicity residual
        V0 (CovarianceMatrix): Initial covariance ('settle' strategy); defaults to the thermal
            state of `D`, or vacuum for a diffusion built from a bare matrix
        grid_size (int): Samples per period of the returned trajectory
        check_periods (int): Consecutive periods compared ('settle' strategy)
        strategy (str): 'settle' or 'monodromy'

    Returns:
        Tuple[CovarianceTrajectory, SqueezingReport]: one period and its report
    """
    if drift.is_constant:
        raise ValidationError("Periodic steady state requires a tau-periodic drift", field='drift')
    if strategy not in ('settle', 'monodromy'):
        raise ValidationError(f"Unknown strategy '{strategy}'", field='strategy')
    tau = drift.period

    phi = monodromy(drift, tol=rtol, atol=atol)
    multipliers = np.linalg.eigvals(phi)
    largest = float(np.max(np.abs(multipliers)))
    logger.info(f"Floquet multipliers |mu| = {np.sort(np.abs(multipliers))[::-1]}")
    if largest >= 1.0:
        raise InstabilityError(f"Floquet multiplier on or outside the unit circle (|mu| = {largest:.8f})",
                               multipliers=np.abs(multipliers).tolist())

    if strategy == 'monodromy':
        particular = evolve_covariance(drift, D, CovarianceMatrix(np.zeros((4, 4))), tau,
                                       tol=rtol, atol=atol, check=False).V[-1]
        start = solve_discrete_lyapunov(phi, particular)
        start = CovarianceMatrix(0.5 * (start + start.T))
        t_eval = np.arange(grid_size + 1) * tau / grid_size
        t_eval[-1] = tau
        trajectory = evolve_covariance(drift, D, start, tau, tol=rtol, atol=atol, t_eval=t_eval)
        scale = np.max(np.abs(trajectory.V)) or 1.0
        residual = float(np.max(np.abs(trajectory.V[-1] - trajectory.V[0]))) / scale
        period = CovarianceTrajectory(trajectory.t[:-1], trajectory.V[:-1])
        settled = 0
    else:
        state = V0 or D.equilibrium or CovarianceMatrix.vacuum()
        settled = settle_periods
        logger.info(f"Settling covariance over {settle_periods} periods")
        state = CovarianceMatrix(evolve_covariance(drift, D, state, settled * tau, tol=rtol, atol=atol,
                                                   check=False).V[-1])
        residual = math.inf
        for attempt in range(max_extensions + 1):
            if attempt > 0:
                logger.info(f"Covariance residual {residual:.3e} > {tol:.1e}; "
                            f"extension {attempt}/{max_extensions} of {extension_periods} periods")
                state = CovarianceMatrix(evolve_covariance(
                    drift, D, state, (settled + extension_periods) * tau, t0=settled * tau,
                    tol=rtol, atol=atol, check=False).V[-1])
                settled += extension_periods
            start = settled * tau
            t_eval = start + np.arange(check_periods * grid_size + 1) * tau / grid_size
            t_eval[-1] = start + check_periods * tau
            trajectory = evolve_covariance(drift, D, state, t_eval[-1], t0=start, tol=rtol, atol=atol,
                                           t_eval=t_eval)
            residual = _periodic_residual(trajectory.V[:-1], grid_size, check_periods)
            if residual <= tol:
                break
            state = CovarianceMatrix(trajectory.V[-1])
            settled += check_periods
        else:
            raise ConvergenceError(f"Covariance did not become tau-periodic (residual {residual:.3e} > {tol:.1e})",
                                   residual=residual)
        last = slice((check_periods - 1) * grid_size, check_periods * grid_size)
        period = CovarianceTrajectory(trajectory.t[last] - (start + (check_periods - 1) * tau),
                                      trajectory.V[last])

    logger.info(f"Periodic covariance ({strategy}) accepted, residual {residual:.3e}")
    report = covariance_report(period, method=f'floquet-{drift.frame}', stable=True, multipliers=multipliers,
                               residuals={'periodicity': residual})
    report.extra['strategy'] = strategy
    report.extra['settled_periods'] = settled
    return period, report
