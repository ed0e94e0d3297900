"""Ornstein-Uhlenbeck bath field B(t).

Units are fixed project-wide: time in µs, B and angular frequency in µs⁻¹.
The field is stationary with variance b² and correlation time tau_c, so
C(t) = b² exp(-|t|/tau_c).

Sampling is exact at any step size: values advance with the closed-form OU
transition, and the time integral of B over an interval is drawn jointly
with the interval's endpoint value from their conditional bivariate
Gaussian. The fine-grid trapezoid path is kept as the validation oracle.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

# below this value of dt/tau_c the closed forms lose digits to cancellation
_SERIES_CUTOFF = 1e-2


@dataclass(frozen=True)
class BathParams:
    b: float
    tau_c: float

    def __post_init__(self):
        if not (self.b > 0 and math.isfinite(self.b)):
            raise ValueError(f'b must be positive, got {self.b}')
        if not (self.tau_c > 0 and math.isfinite(self.tau_c)):
            raise ValueError(f'tau_c must be positive, got {self.tau_c}')


@dataclass(frozen=True)
class BathTrajectory:
    times: np.ndarray
    values: np.ndarray
    integrals: np.ndarray | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise ValueError('times must be a non-empty 1-d grid')
        if values.shape != times.shape:
            raise ValueError('values must match times')
        if np.any(np.diff(times) <= 0):
            raise ValueError('times must be strictly increasing')
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'values', values)
        if self.integrals is not None:
            integrals = np.asarray(self.integrals, dtype=float)
            if integrals.shape != (times.size - 1,):
                raise ValueError('integrals must have one entry per interval')
            object.__setattr__(self, 'integrals', integrals)


def correlation(p: BathParams, t):
    return p.b ** 2 * np.exp(-np.abs(t) / p.tau_c)


def spectrum(p: BathParams, omega):
    """Two-sided Lorentzian S(ω) = 2b²τ_C / (1 + ω²τ_C²)."""
    omega = np.asarray(omega, dtype=float)
    return 2.0 * p.b ** 2 * p.tau_c / (1.0 + (omega * p.tau_c) ** 2)


def integral_variance(p: BathParams, t):
    """Var(∫₀ᵗ B dt) for the stationary process: 2b²τ_C[t - τ_C(1 - e^(-t/τ_C))]."""
    x = np.asarray(t, dtype=float) / p.tau_c
    return 2.0 * p.b ** 2 * p.tau_c ** 2 * _ramp(x)


def _ramp(x):
    # x - 1 + e^-x, with a series near zero
    x = np.asarray(x, dtype=float)
    small = x < _SERIES_CUTOFF
    series = x ** 2 / 2 - x ** 3 / 6 + x ** 4 / 24 - x ** 5 / 120
    with np.errstate(over='ignore'):
        closed = x + np.expm1(-x)
    return np.where(small, series, closed)


def _conditional_integral_shape(theta):
    # 2θ - 3 + 4e^-θ - e^-2θ, the conditional variance of the integral in units of b²τ_C²
    theta = np.asarray(theta, dtype=float)
    small = theta < _SERIES_CUTOFF
    series = (
        2.0 / 3.0 * theta ** 3
        - 0.5 * theta ** 4
        + 7.0 / 30.0 * theta ** 5
        - theta ** 6 / 12.0
    )
    m = -np.expm1(-theta)
    closed = 2.0 * theta - 2.0 * m - m ** 2
    return np.where(small, series, closed)


def ou_step(current, dt: float, p: BathParams, xi):
    """Exact OU transition over dt; preserves N(0, b²) for any dt."""
    if dt <= 0:
        raise ValueError('dt must be positive')
    decay = math.exp(-dt / p.tau_c)
    spread = p.b * math.sqrt(-math.expm1(-2.0 * dt / p.tau_c))
    return np.asarray(current) * decay + spread * np.asarray(xi)


@dataclass(frozen=True)
class IntervalMoments:
    """Conditional moments of (B(dt), ∫₀^dt B) given B(0) = B0.

    mean_next = decay * B0, mean_integral = integral_gain * B0.
    """
    decay: float
    integral_gain: float
    var_next: float
    covariance: float
    var_integral: float


def interval_moments(dt: float, p: BathParams) -> IntervalMoments:
    if dt <= 0:
        raise ValueError('dt must be positive')
    theta = dt / p.tau_c
    m = -math.expm1(-theta)
    b2 = p.b ** 2
    return IntervalMoments(
        decay=1.0 - m,
        integral_gain=p.tau_c * m,
        var_next=b2 * m * (2.0 - m),
        covariance=b2 * p.tau_c * m ** 2,
        var_integral=b2 * p.tau_c ** 2 * float(_conditional_integral_shape(theta)),
    )


def ou_joint_step(current, dt: float, p: BathParams, xi_value, xi_integral):
    """Draw (B(t+dt), ∫_t^{t+dt} B) jointly given B(t), from two standard normals."""
    mom = interval_moments(dt, p)
    current = np.asarray(current, dtype=float)
    sd_next = math.sqrt(mom.var_next)
    if sd_next > 0:
        loading = mom.covariance / sd_next
        residual = max(mom.var_integral - loading ** 2, 0.0)
    else:
        loading, residual = 0.0, mom.var_integral
    nxt = mom.decay * current + sd_next * np.asarray(xi_value)
    integral = (
        mom.integral_gain * current
        + loading * np.asarray(xi_value)
        + math.sqrt(residual) * np.asarray(xi_integral)
    )
    return nxt, integral


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError('grid must be a non-empty 1-d array')
    if np.any(np.diff(grid) <= 0):
        raise ValueError('grid must be strictly increasing')
    return grid


def sample_trajectory(p: BathParams, grid, seed: int, with_integrals: bool = True) -> BathTrajectory:
    grid = _check_grid(grid)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    values = np.empty(grid.size)
    values[0] = p.b * rng.standard_normal()
    integrals = np.empty(grid.size - 1) if with_integrals else None
    for i, dt in enumerate(np.diff(grid)):
        xi = rng.standard_normal(2)
        if with_integrals:
            values[i + 1], integrals[i] = ou_joint_step(values[i], dt, p, xi[0], xi[1])
        else:
            values[i + 1] = ou_step(values[i], dt, p, xi[0])
    return BathTrajectory(times=grid, values=values, integrals=integrals)


def refine_grid(edges, max_step: float) -> np.ndarray:
    """Subdivide every interval of ``edges`` into steps no longer than max_step."""
    edges = _check_grid(edges)
    if max_step <= 0:
        raise ValueError('max_step must be positive')
    pieces = [edges[:1]]
    for a, c in zip(edges[:-1], edges[1:]):
        n = max(1, math.ceil((c - a) / max_step))
        pieces.append(np.linspace(a, c, n + 1)[1:])
    return np.concatenate(pieces)


def sample_interval_integrals(
    p: BathParams,
    edges,
    rng: np.random.Generator,
    size: int,
    exact: bool = True,
    fine_step: float | None = None,
) -> np.ndarray:
    """∫B dt over each interval of ``edges`` for ``size`` independent stationary trajectories.

    Returns an array of shape (size, len(edges) - 1). With ``exact=False`` the
    integrals come from the trapezoid rule on a grid refined to ``fine_step``
    (default tau_c / 1000).
    """
    edges = _check_grid(edges)
    current = p.b * rng.standard_normal(size)
    out = np.empty((size, edges.size - 1))
    if exact:
        for i, dt in enumerate(np.diff(edges)):
            xi = rng.standard_normal((2, size))
            current, out[:, i] = ou_joint_step(current, dt, p, xi[0], xi[1])
        return out

    step = fine_step if fine_step is not None else p.tau_c / 1000.0
    fine = refine_grid(edges, step)
    owner = np.searchsorted(edges, fine[:-1], side='right') - 1
    out[:] = 0.0
    for j, dt in enumerate(np.diff(fine)):
        nxt = ou_step(current, dt, p, rng.standard_normal(size))
        out[:, owner[j]] += 0.5 * (current + nxt) * dt
        current = nxt
    return out
