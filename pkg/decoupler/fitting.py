"""Decay-curve fitting: Gaussian free-induction decay, cubic-exponential
decoupling decay, 1/e times and the N^(2/3) scaling law.

Nonlinear fits start from a log-log linearization and are refined by a
damped Gauss–Newton iteration weighted by the per-point standard errors.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from .errors import FitError, NoCrossingError

logger = logging.getLogger(__name__)

CSV_COLUMNS = ('t_us', 'value', 'std_error')
LINEARIZATION_WINDOW = (0.05, 0.95)
MAX_ITERATIONS = 100
STEP_TOLERANCE = 1e-10
MAX_HALVINGS = 40


@dataclass(frozen=True)
class DecayCurve:
    t: np.ndarray
    value: np.ndarray
    std_error: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        value = np.asarray(self.value, dtype=float)
        std_error = np.asarray(self.std_error, dtype=float)
        if not (t.shape == value.shape == std_error.shape) or t.ndim != 1:
            raise ValueError('t, value and std_error must be 1-d arrays of equal length')
        if np.any(np.diff(t) <= 0):
            raise ValueError('t must be strictly increasing')
        if np.any(std_error < 0):
            raise ValueError('std_error must be non-negative')
        object.__setattr__(self, 't', t)
        object.__setattr__(self, 'value', value)
        object.__setattr__(self, 'std_error', std_error)

    @classmethod
    def from_points(cls, points: Sequence[tuple[float, float, float]]) -> 'DecayCurve':
        arr = np.asarray(points, dtype=float).reshape(-1, 3)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2])

    @classmethod
    def exact(cls, t, value) -> 'DecayCurve':
        value = np.asarray(value, dtype=float)
        return cls(np.asarray(t, dtype=float), value, np.zeros_like(value))

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> 'DecayCurve':
        missing = [c for c in CSV_COLUMNS if c not in frame.columns]
        if missing:
            raise ValueError(f'decay curve table lacks columns {missing}')
        return cls(frame['t_us'].to_numpy(), frame['value'].to_numpy(), frame['std_error'].to_numpy())

    @classmethod
    def from_csv(cls, path: str | Path) -> 'DecayCurve':
        return cls.from_frame(pd.read_csv(path, float_precision='round_trip'))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'t_us': self.t, 'value': self.value, 'std_error': self.std_error})

    def to_csv(self, path: str | Path):
        write_table(self.to_frame(), path)

    def __len__(self) -> int:
        return self.t.size


def write_table(frame: pd.DataFrame, path: str | Path):
    # shortest round-trip float repr and fixed line endings: lossless and byte-stable
    frame.to_csv(path, index=False, lineterminator='\n')


class FitResult(BaseModel):
    params: Dict[str, float]
    std_errors: Dict[str, float]
    residual: float
    converged: bool
    iterations: int = 0
    n_points: int = 0
    reduced_chi2: Optional[float] = None


Model = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class _Solution:
    params: np.ndarray
    covariance: np.ndarray
    residual: float
    converged: bool
    iterations: int


def _weights(curve: DecayCurve) -> tuple[np.ndarray, bool]:
    if np.all(curve.std_error > 0):
        return 1.0 / curve.std_error, True
    return np.ones_like(curve.t), False


def _gauss_newton(model: Model, x0: np.ndarray, t: np.ndarray, y: np.ndarray, w: np.ndarray, weighted: bool) -> _Solution:
    x = np.asarray(x0, dtype=float)

    def cost(params):
        f, _ = model(t, params)
        return float(np.sum((w * (y - f)) ** 2))

    current = cost(x)
    converged = False
    iteration = 0
    for iteration in range(1, MAX_ITERATIONS + 1):
        f, jac = model(t, x)
        step, *_ = np.linalg.lstsq(w[:, None] * jac, w * (y - f), rcond=None)
        scale = 1.0
        for _ in range(MAX_HALVINGS):
            trial = x + scale * step
            trial_cost = cost(trial)
            if np.isfinite(trial_cost) and trial_cost <= current:
                break
            scale *= 0.5
        else:
            trial, trial_cost = x, current
        relative = np.linalg.norm(trial - x) / max(np.linalg.norm(x), 1e-300)
        x, current = trial, trial_cost
        logger.debug('gauss-newton iteration %d: cost %.6g, relative step %.3g', iteration, current, relative)
        if relative < STEP_TOLERANCE:
            converged = True
            break

    _, jac = model(t, x)
    wj = w[:, None] * jac
    try:
        covariance = np.linalg.inv(wj.T @ wj)
    except np.linalg.LinAlgError:
        covariance = np.full((x.size, x.size), np.nan)
    dof = t.size - x.size
    if not weighted:
        covariance = covariance * (current / dof if dof > 0 else 0.0)
    return _Solution(x, covariance, current, converged and np.isfinite(current), iteration)


def _usable(curve: DecayCurve, amplitude: float, baseline: float) -> np.ndarray:
    normalized = (curve.value - baseline) / amplitude
    low, high = LINEARIZATION_WINDOW
    return (curve.t > 0) & (normalized > low) & (normalized < high)


def _linearized(curve: DecayCurve, amplitude: float = 1.0, baseline: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    mask = _usable(curve, amplitude, baseline)
    if mask.sum() < 4:
        raise FitError(f'need at least 4 points with normalized value in {LINEARIZATION_WINDOW}, got {int(mask.sum())}')
    normalized = (curve.value[mask] - baseline) / amplitude
    return np.log(curve.t[mask]), np.log(-np.log(normalized))


def _gaussian_model(free_amplitude: bool) -> Model:
    def model(t, x):
        b = x[0]
        amplitude, baseline = (x[1], x[2]) if free_amplitude else (1.0, 0.0)
        envelope = np.exp(-0.5 * (b * t) ** 2)
        columns = [amplitude * envelope * (-b * t ** 2)]
        if free_amplitude:
            columns += [envelope, np.ones_like(t)]
        return amplitude * envelope + baseline, np.column_stack(columns)
    return model


def _cubic_model(free_amplitude: bool) -> Model:
    def model(t, x):
        tc = x[0]
        amplitude, baseline = (x[1], x[2]) if free_amplitude else (1.0, 0.0)
        envelope = np.exp(-((t / tc) ** 3))
        columns = [amplitude * envelope * 3 * t ** 3 / tc ** 4]
        if free_amplitude:
            columns += [envelope, np.ones_like(t)]
        return amplitude * envelope + baseline, np.column_stack(columns)
    return model


def _result(solution: _Solution, names: Sequence[str], n_points: int) -> FitResult:
    errors = np.sqrt(np.clip(np.diag(solution.covariance), 0, None))
    dof = n_points - len(names)
    return FitResult(
        params={k: float(v) for k, v in zip(names, solution.params)},
        std_errors={k: float(v) for k, v in zip(names, errors)},
        residual=float(solution.residual),
        converged=bool(solution.converged),
        iterations=solution.iterations,
        n_points=n_points,
        reduced_chi2=float(solution.residual / dof) if dof > 0 else None,
    )


def _finish(result: FitResult, strict: bool) -> FitResult:
    if strict and not result.converged:
        raise FitError(f'fit did not converge after {result.iterations} iterations')
    return result


def fit_gaussian_decay(curve: DecayCurve, free_amplitude: bool = False, strict: bool = True) -> FitResult:
    """Fit value = A·exp(-b²t²/2) + c and return b (A, c frozen at 1, 0 unless freed)."""
    log_t, log_y = _linearized(curve)
    # slope is fixed at 2 for a Gaussian: ln(-ln v) = ln(b²/2) + 2 ln t
    b0 = math.sqrt(2.0 * math.exp(float(np.mean(log_y - 2.0 * log_t))))
    x0 = [b0, 1.0, 0.0] if free_amplitude else [b0]
    w, weighted = _weights(curve)
    solution = _gauss_newton(_gaussian_model(free_amplitude), np.array(x0), curve.t, curve.value, w, weighted)
    solution.params[0] = abs(solution.params[0])
    names = ['b', 'amplitude', 'baseline'] if free_amplitude else ['b']
    return _finish(_result(solution, names, len(curve)), strict)


def fit_cubic_exp(curve: DecayCurve, free_amplitude: bool = False, strict: bool = True) -> FitResult:
    """Fit value = A·exp(-(t/T_coh)³) + c and return T_coh."""
    log_t, log_y = _linearized(curve)
    slope, intercept = np.polyfit(log_t, log_y, 1)
    if slope <= 0:
        raise FitError('linearized decay is not decreasing')
    t0 = math.exp(-intercept / slope)
    x0 = [t0, 1.0, 0.0] if free_amplitude else [t0]
    w, weighted = _weights(curve)
    solution = _gauss_newton(_cubic_model(free_amplitude), np.array(x0), curve.t, curve.value, w, weighted)
    solution.params[0] = abs(solution.params[0])
    names = ['T_coh', 'amplitude', 'baseline'] if free_amplitude else ['T_coh']
    return _finish(_result(solution, names, len(curve)), strict)


def one_over_e_estimate(curve: DecayCurve, amplitude: float = 1.0, baseline: float = 0.0) -> tuple[float, float]:
    """1/e crossing by linear interpolation, with its standard error from the bracketing points."""
    level = math.exp(-1.0)
    u = (curve.value - baseline) / amplitude
    su = curve.std_error / abs(amplitude)
    for i in range(len(curve) - 1):
        if u[i] >= level > u[i + 1]:
            frac = (u[i] - level) / (u[i] - u[i + 1])
            dt = curve.t[i + 1] - curve.t[i]
            crossing = curve.t[i] + frac * dt
            slope = (u[i + 1] - u[i]) / dt
            spread = math.hypot(su[i] * (1 - frac), su[i + 1] * frac)
            return float(crossing), float(spread / abs(slope))
    raise NoCrossingError('curve does not cross 1/e inside the sampled range')


def one_over_e_time(curve: DecayCurve, amplitude: float = 1.0, baseline: float = 0.0) -> float:
    return one_over_e_estimate(curve, amplitude, baseline)[0]


def fit_scaling(points: Sequence[Sequence[float]], free_exponent: bool = False) -> FitResult:
    """Fit T_coh = T₂·n^p in log space (p fixed at 2/3 unless ``free_exponent``).

    ``points`` holds (n, T_coh) or (n, T_coh, std_error) rows.
    """
    rows = [tuple(float(v) for v in row) for row in points]
    if len({row[0] for row in rows}) < 3:
        raise FitError('scaling fit needs at least 3 distinct pulse counts')
    n = np.array([row[0] for row in rows])
    tc = np.array([row[1] for row in rows])
    if np.any(n < 1) or np.any(tc <= 0):
        raise FitError('pulse counts must be >= 1 and coherence times positive')
    err = np.array([row[2] if len(row) > 2 else 0.0 for row in rows])
    weighted = bool(np.all(err > 0))
    w = tc / err if weighted else np.ones_like(tc)

    log_n, log_t = np.log(n), np.log(tc)
    if free_exponent:
        design = np.column_stack((np.ones_like(log_n), log_n))
        target = log_t
    else:
        design = np.ones((n.size, 1))
        target = log_t - 2.0 / 3.0 * log_n
    coeffs, *_ = np.linalg.lstsq(w[:, None] * design, w * target, rcond=None)
    residual = float(np.sum((w * (target - design @ coeffs)) ** 2))
    covariance = np.linalg.inv((w[:, None] * design).T @ (w[:, None] * design))
    dof = n.size - design.shape[1]
    if not weighted:
        covariance = covariance * (residual / dof if dof > 0 else 0.0)
    t2 = math.exp(coeffs[0])
    params = {'T2': t2, 'p': float(coeffs[1]) if free_exponent else 2.0 / 3.0}
    std_errors = {
        'T2': t2 * math.sqrt(max(covariance[0, 0], 0.0)),
        'p': math.sqrt(max(covariance[1, 1], 0.0)) if free_exponent else 0.0,
    }
    return FitResult(
        params=params,
        std_errors=std_errors,
        residual=residual,
        converged=True,
        iterations=1,
        n_points=int(n.size),
        reduced_chi2=residual / dof if dof > 0 else None,
    )
