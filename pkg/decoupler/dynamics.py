"""Monte Carlo propagation of the qubit through a pulse sequence.

The field couples as H = B(t) σz / 2, so free evolution over an interval
rotates the Bloch vector about z by ∫B dt. Pulses are instantaneous
rotations about an equatorial axis. Preparation and readout π/2 pulses are
error-free and implicit: every quantity here is a Bloch component of the
pre-readout state.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import bath
from .bath import BathParams, BathTrajectory
from .errors import GridMismatchError
from .parallel import run_blocks
from .sequences import Pulse, PulseSequence, require_valid

logger = logging.getLogger(__name__)

SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
IDENTITY = np.eye(2, dtype=complex)

NAMED_STATES = {
    'x': (1.0, 0.0, 0.0),
    'y': (0.0, 1.0, 0.0),
    '0': (0.0, 0.0, 1.0),
    '1': (0.0, 0.0, -1.0),
}


@dataclass(frozen=True)
class BlochVector:
    rx: float
    ry: float
    rz: float

    def __post_init__(self):
        if self.norm() > 1 + 1e-9:
            raise ValueError(f'Bloch vector {self.as_array()} lies outside the unit ball')

    @classmethod
    def named(cls, label: str) -> 'BlochVector':
        return cls(*NAMED_STATES[label])

    @classmethod
    def from_array(cls, r) -> 'BlochVector':
        rx, ry, rz = (float(v) for v in r)
        return cls(rx, ry, rz)

    def as_array(self) -> np.ndarray:
        return np.array([self.rx, self.ry, self.rz])

    def norm(self) -> float:
        return math.sqrt(self.rx ** 2 + self.ry ** 2 + self.rz ** 2)

    def ket(self) -> np.ndarray:
        """Pure state with this Bloch vector; requires unit length."""
        if abs(self.norm() - 1) > 1e-9:
            raise ValueError('only unit Bloch vectors describe pure states')
        theta = math.acos(max(-1.0, min(1.0, self.rz)))
        phi = math.atan2(self.ry, self.rx)
        return np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError('density matrix must be 2x2')
        if abs(np.trace(m) - 1) > 1e-12:
            raise ValueError(f'trace {np.trace(m)} differs from 1')
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise ValueError('density matrix is not Hermitian')
        if np.min(np.linalg.eigvalsh(m)) < -1e-9:
            raise ValueError('density matrix has a negative eigenvalue')
        object.__setattr__(self, 'matrix', m)

    @classmethod
    def from_bloch(cls, r) -> 'DensityMatrix':
        rx, ry, rz = (float(v) for v in r)
        return cls(0.5 * (IDENTITY + rx * SIGMA[0] + ry * SIGMA[1] + rz * SIGMA[2]))

    @classmethod
    def pure(cls, ket) -> 'DensityMatrix':
        ket = np.asarray(ket, dtype=complex)
        return cls(np.outer(ket, ket.conj()))

    def bloch(self) -> BlochVector:
        return BlochVector.from_array([np.real(np.trace(self.matrix @ s)) for s in SIGMA])


@dataclass(frozen=True)
class PulseErrorModel:
    """Systematic pulse errors, identical at every pulse about a given axis."""
    angle_error_x: float = 0.0
    angle_error_y: float = 0.0
    axis_tilt_x: float = 0.0
    axis_tilt_y: float = 0.0

    def __post_init__(self):
        for name in ('angle_error_x', 'angle_error_y'):
            if abs(getattr(self, name)) >= 0.5:
                raise ValueError(f'{name} must satisfy |eps| < 0.5')
        for name in ('axis_tilt_x', 'axis_tilt_y'):
            if abs(getattr(self, name)) >= math.pi / 4:
                raise ValueError(f'{name} must satisfy |tilt| < pi/4')

    @property
    def is_ideal(self) -> bool:
        return not any((self.angle_error_x, self.angle_error_y, self.axis_tilt_x, self.axis_tilt_y))

    def actual_rotation(self, pulse: Pulse) -> tuple[float, float]:
        """(azimuth, angle) actually applied for ``pulse``."""
        # pulses nearer the X line (±X) take the x errors, the rest the y errors
        if abs(math.cos(pulse.axis)) >= abs(math.sin(pulse.axis)):
            eps, tilt = self.angle_error_x, self.axis_tilt_x
        else:
            eps, tilt = self.angle_error_y, self.axis_tilt_y
        return pulse.axis + tilt, pulse.nominal_angle * (1.0 + eps)


IDEAL_PULSES = PulseErrorModel()


@dataclass(frozen=True)
class EnsembleResult:
    mean: float
    std_error: float
    n_trajectories: int


def _phase_per_grid_interval(traj: BathTrajectory) -> np.ndarray:
    if traj.integrals is not None:
        return traj.integrals
    return 0.5 * (traj.values[:-1] + traj.values[1:]) * np.diff(traj.times)


def _interval_phases(traj: BathTrajectory, seq: PulseSequence) -> np.ndarray:
    """∫B dt over each free-evolution interval of ``seq`` from a sampled trajectory."""
    times = traj.times
    edges = seq.edges
    scale = max(seq.total_time, 1.0)
    idx = np.searchsorted(times, edges)
    idx = np.clip(idx, 0, times.size - 1)
    # snap to the nearest grid point and require an exact hit
    left = np.clip(idx - 1, 0, times.size - 1)
    idx = np.where(np.abs(times[left] - edges) < np.abs(times[idx] - edges), left, idx)
    if np.any(np.abs(times[idx] - edges) > 1e-9 * scale):
        raise GridMismatchError('trajectory grid must contain 0, every pulse time and the total time')
    per_step = _phase_per_grid_interval(traj)
    cumulative = np.concatenate(([0.0], np.cumsum(per_step)))
    return np.diff(cumulative[idx])


def accumulate_phase(traj: BathTrajectory, seq: PulseSequence) -> float:
    """Toggling-frame phase φ = Σ sign·∫B dt over the sequence."""
    phases = _interval_phases(traj, seq)
    return float(phases @ seq.signs)


def _rotate_z(r: np.ndarray, phi) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    x, y = r[:, 0], r[:, 1]
    return np.column_stack((c * x - s * y, s * x + c * y, r[:, 2]))


def _rotate_equatorial(r: np.ndarray, azimuth: float, angle: float) -> np.ndarray:
    nx, ny = math.cos(azimuth), math.sin(azimuth)
    c, s = math.cos(angle), math.sin(angle)
    x, y, z = r[:, 0], r[:, 1], r[:, 2]
    dot = nx * x + ny * y
    return np.column_stack(
        (
            x * c + ny * z * s + nx * dot * (1 - c),
            y * c - nx * z * s + ny * dot * (1 - c),
            z * c + (nx * y - ny * x) * s,
        )
    )


def _propagate_array(r0: np.ndarray, phases: np.ndarray, seq: PulseSequence, err: PulseErrorModel) -> np.ndarray:
    rotations = [err.actual_rotation(q) for q in seq.pulses]
    r = r0
    for k in range(seq.n + 1):
        r = _rotate_z(r, phases[:, k])
        if k < seq.n:
            r = _rotate_equatorial(r, *rotations[k])
    return r


def _as_bloch(initial: BlochVector | str) -> BlochVector:
    return BlochVector.named(initial) if isinstance(initial, str) else initial


def propagate(
    traj: BathTrajectory,
    seq: PulseSequence,
    err: PulseErrorModel,
    initial: BlochVector | str,
) -> BlochVector:
    initial = _as_bloch(initial)
    phases = _interval_phases(traj, seq)[None, :]
    r = _propagate_array(initial.as_array()[None, :], phases, seq, err)
    return BlochVector.from_array(r[0])


def ideal_final_state(seq: PulseSequence, initial: BlochVector | str) -> BlochVector:
    """State reached with zero field and error-free pulses: the target |ψ_i⟩."""
    initial = _as_bloch(initial)
    phases = np.zeros((1, seq.n + 1))
    r = _propagate_array(initial.as_array()[None, :], phases, seq, IDEAL_PULSES)
    return BlochVector.from_array(r[0])


def pulse_unitary(azimuth: float, angle: float) -> np.ndarray:
    axis = math.cos(azimuth) * SIGMA[0] + math.sin(azimuth) * SIGMA[1]
    return math.cos(angle / 2) * IDENTITY - 1j * math.sin(angle / 2) * axis


def sequence_unitary(seq: PulseSequence, err: PulseErrorModel = IDEAL_PULSES, phases=None) -> np.ndarray:
    """Net 2x2 unitary of ``seq``; ``phases`` are the free-interval field integrals (default zero)."""
    phases = np.zeros(seq.n + 1) if phases is None else np.asarray(phases, dtype=float)
    u = IDENTITY
    for k in range(seq.n + 1):
        u = np.diag([np.exp(-0.5j * phases[k]), np.exp(0.5j * phases[k])]) @ u
        if k < seq.n:
            u = pulse_unitary(*err.actual_rotation(seq.pulses[k])) @ u
    return u


def _ensemble_result(mean, std_error, count) -> EnsembleResult:
    return EnsembleResult(mean=float(mean), std_error=float(std_error), n_trajectories=int(count))


def coherence(
    p: BathParams,
    seq: PulseSequence,
    n_traj: int,
    seed: int,
    *,
    exact_integrals: bool = True,
    fine_step: float | None = None,
    block_size: int = 4096,
    threads: int = 1,
    stream_key: Sequence[int] = (),
) -> EnsembleResult:
    """Ideal-pulse coherence W = ⟨cos φ⟩ over independent bath trajectories."""
    if n_traj < 2:
        raise ValueError('n_traj must be >= 2')
    require_valid(seq)
    edges, signs = seq.edges, seq.signs

    def block(rng: np.random.Generator, size: int) -> np.ndarray:
        phases = bath.sample_interval_integrals(p, edges, rng, size, exact=exact_integrals, fine_step=fine_step)
        return np.cos(phases @ signs)

    stats = run_blocks(block, n_traj, seed, stream_key, block_size, threads)
    return _ensemble_result(stats.mean, stats.std_error, stats.count)


@dataclass(frozen=True)
class StateEnsemble:
    rho: DensityMatrix
    bloch: tuple[EnsembleResult, EnsembleResult, EnsembleResult]
    fidelity: EnsembleResult
    ideal: BlochVector


def ensemble_state(
    p: BathParams,
    seq: PulseSequence,
    err: PulseErrorModel,
    initial: BlochVector | str,
    n_traj: int,
    seed: int,
    *,
    exact_integrals: bool = True,
    fine_step: float | None = None,
    block_size: int = 4096,
    threads: int = 1,
    stream_key: Sequence[int] = (),
) -> StateEnsemble:
    """Average propagated Bloch vectors; ρ = (I + r̄·σ)/2 and F_s against the ideal target."""
    if n_traj < 2:
        raise ValueError('n_traj must be >= 2')
    require_valid(seq)
    initial = _as_bloch(initial)
    target = ideal_final_state(seq, initial).as_array()
    r0 = initial.as_array()
    edges = seq.edges

    def block(rng: np.random.Generator, size: int) -> np.ndarray:
        phases = bath.sample_interval_integrals(p, edges, rng, size, exact=exact_integrals, fine_step=fine_step)
        r = _propagate_array(np.tile(r0, (size, 1)), phases, seq, err)
        fid = 0.5 * (1.0 + r @ target)
        return np.column_stack((r, fid))

    stats = run_blocks(block, n_traj, seed, stream_key, block_size, threads)
    mean, se = stats.mean, stats.std_error
    r_bar = mean[:3]
    norm = np.linalg.norm(r_bar)
    if norm > 1:
        r_bar = r_bar / norm
    components = tuple(_ensemble_result(mean[i], se[i], stats.count) for i in range(3))
    return StateEnsemble(
        rho=DensityMatrix.from_bloch(r_bar),
        bloch=components,
        fidelity=_ensemble_result(mean[3], se[3], stats.count),
        ideal=BlochVector.from_array(target),
    )


def state_fidelity_curve(
    p: BathParams,
    sequence_at: Callable[[float], PulseSequence],
    times,
    err: PulseErrorModel,
    initial: BlochVector | str,
    n_traj: int,
    seed: int,
    *,
    stream_key: Sequence[int] = (),
    **ensemble_options,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean F_s and its standard error at each time; ``sequence_at(t)`` builds the sequence.

    Point i draws from the substreams keyed by ``(*stream_key, i)``.
    """
    values, errors = [], []
    for i, t in enumerate(np.asarray(times, dtype=float)):
        state = ensemble_state(
            p, sequence_at(float(t)), err, initial, n_traj, seed, stream_key=(*stream_key, i), **ensemble_options
        )
        values.append(state.fidelity.mean)
        errors.append(state.fidelity.std_error)
    return np.array(values), np.array(errors)


def state_fidelity(rho: DensityMatrix, ideal) -> float:
    """F_s = ⟨ψ_i|ρ|ψ_i⟩ for a normalized pure state (ket or unit BlochVector)."""
    if isinstance(ideal, BlochVector):
        ideal = ideal.ket()
    ket = np.asarray(ideal, dtype=complex).reshape(2)
    if abs(np.vdot(ket, ket).real - 1) > 1e-9:
        raise ValueError('ideal state must be normalized')
    value = np.real(np.vdot(ket, rho.matrix @ ket))
    return float(min(1.0, max(0.0, value)))


def fidelity_from_coherence(w):
    """Ideal-pulse state fidelity of an equatorial input with coherence w."""
    return 0.5 * (1.0 + np.asarray(w, dtype=float))


def ramsey_signal(p: BathParams, detuning: float, hyperfine_splitting: float, t):
    """Gaussian envelope times the equal-weight average of the three hyperfine lines."""
    t = np.asarray(t, dtype=float)
    lines = sum(np.cos((detuning + m * hyperfine_splitting) * t) for m in (-1, 0, 1)) / 3.0
    return np.exp(-0.5 * (p.b * t) ** 2) * lines
