"""Single-qubit state and process tomography in the Pauli basis.

Convention: E(ρ) = Σ χ_mn σ_m ρ σ_n with σ_0 = I, so the identity process
has χ_II = 1 and the process fidelity is F_p = Tr(χ_ideal χ_meas). The
input states are |0⟩ (+z), |1⟩ (-z), |x⟩ and |y⟩.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bath import BathParams
from .dynamics import IDENTITY, SIGMA, DensityMatrix, PulseErrorModel, ensemble_state, sequence_unitary
from .errors import TomographyError
from .sequences import PulseSequence

logger = logging.getLogger(__name__)

PAULI_BASIS = (IDENTITY, *SIGMA)
PAULI_LABELS = ('I', 'X', 'Y', 'Z')
INPUT_LABELS = ('0', '1', 'x', 'y')

# columns are row-major vectorizations of I, X, Y, Z
_BASIS_VECTORS = np.column_stack([s.reshape(-1) for s in PAULI_BASIS])


@dataclass(frozen=True)
class ProcessMatrix:
    chi: np.ndarray

    def __post_init__(self):
        chi = np.asarray(self.chi, dtype=complex)
        if chi.shape != (4, 4):
            raise ValueError('process matrix must be 4x4')
        if np.max(np.abs(chi - chi.conj().T)) > 1e-9:
            raise ValueError('process matrix is not Hermitian')
        object.__setattr__(self, 'chi', chi)

    def element(self, m: str, n: str | None = None) -> complex:
        n = m if n is None else n
        return complex(self.chi[PAULI_LABELS.index(m), PAULI_LABELS.index(n)])

    @property
    def trace_residual(self) -> float:
        """‖Σ χ_mn σ_n σ_m - I‖, zero for a trace-preserving process."""
        total = sum(
            self.chi[m, n] * PAULI_BASIS[n] @ PAULI_BASIS[m] for m in range(4) for n in range(4)
        )
        return float(np.linalg.norm(total - IDENTITY))

    @property
    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.chi)))

    def is_physical(self, tol: float = 1e-9) -> bool:
        return self.min_eigenvalue >= -tol

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return sum(
            self.chi[m, n] * PAULI_BASIS[m] @ rho @ PAULI_BASIS[n] for m in range(4) for n in range(4)
        )

    def to_json(self) -> dict:
        """Row-major [re, im] pairs."""
        return {'chi': [[[float(v.real), float(v.imag)] for v in row] for row in self.chi]}


@dataclass(frozen=True)
class StateEstimate:
    rho: DensityMatrix
    clamped: bool
    raw_norm: float


def state_from_bloch(rx: float, ry: float, rz: float) -> StateEstimate:
    r = np.array([rx, ry, rz], dtype=float)
    norm = float(np.linalg.norm(r))
    clamped = norm > 1.0
    if clamped:
        logger.warning('Bloch vector of length %.6g rescaled onto the sphere', norm)
        r = r / norm
    return StateEstimate(rho=DensityMatrix.from_bloch(r), clamped=clamped, raw_norm=norm)


@dataclass(frozen=True)
class TomographyRecord:
    label: str
    bloch: tuple[float, float, float]
    std_errors: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.label not in INPUT_LABELS:
            raise TomographyError(f'unknown input state {self.label!r}')
        norm = math.sqrt(sum(v * v for v in self.bloch))
        combined = math.sqrt(sum(v * v for v in self.std_errors))
        if norm > 1 + 3 * combined + 1e-9:
            raise ValueError(f'record {self.label}: |r| = {norm:.6g} exceeds 1 beyond its errors')


def choi_to_chi(choi: np.ndarray) -> np.ndarray:
    return _BASIS_VECTORS.conj().T @ choi @ _BASIS_VECTORS / 4.0


def _chi_from_outputs(out: dict[str, np.ndarray]) -> np.ndarray:
    both = out['0'] + out['1']
    images = {
        (0, 0): out['0'],
        (1, 1): out['1'],
        (0, 1): out['x'] + 1j * out['y'] - 0.5 * (1 + 1j) * both,
        (1, 0): out['x'] - 1j * out['y'] - 0.5 * (1 - 1j) * both,
    }
    choi = np.zeros((4, 4), dtype=complex)
    for (i, j), image in images.items():
        unit = np.zeros((2, 2), dtype=complex)
        unit[i, j] = 1.0
        choi += np.kron(image, unit)
    chi = choi_to_chi(choi)
    return 0.5 * (chi + chi.conj().T)


def _check_labels(records: Sequence[TomographyRecord]) -> dict[str, TomographyRecord]:
    labels = [r.label for r in records]
    duplicates = sorted({x for x in labels if labels.count(x) > 1})
    missing = sorted(set(INPUT_LABELS) - set(labels))
    if duplicates or missing:
        raise TomographyError(f'need exactly one record per input state; missing {missing}, duplicated {duplicates}')
    return {r.label: r for r in records}


def process_tomography(records: Sequence[TomographyRecord]) -> ProcessMatrix:
    """Linear-inversion χ from the output states of the four canonical inputs."""
    by_label = _check_labels(records)
    outputs = {}
    for label, record in by_label.items():
        estimate = state_from_bloch(*record.bloch)
        outputs[label] = estimate.rho.matrix
    process = ProcessMatrix(_chi_from_outputs(outputs))
    if not process.is_physical(1e-9):
        logger.warning('reconstructed process is not positive (min eigenvalue %.3g)', process.min_eigenvalue)
    return process


def chi_std_errors(records: Sequence[TomographyRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Standard errors of Re χ and Im χ by linear propagation of the Bloch-component errors."""
    by_label = _check_labels(records)

    # χ is affine in the Bloch components, so unit shifts give exact gradients
    def chi_of(bloch: dict[str, np.ndarray]) -> np.ndarray:
        return _chi_from_outputs({k: _bloch_matrix(v) for k, v in bloch.items()})

    base = {k: np.zeros(3) for k in INPUT_LABELS}
    chi0 = chi_of(base)
    var_re = np.zeros((4, 4))
    var_im = np.zeros((4, 4))
    for label in INPUT_LABELS:
        for axis in range(3):
            shifted = {k: v.copy() for k, v in base.items()}
            shifted[label][axis] = 1.0
            gradient = chi_of(shifted) - chi0
            sigma = by_label[label].std_errors[axis]
            var_re += (gradient.real * sigma) ** 2
            var_im += (gradient.imag * sigma) ** 2
    return np.sqrt(var_re), np.sqrt(var_im)


def _bloch_matrix(r) -> np.ndarray:
    rx, ry, rz = r
    return 0.5 * (IDENTITY + rx * SIGMA[0] + ry * SIGMA[1] + rz * SIGMA[2])


def _is_unitary_process(chi: np.ndarray, tol: float = 1e-6) -> bool:
    eigenvalues = np.sort(np.linalg.eigvalsh(chi))
    return abs(eigenvalues[-1] - 1) < tol and np.all(np.abs(eigenvalues[:-1]) < tol)


def process_fidelity(chi_meas: ProcessMatrix, chi_ideal: ProcessMatrix) -> float:
    if not _is_unitary_process(chi_ideal.chi) or chi_ideal.trace_residual > 1e-6:
        raise TomographyError('ideal process must be a rank-1 unitary process')
    value = float(np.real(np.trace(chi_ideal.chi @ chi_meas.chi)))
    if not 0.0 <= value <= 1.0:
        logger.warning('process fidelity %.6g clipped to [0, 1]', value)
    return min(1.0, max(0.0, value))


def channel_chi(kraus: Sequence[np.ndarray]) -> ProcessMatrix:
    """χ of the channel ρ ↦ Σ K ρ K† from its Kraus operators."""
    chi = np.zeros((4, 4), dtype=complex)
    for k in kraus:
        coeffs = np.array([np.trace(s @ np.asarray(k, dtype=complex)) / 2 for s in PAULI_BASIS])
        chi += np.outer(coeffs, coeffs.conj())
    return ProcessMatrix(chi)


def identity_process() -> ProcessMatrix:
    return channel_chi([IDENTITY])


def dephasing_channel(w: float) -> ProcessMatrix:
    """ρ ↦ (1+w)/2 ρ + (1-w)/2 σz ρ σz."""
    if abs(w) > 1:
        raise ValueError(f'coherence must lie in [-1, 1], got {w}')
    return ProcessMatrix(np.diag([(1 + w) / 2, 0.0, 0.0, (1 - w) / 2]).astype(complex))


def z_rotation(angle: float) -> ProcessMatrix:
    u = np.cos(angle / 2) * IDENTITY - 1j * np.sin(angle / 2) * SIGMA[2]
    return channel_chi([u])


def depolarizing_channel(p: float) -> ProcessMatrix:
    """ρ ↦ (1-p)ρ + p I/2."""
    if not 0 <= p <= 4 / 3:
        raise ValueError('depolarizing strength must lie in [0, 4/3]')
    weights = [1 - 3 * p / 4, p / 4, p / 4, p / 4]
    return ProcessMatrix(np.diag(weights).astype(complex))


def unitary_process(u: np.ndarray) -> ProcessMatrix:
    return channel_chi([u])


def compose_unitary(process: ProcessMatrix, u: np.ndarray) -> ProcessMatrix:
    """χ of ρ ↦ u E(ρ) u†."""
    u = np.asarray(u, dtype=complex)
    change = np.array([[np.trace(sm @ u @ sk) / 2 for sk in PAULI_BASIS] for sm in PAULI_BASIS])
    chi = change @ process.chi @ change.conj().T
    return ProcessMatrix(0.5 * (chi + chi.conj().T))


def records_from_channel(process: ProcessMatrix) -> list[TomographyRecord]:
    """Noise-free tomography data obtained by sending the four inputs through ``process``."""
    inputs = {'0': (0, 0, 1), '1': (0, 0, -1), 'x': (1, 0, 0), 'y': (0, 1, 0)}
    records = []
    for label in INPUT_LABELS:
        out = process.apply(DensityMatrix.from_bloch(inputs[label]).matrix)
        bloch = tuple(float(np.real(np.trace(out @ s))) for s in SIGMA)
        records.append(TomographyRecord(label=label, bloch=bloch))
    return records


@dataclass(frozen=True)
class QptResult:
    process: ProcessMatrix
    std_error_re: np.ndarray
    std_error_im: np.ndarray
    records: list[TomographyRecord] = field(default_factory=list)
    ideal: ProcessMatrix | None = None

    @property
    def fidelity_vs_identity(self) -> float:
        return process_fidelity(self.process, identity_process())

    @property
    def fidelity_vs_ideal(self) -> float:
        return process_fidelity(self.process, self.ideal or identity_process())


def qpt_experiment(
    p: BathParams,
    seq: PulseSequence,
    err: PulseErrorModel,
    n_traj: int,
    seed: int,
    *,
    stream_key: Sequence[int] = (),
    **ensemble_options,
) -> QptResult:
    """Simulated process tomography: one ensemble per canonical input, then linear inversion."""
    records = []
    for index, label in enumerate(INPUT_LABELS):
        state = ensemble_state(
            p, seq, err, label, n_traj, seed, stream_key=(*stream_key, index), **ensemble_options
        )
        records.append(
            TomographyRecord(
                label=label,
                bloch=tuple(c.mean for c in state.bloch),
                std_errors=tuple(c.std_error for c in state.bloch),
            )
        )
    process = process_tomography(records)
    se_re, se_im = chi_std_errors(records)
    logger.debug('qpt at t=%.4g us: chi_II=%.4f, residual %.2g', seq.total_time, process.chi[0, 0].real, process.trace_residual)
    return QptResult(
        process=process,
        std_error_re=se_re,
        std_error_im=se_im,
        records=records,
        ideal=unitary_process(sequence_unitary(seq)),
    )
