"""Gaussian-noise decoherence: closed-form decay laws and the exponent χ.

For Gaussian dephasing noise the ideal-pulse coherence is exactly
W = exp(-χ) with χ = ½∫∫ s(u)s(v)C(u-v) du dv, s the toggling-frame sign.
The time-domain path integrates the exponential correlation analytically
over every pair of free-evolution intervals; the filter-function path
computes the same χ from the Lorentzian spectrum by quadrature and serves
as the cross-check.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .bath import BathParams, _ramp, spectrum
from .errors import QuadratureError
from .sequences import PulseSequence, require_valid

logger = logging.getLogger(__name__)

SLOW_BATH_THRESHOLD = 10.0


def fid_envelope(p: BathParams, t):
    t = np.asarray(t, dtype=float)
    return np.exp(-0.5 * (p.b * t) ** 2)


def t2_from_bath(p: BathParams) -> float:
    """Spin-echo time T₂ = (12 τ_C / b²)^(1/3), valid for b·τ_C ≫ 1."""
    if p.b * p.tau_c < SLOW_BATH_THRESHOLD:
        logger.warning('b*tau_c = %.3g is not in the slow-bath regime; cubic echo law is approximate', p.b * p.tau_c)
    return (12.0 * p.tau_c / p.b ** 2) ** (1.0 / 3.0)


def tau_c_from_t2(t2: float, b: float) -> float:
    return t2 ** 3 * b ** 2 / 12.0


def echo_decay(p: BathParams, t):
    t = np.asarray(t, dtype=float)
    return np.exp(-((t / t2_from_bath(p)) ** 3))


def chi_gaussian(seq: PulseSequence, p: BathParams) -> float:
    require_valid(seq)
    x = np.diff(seq.edges) / p.tau_c
    weights = seq.signs * -np.expm1(-x)
    total = float(np.sum(_ramp(x)))
    # running sum over earlier intervals, each damped by the time elapsed since it ended
    carried = 0.0
    for xj, wj in zip(x, weights):
        total += wj * carried
        carried = carried * math.exp(-xj) + wj
    return max(0.0, p.b ** 2 * p.tau_c ** 2 * total)


def predicted_coherence(seq: PulseSequence, p: BathParams) -> float:
    return math.exp(-chi_gaussian(seq, p))


def filter_amplitude(seq: PulseSequence, omega) -> np.ndarray:
    """f(ω) = Σ sign·(e^{iω t_end} - e^{iω t_start})/(iω), finite at ω = 0."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    edges = seq.edges
    lengths = np.diff(edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    phase = np.exp(1j * np.outer(omega, centers))
    envelope = lengths * np.sinc(np.outer(omega, lengths) / (2 * np.pi))
    return (phase * envelope) @ seq.signs


def filter_function(seq: PulseSequence, omega) -> np.ndarray:
    return np.abs(filter_amplitude(seq, omega)) ** 2


def _panel_edges(seq: PulseSequence, p: BathParams, omega_max: float, refine: int) -> np.ndarray:
    # filter oscillations have period >= 2π/t; the Lorentzian varies on 1/τ_C near zero
    coarse = math.pi / seq.total_time
    fine = min(0.5 / p.tau_c, coarse)
    split = min(20.0 / p.tau_c, omega_max)
    scale = 2 ** refine
    low = np.linspace(0.0, split, max(1, math.ceil(split / fine)) * scale + 1)
    if split >= omega_max:
        return low
    high = np.linspace(split, omega_max, max(1, math.ceil((omega_max - split) / coarse)) * scale + 1)
    return np.concatenate((low, high[1:]))


def _composite_gauss(fn, edges: np.ndarray, order: int, chunk: int = 2048) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    total = 0.0
    for start in range(0, mid.size, chunk):
        h, m = half[start:start + chunk], mid[start:start + chunk]
        points = (m[:, None] + h[:, None] * nodes[None, :]).ravel()
        values = fn(points).reshape(m.size, order)
        total += float(np.sum(h * (values @ weights)))
    return total


def filter_exponent(
    seq: PulseSequence,
    p: BathParams,
    rtol: float = 1e-8,
    omega_max: float | None = None,
    order: int = 16,
    max_refinements: int = 4,
) -> float:
    """χ = (1/2π)∫₀^∞ S(ω)|f(ω)|² dω by panel-refined Gauss–Legendre quadrature.

    The integral is truncated at omega_max (default max(100/τ_C, 100·n/t)) and
    the tail beyond it is added from the asymptotic form of the integrand.
    Panels are halved until two successive estimates agree to ``rtol``.
    """
    require_valid(seq)
    if omega_max is None:
        omega_max = max(100.0 / p.tau_c, 100.0 * max(seq.n, 1) / seq.total_time)

    def integrand(w):
        return spectrum(p, w) * filter_function(seq, w) / (2 * np.pi)

    jumps = 2 + 4 * seq.n
    tail = p.b ** 2 * jumps / (3 * np.pi * p.tau_c * omega_max ** 3)

    previous = _composite_gauss(integrand, _panel_edges(seq, p, omega_max, 0), order)
    achieved = math.inf
    for level in range(1, max_refinements + 1):
        current = _composite_gauss(integrand, _panel_edges(seq, p, omega_max, level), order)
        scale = abs(current) if current != 0 else 1.0
        achieved = abs(current - previous) / scale
        logger.debug('filter quadrature level %d: %.15g (rel change %.3g)', level, current, achieved)
        if achieved <= rtol:
            return current + tail
        previous = current
    raise QuadratureError('filter-function quadrature did not converge', achieved)


def scaling_amplitude(p: BathParams) -> float:
    """A = (2/3) b² τ_C²."""
    return 2.0 / 3.0 * p.b ** 2 * p.tau_c ** 2


def scaling_decay(p: BathParams, n: int, t):
    if n < 1:
        raise ValueError('n must be >= 1')
    t = np.asarray(t, dtype=float)
    return np.exp(-scaling_amplitude(p) * n * t ** 3 / (2 * n * p.tau_c) ** 3)


def t_coh(p: BathParams, n: int) -> float:
    if n < 1:
        raise ValueError('n must be >= 1')
    return t2_from_bath(p) * n ** (2.0 / 3.0)


DecayKind = Literal['gaussian_fid', 'cubic_echo', 'scaling']


@dataclass(frozen=True)
class DecayLaw:
    kind: DecayKind
    params: BathParams
    n: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError('n must be >= 1')

    def __call__(self, t):
        if self.kind == 'gaussian_fid':
            return fid_envelope(self.params, t)
        if self.kind == 'cubic_echo':
            return echo_decay(self.params, t)
        return scaling_decay(self.params, self.n, t)

    @property
    def one_over_e_time(self) -> float:
        if self.kind == 'gaussian_fid':
            return math.sqrt(2.0) / self.params.b
        return t_coh(self.params, self.n)
