"""Pulse sequences: generators, toggling-frame sign and validation.

A sequence holds only the π pulses between preparation and readout; the
π/2 pulses are implicit. Pulses are instantaneous.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSequenceError
from .schemas import SequenceSpec

AXIS_X = 0.0
AXIS_Y = math.pi / 2

_AXIS_NAMES = {'x': AXIS_X, 'y': AXIS_Y, '-x': math.pi, '-y': 3 * math.pi / 2}


@dataclass(frozen=True)
class Pulse:
    time: float
    axis: float = AXIS_X
    nominal_angle: float = math.pi


@dataclass(frozen=True)
class PulseSequence:
    total_time: float
    pulses: tuple[Pulse, ...] = ()
    name: str = field(default='custom', compare=False)

    @property
    def n(self) -> int:
        return len(self.pulses)

    @property
    def times(self) -> np.ndarray:
        return np.array([q.time for q in self.pulses], dtype=float)

    @property
    def axes(self) -> np.ndarray:
        return np.array([q.axis for q in self.pulses], dtype=float)

    @property
    def edges(self) -> np.ndarray:
        """Free-evolution interval boundaries: 0, pulse times, total_time."""
        return np.concatenate(([0.0], self.times, [self.total_time]))

    @property
    def signs(self) -> np.ndarray:
        """Toggling-frame sign on each free-evolution interval."""
        return np.where(np.arange(self.n + 1) % 2 == 0, 1.0, -1.0)


def axis_azimuth(axis: str | float) -> float:
    if isinstance(axis, str):
        try:
            return _AXIS_NAMES[axis.strip().lower()]
        except KeyError:
            raise InvalidSequenceError(f'unknown pulse axis {axis!r}') from None
    return float(axis)


def _check_args(t: float, n: int | None = None):
    if not t > 0:
        raise InvalidSequenceError(f'total time must be positive, got {t}')
    if n is not None and n < 1:
        raise InvalidSequenceError(f'pulse count must be >= 1, got {n}')


def ramsey(t: float) -> PulseSequence:
    _check_args(t)
    return PulseSequence(total_time=float(t), name='ramsey')


def cpmg(n: int, t: float, axis: str | float = 'x') -> PulseSequence:
    _check_args(t, n)
    azimuth = axis_azimuth(axis)
    pulses = tuple(Pulse(time=(2 * k - 1) * t / (2 * n), axis=azimuth) for k in range(1, n + 1))
    return PulseSequence(total_time=float(t), pulses=pulses, name='cpmg')


def spin_echo(t: float) -> PulseSequence:
    seq = cpmg(1, t)
    return PulseSequence(total_time=seq.total_time, pulses=seq.pulses, name='se')


def udd(n: int, t: float, axis: str | float = 'x') -> PulseSequence:
    _check_args(t, n)
    azimuth = axis_azimuth(axis)
    pulses = tuple(
        Pulse(time=t * math.sin(math.pi * j / (2 * n + 2)) ** 2, axis=azimuth) for j in range(1, n + 1)
    )
    return PulseSequence(total_time=float(t), pulses=pulses, name='udd')


def xy(n: int, t: float, start_axis: str = 'x') -> PulseSequence:
    """CPMG timings with pulse axes alternating between X and Y."""
    start = start_axis.strip().lower() if isinstance(start_axis, str) else start_axis
    if start not in ('x', 'y'):
        raise InvalidSequenceError(f'xy start axis must be x or y, got {start_axis!r}')
    base = cpmg(n, t)
    first, second = (AXIS_X, AXIS_Y) if start == 'x' else (AXIS_Y, AXIS_X)
    pulses = tuple(
        Pulse(time=q.time, axis=first if k % 2 == 0 else second) for k, q in enumerate(base.pulses)
    )
    return PulseSequence(total_time=base.total_time, pulses=pulses, name='xy')


def custom(t: float, times, axes=None) -> PulseSequence:
    _check_args(t)
    times = [float(x) for x in times]
    if axes is None:
        axes = ['x'] * len(times)
    if len(axes) != len(times):
        raise InvalidSequenceError('custom_axes must have one entry per pulse time')
    pulses = tuple(Pulse(time=x, axis=axis_azimuth(a)) for x, a in zip(times, axes))
    return PulseSequence(total_time=float(t), pulses=pulses, name='custom')


def toggling_sign(seq: PulseSequence, s: float) -> int:
    if s < 0 or s > seq.total_time:
        raise ValueError(f'time {s} outside [0, {seq.total_time}]')
    flips = sum(1 for q in seq.pulses if q.time < s)
    return -1 if flips % 2 else 1


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    index: int | None = None


@dataclass(frozen=True)
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def summary(self) -> str:
        return '; '.join(v.message for v in self.violations) or 'ok'


def validate(seq: PulseSequence, min_gap: float = 0.0) -> ValidationReport:
    violations: list[Violation] = []
    if not (seq.total_time > 0 and math.isfinite(seq.total_time)):
        violations.append(Violation('total_time', f'total time {seq.total_time} is not positive'))

    for i, q in enumerate(seq.pulses):
        if not 0 < q.time < seq.total_time:
            violations.append(Violation('bounds', f'pulse {i} at {q.time} outside (0, {seq.total_time})', i))
        if not q.nominal_angle > 0:
            violations.append(Violation('angle', f'pulse {i} has non-positive angle {q.nominal_angle}', i))

    for i, (a, c) in enumerate(zip(seq.pulses[:-1], seq.pulses[1:])):
        gap = c.time - a.time
        if gap <= 0:
            violations.append(Violation('ordering', f'pulse {i + 1} at {c.time} does not follow pulse {i} at {a.time}', i + 1))
        elif gap < min_gap:
            violations.append(Violation('gap', f'gap {gap:.6g} us between pulses {i} and {i + 1} is below {min_gap:.6g} us', i + 1))
    return ValidationReport(violations)


def require_valid(seq: PulseSequence, min_gap: float = 0.0) -> PulseSequence:
    report = validate(seq, min_gap)
    if not report.ok:
        raise InvalidSequenceError(report.summary())
    return seq


def build_sequence(spec: SequenceSpec, t: float | None = None) -> PulseSequence:
    """Construct the sequence described by ``spec`` at total time ``t`` (default spec.t_us)."""
    total = spec.t_us if t is None else t
    if total is None:
        raise InvalidSequenceError('sequence needs a total time')
    kind = spec.type
    if kind == 'ramsey':
        return ramsey(total)
    if kind == 'se':
        return spin_echo(total)
    if kind == 'cpmg':
        return cpmg(spec.n, total)
    if kind == 'udd':
        return udd(spec.n, total)
    if kind == 'xy':
        return xy(spec.n, total, start_axis=spec.axis_start)
    # custom times scale with the total time when swept
    times = spec.custom_times or []
    if spec.t_us and t is not None:
        times = [x * t / spec.t_us for x in times]
    return custom(total, times, spec.custom_axes)


def _generator_spec(seq: PulseSequence) -> SequenceSpec | None:
    if seq.name in ('ramsey', 'se'):
        spec = SequenceSpec(type=seq.name, t_us=seq.total_time)
    elif seq.name in ('cpmg', 'udd') and seq.n:
        spec = SequenceSpec(type=seq.name, n=seq.n, t_us=seq.total_time)
    elif seq.name == 'xy' and seq.n:
        start = 'y' if seq.pulses[0].axis == AXIS_Y else 'x'
        spec = SequenceSpec(type='xy', n=seq.n, t_us=seq.total_time, axis_start=start)
    else:
        return None
    # hand-edited generator output falls back to explicit pulses
    return spec if build_sequence(spec) == seq else None


def sequence_to_json(seq: PulseSequence) -> str:
    """Serialize ``seq``; generator output keeps its generator parameters."""
    spec = _generator_spec(seq)
    if spec is not None:
        return spec.model_dump_json(exclude_none=True)
    spec = SequenceSpec(
        type='custom',
        n=max(seq.n, 1),
        t_us=seq.total_time,
        custom_times=[float(x) for x in seq.times],
        custom_axes=[float(a) for a in seq.axes],
    )
    return spec.model_dump_json(exclude_none=True)


def sequence_from_json(text: str) -> PulseSequence:
    return build_sequence(SequenceSpec.model_validate_json(text))
