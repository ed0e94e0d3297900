"""Experiment tasks: dispatch a validated config to the physics modules and
write plot-ready outputs.

Every run writes into one directory: ``config.resolved.json``, one or more
CSV tables and ``summary.json``. Nothing time- or host-dependent is written
there, so a repeated run with the same config and seed is byte-identical.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd

from . import analytic, crud, dynamics, fitting, tomography
from .bath import BathParams
from .dynamics import PulseErrorModel
from .errors import ConfigError, InvalidSequenceError, NumericalError
from .fitting import DecayCurve, write_table
from .schemas import ExperimentConfig, SequenceSpec, SweepConfig
from .sequences import PulseSequence, build_sequence, validate
from .settings import get_settings

logger = logging.getLogger(__name__)

COLLAPSE_WINDOW = (0.2, 0.9)


@dataclass(frozen=True)
class RunContext:
    threads: int = 1
    block_size: int = 4096

    @classmethod
    def from_settings(cls, threads: int | None = None, block_size: int | None = None) -> 'RunContext':
        settings = get_settings()
        return cls(
            threads=max(1, threads if threads is not None else settings.threads),
            block_size=block_size if block_size is not None else settings.block_size,
        )


def sweep_times(sweep: SweepConfig, scale: float = 1.0) -> np.ndarray:
    if sweep.spacing == 'log':
        grid = np.geomspace(sweep.t_min_us, sweep.t_max_us, sweep.points)
    else:
        grid = np.linspace(sweep.t_min_us, sweep.t_max_us, sweep.points)
    return grid * scale


def bath_params(cfg: ExperimentConfig) -> BathParams:
    return BathParams(b=cfg.bath.b_per_us, tau_c=cfg.bath.tau_c_us)


def error_model(cfg: ExperimentConfig) -> PulseErrorModel:
    e = cfg.errors
    return PulseErrorModel(
        angle_error_x=e.eps_x, angle_error_y=e.eps_y, axis_tilt_x=e.tilt_x, axis_tilt_y=e.tilt_y
    )


def _modes(cfg: ExperimentConfig) -> list[str]:
    return ['mc', 'analytic'] if cfg.mode == 'both' else [cfg.mode]


def _sequence_at(spec: SequenceSpec, t: float) -> PulseSequence:
    try:
        seq = build_sequence(spec, t)
    except InvalidSequenceError as exc:
        raise ConfigError(f'sequence {spec.display_label()}: {exc}') from exc
    report = validate(seq, spec.min_gap_us)
    if not report.ok:
        raise ConfigError([f'sequence {spec.display_label()} at t={t:.6g} us: {v.message}' for v in report.violations])
    return seq


def _mc_options(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    mc = cfg.monte_carlo
    return {
        'exact_integrals': mc.exact_integrals,
        'fine_step': mc.fine_step_us,
        'block_size': mc.block_size or ctx.block_size,
        'threads': ctx.threads,
    }


def simulate_curve(
    cfg: ExperimentConfig,
    spec: SequenceSpec,
    times: np.ndarray,
    mode: str,
    ctx: RunContext,
    curve_index: int = 0,
) -> DecayCurve:
    """Coherence or state-fidelity curve of ``spec`` over ``times``."""
    p = bath_params(cfg)
    initial = spec.initial_state or cfg.initial_state
    times = np.asarray(times, dtype=float)
    mc = cfg.monte_carlo

    def sequence_at(t: float) -> PulseSequence:
        return _sequence_at(spec, t)

    if mode == 'mc' and cfg.observable == 'fidelity':
        values, errors = dynamics.state_fidelity_curve(
            p, sequence_at, times, error_model(cfg), initial, mc.trajectories, mc.seed,
            stream_key=(curve_index,), **_mc_options(cfg, ctx),
        )
        return DecayCurve(times, values, errors)

    values, errors = [], []
    for i, t in enumerate(times):
        seq = sequence_at(float(t))
        if mode == 'analytic':
            w = analytic.predicted_coherence(seq, p)
            if cfg.observable == 'fidelity':
                w = float(dynamics.fidelity_from_coherence(w)) if initial in ('x', 'y') else 1.0
            values.append(w)
            errors.append(0.0)
        else:
            result = dynamics.coherence(p, seq, mc.trajectories, mc.seed, stream_key=(curve_index, i), **_mc_options(cfg, ctx))
            values.append(result.mean)
            errors.append(result.std_error)
    return DecayCurve(times, np.array(values), np.array(errors))


def _as_coherence(curve: DecayCurve, observable: str) -> DecayCurve:
    if observable == 'coherence':
        return curve
    # fidelity (1 + w)/2 of an equatorial input back to w
    return DecayCurve(curve.t, 2 * curve.value - 1, 2 * curve.std_error)


def summarize_curve(cfg: ExperimentConfig, spec: SequenceSpec, curve: DecayCurve) -> dict:
    """Fits and 1/e time of a decay curve; numerical failures are reported, not raised."""
    w = _as_coherence(curve, cfg.observable)
    summary: dict = {'label': spec.display_label()}
    fit = None
    try:
        if spec.type == 'ramsey':
            fit = fitting.fit_gaussian_decay(w, free_amplitude=cfg.fit.free_amplitude)
        else:
            fit = fitting.fit_cubic_exp(w, free_amplitude=cfg.fit.free_amplitude)
        summary['fit'] = fit.model_dump()
        if spec.type == 'se':
            summary['implied_tau_c_us'] = analytic.tau_c_from_t2(fit.params['T_coh'], cfg.bath.b_per_us)
    except NumericalError as exc:
        summary['fit'] = None
        summary['fit_error'] = str(exc)

    amplitude, baseline = 1.0, 0.0
    if fit is not None and cfg.fit.free_amplitude:
        amplitude, baseline = fit.params['amplitude'], fit.params['baseline']
    try:
        summary['one_over_e_us'] = fitting.one_over_e_time(w, amplitude, baseline)
    except NumericalError as exc:
        summary['one_over_e_us'] = None
        summary['one_over_e_error'] = str(exc)
    return summary


def _warn_ignored_errors(cfg: ExperimentConfig):
    if 'analytic' in _modes(cfg) and not cfg.errors.is_ideal():
        logger.warning('analytic mode assumes ideal pulses; configured pulse errors are ignored there')


def _write_json(path: Path, data):
    path.write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + '\n')


def run_decay(cfg: ExperimentConfig, out_dir: Path, ctx: RunContext) -> dict:
    _warn_ignored_errors(cfg)
    times = sweep_times(cfg.sweep)
    summary = {'task': 'decay', 'sequence': cfg.sequence.display_label(), 'observable': cfg.observable, 'curves': {}}
    for mode in _modes(cfg):
        curve = simulate_curve(cfg, cfg.sequence, times, mode, ctx)
        curve.to_csv(out_dir / f'decay_{mode}.csv')
        summary['curves'][mode] = summarize_curve(cfg, cfg.sequence, curve)
    return summary


def combine_curves(labelled: list[tuple[str, DecayCurve]]) -> pd.DataFrame:
    reference = labelled[0][1].t
    frames = []
    for label, curve in labelled:
        if curve.t.shape != reference.shape or not np.allclose(curve.t, reference, rtol=0, atol=1e-12):
            raise ConfigError(f'curve {label} does not share the common sweep')
        frame = curve.to_frame()
        frame.insert(0, 'label', label)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def run_compare(cfg: ExperimentConfig, out_dir: Path, ctx: RunContext) -> dict:
    _warn_ignored_errors(cfg)
    times = sweep_times(cfg.sweep)
    specs = cfg.sequences or []
    summary = {'task': 'compare', 'observable': cfg.observable, 'curves': {}}
    for mode in _modes(cfg):
        labelled = [(spec.display_label(), simulate_curve(cfg, spec, times, mode, ctx, curve_index=k)) for k, spec in enumerate(specs)]
        write_table(combine_curves(labelled), out_dir / f'compare_{mode}.csv')
        summary['curves'][mode] = [summarize_curve(cfg, spec, curve) for spec, (_, curve) in zip(specs, labelled)]
    return summary


def analytic_process(seq: PulseSequence, p: BathParams) -> tomography.ProcessMatrix:
    """Ideal-pulse process: toggling-frame dephasing followed by the ideal sequence unitary."""
    dephasing = tomography.dephasing_channel(analytic.predicted_coherence(seq, p))
    return tomography.compose_unitary(dephasing, dynamics.sequence_unitary(seq))


def _chi_entry(t: float, process: tomography.ProcessMatrix, ideal: tomography.ProcessMatrix, se_re=None, se_im=None) -> dict:
    entry = {
        't_us': t,
        **process.to_json(),
        'fidelity_vs_identity': tomography.process_fidelity(process, tomography.identity_process()),
        'fidelity_vs_ideal': tomography.process_fidelity(process, ideal),
        'trace_residual': process.trace_residual,
        'min_eigenvalue': process.min_eigenvalue,
        'physical': process.is_physical(1e-9),
    }
    if se_re is not None:
        entry['chi_std_error_re'] = se_re.tolist()
        entry['chi_std_error_im'] = se_im.tolist()
    return entry


def run_qpt(cfg: ExperimentConfig, out_dir: Path, ctx: RunContext) -> dict:
    _warn_ignored_errors(cfg)
    p = bath_params(cfg)
    err = error_model(cfg)
    summary = {'task': 'qpt', 'sequence': cfg.sequence.display_label(), 'processes': {}}
    for mode in _modes(cfg):
        entries, rows = [], []
        for i, t in enumerate(cfg.qpt.times_us):
            seq = _sequence_at(cfg.sequence, t)
            ideal = tomography.unitary_process(dynamics.sequence_unitary(seq))
            if mode == 'analytic':
                process = analytic_process(seq, p)
                entries.append(_chi_entry(t, process, ideal))
            else:
                result = tomography.qpt_experiment(
                    p, seq, err, cfg.monte_carlo.trajectories, cfg.monte_carlo.seed, stream_key=(i,), **_mc_options(cfg, ctx)
                )
                process = result.process
                entries.append(_chi_entry(t, process, ideal, result.std_error_re, result.std_error_im))
            for m, row_label in enumerate(tomography.PAULI_LABELS):
                for n, col_label in enumerate(tomography.PAULI_LABELS):
                    rows.append({'t_us': t, 'row': row_label, 'col': col_label, 'abs': abs(process.chi[m, n])})
        write_table(pd.DataFrame(rows), out_dir / f'qpt_{mode}.csv')
        summary['processes'][mode] = entries
    return summary


def _coherence_time(curve: DecayCurve, estimator: str) -> tuple[float, float]:
    if estimator == 'fit':
        fit = fitting.fit_cubic_exp(curve)
        return fit.params['T_coh'], fit.std_errors['T_coh']
    return fitting.one_over_e_estimate(curve)


def collapse_spread(curves: dict[int, DecayCurve], t2: float, window: tuple[float, float] = COLLAPSE_WINDOW) -> float:
    """Largest pointwise spread between curves on the rescaled axis t/(T₂ n^(2/3)),
    restricted to where the mean curve lies inside ``window``."""
    scaled = {n: (c.t / (t2 * n ** (2.0 / 3.0)), c.value) for n, c in curves.items()}
    lo = max(x[0] for x, _ in scaled.values())
    hi = min(x[-1] for x, _ in scaled.values())
    if hi <= lo:
        raise NumericalError('rescaled curves do not overlap')
    grid = np.linspace(lo, hi, 400)
    stack = np.array([np.interp(grid, x, y) for x, y in scaled.values()])
    mean = stack.mean(axis=0)
    inside = (mean >= window[0]) & (mean <= window[1])
    if not inside.any():
        raise NumericalError('no overlap of the rescaled curves inside the collapse window')
    return float(np.max(stack[:, inside].max(axis=0) - stack[:, inside].min(axis=0)))


def _scaling_plan(cfg: ExperimentConfig) -> list[tuple[int, SequenceSpec, np.ndarray]]:
    p = bath_params(cfg)
    plan = []
    for n in sorted(set(cfg.scaling.n_values)):
        spec = cfg.sequence.model_copy(update={'n': n, 'label': None})
        scale = analytic.t_coh(p, n) if cfg.scaling.normalized_sweep else 1.0
        plan.append((n, spec, sweep_times(cfg.sweep, scale)))
    return plan


def run_scaling(cfg: ExperimentConfig, out_dir: Path, ctx: RunContext) -> dict:
    _warn_ignored_errors(cfg)
    p = bath_params(cfg)
    t2_pred = analytic.t2_from_bath(p)
    plan = _scaling_plan(cfg)
    n_values = [n for n, _, _ in plan]
    summary = {'task': 'scaling', 'sequence_type': cfg.sequence.type, 'predicted_T2_us': t2_pred, 'results': {}}
    for mode in _modes(cfg):
        rows, curves = [], {}
        for k, (n, spec, times) in enumerate(plan):
            curve = simulate_curve(cfg, spec, times, mode, ctx, curve_index=k)
            curve = _as_coherence(curve, cfg.observable)
            curves[n] = curve
            t_coh, t_err = _coherence_time(curve, cfg.scaling.estimator)
            rows.append({'n': n, 'T_coh': t_coh, 'err': t_err})
        table = pd.DataFrame(rows)
        write_table(table, out_dir / f'scaling_{mode}.csv')
        points = [(r['n'], r['T_coh'], r['err']) for r in rows]
        fixed = fitting.fit_scaling(points, free_exponent=False)
        result = {'fit_fixed_exponent': fixed.model_dump()}
        if cfg.scaling.free_exponent:
            result['fit_free_exponent'] = fitting.fit_scaling(points, free_exponent=True).model_dump()
        t2_fit = fixed.params['T2']
        collapse = []
        for n, curve in curves.items():
            for t, v, s in zip(curve.t, curve.value, curve.std_error):
                collapse.append({'n': n, 't_scaled': t / (t2_fit * n ** (2.0 / 3.0)), 'value': v, 'std_error': s})
        write_table(pd.DataFrame(collapse), out_dir / f'collapse_{mode}.csv')
        n_max = n_values[-1]
        t_max = rows[-1]['T_coh']
        result.update(
            {
                'collapse_spread': collapse_spread(curves, t2_fit),
                'enhancement_ratio': t_max / rows[0]['T_coh'] if n_values[0] == 1 else t_max / t2_fit,
                'n_max': n_max,
                'exceeds_tau_c': bool(t_max > p.tau_c),
            }
        )
        summary['results'][mode] = result
    return summary


def run_ramsey(cfg: ExperimentConfig, out_dir: Path, ctx: RunContext) -> dict:
    p = bath_params(cfg)
    times = sweep_times(cfg.sweep)
    detuning = cfg.ramsey.detuning_per_us
    splitting = cfg.ramsey.hyperfine_splitting_per_us
    frame = pd.DataFrame(
        {
            't_us': times,
            'value': dynamics.ramsey_signal(p, detuning, splitting, times),
            'std_error': np.zeros_like(times),
            'envelope': analytic.fid_envelope(p, times),
        }
    )
    write_table(frame, out_dir / 'ramsey_signal.csv')
    return {
        'task': 'ramsey',
        'detuning_per_us': detuning,
        'hyperfine_splitting_per_us': splitting,
        'beat_period_us': 2 * math.pi / splitting,
        'envelope_one_over_e_us': math.sqrt(2.0) / p.b,
    }


TASKS: dict[str, Callable[[ExperimentConfig, Path, RunContext], dict]] = {
    'decay': run_decay,
    'compare': run_compare,
    'qpt': run_qpt,
    'scaling': run_scaling,
    'ramsey': run_ramsey,
}


def _check_sequences(spec: SequenceSpec, times) -> list[str]:
    problems = []
    for t in times:
        try:
            _sequence_at(spec, float(t))
        except ConfigError as exc:
            problems.extend(exc.messages)
            break
    return problems


def validate_plan(cfg: ExperimentConfig):
    """Build and validate every sequence the task will run; raise ConfigError listing all problems."""
    problems: list[str] = []
    if cfg.task == 'decay':
        problems += _check_sequences(cfg.sequence, sweep_times(cfg.sweep))
    elif cfg.task == 'compare':
        specs = cfg.sequences or []
        labels = [s.display_label() for s in specs]
        if len(set(labels)) != len(labels):
            problems.append('sequence labels in a comparison must be unique')
        for spec in specs:
            problems += _check_sequences(spec, sweep_times(cfg.sweep))
    elif cfg.task == 'qpt':
        problems += _check_sequences(cfg.sequence, cfg.qpt.times_us)
    elif cfg.task == 'scaling':
        if cfg.sequence.type in ('ramsey', 'se', 'custom'):
            problems.append('scaling needs a cpmg, udd or xy sequence type')
        else:
            for _, spec, times in _scaling_plan(cfg):
                problems += _check_sequences(spec, times)
    if problems:
        raise ConfigError(problems)


def run_task(cfg: ExperimentConfig, out_dir: str | Path, ctx: RunContext | None = None) -> dict:
    """Run ``cfg.task`` into ``out_dir``. A rejected config leaves nothing behind."""
    validate_plan(cfg)
    ctx = ctx or RunContext.from_settings()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    logger.info('running task %s into %s', cfg.task, out)
    (out / 'config.resolved.json').write_text(cfg.resolved_json())
    summary = crud.json_safe(TASKS[cfg.task](cfg, out, ctx))
    _write_json(out / 'summary.json', summary)
    logger.info('task %s finished', cfg.task)
    return summary
