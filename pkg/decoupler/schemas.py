import json
import math
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError

SequenceType = Literal['ramsey', 'se', 'cpmg', 'udd', 'xy', 'custom']
InputState = Literal['x', 'y', '0', '1']


class StrictModel(BaseModel):
    model_config = ConfigDict(extra='forbid')


class SequenceSpec(StrictModel):
    type: SequenceType = 'se'
    n: int = Field(1, ge=1)
    t_us: Optional[float] = Field(None, gt=0)
    axis_start: Literal['x', 'y'] = 'x'
    custom_times: Optional[List[float]] = None
    custom_axes: Optional[List[Union[float, str]]] = None
    min_gap_us: float = Field(0.0, ge=0)
    label: Optional[str] = None
    initial_state: Optional[InputState] = None

    @model_validator(mode='after')
    def check_custom(self):
        if self.type == 'custom':
            if self.custom_times is None:
                raise ValueError('custom sequences need custom_times')
            if self.custom_axes is not None and len(self.custom_axes) != len(self.custom_times):
                raise ValueError('custom_axes must have one entry per custom time')
        return self

    def display_label(self) -> str:
        if self.label:
            return self.label
        if self.type in ('ramsey', 'se'):
            return self.type
        return f'{self.type}{self.n}'


class BathConfig(StrictModel):
    b_per_us: float = Field(3.6, gt=0)
    tau_c_us: float = Field(25.0, gt=0)


class ErrorConfig(StrictModel):
    eps_x: float = Field(0.0, gt=-0.5, lt=0.5)
    eps_y: float = Field(0.0, gt=-0.5, lt=0.5)
    tilt_x: float = Field(0.0, gt=-math.pi / 4, lt=math.pi / 4)
    tilt_y: float = Field(0.0, gt=-math.pi / 4, lt=math.pi / 4)

    def is_ideal(self) -> bool:
        return not any((self.eps_x, self.eps_y, self.tilt_x, self.tilt_y))


class SweepConfig(StrictModel):
    t_min_us: float = Field(0.1, gt=0)
    t_max_us: float = Field(10.0, gt=0)
    points: int = Field(40, ge=2)
    spacing: Literal['linear', 'log'] = 'linear'

    @model_validator(mode='after')
    def check_range(self):
        if self.t_max_us <= self.t_min_us:
            raise ValueError('t_max_us must exceed t_min_us')
        return self


class MonteCarloConfig(StrictModel):
    trajectories: int = Field(10_000, ge=2)
    seed: int = Field(0, ge=0)
    exact_integrals: bool = True
    block_size: Optional[int] = Field(None, ge=1)
    fine_step_us: Optional[float] = Field(None, gt=0)


class QptConfig(StrictModel):
    times_us: List[float] = Field(default_factory=lambda: [4.4, 10.0, 24.0])

    @model_validator(mode='after')
    def check_times(self):
        if not self.times_us:
            raise ValueError('times_us must not be empty')
        if any(t <= 0 for t in self.times_us):
            raise ValueError('times_us must be positive')
        return self


class ScalingConfig(StrictModel):
    n_values: List[int] = Field(default_factory=lambda: [1, 2, 4, 8, 16, 32, 64])
    normalized_sweep: bool = True
    estimator: Literal['one_over_e', 'fit'] = 'one_over_e'
    free_exponent: bool = True


class FitConfig(StrictModel):
    free_amplitude: bool = False


class RamseyConfig(StrictModel):
    detuning_per_us: float = 2 * math.pi * 15.0
    hyperfine_splitting_per_us: Optional[float] = Field(None, gt=0)


class ExperimentConfig(StrictModel):
    task: Literal['decay', 'qpt', 'scaling', 'compare', 'ramsey'] = 'decay'
    mode: Literal['mc', 'analytic', 'both'] = 'mc'
    bath: BathConfig = Field(default_factory=BathConfig)
    sequence: SequenceSpec = Field(default_factory=SequenceSpec)
    sequences: Optional[List[SequenceSpec]] = None
    errors: ErrorConfig = Field(default_factory=ErrorConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    monte_carlo: MonteCarloConfig = Field(default_factory=MonteCarloConfig)
    observable: Literal['coherence', 'fidelity'] = 'coherence'
    initial_state: InputState = 'x'
    qpt: QptConfig = Field(default_factory=QptConfig)
    scaling: ScalingConfig = Field(default_factory=ScalingConfig)
    fit: FitConfig = Field(default_factory=FitConfig)
    ramsey: RamseyConfig = Field(default_factory=RamseyConfig)

    @model_validator(mode='after')
    def check_task(self):
        if self.task == 'compare' and len(self.sequences or []) < 2:
            raise ValueError('task compare needs at least two entries in sequences')
        if self.task == 'scaling' and len(set(self.scaling.n_values)) < 3:
            raise ValueError('task scaling needs at least three distinct n_values')
        if self.task == 'scaling' and any(n < 1 for n in self.scaling.n_values):
            raise ValueError('n_values must be >= 1')
        if self.task == 'ramsey' and self.ramsey.hyperfine_splitting_per_us is None:
            raise ValueError('task ramsey needs ramsey.hyperfine_splitting_per_us')
        return self

    def resolved_json(self) -> str:
        return json.dumps(self.model_dump(mode='json'), indent=2, sort_keys=True) + '\n'


class RunRequest(StrictModel):
    config: ExperimentConfig
    seed: Optional[int] = Field(None, ge=0)


class AnalyticDecayRequest(StrictModel):
    bath: BathConfig = Field(default_factory=BathConfig)
    sequence: SequenceSpec = Field(default_factory=SequenceSpec)
    sweep: SweepConfig = Field(default_factory=SweepConfig)


def _format_errors(exc: ValidationError) -> list[str]:
    lines = []
    for err in exc.errors():
        where = '.'.join(str(part) for part in err['loc']) or '<root>'
        lines.append(f'{where}: {err["msg"]}')
    return lines


def parse_config(text: str, task: Optional[str] = None, seed: Optional[int] = None) -> ExperimentConfig:
    """Validate a JSON config; ``task`` and ``seed`` override the file's values."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f'config is not valid JSON: {exc}') from exc
    if not isinstance(data, dict):
        raise ConfigError('config must be a JSON object')
    if task is not None:
        data['task'] = task
    if seed is not None:
        monte_carlo = data.setdefault('monte_carlo', {})
        if not isinstance(monte_carlo, dict):
            raise ConfigError('monte_carlo: must be an object')
        monte_carlo['seed'] = seed
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from exc


def parse_sequence(data: dict) -> SequenceSpec:
    try:
        return SequenceSpec.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from exc
