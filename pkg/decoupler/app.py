from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from sqlalchemy.orm import Session

from . import analytic, crud, database
from .bath import BathParams
from .errors import DecouplerError, InvalidSequenceError, NumericalError
from .fitting import DecayCurve, one_over_e_time
from .runner import RunContext, run_task, sweep_times
from .schemas import AnalyticDecayRequest, RunRequest, SequenceSpec
from .sequences import build_sequence, validate
from .settings import get_settings

app = FastAPI(title='decoupler - dynamical decoupling experiments')

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def get_db():
    if not database.registry_enabled():
        raise HTTPException(status_code=503, detail='Run registry is disabled; set DATABASE_URL')
    db = database.get_session()
    try:
        yield db
    finally:
        db.close()


def output_root() -> Path:
    return Path(get_settings().output_root)


@app.on_event('startup')
def on_startup():
    if not database.registry_enabled():
        database.configure()
    database.init_db()


def _raise_for(exc: DecouplerError):
    if isinstance(exc, NumericalError):
        raise HTTPException(status_code=500, detail=str(exc)) from exc
    raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get('/health')
def health():
    return {'status': 'ok'}


@app.post('/sequences/preview')
def preview_sequence(spec: SequenceSpec):
    try:
        seq = build_sequence(spec)
    except (InvalidSequenceError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    report = validate(seq, spec.min_gap_us)
    return {
        'sequence': {
            'label': spec.display_label(),
            't_us': seq.total_time,
            'pulses': [{'time_us': q.time, 'axis': q.axis, 'angle': q.nominal_angle} for q in seq.pulses],
        },
        'validation': {
            'ok': report.ok,
            'violations': [{'kind': v.kind, 'message': v.message, 'index': v.index} for v in report.violations],
        },
    }


@app.post('/analytic/decay')
def analytic_decay(request: AnalyticDecayRequest):
    p = BathParams(b=request.bath.b_per_us, tau_c=request.bath.tau_c_us)
    times = sweep_times(request.sweep)
    try:
        values = [analytic.predicted_coherence(build_sequence(request.sequence, float(t)), p) for t in times]
    except (InvalidSequenceError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    curve = DecayCurve.exact(times, values)
    try:
        crossing = one_over_e_time(curve)
    except NumericalError:
        crossing = None
    n = request.sequence.n if request.sequence.type in ('cpmg', 'udd', 'xy') else 1
    return {
        'curve': [{'t_us': float(t), 'value': float(v)} for t, v in zip(curve.t, curve.value)],
        'one_over_e_us': crossing,
        'T2_us': analytic.t2_from_bath(p),
        'predicted_T_coh_us': analytic.t_coh(p, n) if request.sequence.type != 'ramsey' else None,
    }


@app.post('/runs')
def create_run(request: RunRequest):
    cfg = request.config
    if request.seed is not None:
        cfg = cfg.model_copy(update={'monte_carlo': cfg.monte_carlo.model_copy(update={'seed': request.seed})})
    out_dir = output_root() / crud.config_hash(cfg)
    ctx = RunContext.from_settings()
    run_id = None
    if database.registry_enabled():
        with database.get_session() as db:
            run_id = crud.create_run(db, cfg, str(out_dir), ctx.threads).id
    summary, code, error = None, 1, None
    try:
        summary = run_task(cfg, out_dir, ctx)
        code = 0
    except DecouplerError as exc:
        code, error = (3 if isinstance(exc, NumericalError) else 2), str(exc)
        _raise_for(exc)
    except Exception as exc:
        error = f'{type(exc).__name__}: {exc}'
        raise
    finally:
        if run_id is not None:
            with database.get_session() as db:
                crud.finish_run(db, run_id, code, summary, error)
    return {'run_id': run_id, 'out_dir': str(out_dir), 'summary': summary}


@app.get('/runs')
def list_runs(task: str | None = None, db: Session = Depends(get_db)):
    return {'runs': [crud.run_to_dict(r) for r in crud.get_runs(db, task)]}


@app.get('/runs/{run_id}')
def get_run(run_id: str, db: Session = Depends(get_db)):
    run = crud.get_run(db, run_id)
    if not run:
        raise HTTPException(status_code=404, detail='Run not found')
    return {'run': crud.run_to_dict(run)}
