import hashlib
import math
import uuid
from datetime import datetime, timezone
from typing import List, Optional

from sqlalchemy.orm import Session

from . import models
from .schemas import ExperimentConfig


def gen_id() -> str:
    return str(uuid.uuid4())


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(cfg.resolved_json().encode('utf-8')).hexdigest()


def json_safe(value):
    # summaries may hold NaN or inf standard errors, which JSON columns reject
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def create_run(db: Session, cfg: ExperimentConfig, out_dir: str, threads: int = 1) -> models.Run:
    run = models.Run(
        id=gen_id(),
        task=cfg.task,
        config_hash=config_hash(cfg),
        seed=cfg.monte_carlo.seed,
        threads=threads,
        out_dir=str(out_dir),
        status=models.RunStatus.running.value,
    )
    db.add(run)
    db.commit()
    db.refresh(run)
    return run


def finish_run(
    db: Session, run_id: str, exit_code: int, summary: Optional[dict] = None, error: Optional[str] = None
) -> Optional[models.Run]:
    run = get_run(db, run_id)
    if not run:
        return None
    run.exit_code = exit_code
    run.status = (models.RunStatus.succeeded if exit_code == 0 else models.RunStatus.failed).value
    run.summary = json_safe(summary)
    run.error = error
    run.finished_at = datetime.now(timezone.utc)
    db.commit()
    db.refresh(run)
    return run


def get_run(db: Session, run_id: str) -> Optional[models.Run]:
    return db.query(models.Run).filter(models.Run.id == run_id).first()


def get_runs(db: Session, task: Optional[str] = None) -> List[models.Run]:
    q = db.query(models.Run).order_by(models.Run.created_at.desc())
    if task:
        q = q.filter(models.Run.task == task)
    return q.all()


def run_to_dict(run: models.Run) -> dict:
    return {
        'id': run.id,
        'task': run.task,
        'config_hash': run.config_hash,
        'seed': run.seed,
        'threads': run.threads,
        'out_dir': run.out_dir,
        'status': run.status,
        'exit_code': run.exit_code,
        'summary': run.summary,
        'error': run.error,
        'created_at': run.created_at,
        'finished_at': run.finished_at,
    }
