"""Command-line entry point: ``decoupler <task> --config <path> --out <dir>``.

Exit codes: 0 success, 2 invalid config or sequence, 3 numerical failure.
"""
import logging
import sys
from pathlib import Path

import click

from . import crud, database
from .errors import ConfigError, InvalidSequenceError, NumericalError
from .runner import TASKS, RunContext, run_task
from .schemas import parse_config
from .settings import get_settings

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(levelname)-5.5s [%(name)s] %(message)s'
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def configure_logging(level: str):
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level.upper())


def _record_start(cfg, out_dir: Path, threads: int):
    if database.configure() is None:
        return None
    database.init_db()
    with database.get_session() as db:
        return crud.create_run(db, cfg, str(out_dir), threads).id


def _record_finish(run_id, exit_code: int, summary=None, error=None):
    if run_id is None:
        return
    with database.get_session() as db:
        crud.finish_run(db, run_id, exit_code, summary, error)


def execute(task: str, config: Path, out: Path, seed, threads) -> int:
    """Run one task and return its exit code."""
    try:
        cfg = parse_config(config.read_text(), task=task, seed=seed)
    except ConfigError as exc:
        for message in exc.messages:
            click.echo(f'config error: {message}', err=True)
        return EXIT_CONFIG
    except OSError as exc:
        click.echo(f'config error: cannot read {config}: {exc}', err=True)
        return EXIT_CONFIG

    ctx = RunContext.from_settings(threads=threads)
    run_id = _record_start(cfg, out, ctx.threads)
    # anything unexpected is recorded as exit 1 and re-raised
    summary, code, error = None, 1, None
    try:
        summary = run_task(cfg, out, ctx)
        code = 0
    except (ConfigError, InvalidSequenceError) as exc:
        error = str(exc)
        click.echo(f'config error: {exc}', err=True)
        code = EXIT_CONFIG
    except NumericalError as exc:
        error = str(exc)
        click.echo(f'numerical failure: {exc}', err=True)
        code = EXIT_NUMERICAL
    except Exception as exc:
        error = f'{type(exc).__name__}: {exc}'
        raise
    finally:
        _record_finish(run_id, code, summary, error)
    return code


@click.group()
@click.option('--log-level', default=None, help='Logging level (default: DECOUPLER_LOG_LEVEL or INFO).')
def main(log_level):
    """Dynamical-decoupling experiments against an Ornstein-Uhlenbeck bath."""
    configure_logging(log_level or get_settings().log_level)


def _task_command(task: str):
    @click.option('--config', 'config', required=True, type=click.Path(path_type=Path, dir_okay=False), help='JSON experiment config.')
    @click.option('--out', 'out', required=True, type=click.Path(path_type=Path, file_okay=False), help='Output directory.')
    @click.option('--seed', type=click.IntRange(min=0), default=None, help='Overrides monte_carlo.seed.')
    @click.option('--threads', type=click.IntRange(min=1), default=None, help='Worker threads (default: DECOUPLER_THREADS).')
    def command(config, out, seed, threads):
        sys.exit(execute(task, config, out, seed, threads))

    command.__doc__ = f'Run the {task} task.'
    return main.command(name=task)(command)


for _task in TASKS:
    _task_command(_task)


if __name__ == '__main__':
    main()
