from pathlib import Path
from typing import Any, Dict, Optional

import click

from crowdagg.core.config import load_experiment_config
from crowdagg.domain.schemas import ExperimentConfig
from crowdagg.services.logging import StageLogger
from crowdagg.utils.jsonio import dumps, json_line

SEED = click.IntRange(0, 2**64 - 1)


def stage_logger(ctx: click.Context) -> StageLogger:
    """Logger that mirrors stage events to stderr under --verbose."""
    if not (ctx.obj or {}).get("verbose"):
        return StageLogger()

    def emit(name: str, evt: Dict[str, Any]):
        click.echo(json_line(name, evt), err=True)

    return StageLogger(emit)


def load_config(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return load_experiment_config(path)


def write_output(text: str, out: Optional[str]):
    """Write to `out`, or stdout when no path is given."""
    if out is None:
        click.echo(text, nl=not text.endswith("\n"))
        return
    p = Path(out)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")


def write_json_output(payload: Any, out: Optional[str]):
    write_output(dumps(payload) + "\n", out)
