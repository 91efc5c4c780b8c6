from typing import Optional

import click

from crowdagg.commands.common import SEED, stage_logger, write_json_output, write_output
from crowdagg.core.config import load_experiment_config
from crowdagg.services.experiment import report_to_csv, run_experiment


@click.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="Experiment TOML/JSON.")
@click.option("--seed", type=SEED, default=None, help="Override base_seed.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Report file (default stdout).")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.pass_context
def experiment(ctx: click.Context, config_path: str, seed: Optional[int], out: Optional[str], fmt: str):
    """Subsample workers, fit every model per trial and score it against INDV ground truth."""
    cfg = load_experiment_config(config_path)
    if seed is not None:
        cfg = cfg.model_copy(update={"base_seed": seed})
    report = run_experiment(cfg, logger=stage_logger(ctx))
    if fmt == "csv":
        write_output(report_to_csv(report), out)
    else:
        write_json_output(report, out)
