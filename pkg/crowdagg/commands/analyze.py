from typing import Optional

import click

from crowdagg.commands.common import load_config, stage_logger
from crowdagg.core.errors import ConfigError
from crowdagg.services.bias_analysis import run_bias_analysis


@click.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="Config with [data] paths and alpha.")
@click.option("--indv", type=click.Path(dir_okay=False), default=None, help="INDV ratings CSV.")
@click.option("--simul", type=click.Path(dir_okay=False), default=None, help="SIMUL ratings CSV.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="StatReport JSON path.")
@click.pass_context
def analyze(ctx: click.Context, config_path: Optional[str], indv: Optional[str], simul: Optional[str], out: str):
    """Inter-target / inter-criteria bias analysis of INDV against SIMUL responses."""
    cfg = load_config(config_path)
    if cfg.data is not None:
        indv = indv or (str(cfg.data.indv) if cfg.data.indv else None)
        simul = simul or (str(cfg.data.simul) if cfg.data.simul else None)
    if indv is None and simul is None:
        raise ConfigError("analyze needs --indv/--simul or [data] paths")
    run_bias_analysis(indv or simul, simul or indv, out, alpha=cfg.alpha, logger=stage_logger(ctx))
