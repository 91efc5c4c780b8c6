from typing import Optional

import click

from crowdagg.commands.common import SEED, stage_logger, write_json_output
from crowdagg.core.config import is_bare_synth, read_config_file
from crowdagg.core.errors import ConfigError
from crowdagg.domain.schemas import HyperParams, SynthConfig
from crowdagg.services.synth import sample, sample_paired, save_synth


@click.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="TOML/JSON with a [synth] table (or a bare synth config).")
@click.option("--seed", type=SEED, default=None, help="Override synth.seed.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Dataset CSV; truth goes to <stem>.truth.json.")
@click.pass_context
def synth(ctx: click.Context, config_path: str, seed: Optional[int], out: str):
    """Sample a synthetic rating dataset and its generating parameters."""
    logger = stage_logger(ctx)
    raw = read_config_file(config_path)
    if "synth" in raw:
        cfg = SynthConfig.model_validate(raw["synth"])
        h = HyperParams.model_validate(raw.get("hyper", {}))
    elif is_bare_synth(raw) or not raw:
        cfg, h = SynthConfig.model_validate(raw), HyperParams()
    else:
        raise ConfigError(f"{config_path}: no [synth] table")
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})

    if cfg.paired:
        paired = sample_paired(cfg, h, logger=logger)
        dataset, truth = paired.combined(), paired.truth
    else:
        single = sample(cfg, h, logger=logger)
        dataset, truth = single.dataset, single.truth
    csv_path, sidecar = save_synth(dataset, truth, out, cfg)
    write_json_output({"dataset": str(csv_path), "truth": str(sidecar), "summary": dataset.summary()}, None)
