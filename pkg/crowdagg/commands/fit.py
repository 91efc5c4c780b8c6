from typing import List, Optional

import click

from crowdagg.commands.common import SEED, load_config, stage_logger, write_json_output, write_output
from crowdagg.core.config import synth_config
from crowdagg.core.errors import ConfigError
from crowdagg.domain.dataset import RatingDataset
from crowdagg.domain.schemas import Condition, ExperimentConfig, ModelKind
from crowdagg.parsers.ratings_csv import load_csv
from crowdagg.services.inference import FitFailure, FitResult, best_fit, fit_restarts
from crowdagg.services.synth import sample, sample_paired


def _dataset(cfg: ExperimentConfig, data: Optional[str], condition: Condition, logger) -> RatingDataset:
    if data is not None:
        return load_csv(data)
    if cfg.data is not None:
        path = cfg.data.simul if condition == Condition.SIMUL else cfg.data.indv
        path = path or cfg.data.simul or cfg.data.indv
        if path is not None:
            return load_csv(path)
    if cfg.synth is not None:
        scfg = synth_config(cfg)
        if scfg.paired:
            return sample_paired(scfg, cfg.hyper, logger=logger).combined()
        return sample(scfg, cfg.hyper, logger=logger).dataset
    raise ConfigError("fit needs --data, [data] paths or a [synth] section")


def estimates_csv(res: FitResult, ds: RatingDataset) -> str:
    """target_id, potential, then t + q per criterion."""
    est = res.estimates(ds)
    lines = [",".join(["target_id", "potential", *est["criteria"]])]
    for tid in est["targets"]:
        row = [tid, f"{est['potential'][tid]:.6f}"]
        row += [f"{est['criteria_quality'][tid][cid]:.6f}" for cid in est["criteria"]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


@click.command()
@click.option("--model", "model", required=True, type=click.Choice([k.value for k in ModelKind]), help="Generative model to fit.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="Experiment TOML/JSON (optimizer, hyper, data or synth).")
@click.option("--data", type=click.Path(dir_okay=False), default=None, help="Ratings CSV; overrides the config.")
@click.option("--condition", type=click.Choice([c.value for c in Condition]), default=Condition.SIMUL.value, show_default=True)
@click.option("--seed", type=SEED, default=None, help="Base restart seed (default: config base_seed).")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (default stdout).")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.pass_context
def fit(ctx: click.Context, model: str, config_path: Optional[str], data: Optional[str], condition: str,
        seed: Optional[int], out: Optional[str], fmt: str):
    """MAP-fit one model with restarts and report the best one."""
    logger = stage_logger(ctx)
    cfg = load_config(config_path)
    kind, cond = ModelKind(model), Condition(condition)
    base_seed = cfg.base_seed if seed is None else seed
    ds = _dataset(cfg, data, cond, logger).where(cond)

    results = fit_restarts(kind, ds, cfg.hyper, cfg.optimizer, base_seed, logger=logger)
    best = best_fit(results)
    if best is None:
        raise results[0].error

    if fmt == "csv":
        write_output(estimates_csv(best, ds), out)
        return
    restarts: List[dict] = []
    for r in results:
        if isinstance(r, FitFailure):
            restarts.append(r.to_dict())
        else:
            restarts.append({"seed": r.seed, "final_objective": r.final_objective,
                             "steps_taken": r.steps_taken, "converged": r.converged})
    write_json_output({
        "model": kind.value,
        "condition": cond.value,
        "dataset": ds.summary(),
        "best": best.to_dict(),
        "estimates": best.estimates(ds),
        "restarts": restarts,
    }, out)
