from typing import Any, Dict, List, Optional, Tuple

import click

from crowdagg.commands.common import load_config, write_json_output
from crowdagg.core.errors import ConfigError, MissingCoverage
from crowdagg.domain.dataset import RatingDataset
from crowdagg.domain.schemas import Condition
from crowdagg.parsers.ratings_csv import load_csv
from crowdagg.services.ground_truth import ground_truth
from crowdagg.services.sampling import eligible_workers


def describe(ds: RatingDataset) -> Dict[str, Any]:
    info: Dict[str, Any] = ds.summary()
    info["eligible_workers"] = {c.value: len(eligible_workers(ds, c)) for c in ds.conditions}
    if Condition.INDV in ds.conditions:
        try:
            ground_truth(ds)
            info["indv_coverage"] = {"complete": True}
        except MissingCoverage as e:
            info["indv_coverage"] = {"complete": False, "message": e.message}
    return info


@click.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="Config whose [data] files are checked.")
@click.option("--data", "data", multiple=True, type=click.Path(dir_okay=False), help="Ratings CSV (repeatable).")
def validate(config_path: Optional[str], data: Tuple[str, ...]):
    """Load rating files and print their sizes, eligible pools and INDV coverage."""
    paths: List[str] = list(data)
    if config_path is not None:
        cfg = load_config(config_path)
        if cfg.data is not None:
            paths += [str(p) for p in (cfg.data.indv, cfg.data.simul) if p is not None and str(p) not in paths]
    if not paths:
        raise ConfigError("validate needs --data or [data] paths")
    write_json_output({"files": {p: describe(load_csv(p)) for p in paths}}, None)
