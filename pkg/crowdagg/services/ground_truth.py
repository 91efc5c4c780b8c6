from dataclasses import dataclass
from typing import Literal, Tuple

import numpy as np

from crowdagg.core.errors import ConfigError, MissingCoverage
from crowdagg.domain.dataset import RatingDataset
from crowdagg.domain.schemas import Condition

PotentialMode = Literal["pooled_mean", "overall_criterion"]


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Reference quality from INDV responses (wisdom of the crowd)."""

    targets: Tuple[str, ...]
    criteria: Tuple[str, ...]
    criterion_truth: np.ndarray  # (I, M) mean INDV grade per (target, criterion)
    potential_truth: np.ndarray  # (I,)
    potential_mode: PotentialMode

    def potential_for(self, target_ids) -> np.ndarray:
        index = {t: k for k, t in enumerate(self.targets)}
        return self.potential_truth[[index[t] for t in target_ids]]

    def criterion_for(self, target_ids, criterion_id: str) -> np.ndarray:
        index = {t: k for k, t in enumerate(self.targets)}
        col = self.criteria.index(criterion_id)
        return self.criterion_truth[[index[t] for t in target_ids], col]


def ground_truth(
    ds: RatingDataset,
    potential_mode: PotentialMode = "pooled_mean",
    overall_criterion: str = "overall",
) -> GroundTruth:
    """Per-(target, criterion) mean of INDV grades; potential truth pooled over criteria.

    With potential_mode="overall_criterion" the potential truth is the column of
    `overall_criterion` instead of the pooled mean.
    """
    I, M = ds.I, ds.M
    sums = np.zeros((I, M))
    counts = np.zeros((I, M))
    for r in ds.responses:
        if r.condition != Condition.INDV:
            continue
        i, m = ds.target_index[r.target_id], ds.criterion_index[r.criterion_id]
        sums[i, m] += r.grade
        counts[i, m] += 1
    missing = np.argwhere(counts == 0)
    if missing.size:
        i, m = missing[0]
        raise MissingCoverage(
            f"no INDV responses for target={ds.targets[i]} criterion={ds.criteria[m]} "
            f"({len(missing)} uncovered pairs)",
            uncovered=int(len(missing)),
        )
    criterion_truth = sums / counts
    if potential_mode == "pooled_mean":
        potential = sums.sum(axis=1) / counts.sum(axis=1)
    elif potential_mode == "overall_criterion":
        if overall_criterion not in ds.criterion_index:
            raise ConfigError(f"overall criterion {overall_criterion!r} not in dataset criteria {list(ds.criteria)}")
        potential = criterion_truth[:, ds.criterion_index[overall_criterion]].copy()
    else:
        raise ConfigError(f"unknown potential truth mode {potential_mode!r}")
    return GroundTruth(
        targets=ds.targets,
        criteria=ds.criteria,
        criterion_truth=criterion_truth,
        potential_truth=potential,
        potential_mode=potential_mode,
    )
