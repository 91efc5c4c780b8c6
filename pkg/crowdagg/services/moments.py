from collections import defaultdict
from typing import Callable, Dict, List, Literal, Sequence, Tuple

import numpy as np

from crowdagg.core.errors import EmptyCondition
from crowdagg.domain.dataset import RatingDataset, Response
from crowdagg.domain.schemas import Condition, MomentRecord, MomentSummary

Grouping = Literal["inter_criteria", "inter_target"]


def grade_distribution(ds: RatingDataset, condition: Condition) -> np.ndarray:
    """Share of grades 1..5 among responses under `condition` (index k is grade k + 1)."""
    grades = [r.grade for r in ds.responses if r.condition == condition]
    if not grades:
        raise EmptyCondition(f"no {condition.value} responses")
    counts = np.bincount(np.asarray(grades) - 1, minlength=5).astype(np.float64)
    return counts / counts.sum()


def _moments(
    ds: RatingDataset,
    condition: Condition,
    grouping: Grouping,
    key: Callable[[Response], Tuple[str, str]],
) -> List[MomentRecord]:
    groups: Dict[Tuple[str, str], List[int]] = defaultdict(list)
    for r in ds.responses:
        if r.condition == condition:
            groups[key(r)].append(r.grade)
    records: List[MomentRecord] = []
    for group_key in sorted(groups):
        grades = np.asarray(groups[group_key], dtype=np.float64)
        if grades.size < 2:
            continue  # single answers carry no spread
        records.append(
            MomentRecord(
                grouping=grouping,
                group_key=group_key,
                n=int(grades.size),
                mean=float(grades.mean()),
                variance=float(grades.var()),  # population variance
            )
        )
    return records


def inter_criteria_moments(ds: RatingDataset, condition: Condition) -> List[MomentRecord]:
    """Mean and variance over criteria for each (target, worker) pair."""
    return _moments(ds, condition, "inter_criteria", lambda r: (r.target_id, r.worker_id))


def inter_target_moments(ds: RatingDataset, condition: Condition) -> List[MomentRecord]:
    """Mean and variance over targets for each (worker, criterion) pair."""
    return _moments(ds, condition, "inter_target", lambda r: (r.worker_id, r.criterion_id))


def summarize_moments(records: Sequence[MomentRecord]) -> MomentSummary:
    """Mean and SD (ddof=1) of group means and of group variances."""
    if not records:
        return MomentSummary(count=0)
    means = np.array([rec.mean for rec in records])
    variances = np.array([rec.variance for rec in records])
    sd = (lambda x: float(np.std(x, ddof=1))) if len(records) > 1 else (lambda x: None)
    return MomentSummary(
        count=len(records),
        mean_of_means=float(means.mean()),
        sd_of_means=sd(means),
        mean_of_variances=float(variances.mean()),
        sd_of_variances=sd(variances),
    )
