import random
from collections import defaultdict
from typing import Dict, List, Optional, Set, Tuple

from crowdagg.core.errors import NotEnoughEligibleWorkers
from crowdagg.domain.dataset import RatingDataset
from crowdagg.domain.schemas import Condition
from crowdagg.services.logging import StageLogger


def eligible_workers(ds: RatingDataset, condition: Condition) -> List[str]:
    """Workers whose `condition` responses cover every (target, criterion) pair in `ds`, sorted."""
    required: Set[Tuple[str, str]] = {(r.target_id, r.criterion_id) for r in ds.responses}
    covered: Dict[str, Set[Tuple[str, str]]] = defaultdict(set)
    for r in ds.responses:
        if r.condition == condition:
            covered[r.worker_id].add((r.target_id, r.criterion_id))
    return sorted(w for w, pairs in covered.items() if pairs >= required)


def subsample_workers(
    ds: RatingDataset,
    n: int,
    seed: int,
    condition: Condition,
    logger: Optional[StageLogger] = None,
) -> RatingDataset:
    """`condition` responses of n workers drawn uniformly without replacement from the eligible pool."""
    logger = logger or StageLogger()
    pool = eligible_workers(ds, condition)
    if n < 1 or n > len(pool):
        raise NotEnoughEligibleWorkers(
            f"asked for {n} workers, {len(pool)} eligible under {condition.value}",
            requested=n,
            eligible=len(pool),
        )
    rng = random.Random(seed)
    chosen = sorted(rng.sample(pool, k=n))
    logger.stage("subsample:done", {"condition": condition.value, "pool": len(pool), "n": n, "seed": seed})
    return ds.restrict_workers(chosen, condition=condition)
