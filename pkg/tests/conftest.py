from typing import Iterable, Tuple

import numpy as np
import pytest

from crowdagg.domain.dataset import RatingDataset, Response
from crowdagg.domain.schemas import Condition, HyperParams, ModelKind, OptimizerConfig


def make_dataset(rows: Iterable[Tuple[str, str, str, int, str]]) -> RatingDataset:
    """Dataset from (worker, target, criterion, grade, condition) tuples."""
    return RatingDataset.from_responses(
        Response(worker_id=w, target_id=t, criterion_id=c, grade=g, condition=Condition(cond))
        for w, t, c, g, cond in rows
    )


def full_grid(I: int, J: int, M: int, seed: int = 0, condition: str = "SIMUL", fill: float = 1.0) -> RatingDataset:  # noqa: E741
    """Random grades for a share `fill` of the (worker, target, criterion) cells; every id appears at least once."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(I):
        for j in range(J):
            for m in range(M):
                keep = rng.random() < fill or (i == 0 and m == 0) or (j == 0 and m == 0) or (i == 0 and j == 0)
                grade = int(rng.integers(1, 6))
                if keep:
                    rows.append((f"w{j}", f"t{i}", f"c{m}", grade, condition))
    return make_dataset(rows)


@pytest.fixture
def tiny_csv_text() -> str:
    return (
        "worker_id,target_id,criterion_id,grade,condition\n"
        "w1,t1,coherence,3,SIMUL\n"
        "w1,t1,overall,4,SIMUL\n"
    )


@pytest.fixture
def hyper() -> HyperParams:
    return HyperParams()


@pytest.fixture
def fast_optimizer() -> OptimizerConfig:
    return OptimizerConfig(learning_rate=0.05, max_steps=400, convergence_tol=1e-6, restarts=3)


@pytest.fixture
def small_dataset() -> RatingDataset:
    """I=5, J=6, M=3 with 60 observed cells."""
    rng = np.random.default_rng(11)
    cells = [(i, j, m) for i in range(5) for j in range(6) for m in range(3)]
    chosen = rng.choice(len(cells), size=60, replace=False)
    rows = [(f"w{cells[k][1]}", f"t{cells[k][0]}", f"c{cells[k][2]}", int(rng.integers(1, 6)), "SIMUL") for k in sorted(chosen)]
    ds = make_dataset(rows)
    assert (ds.I, ds.J, ds.M) == (5, 6, 3)
    return ds


ALL_KINDS = list(ModelKind)
