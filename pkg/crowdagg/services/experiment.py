import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from crowdagg import __version__
from crowdagg.core.concurrency import map_ordered
from crowdagg.core.errors import ConfigError, ConstantInput, CrowdAggError, MissingCoverage, NotEnoughEligibleWorkers, UnsupportedKind
from crowdagg.domain.dataset import RatingDataset
from crowdagg.domain.schemas import (
    CellReport,
    Condition,
    ExperimentConfig,
    ExperimentReport,
    ModelKind,
    ReportMetadata,
    TrialRecord,
)
from crowdagg.parsers.ratings_csv import load_csv
from crowdagg.services.ground_truth import GroundTruth, ground_truth
from crowdagg.services.inference import fit
from crowdagg.services.logging import StageLogger
from crowdagg.services.sampling import eligible_workers, subsample_workers
from crowdagg.services.stat_tests import CORRELATIONS
from crowdagg.services.synth import sample_paired

POTENTIAL = "Potential"


@dataclass(frozen=True, eq=False)
class ExperimentData:
    indv: RatingDataset  # ground-truth source, INDV rows are used
    simul: RatingDataset  # subsampled under SIMUL


def load_experiment_data(cfg: ExperimentConfig, logger: Optional[StageLogger] = None) -> ExperimentData:
    """INDV/SIMUL datasets from the configured files, or a paired synthetic sample."""
    logger = logger or StageLogger()
    if cfg.data is not None and (cfg.data.indv or cfg.data.simul):
        indv_path = cfg.data.indv or cfg.data.simul
        simul_path = cfg.data.simul or cfg.data.indv
        indv = load_csv(indv_path)
        simul = indv if simul_path == indv_path else load_csv(simul_path)
        logger.stage("experiment:data", {"indv": str(indv_path), "simul": str(simul_path)})
        return ExperimentData(indv=indv, simul=simul)
    if cfg.synth is not None:
        if not cfg.synth.kind.has_impression:
            raise UnsupportedKind(
                f"synthetic experiments sample INDV/SIMUL pairs and need an impression kind, got {cfg.synth.kind.value}"
            )
        paired = sample_paired(cfg.synth, cfg.hyper, logger=logger)
        return ExperimentData(indv=paired.indv, simul=paired.simul)
    raise ConfigError("experiment needs [data] paths or a [synth] section")


def report_columns(gt: GroundTruth, criteria_order: Optional[Sequence[str]] = None) -> List[str]:
    if criteria_order is None:
        return [POTENTIAL, *gt.criteria]
    unknown = [c for c in criteria_order if c not in gt.criteria]
    if unknown or len(set(criteria_order)) != len(criteria_order):
        raise ConfigError(f"criteria_order {list(criteria_order)} does not match dataset criteria {list(gt.criteria)}")
    return [POTENTIAL, *criteria_order]


def _check_coverage(simul: RatingDataset, gt: GroundTruth):
    missing_t = sorted(set(simul.targets) - set(gt.targets))
    missing_c = sorted(set(simul.criteria) - set(gt.criteria))
    if missing_t or missing_c:
        raise MissingCoverage(
            f"SIMUL data has targets {missing_t} / criteria {missing_c} without INDV ground truth",
            targets=missing_t,
            criteria=missing_c,
        )


def score_fit(t_hat: np.ndarray, q_hat: np.ndarray, ds: RatingDataset, gt: GroundTruth, columns: Sequence[str], metric: str) -> Dict[str, Optional[float]]:
    """Correlation of fitted potential / criteria quality against ground truth, per column.

    A column whose estimate or truth is constant has no correlation and maps to None.
    """
    corr = CORRELATIONS[metric]
    values: Dict[str, Optional[float]] = {}
    for col in columns:
        if col == POTENTIAL:
            est, truth = t_hat, gt.potential_for(ds.targets)
        else:
            m = ds.criterion_index[col]
            est, truth = t_hat + q_hat[:, m], gt.criterion_for(ds.targets, col)
        try:
            values[col] = corr(est, truth)
        except ConstantInput:
            values[col] = None
    return values


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return float(np.mean(present))


def pick_winners(cells: Sequence[CellReport], columns: Sequence[str]) -> Dict[str, Dict[str, ModelKind]]:
    """Best mean per (n_workers, column); earlier models win ties."""
    winners: Dict[str, Dict[str, ModelKind]] = {}
    best: Dict[Tuple[int, str], float] = {}
    for cell in cells:
        for col in columns:
            v = cell.means.get(col)
            if v is None:
                continue
            key = (cell.n_workers, col)
            if key not in best or v > best[key]:
                best[key] = v
                winners.setdefault(str(cell.n_workers), {})[col] = cell.model
    return winners


def run_experiment(
    cfg: ExperimentConfig,
    logger: Optional[StageLogger] = None,
    max_workers: Optional[int] = None,
    data: Optional[ExperimentData] = None,
) -> ExperimentReport:
    """Subsample-fit-score protocol over every (model, n_workers, trial).

    Trial k draws one worker subsample with seed base_seed + k and fits every
    model on it with the same init seed. Failed fits are excluded from the
    means and counted per cell.
    """
    logger = logger or StageLogger()
    started_at = time.time()
    data = data or load_experiment_data(cfg, logger)
    gt = ground_truth(data.indv, cfg.potential_truth_mode, cfg.overall_criterion)
    _check_coverage(data.simul, gt)
    columns = report_columns(gt, cfg.criteria_order)

    pool = eligible_workers(data.simul, Condition.SIMUL)
    need = max(cfg.n_workers_range)
    if len(pool) < need:
        raise NotEnoughEligibleWorkers(
            f"n_workers_range goes up to {need}, {len(pool)} eligible SIMUL workers",
            requested=need,
            eligible=len(pool),
        )
    logger.stage("experiment:start", {
        "models": [m.value for m in cfg.models],
        "n_workers_range": list(cfg.n_workers_range),
        "trials": cfg.trials,
        "pool": len(pool),
        "metric": cfg.metric,
    })

    jobs = [(n, k) for n in cfg.n_workers_range for k in range(cfg.trials)]

    def run_trial(job: Tuple[int, int]) -> Dict[ModelKind, TrialRecord]:
        n, k = job
        seed = cfg.base_seed + k
        tlog = logger.child(f"trial:{n}:{k}:")
        sub = subsample_workers(data.simul, n, seed, Condition.SIMUL, logger=tlog)
        out: Dict[ModelKind, TrialRecord] = {}
        for kind in cfg.models:
            try:
                res = fit(kind, sub, cfg.hyper, cfg.optimizer, seed, logger=tlog)
            except CrowdAggError as e:
                tlog.stage("experiment:trial:error", {"model": kind.value, "error": e.to_dict()})
                out[kind] = TrialRecord(trial=k, seed=seed, error=e.message)
                continue
            values = score_fit(res.params.t, res.params.q, sub, gt, columns, cfg.metric)
            out[kind] = TrialRecord(
                trial=k,
                seed=seed,
                values=values,
                objective=res.final_objective,
                converged=res.converged,
                steps=res.steps_taken,
            )
        tlog.stage("experiment:trial:done", {"n": n, "trial": k})
        return out

    results = dict(zip(jobs, map_ordered(run_trial, jobs, max_workers=max_workers)))

    cells: List[CellReport] = []
    for kind in cfg.models:
        for n in cfg.n_workers_range:
            trials = [results[(n, k)][kind] for k in range(cfg.trials)]
            ok = [t for t in trials if t.error is None]
            means = {col: _mean([t.values.get(col) for t in ok]) for col in columns}
            cells.append(CellReport(model=kind, n_workers=n, means=means, trials=trials, excluded=len(trials) - len(ok)))

    report = ExperimentReport(
        metric=cfg.metric,
        columns=columns,
        cells=cells,
        winners=pick_winners(cells, columns),
        metadata=ReportMetadata(started_at=started_at, finished_at=time.time(), version=__version__),
    )
    logger.stage("experiment:done", {"cells": len(cells), "excluded": sum(c.excluded for c in cells)})
    return report


def _fmt(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.6f}"


def report_to_csv(report: ExperimentReport) -> str:
    """One row per (model, n_workers): Model, Potential, criteria..."""
    lines = [",".join(["Model", *report.columns])]
    for cell in report.cells:
        label = f"{cell.model.value} (n={cell.n_workers})"
        lines.append(",".join([label, *(_fmt(cell.means.get(col)) for col in report.columns)]))
    return "\n".join(lines) + "\n"
