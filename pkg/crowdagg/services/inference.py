from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from crowdagg.core.concurrency import map_ordered
from crowdagg.core.errors import CrowdAggError, LengthMismatch, NonFiniteObjective
from crowdagg.domain.dataset import RatingDataset
from crowdagg.domain.parameters import ParameterSet
from crowdagg.domain.schemas import HyperParams, ModelKind, OptimizerConfig
from crowdagg.services.logging import StageLogger
from crowdagg.services.models import evaluate, init_parameters, settle_offsets

CONVERGENCE_WINDOW = 10
TRACE_EVERY = 100


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    k: int = 0

    @classmethod
    def fresh(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n), k=0)


def adam_step(
    theta: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    cfg: OptimizerConfig,
) -> Tuple[np.ndarray, AdamState]:
    """One Adam update, ascending (the objective is a log-posterior). Inputs are not mutated."""
    theta = np.asarray(theta, dtype=np.float64)
    g = np.asarray(grads, dtype=np.float64)
    if theta.shape != g.shape or state.m.shape != theta.shape or state.v.shape != theta.shape:
        raise LengthMismatch(
            f"theta {theta.shape}, gradient {g.shape}, moments {state.m.shape}/{state.v.shape} must agree"
        )
    k = state.k + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * (g * g)
    m_hat = m / (1.0 - cfg.beta1 ** k)
    v_hat = v / (1.0 - cfg.beta2 ** k)
    theta = theta + cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return theta, AdamState(m=m, v=v, k=k)


@dataclass
class FitResult:
    kind: ModelKind
    params: ParameterSet
    final_objective: float
    steps_taken: int
    converged: bool
    seed: int
    initial_objective: float
    trace: List[Tuple[int, float]] = field(default_factory=list)  # (step, objective), thinned

    def potential_quality(self) -> np.ndarray:
        return self.params.t.copy()

    def criteria_quality(self) -> np.ndarray:
        return self.params.t[:, None] + self.params.q

    def estimates(self, ds: RatingDataset) -> Dict[str, Any]:
        crit = self.criteria_quality()
        return {
            "targets": list(ds.targets),
            "criteria": list(ds.criteria),
            "potential": {tid: float(self.params.t[k]) for k, tid in enumerate(ds.targets)},
            "criteria_quality": {
                tid: {cid: float(crit[k, mm]) for mm, cid in enumerate(ds.criteria)}
                for k, tid in enumerate(ds.targets)
            },
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "seed": self.seed,
            "final_objective": self.final_objective,
            "initial_objective": self.initial_objective,
            "steps_taken": self.steps_taken,
            "converged": self.converged,
            "trace": [[s, v] for s, v in self.trace],
            "params": self.params.to_dict(),
        }


@dataclass
class FitFailure:
    """Marker left in a restart list when that restart raised."""

    kind: ModelKind
    seed: int
    error: CrowdAggError

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "seed": self.seed, "error": self.error.to_dict()}


FitOutcome = Union[FitResult, FitFailure]


def fit(
    kind: ModelKind,
    ds: RatingDataset,
    h: HyperParams,
    cfg: OptimizerConfig,
    seed: int,
    logger: Optional[StageLogger] = None,
) -> FitResult:
    """Full-batch MAP fit from `init_parameters(seed)`.

    Each Adam step is followed by `settle_offsets`, which places the
    likelihood-neutral offset directions at their prior optimum. Stops after
    `max_steps` or once the objective moved less than `convergence_tol` over
    the last CONVERGENCE_WINDOW steps.
    """
    logger = logger or StageLogger()
    params = init_parameters(kind, ds, seed)
    theta = params.flatten()
    value, grad = evaluate(kind, params, h, ds)
    if not np.isfinite(value):
        raise NonFiniteObjective(f"objective is {value} at initialization", kind=kind.value, seed=seed, step=0)
    logger.stage("fit:start", {"kind": kind.value, "seed": seed, "parameters": int(theta.size), "objective": value})

    initial = value
    history: List[float] = [value]
    trace: List[Tuple[int, float]] = [(0, value)]
    state = AdamState.fresh(theta.size)
    converged = False
    step = 0
    for step in range(1, cfg.max_steps + 1):
        theta, state = adam_step(theta, grad.flatten(), state, cfg)
        params = settle_offsets(kind, params.with_flat(theta), h)
        theta = params.flatten()
        value, grad = evaluate(kind, params, h, ds)
        if not np.isfinite(value):
            logger.stage("fit:diverged", {"kind": kind.value, "seed": seed, "step": step})
            raise NonFiniteObjective(
                f"objective became {value} at step {step}; reduce learning_rate",
                kind=kind.value, seed=seed, step=step,
            )
        history.append(value)
        if step % TRACE_EVERY == 0:
            trace.append((step, value))
        if step >= CONVERGENCE_WINDOW and abs(history[-1] - history[-1 - CONVERGENCE_WINDOW]) < cfg.convergence_tol:
            converged = True
            break
    if trace[-1][0] != step:
        trace.append((step, value))

    logger.stage(
        "fit:converged" if converged else "fit:max_steps",
        {"kind": kind.value, "seed": seed, "steps": step, "objective": value, "gain": value - initial},
    )
    return FitResult(
        kind=kind,
        params=params,
        final_objective=value,
        steps_taken=step,
        converged=converged,
        seed=seed,
        initial_objective=initial,
        trace=trace,
    )


def fit_restarts(
    kind: ModelKind,
    ds: RatingDataset,
    h: HyperParams,
    cfg: OptimizerConfig,
    base_seed: int,
    logger: Optional[StageLogger] = None,
    max_workers: Optional[int] = None,
) -> List[FitOutcome]:
    """`cfg.restarts` fits with seeds base_seed, base_seed+1, ... in seed order; failures do not abort the rest."""
    logger = logger or StageLogger()
    seeds = [base_seed + k for k in range(cfg.restarts)]
    logger.stage("restarts:start", {"kind": kind.value, "restarts": cfg.restarts, "base_seed": base_seed})

    def run(seed: int) -> FitOutcome:
        try:
            return fit(kind, ds, h, cfg, seed, logger=logger.child(f"restart:{seed - base_seed}:"))
        except CrowdAggError as e:
            logger.stage("restarts:error", {"seed": seed, "error": e.to_dict()})
            return FitFailure(kind=kind, seed=seed, error=e)

    results = map_ordered(run, seeds, max_workers=max_workers)
    failed = sum(isinstance(r, FitFailure) for r in results)
    logger.stage("restarts:done", {"kind": kind.value, "succeeded": len(results) - failed, "failed": failed})
    return results


def best_fit(results: Sequence[FitOutcome]) -> Optional[FitResult]:
    """Highest final objective among successful restarts; ties go to the lower seed."""
    ok = [r for r in results if isinstance(r, FitResult)]
    if not ok:
        return None
    return max(ok, key=lambda r: (r.final_objective, -r.seed))
