from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from crowdagg.core.errors import UnsupportedKind
from crowdagg.domain.dataset import RatingDataset, Response
from crowdagg.domain.parameters import ParameterSet, inverse_softplus
from crowdagg.domain.schemas import Condition, HyperParams, ModelKind, SynthConfig
from crowdagg.parsers.ratings_csv import save_csv
from crowdagg.services.logging import StageLogger
from crowdagg.utils.jsonio import write_json


@dataclass(frozen=True, eq=False)
class SynthOutput:
    dataset: RatingDataset
    truth: ParameterSet
    raw: np.ndarray  # (I, J, M) before discretization, aligned with the dataset indexes


@dataclass(frozen=True, eq=False)
class PairedSample:
    indv: RatingDataset
    simul: RatingDataset
    truth: ParameterSet
    indv_raw: np.ndarray
    simul_raw: np.ndarray

    def combined(self) -> RatingDataset:
        values = None
        if self.indv.values is not None and self.simul.values is not None:
            values = np.concatenate([self.indv.values, self.simul.values])
        return RatingDataset.from_responses(self.indv.responses + self.simul.responses, values=values)


def _ids(prefix: str, n: int) -> List[str]:
    width = len(str(n))
    return [f"{prefix}{k + 1:0{width}d}" for k in range(n)]


def _index_ids(cfg: SynthConfig) -> Tuple[List[str], List[str], List[str]]:
    criteria = sorted(cfg.criteria) if cfg.criteria else _ids("c", cfg.M)
    return _ids("t", cfg.I), _ids("w", cfg.J), criteria


def discretize(raw: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(raw), 1, 5).astype(np.int64)


def _draw_truth(cfg: SynthConfig, h: HyperParams, rng: np.random.Generator) -> ParameterSet:
    I, J, M, kind = cfg.I, cfg.J, cfg.M, cfg.kind
    sd = np.sqrt(h.offset_prior_var)
    t = rng.normal(h.t_prior_mean, np.sqrt(h.t_prior_var), size=I)
    q = rng.normal(0.0, sd, size=(I, M))
    b = rng.normal(0.0, sd, size=J)
    c = rng.normal(0.0, sd, size=M)
    # overridden values still consume their draws so the rest of the truth is unchanged
    o = cfg.truth_overrides
    if o is not None:
        t = np.asarray(o.t, dtype=np.float64) if o.t is not None else t
        q = np.asarray(o.q, dtype=np.float64) if o.q is not None else q
        b = np.asarray(o.b, dtype=np.float64) if o.b is not None else b
        c = np.asarray(o.c, dtype=np.float64) if o.c is not None else c
    scale = 1.0 / h.gamma_rate
    r = rng.gamma(h.gamma_shape, scale, size=I if kind.shared_variance else (I, M))
    w = rng.gamma(h.gamma_shape, scale, size=J if kind.shared_variance else (J, M))
    mu = mu_pairs = None
    if kind.has_impression:
        centre = t[:, None] + b[None, :]
        mu = rng.normal(centre, np.sqrt(cfg.impression_strength)).reshape(-1)
        ii, jj = np.meshgrid(np.arange(I), np.arange(J), indexing="ij")
        mu_pairs = np.stack([ii.reshape(-1), jj.reshape(-1)], axis=1)
    return ParameterSet(
        kind=kind, t=t, q=q, b=b, c=c,
        r_raw=inverse_softplus(r), w_raw=inverse_softplus(w),
        mu=mu, mu_pairs=mu_pairs,
    )


def _response_moments(kind: ModelKind, p: ParameterSet) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and variance of every (i, j, m) cell, shape (I, J, M)."""
    if kind.has_impression:
        mean = p.impression_matrix()[:, :, None] + p.q[:, None, :] + p.c[None, None, :]
    else:
        mean = p.t[:, None, None] + p.q[:, None, :] + p.b[None, :, None] + p.c[None, None, :]
    r, w = p.r, p.w
    if kind.shared_variance:
        var = np.broadcast_to(r[:, None, None] + w[None, :, None], mean.shape)
    else:
        var = r[:, None, :] + w[None, :, :]
    return mean, var


def _to_dataset(
    raw: np.ndarray,
    ids: Tuple[List[str], List[str], List[str]],
    condition: Condition,
    keep_continuous: bool,
) -> RatingDataset:
    targets, workers, criteria = ids
    grades = discretize(raw)
    I, J, M = raw.shape
    # generation order (target, worker, criterion) is already the canonical order
    responses = [
        Response(
            worker_id=workers[j],
            target_id=targets[i],
            criterion_id=criteria[m],
            grade=int(grades[i, j, m]),
            condition=condition,
        )
        for i in range(I) for j in range(J) for m in range(M)
    ]
    ds = RatingDataset.from_responses(responses)
    return ds.with_values(raw.reshape(-1)) if keep_continuous else ds


def sample(cfg: SynthConfig, h: Optional[HyperParams] = None, logger: Optional[StageLogger] = None) -> SynthOutput:
    """Draw a full SIMUL dataset (every worker rates every target on every criterion) from `cfg.kind`.

    With discretize=False the dataset keeps the raw real values for the
    likelihood while its integer grades are still the clamped roundings.
    """
    h = h or HyperParams()
    logger = logger or StageLogger()
    rng = np.random.default_rng(cfg.seed)
    truth = _draw_truth(cfg, h, rng)
    mean, var = _response_moments(cfg.kind, truth)
    raw = mean + np.sqrt(var) * rng.standard_normal(mean.shape)
    ds = _to_dataset(raw, _index_ids(cfg), Condition.SIMUL, keep_continuous=not cfg.discretize)
    logger.stage("synth:sampled", {"kind": cfg.kind.value, "I": cfg.I, "J": cfg.J, "M": cfg.M, "seed": cfg.seed})
    return SynthOutput(dataset=ds, truth=truth, raw=raw)


def sample_paired(cfg: SynthConfig, h: Optional[HyperParams] = None, logger: Optional[StageLogger] = None) -> PairedSample:
    """SIMUL arm from the impression model, INDV arm from CIM on the same t, q, b, c.

    The INDV arm keeps the SIMUL variances (broadcast per criterion) and adds the
    impression variance as independent per-criterion noise, so both arms share
    the marginal variance and differ only in how much of it is common to all
    criteria of a (target, worker) pair.
    """
    if not cfg.kind.has_impression:
        raise UnsupportedKind(f"paired sampling needs ImpCIM or ImpCDM for the SIMUL arm, got {cfg.kind.value}")
    h = h or HyperParams()
    logger = logger or StageLogger()
    rng = np.random.default_rng(cfg.seed)
    truth = _draw_truth(cfg, h, rng)
    ids = _index_ids(cfg)

    mean, var = _response_moments(cfg.kind, truth)
    simul_raw = mean + np.sqrt(var) * rng.standard_normal(mean.shape)

    indv_mean = truth.t[:, None, None] + truth.q[:, None, :] + truth.b[None, :, None] + truth.c[None, None, :]
    indv_var = np.broadcast_to(var, indv_mean.shape) + cfg.impression_strength
    indv_raw = indv_mean + np.sqrt(indv_var) * rng.standard_normal(indv_mean.shape)

    keep = not cfg.discretize
    out = PairedSample(
        indv=_to_dataset(indv_raw, ids, Condition.INDV, keep),
        simul=_to_dataset(simul_raw, ids, Condition.SIMUL, keep),
        truth=truth,
        indv_raw=indv_raw,
        simul_raw=simul_raw,
    )
    logger.stage("synth:paired", {"kind": cfg.kind.value, "I": cfg.I, "J": cfg.J, "M": cfg.M,
                                  "seed": cfg.seed, "impression_strength": cfg.impression_strength})
    return out


def truth_sidecar(path: Union[str, Path]) -> Path:
    p = Path(path)
    return p.with_name(f"{p.stem}.truth.json")


def save_synth(
    dataset: RatingDataset,
    truth: ParameterSet,
    path: Union[str, Path],
    cfg: Optional[SynthConfig] = None,
) -> Tuple[Path, Path]:
    """Dataset CSV plus `<stem>.truth.json` holding the generating parameters."""
    csv_path = save_csv(dataset, path)
    payload = {"truth": truth.to_dict()}
    if cfg is not None:
        payload["config"] = cfg.model_dump(mode="json")
    sidecar = write_json(truth_sidecar(csv_path), payload)
    return csv_path, sidecar
