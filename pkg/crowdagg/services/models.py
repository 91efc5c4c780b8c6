"""Log-posterior and analytic gradient of the four rating models.

    CIM     x ~ N(t_i + q_im + b_j + c_m, r_im + w_jm)
    CDM     x ~ N(t_i + q_im + b_j + c_m, r_i + w_j)
    ImpCIM  x ~ N(mu_ij + q_im + c_m,     r_im + w_jm),  mu_ij ~ N(t_i + b_j, mu_var)
    ImpCDM  x ~ N(mu_ij + q_im + c_m,     r_i + w_j),    mu_ij ~ N(t_i + b_j, mu_var)

Priors: t ~ N(t_prior_mean, t_prior_var); q, b, c ~ N(0, offset_prior_var);
r, w ~ Gamma(shape, rate) on softplus(r_raw), softplus(w_raw), with the log
Jacobian log sigmoid(raw) added for each transformed coordinate. The second
argument of N is a variance. Grades enter the likelihood as real numbers.
"""
from dataclasses import replace
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit, gammaln

from crowdagg.core.errors import ShapeMismatch
from crowdagg.domain.dataset import RatingDataset
from crowdagg.domain.parameters import ParameterSet, softplus
from crowdagg.domain.schemas import HyperParams, ModelKind

LOG_2PI = float(np.log(2.0 * np.pi))


def _normal_logpdf(x: np.ndarray, mean, var: float) -> np.ndarray:
    return -0.5 * (LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


def _gamma_logpdf(x: np.ndarray, shape: float, rate: float) -> np.ndarray:
    return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x


def _check_inputs(kind: ModelKind, p: ParameterSet, ds: RatingDataset) -> None:
    if p.kind != kind:
        raise ShapeMismatch(f"parameters are for {p.kind.value}, model is {kind.value}")
    p.check_shapes()
    if (p.I, p.J, p.M) != (ds.I, ds.J, ds.M):
        raise ShapeMismatch(f"parameters sized I,J,M={p.I},{p.J},{p.M}; dataset has {ds.I},{ds.J},{ds.M}")
    if kind.has_impression and not np.array_equal(p.mu_pairs, ds.pairs):
        raise ShapeMismatch("impression pairs do not match the dataset's observed (target, worker) pairs")


def _impression(p: ParameterSet, i: int, j: int) -> float:
    codes = p.mu_pairs[:, 0] * p.J + p.mu_pairs[:, 1]
    code = i * p.J + j
    k = int(np.searchsorted(codes, code))
    if k < codes.size and codes[k] == code:
        return float(p.mu[k])
    # unobserved pair: its MAP impression is the prior mean
    return float(p.t[i] + p.b[j])


def predicted_mean(kind: ModelKind, p: ParameterSet, i: int, j: int, m: int) -> float:
    if kind.has_impression:
        return float(_impression(p, i, j) + p.q[i, m] + p.c[m])
    return float(p.t[i] + p.q[i, m] + p.b[j] + p.c[m])


def predicted_variance(kind: ModelKind, p: ParameterSet, i: int, j: int, m: int) -> float:
    r, w = p.r, p.w
    if kind.shared_variance:
        return float(r[i] + w[j])
    return float(r[i, m] + w[j, m])


def _variance_index(kind: ModelKind, ds: RatingDataset) -> Tuple[np.ndarray, np.ndarray]:
    """Flat indexes into r_raw / w_raw for each response."""
    i, j, m = ds.target_idx, ds.worker_idx, ds.criterion_idx
    if kind.shared_variance:
        return i, j
    return i * ds.M + m, j * ds.M + m


def response_means(kind: ModelKind, p: ParameterSet, ds: RatingDataset) -> np.ndarray:
    i, j, m = ds.target_idx, ds.worker_idx, ds.criterion_idx
    base = p.q[i, m] + p.c[m]
    if kind.has_impression:
        return base + p.mu[ds.pair_idx]
    return base + p.t[i] + p.b[j]


def response_variances(kind: ModelKind, p: ParameterSet, ds: RatingDataset) -> np.ndarray:
    r_idx, w_idx = _variance_index(kind, ds)
    return softplus(p.r_raw.ravel()[r_idx]) + softplus(p.w_raw.ravel()[w_idx])


def log_likelihood(kind: ModelKind, p: ParameterSet, ds: RatingDataset) -> float:
    _check_inputs(kind, p, ds)
    var = response_variances(kind, p, ds)
    return float(np.sum(_normal_logpdf(ds.grades, response_means(kind, p, ds), var)))


def log_prior(kind: ModelKind, p: ParameterSet, h: HyperParams) -> float:
    lp = np.sum(_normal_logpdf(p.t, h.t_prior_mean, h.t_prior_var))
    for offsets in (p.q, p.b, p.c):
        lp += np.sum(_normal_logpdf(offsets, 0.0, h.offset_prior_var))
    for raw in (p.r_raw, p.w_raw):
        lp += np.sum(_gamma_logpdf(softplus(raw), h.gamma_shape, h.gamma_rate))
        lp += np.sum(-softplus(-raw))  # log sigmoid(raw) = log d softplus / d raw
    if kind.has_impression:
        pi, pj = p.mu_pairs[:, 0], p.mu_pairs[:, 1]
        lp += np.sum(_normal_logpdf(p.mu, p.t[pi] + p.b[pj], h.mu_var))
    return float(lp)


def evaluate(
    kind: ModelKind,
    p: ParameterSet,
    h: HyperParams,
    ds: RatingDataset,
    with_gradient: bool = True,
) -> Tuple[float, Optional[ParameterSet]]:
    """Log-posterior and (optionally) its gradient from one pass over the responses."""
    _check_inputs(kind, p, ds)
    I, J, M = ds.I, ds.J, ds.M
    i, j, m = ds.target_idx, ds.worker_idx, ds.criterion_idx
    r_idx, w_idx = _variance_index(kind, ds)
    r_flat, w_flat = p.r_raw.ravel(), p.w_raw.ravel()

    var = softplus(r_flat[r_idx]) + softplus(w_flat[w_idx])
    resid = ds.grades - response_means(kind, p, ds)
    value = float(np.sum(-0.5 * (LOG_2PI + np.log(var) + resid ** 2 / var))) + log_prior(kind, p, h)
    if not with_gradient:
        return value, None

    # likelihood
    d_mean = resid / var
    d_var = 0.5 * (resid ** 2 / var - 1.0) / var
    g_q = np.bincount(i * M + m, weights=d_mean, minlength=I * M).reshape(I, M)
    g_c = np.bincount(m, weights=d_mean, minlength=M)
    g_mu = None
    if kind.has_impression:
        g_mu = np.bincount(ds.pair_idx, weights=d_mean, minlength=p.mu.size)
        g_t = np.zeros(I)
        g_b = np.zeros(J)
    else:
        g_t = np.bincount(i, weights=d_mean, minlength=I)
        g_b = np.bincount(j, weights=d_mean, minlength=J)
    g_r = np.bincount(r_idx, weights=d_var * expit(r_flat[r_idx]), minlength=r_flat.size).reshape(p.r_raw.shape)
    g_w = np.bincount(w_idx, weights=d_var * expit(w_flat[w_idx]), minlength=w_flat.size).reshape(p.w_raw.shape)

    # priors
    g_t -= (p.t - h.t_prior_mean) / h.t_prior_var
    g_q -= p.q / h.offset_prior_var
    g_b -= p.b / h.offset_prior_var
    g_c -= p.c / h.offset_prior_var
    g_r += ((h.gamma_shape - 1.0) / softplus(p.r_raw) - h.gamma_rate) * expit(p.r_raw) + expit(-p.r_raw)
    g_w += ((h.gamma_shape - 1.0) / softplus(p.w_raw) - h.gamma_rate) * expit(p.w_raw) + expit(-p.w_raw)
    if kind.has_impression:
        pi, pj = p.mu_pairs[:, 0], p.mu_pairs[:, 1]
        dev = (p.mu - p.t[pi] - p.b[pj]) / h.mu_var
        g_mu -= dev
        g_t += np.bincount(pi, weights=dev, minlength=I)
        g_b += np.bincount(pj, weights=dev, minlength=J)

    grad = ParameterSet(
        kind=kind, t=g_t, q=g_q, b=g_b, c=g_c, r_raw=g_r, w_raw=g_w, mu=g_mu, mu_pairs=p.mu_pairs,
    )
    return value, grad


def log_posterior(kind: ModelKind, p: ParameterSet, h: HyperParams, ds: RatingDataset) -> float:
    value, _ = evaluate(kind, p, h, ds, with_gradient=False)
    return value


def log_posterior_gradient(kind: ModelKind, p: ParameterSet, h: HyperParams, ds: RatingDataset) -> ParameterSet:
    _, grad = evaluate(kind, p, h, ds, with_gradient=True)
    return grad


def init_parameters(kind: ModelKind, ds: RatingDataset, seed: int) -> ParameterSet:
    """Restart initialization: t near the prior mean, small offsets, unit-ish variances (softplus(0) = ln 2)."""
    rng = np.random.default_rng(seed)
    I, J, M = ds.I, ds.J, ds.M
    t = rng.normal(3.0, 0.5, size=I)
    q = rng.normal(0.0, 0.1, size=(I, M))
    b = rng.normal(0.0, 0.1, size=J)
    c = rng.normal(0.0, 0.1, size=M)
    r_raw = np.zeros(I if kind.shared_variance else (I, M))
    w_raw = np.zeros(J if kind.shared_variance else (J, M))
    mu = mu_pairs = None
    if kind.has_impression:
        mu_pairs = ds.pairs
        mu = t[mu_pairs[:, 0]] + b[mu_pairs[:, 1]] + rng.normal(0.0, 0.1, size=mu_pairs.shape[0])
    return ParameterSet(kind=kind, t=t, q=q, b=b, c=c, r_raw=r_raw, w_raw=w_raw, mu=mu, mu_pairs=mu_pairs)


def settle_offsets(kind: ModelKind, p: ParameterSet, h: HyperParams) -> ParameterSet:
    """Slide the offsets along the lines the likelihood cannot see to their prior optimum.

    Three moves, each a closed-form maximization of the Gaussian priors along
    one line: t_i against q_i (with mu_i for impression models), c_m against
    q_:m, then all of t against all of b. The log-posterior never decreases.
    """
    tv, ov, tm = h.t_prior_var, h.offset_prior_var, h.t_prior_mean
    t, q, b, c = p.t.copy(), p.q.copy(), p.b.copy(), p.c.copy()
    mu = p.mu.copy() if kind.has_impression else p.mu
    I, M = q.shape

    d = ((tm - t) / tv + q.sum(axis=1) / ov) / (1.0 / tv + M / ov)
    t += d
    q -= d[:, None]
    if kind.has_impression:
        mu += d[p.mu_pairs[:, 0]]

    d = (q.sum(axis=0) - c) / (1.0 + I)
    c += d
    q -= d[None, :]

    shift = (np.sum(tm - t) / tv + np.sum(b) / ov) / (I / tv + b.size / ov)
    t += shift
    b -= shift
    return replace(p, t=t, q=q, b=b, c=c, mu=mu)
