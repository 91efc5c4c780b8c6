import math

import numpy as np
import pytest

from crowdagg.core.errors import LengthMismatch, ShapeMismatch
from crowdagg.domain.parameters import ParameterSet, inverse_softplus, softplus
from crowdagg.domain.schemas import HyperParams, ModelKind
from crowdagg.services.models import (
    init_parameters,
    log_likelihood,
    log_posterior,
    log_posterior_gradient,
    log_prior,
    predicted_mean,
    predicted_variance,
    settle_offsets,
)

from conftest import ALL_KINDS, make_dataset


def random_params(kind, ds, seed=0):
    rng = np.random.default_rng(seed)
    p = init_parameters(kind, ds, seed)
    return ParameterSet(
        kind=kind,
        t=rng.normal(3.0, 1.0, p.t.shape),
        q=rng.normal(0.0, 0.5, p.q.shape),
        b=rng.normal(0.0, 0.5, p.b.shape),
        c=rng.normal(0.0, 0.5, p.c.shape),
        r_raw=rng.normal(0.0, 1.0, p.r_raw.shape),
        w_raw=rng.normal(0.0, 1.0, p.w_raw.shape),
        mu=None if p.mu is None else rng.normal(3.0, 1.0, p.mu.shape),
        mu_pairs=p.mu_pairs,
    )


def naive_log_posterior(kind, p, h, ds):
    """Term-by-term density sum with scalar math."""
    def lnorm(x, mean, var):
        return -0.5 * math.log(2 * math.pi * var) - (x - mean) ** 2 / (2 * var)

    def lgamma_pdf(x, a, b):
        return a * math.log(b) - math.lgamma(a) + (a - 1) * math.log(x) - b * x

    def sp(x):
        return math.log1p(math.exp(x)) if x < 30 else x

    mu = {}
    if kind.has_impression:
        for k, (i, j) in enumerate(p.mu_pairs):
            mu[(int(i), int(j))] = float(p.mu[k])
    total = 0.0
    for r in ds.responses:
        i, j, m = ds.target_index[r.target_id], ds.worker_index[r.worker_id], ds.criterion_index[r.criterion_id]
        if kind.has_impression:
            mean = mu[(i, j)] + p.q[i, m] + p.c[m]
        else:
            mean = p.t[i] + p.q[i, m] + p.b[j] + p.c[m]
        if kind.shared_variance:
            var = sp(p.r_raw[i]) + sp(p.w_raw[j])
        else:
            var = sp(p.r_raw[i, m]) + sp(p.w_raw[j, m])
        total += lnorm(float(r.grade), mean, var)
    for v in p.t:
        total += lnorm(v, h.t_prior_mean, h.t_prior_var)
    for arr in (p.q, p.b, p.c):
        for v in np.ravel(arr):
            total += lnorm(v, 0.0, h.offset_prior_var)
    for arr in (p.r_raw, p.w_raw):
        for raw in np.ravel(arr):
            total += lgamma_pdf(sp(raw), h.gamma_shape, h.gamma_rate)
            total += math.log(1.0 / (1.0 + math.exp(-raw)))
    for (i, j), v in mu.items():
        total += lnorm(v, p.t[i] + p.b[j], h.mu_var)
    return total


def one_obs(grade):
    return make_dataset([("w1", "t1", "a", grade, "SIMUL")])


def cim_at(ds, t=3.0, var_each=0.5):
    raw = float(inverse_softplus(np.array(var_each)))
    return ParameterSet(
        kind=ModelKind.CIM,
        t=np.full(ds.I, t),
        q=np.zeros((ds.I, ds.M)),
        b=np.zeros(ds.J),
        c=np.zeros(ds.M),
        r_raw=np.full((ds.I, ds.M), raw),
        w_raw=np.full((ds.J, ds.M), raw),
    )


def test_predicted_mean_examples():
    ds = one_obs(3)
    p = cim_at(ds)
    assert predicted_mean(ModelKind.CIM, p, 0, 0, 0) == pytest.approx(3.0)
    p2 = ParameterSet(kind=ModelKind.CIM, t=np.array([3.2]), q=np.array([[-0.1]]), b=np.array([0.4]),
                      c=np.array([0.05]), r_raw=p.r_raw, w_raw=p.w_raw)
    assert predicted_mean(ModelKind.CIM, p2, 0, 0, 0) == pytest.approx(3.55)
    imp = ParameterSet(kind=ModelKind.ImpCDM, t=np.array([3.0]), q=np.array([[0.5]]), b=np.array([0.0]),
                       c=np.array([-0.25]), r_raw=np.zeros(1), w_raw=np.zeros(1),
                       mu=np.array([2.5]), mu_pairs=np.array([[0, 0]]))
    assert predicted_mean(ModelKind.ImpCDM, imp, 0, 0, 0) == pytest.approx(2.75)


def test_predicted_variance_examples():
    ds = one_obs(3)
    assert predicted_variance(ModelKind.CIM, cim_at(ds), 0, 0, 0) == pytest.approx(1.0)
    p = init_parameters(ModelKind.CDM, ds, 0)
    assert predicted_variance(ModelKind.CDM, p, 0, 0, 0) == pytest.approx(2 * math.log(2), abs=1e-4)


def test_cdm_variance_shared_across_criteria(small_dataset):
    for kind in (ModelKind.CDM, ModelKind.ImpCDM):
        p = random_params(kind, small_dataset, 3)
        values = {predicted_variance(kind, p, 1, 2, m) for m in range(small_dataset.M)}
        assert len(values) == 1


def test_likelihood_at_mean_and_one_sd():
    ds = one_obs(3)
    assert log_likelihood(ModelKind.CIM, cim_at(ds), ds) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)
    ds4 = one_obs(4)
    assert log_likelihood(ModelKind.CIM, cim_at(ds4), ds4) == pytest.approx(-0.91893853 - 0.5, abs=1e-7)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_log_posterior_matches_naive_oracle(kind, hyper):
    for seed in range(25):
        rng = np.random.default_rng(seed)
        rows = [(f"w{j}", f"t{i}", f"c{m}", int(rng.integers(1, 6)), "SIMUL")
                for i in range(2) for j in range(2) for m in range(2)]
        ds = make_dataset(rows)
        p = random_params(kind, ds, seed)
        assert log_posterior(kind, p, hyper, ds) == pytest.approx(naive_log_posterior(kind, p, hyper, ds), abs=1e-10)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_log_posterior_matches_naive_oracle_sparse(kind, hyper, small_dataset):
    p = random_params(kind, small_dataset, 5)
    assert log_posterior(kind, p, hyper, small_dataset) == pytest.approx(
        naive_log_posterior(kind, p, hyper, small_dataset), abs=1e-9
    )


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_gradient_matches_finite_differences(kind, hyper, small_dataset):
    ds = small_dataset
    p = random_params(kind, ds, 1)
    analytic = log_posterior_gradient(kind, p, hyper, ds).flatten()
    theta = p.flatten()
    step = 1e-5
    numeric = np.empty_like(theta)
    for k in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[k] += step
        down[k] -= step
        numeric[k] = (log_posterior(kind, p.with_flat(up), hyper, ds)
                      - log_posterior(kind, p.with_flat(down), hyper, ds)) / (2 * step)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-5)


def test_impression_prior_score_vanishes_at_mean(hyper):
    ds = one_obs(3)
    p = init_parameters(ModelKind.ImpCIM, ds, 0)
    p = ParameterSet(kind=p.kind, t=p.t, q=np.zeros_like(p.q), b=p.b, c=np.zeros_like(p.c),
                     r_raw=p.r_raw, w_raw=p.w_raw, mu=p.t + p.b, mu_pairs=p.mu_pairs)
    # observation sits at mu, so the likelihood score is zero too
    ds_at = ds.with_values(p.mu.copy())
    g = log_posterior_gradient(ModelKind.ImpCIM, p, hyper, ds_at)
    assert g.mu[0] == pytest.approx(0.0, abs=1e-12)


def test_t_gradient_zero_when_prior_and_data_balance():
    # x = 4, unit likelihood variance, prior N(3, 1): MAP for t is 3.5
    ds = one_obs(4)
    p = cim_at(ds, t=3.5)
    h = HyperParams()
    g = log_posterior_gradient(ModelKind.CIM, p, h, ds)
    assert g.t[0] == pytest.approx(0.0, abs=1e-12)


def test_permutation_invariance_and_prior_separability(small_dataset, hyper):
    kind = ModelKind.ImpCDM
    p = random_params(kind, small_dataset, 2)
    rebuilt = make_dataset(
        (r.worker_id, r.target_id, r.criterion_id, r.grade, r.condition.value)
        for r in reversed(small_dataset.responses)
    )
    assert log_posterior(kind, p, hyper, rebuilt) == log_posterior(kind, p, hyper, small_dataset)
    assert log_prior(kind, p, hyper) == pytest.approx(
        log_posterior(kind, p, hyper, small_dataset) - log_likelihood(kind, p, small_dataset)
    )


def test_prior_pull_on_unobserved_q(hyper):
    ds = make_dataset([("w1", "t1", "a", 3, "SIMUL"), ("w1", "t2", "b", 4, "SIMUL")])
    p = init_parameters(ModelKind.CIM, ds, 0)
    # (t1, b) has no data
    values = []
    for q in (0.0, 0.5, 1.0, 2.0):
        qm = p.q.copy()
        qm[0, 1] = q
        values.append(log_posterior(ModelKind.CIM, ParameterSet(
            kind=p.kind, t=p.t, q=qm, b=p.b, c=p.c, r_raw=p.r_raw, w_raw=p.w_raw), hyper, ds))
    assert all(a > b for a, b in zip(values, values[1:]))


def test_init_parameters_shapes_and_determinism(small_dataset):
    a = init_parameters(ModelKind.CDM, small_dataset, 9)
    assert a.equals(init_parameters(ModelKind.CDM, small_dataset, 9))
    assert a.r_raw.shape == (small_dataset.I,) and a.w_raw.shape == (small_dataset.J,)
    assert init_parameters(ModelKind.CIM, small_dataset, 9).mu is None
    imp = init_parameters(ModelKind.ImpCIM, small_dataset, 9)
    assert imp.mu.shape == (len(small_dataset.pairs),)
    np.testing.assert_array_equal(imp.mu_pairs, small_dataset.pairs)


def test_shape_and_kind_mismatch(small_dataset, hyper):
    p = init_parameters(ModelKind.CIM, small_dataset, 0)
    with pytest.raises(ShapeMismatch):
        log_posterior(ModelKind.CDM, p, hyper, small_dataset)
    other = make_dataset([("w1", "t1", "a", 3, "SIMUL")])
    with pytest.raises(ShapeMismatch):
        log_posterior(ModelKind.CIM, p, hyper, other)
    with pytest.raises(LengthMismatch):
        p.with_flat(np.zeros(p.size + 1))


def test_parameter_json_keeps_unobserved_impressions_null(small_dataset):
    p = random_params(ModelKind.ImpCDM, small_dataset, 4)
    data = p.to_dict()
    assert len(data["mu"]) == small_dataset.I and len(data["mu"][0]) == small_dataset.J
    observed = {(int(i), int(j)) for i, j in small_dataset.pairs}
    nulls = {(i, j) for i, row in enumerate(data["mu"]) for j, v in enumerate(row) if v is None}
    assert nulls == {(i, j) for i in range(small_dataset.I) for j in range(small_dataset.J)} - observed
    assert ParameterSet.from_dict(data).equals(p)


def test_softplus_inverse():
    x = np.array([-3.0, 0.0, 2.0, 40.0])
    np.testing.assert_allclose(inverse_softplus(softplus(x)), x, rtol=1e-10)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_settle_offsets_moves_only_along_likelihood_neutral_lines(kind, small_dataset, hyper):
    p = random_params(kind, small_dataset, 6)
    settled = settle_offsets(kind, p, hyper)
    assert log_likelihood(kind, settled, small_dataset) == pytest.approx(
        log_likelihood(kind, p, small_dataset), abs=1e-9
    )
    assert log_prior(kind, settled, hyper) >= log_prior(kind, p, hyper)
    np.testing.assert_array_equal(settled.r_raw, p.r_raw)
    np.testing.assert_array_equal(settled.w_raw, p.w_raw)
    # no gain left along "every t up, every b down"
    g = log_posterior_gradient(kind, settled, hyper, small_dataset)
    assert g.t.sum() - g.b.sum() == pytest.approx(0.0, abs=1e-8)
    np.testing.assert_array_equal(p.t, random_params(kind, small_dataset, 6).t)
