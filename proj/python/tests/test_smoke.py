import numpy as np
import pytest

import hdinf


def make_data(n=300, p=8, family="binomial", seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    eta = 0.3 + x[:, 0] - 0.5 * x[:, 1]
    if family == "binomial":
        y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    else:
        y = eta + rng.standard_normal(n)
    return hdinf.Dataset(y, x)


def test_gaussian_refine_matches_least_squares():
    data, _ = hdinf.standardize(make_data(family="gaussian"))
    fit = hdinf.fit_lasso(data, "gaussian", 0.05)
    db = hdinf.refine_debias(data, "gaussian", fit)
    ols, *_ = np.linalg.lstsq(data.X, data.y, rcond=None)
    np.testing.assert_allclose(db.b_hat, ols, atol=1e-8)
    assert db.method == "REF-DS"


def test_binomial_pipeline_and_interval():
    raw = make_data()
    data, cmap = hdinf.standardize(raw)
    fit, cv = hdinf.fit_cv(data, "binomial", n_folds=5, seed=3)
    assert fit.converged and fit.kkt_residual <= 1e-7
    assert cv.lambda_min in cv.lambda_grid
    db = hdinf.to_original_scale(hdinf.refine_debias(data, "binomial", fit), cmap)
    ci = hdinf.wald_ci(db, 1, 0.95)
    assert ci.lower < ci.estimate < ci.upper
    assert ci.upper - ci.lower == pytest.approx(2 * 1.959963984540054 * ci.se)
    test = hdinf.wald_test(db, np.eye(data.p + 1)[1], 0.0)
    assert test.p_value < 0.05


def test_qp_and_region():
    data, _ = hdinf.standardize(make_data(seed=1))
    fit = hdinf.fit_lasso(data, "binomial", 0.01)
    ref = hdinf.refine_debias(data, "binomial", fit)
    qp0 = hdinf.qp_debias(data, "binomial", fit, 0.0)
    np.testing.assert_allclose(qp0.b_hat, ref.b_hat, atol=1e-12)
    region = hdinf.confidence_region(ref, np.eye(data.p + 1)[1:3], 0.95)
    assert region.contains(region.center)


def test_errors_are_typed():
    with pytest.raises(hdinf.DomainError):
        hdinf.fit_lasso(make_data(), "binomial", -1.0)
    with pytest.raises(hdinf.DomainError):
        hdinf.lambda_max(make_data(), "weibull")
    x = np.ones((20, 2))
    with pytest.raises(hdinf.DataError):
        hdinf.standardize(hdinf.Dataset(np.zeros(20), x))


def test_simulation_is_reproducible():
    args = dict(n=80, p=6, family="gaussian", structure="identity", rho=0.0,
                beta1_grid=[0.0, 1.0], n_replicates=10, methods=["REF-DS"], seed=5)
    a = hdinf.simulate(**args, workers=1)
    b = hdinf.simulate(**args, workers=2)
    assert a == b
    assert [row["beta1"] for row in a] == [0.0, 1.0]
