import math

import numpy as np
import pytest

from pisurrogate.buckingham import apply_transform
from pisurrogate.dataset import Dataset
from pisurrogate.design import design, request_for
from pisurrogate.gasp import (
    CholeskyFailure, ColumnMismatch, GaspModel, KernelSpec, OptimizerConfig, TrendSpec, _Objective, correlation,
    fit_arrays, neg_log_likelihood, predict, profile_estimates, train,
)
from pisurrogate.harness import n_rmse
from pisurrogate.presets import strategy_transform
from pisurrogate.testbeds import get_testbed

FAST = OptimizerConfig(n_starts=3, seed=0)


def _borehole(n: int, seed: int = 1) -> Dataset:
    tb = get_testbed("borehole")
    return tb.with_output(design(request_for(tb.spec.inputs, n, seed), 2000))


@pytest.fixture(scope="module")
def borehole_model():
    data = _borehole(40)
    return data, train(data, config=FAST)


def test_kernel_validation():
    with pytest.raises(ValueError):
        KernelSpec("matern", [1.0], [2.0])
    with pytest.raises(ValueError):
        KernelSpec("power_exponential", [1.0], [2.5])
    assert KernelSpec("squared_exponential", [1.0, 2.0], 1.0).power.tolist() == [2.0, 2.0]


def test_correlation_symmetric_with_unit_diagonal():
    rng = np.random.default_rng(0)
    X = rng.random((15, 3))
    k = KernelSpec("power_exponential", [0.5, 3.0, 10.0], [1.0, 1.5, 2.0])
    R = correlation(X, X, k)
    np.testing.assert_array_equal(R, R.T)
    np.testing.assert_array_equal(np.diag(R), 1.0)
    assert np.all(np.linalg.eigvalsh(R) > 0)


def test_two_point_gls_by_hand():
    # R = [[1, rho], [rho, 1]] with rho = exp(-1); symmetric data gives beta = mean
    X, y = np.array([[0.0], [1.0]]), np.array([1.0, 3.0])
    k = KernelSpec("squared_exponential", [1.0], 2.0)
    rho = math.exp(-1.0)
    beta, sigma2 = profile_estimates(k, TrendSpec(), (X, y))
    assert beta[0] == pytest.approx(2.0, rel=1e-14)
    assert sigma2 == pytest.approx(1.0 / (1.0 - rho), rel=1e-14)
    nll = 0.5 * (2 * math.log(sigma2) + math.log(1 - rho**2) + 2 * (1 + math.log(2 * math.pi)))
    assert neg_log_likelihood(k, TrendSpec(), (X, y)) == pytest.approx(nll, rel=1e-14)


def test_large_theta_gives_independent_runs():
    rng = np.random.default_rng(2)
    X, y = rng.random((12, 2)), rng.normal(size=12)
    k = KernelSpec("power_exponential", [1e8, 1e8], [1.5, 1.5])
    beta, sigma2 = profile_estimates(k, TrendSpec(), (X, y))
    assert beta[0] == pytest.approx(y.mean(), rel=1e-12)
    assert sigma2 == pytest.approx(y.var(), rel=1e-12)


def test_duplicate_point_is_singular_without_nugget():
    X = np.array([[0.1], [0.5], [0.5], [0.9]])
    y = np.array([1.0, 2.0, 2.0, 0.0])
    k = KernelSpec("squared_exponential", [1.0], 2.0)
    with pytest.raises(CholeskyFailure):
        neg_log_likelihood(k, TrendSpec(), (X, y))
    # the nugget ladder rescues training
    model = fit_arrays(X, y, "squared_exponential", config=FAST)
    assert model.nugget > 0


@pytest.mark.parametrize("family,trend", [("power_exponential", "constant"), ("squared_exponential", "linear")])
def test_gradient_matches_finite_differences(family, trend):
    rng = np.random.default_rng(4)
    X = rng.random((25, 3))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2 - X[:, 2]
    F = TrendSpec(trend, (0, 1, 2)).design_matrix(X)
    obj = _Objective(X, (y - y.mean()) / y.std(), F, family, True, (0.0,))
    d = 3
    z = np.concatenate([np.log([2.0, 0.7, 1.3]), [1.4, 1.8, 1.2]]) if obj.estimate_power else np.log([2.0, 0.7, 1.3])
    f0, g = obj(z)
    h = 1e-6
    fd = np.array([(obj(z + h * e)[0] - obj(z - h * e)[0]) / (2 * h) for e in np.eye(z.size)])
    np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7 * abs(f0))
    assert g.size == (2 * d if obj.estimate_power else d)


def test_interpolates_training_points(borehole_model):
    data, model = borehole_model
    assert model.nugget <= 1e-8
    pred = predict(model, data)
    tol = 1e-6 * (data.y.max() - data.y.min())
    assert np.max(np.abs(pred.mean - data.y)) <= tol
    assert np.all(pred.se <= 1e-3 * data.y.std())


def test_affine_output_invariance_at_fixed_parameters(borehole_model):
    data, model = borehole_model
    X, y = model.X, data.y
    n = y.size
    for trend in (TrendSpec(), TrendSpec("linear", (0, 3, 7))):
        beta, sigma2 = profile_estimates(model.kernel, trend, (X, y))
        beta2, sigma2b = profile_estimates(model.kernel, trend, (X, 3.0 * y - 7.0))
        shift = np.zeros_like(beta)
        shift[0] = -7.0
        np.testing.assert_allclose(beta2, 3.0 * beta + shift, rtol=1e-10)
        assert sigma2b == pytest.approx(9.0 * sigma2, rel=1e-10)
        nll = neg_log_likelihood(model.kernel, trend, (X, y))
        nll2 = neg_log_likelihood(model.kernel, trend, (X, 3.0 * y - 7.0))
        assert nll2 == pytest.approx(nll + n * math.log(3.0), rel=1e-10)


def test_affine_output_invariance_after_training(borehole_model):
    data, model = borehole_model
    moved = Dataset(data.columns, np.column_stack([data.X, 3.0 * data.y - 7.0]), output="y_b")
    other = train(moved, config=FAST)
    assert other.loglik == pytest.approx(model.loglik, rel=1e-8)
    test = _borehole(50, 99)
    a = predict(model, test)
    b = predict(other, test)
    # the optimizer sees data that differ by rounding only; flat likelihood directions
    # let that grow to about 1e-7
    np.testing.assert_allclose(b.mean, 3.0 * a.mean - 7.0, rtol=1e-5)
    np.testing.assert_allclose(b.se, 3.0 * a.se, rtol=1e-3, atol=1e-8 * np.abs(b.mean).max())


def test_far_field_reverts_to_trend(borehole_model):
    _, model = borehole_model
    far = model.x_hi + 1e3 * (model.x_hi - model.x_lo)
    pred = predict(model, far[None, :])
    assert pred.mean[0] == pytest.approx(model.y_mean + model.y_scale * model.beta[0], rel=1e-12)
    ones = np.ones(model.y.size)
    w = np.linalg.solve(model.L, ones)
    expected = model.y_scale * math.sqrt(model.sigma2 * (1 + 1 / (w @ w)))
    assert pred.se[0] == pytest.approx(expected, rel=1e-8)


def test_constant_output():
    X = np.linspace(0, 1, 8)[:, None]
    model = fit_arrays(X, np.full(8, 4.5), config=FAST)
    pred = predict(model, np.array([[0.3], [7.0]]))
    np.testing.assert_array_equal(pred.mean, 4.5)
    np.testing.assert_array_equal(pred.se, 0.0)


def test_constant_input_rejected():
    X = np.column_stack([np.linspace(0, 1, 6), np.ones(6)])
    with pytest.raises(ValueError):
        fit_arrays(X, np.arange(6.0), config=FAST)


def test_save_load_replays_predictions(tmp_path, borehole_model):
    _, model = borehole_model
    path = tmp_path / "m.json"
    model.save(path)
    back = GaspModel.load(path)
    test = _borehole(30, 7)
    a, b = predict(model, test), predict(back, test)
    np.testing.assert_allclose(b.mean, a.mean, rtol=1e-12)
    np.testing.assert_allclose(b.se, a.se, rtol=1e-9)


def test_column_mismatch(borehole_model):
    _, model = borehole_model
    with pytest.raises(ColumnMismatch):
        predict(model, Dataset.from_columns({"r_w": [0.1]}))
    with pytest.raises(ColumnMismatch):
        predict(model, np.zeros((2, 3)))
    with pytest.raises(ColumnMismatch):
        train(_borehole(20), trend="linear", trend_columns=["nope"], config=FAST)


def test_same_seed_same_model():
    data = _borehole(20, 5)
    a, b = train(data, config=FAST), train(data, config=FAST)
    np.testing.assert_array_equal(a.kernel.theta, b.kernel.theta)
    np.testing.assert_array_equal(a.beta, b.beta)


def test_pythagorean_derived_model():
    t = strategy_transform("pythagorean", "fanova-da")
    tb = get_testbed("pythagorean")
    q1 = np.linspace(0.1, 3.0, 30)
    legs = {"x1": np.full(30, 10.0), "x2": 10.0 * q1}
    train_q = apply_transform(t, tb.with_output(Dataset.from_columns(legs)))
    model = train(train_q, "squared_exponential", config=FAST)
    qt = np.random.default_rng(0).uniform(0.1, 3.0, 2000)
    truth = np.sqrt(1 + qt**2)
    err = n_rmse(predict(model, qt[:, None], return_se=False).mean, truth, train_q.y.mean())
    assert err <= 0.1  # percent, i.e. 1e-3 as a fraction


def test_scale_parameter_recovered_from_sample_paths():
    theta_true = 5.0
    X = np.linspace(0, 1, 30)[:, None]
    k = KernelSpec("squared_exponential", [theta_true], 2.0)
    L = np.linalg.cholesky(correlation(X, X, k) + 1e-10 * np.eye(30))
    ratios = []
    for seed in range(20):
        y = L @ np.random.default_rng(seed).normal(size=30)
        model = fit_arrays(X, y, "squared_exponential", config=OptimizerConfig(n_starts=4, seed=seed))
        ratios.append(model.kernel.theta[0] / theta_true)
    assert 1 / 3 <= np.median(ratios) <= 3
