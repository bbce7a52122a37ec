import numpy as np
import pytest

from pisurrogate.design import design, request_for
from pisurrogate.fanova import UnknownInput, fanova, main_effect_curve
from pisurrogate.gasp import OptimizerConfig, fit_arrays, predict, train
from pisurrogate.testbeds import get_testbed

FAST = OptimizerConfig(n_starts=3, seed=0)


def _unit_design(n: int, d: int, seed: int) -> np.ndarray:
    from pisurrogate.design import maximin_swaps, unit_lhd

    rng = np.random.default_rng(seed)
    return maximin_swaps(unit_lhd(n, d, rng), 2000 * d, rng)


def pick_freeze_main_effects(model, lo, hi, n: int = 100_000, seed: int = 0) -> np.ndarray:
    """Independent Monte Carlo estimate of first-order percentages of the predictor."""
    rng = np.random.default_rng(seed)
    d = lo.size
    A = lo + rng.random((n, d)) * (hi - lo)
    B = lo + rng.random((n, d)) * (hi - lo)
    fA = predict(model, A, return_se=False).mean
    fB = predict(model, B, return_se=False).mean
    var = np.var(np.concatenate([fA, fB]))
    out = []
    for j in range(d):
        C = B.copy()
        C[:, j] = A[:, j]
        fC = predict(model, C, return_se=False).mean
        out.append(100.0 * np.mean(fA * (fC - fB)) / var)
    return np.array(out)


@pytest.fixture(scope="module")
def additive_model():
    X = _unit_design(40, 3, 1)
    y = np.sin(2 * np.pi * X[:, 0]) + 2 * X[:, 1] ** 2
    return fit_arrays(X, y, config=FAST)


def test_additive_function_has_no_interactions(additive_model):
    rep = fanova(additive_model, curves=False)
    assert max(rep.interactions.values()) <= 0.5
    assert rep.main_effects["x3"] <= 1.0
    assert sum(rep.main_effects.values()) >= 99.0


def test_dummy_input_scores_near_zero(additive_model):
    assert fanova(additive_model, curves=False).main_effects["x3"] <= 1.0


@pytest.mark.parametrize("case", ["interacting", "gravity"])
def test_monte_carlo_oracle_agreement(case):
    if case == "interacting":
        X = _unit_design(50, 3, 2)
        y = X[:, 0] + 2 * X[:, 1] * X[:, 2] + np.cos(3 * X[:, 2])
        model = fit_arrays(X, y, config=FAST)
    else:
        tb = get_testbed("gravity")
        data = tb.with_output(design(request_for(tb.spec.inputs, 40, 1), 4000))
        model = train(data, "squared_exponential", config=FAST)
    rep = fanova(model, curves=False)
    mc = pick_freeze_main_effects(model, model.x_lo, model.x_hi)
    ours = np.array([rep.main_effects[c] for c in model.columns])
    np.testing.assert_allclose(ours, mc, atol=1.0)


def test_quadrature_grid_convergence():
    tb = get_testbed("borehole")
    data = tb.with_output(design(request_for(tb.spec.inputs, 40, 3), 4000))
    model = train(data, config=FAST)
    a = fanova(model, grid=32, curves=False)
    b = fanova(model, grid=64, curves=False)
    for c in model.columns:
        assert abs(a.main_effects[c] - b.main_effects[c]) <= 0.5


def test_percentages_add_up(additive_model):
    rep = fanova(additive_model, curves=False)
    total = sum(rep.main_effects.values()) + sum(rep.interactions.values()) + rep.residual
    # the residual is clamped at zero, so the sum can only exceed 100 when it is zero
    assert rep.residual >= 0.0
    assert total == pytest.approx(100.0, abs=1e-9) if rep.residual > 0 else total >= 100.0
    assert rep.metadata["weights"] == "uniform"


def test_constant_model_gives_flat_curve():
    X = np.linspace(0, 1, 6)[:, None]
    model = fit_arrays(X, np.full(6, 2.0), config=FAST)
    rep = fanova(model)
    assert rep.main_effects["x1"] == 0.0
    np.testing.assert_array_equal(rep.curves["x1"].effect, 0.0)


def test_unknown_input(additive_model):
    with pytest.raises(UnknownInput):
        main_effect_curve(additive_model, "nope")
    with pytest.raises(UnknownInput):
        fanova(additive_model, ranges={"nope": (0, 1)})


def test_curve_is_centred_and_banded(additive_model):
    c = main_effect_curve(additive_model, "x1", grid=101)
    # mean of the centred effect over a fine grid is about zero
    assert abs(np.trapezoid(c.effect, c.x)) <= 1e-2
    assert np.all(c.lower <= c.effect) and np.all(c.effect <= c.upper)
    np.testing.assert_allclose(c.effect, np.sin(2 * np.pi * c.x), atol=0.05)


def test_sphere_radius_effect_is_inverse():
    tb = get_testbed("sphere")
    data = tb.with_output(design(request_for(tb.spec.inputs, 140, 1), 4000))
    model = train(data, config=FAST)
    c = main_effect_curve(model, "r", grid=25)
    A = np.column_stack([np.ones_like(c.x), 1.0 / c.x])
    coef, *_ = np.linalg.lstsq(A, c.effect, rcond=None)
    resid = c.effect - A @ coef
    r2 = 1 - resid @ resid / np.sum((c.effect - c.effect.mean()) ** 2)
    assert r2 >= 0.95


def test_report_csv(tmp_path, additive_model):
    rep = fanova(additive_model)
    rep.to_csv(tmp_path / "p.csv")
    rep.curves["x1"].to_csv(tmp_path / "c.csv")
    assert (tmp_path / "p.csv").read_text().startswith("effect,percent")
    assert len((tmp_path / "c.csv").read_text().splitlines()) == 26
