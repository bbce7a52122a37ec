from fractions import Fraction

import numpy as np
import pytest

from pisurrogate.buckingham import (
    Infeasible, InputArrangement, NotIndependent, NotRepresentative, PiTransform, UnknownVariable, WrongCount,
    arrange_inputs, arranged_names, build_pi_transform, rational_rank, recommend_basis, solve_exponents,
    trend_names, validate_basis,
)
from pisurrogate.dataset import Dataset
from pisurrogate.design import lhd, request_for
from pisurrogate.dimensions import DimensionVector, Role, SystemSpec, VariableSpec
from pisurrogate.presets import UnavailableStrategy, available_strategies, strategy_transform
from pisurrogate.testbeds import BOREHOLE_SPEC, GRAVITY_SPEC, PYTHAGOREAN_SPEC, SPHERE_SPEC, get_testbed


def _data(testbed: str, n: int = 50, seed: int = 3, mode: str = "training") -> Dataset:
    tb = get_testbed(testbed)
    return tb.with_output(lhd(request_for(tb.spec.inputs, n, seed, mode)))


def test_rational_rank():
    F = Fraction
    assert rational_rank([[F(1), F(2)], [F(2), F(4)]]) == 1
    assert rational_rank([[F(1), F(0)], [F(0), F(1)]]) == 2


def test_gravity_position_and_velocity_form_a_basis():
    assert validate_basis(("y0", "V0"), GRAVITY_SPEC).members == ("y0", "V0")


def test_two_lengths_do_not_represent_conductivity():
    with pytest.raises(NotRepresentative):
        validate_basis(("r_w", "H_u"), BOREHOLE_SPEC)


def test_wrong_count_and_unknown():
    with pytest.raises(WrongCount):
        validate_basis(("r_w",), BOREHOLE_SPEC)
    with pytest.raises(UnknownVariable):
        validate_basis(("r_w", "nope"), BOREHOLE_SPEC)


def test_dependent_but_representative_basis():
    # both members have dimension L/T, yet the only other variable is also L/T
    D = DimensionVector.of
    spec = SystemSpec(
        (VariableSpec("a", D(L=1, T=-1), training_range=(1, 2)),
         VariableSpec("b", D(L=1, T=-1), training_range=(1, 2)),
         VariableSpec("c", D(L=1), training_range=(1, 2))),
        VariableSpec("y", D(L=1), role=Role.OUTPUT),
    )
    with pytest.raises(NotRepresentative):
        validate_basis(("a", "b"), spec)
    spec2 = SystemSpec(spec.inputs[:2], VariableSpec("y", D(L=1, T=-1), role=Role.OUTPUT))
    with pytest.raises((NotIndependent, WrongCount)):
        validate_basis(("a", "b"), spec2)


def test_solve_exponents_borehole_flow():
    basis = validate_basis(("r_w", "K_w"), BOREHOLE_SPEC)
    assert solve_exponents(BOREHOLE_SPEC["y_b"], basis) == (2, 1)


def test_solve_exponents_gravity_velocity():
    basis = validate_basis(("t", "g"), GRAVITY_SPEC)
    assert solve_exponents(GRAVITY_SPEC["V0"], basis) == (1, 1)
    assert solve_exponents(GRAVITY_SPEC["y0"], basis) == (2, 1)


def test_gravity_initial_recipes_print_with_positive_powers():
    t = strategy_transform("gravity", "initial-da")
    assert t.input_names == ("V0*t/y0", "g*t^2/y0")
    assert t.output_name == "y/y0"


def test_borehole_output_inverse():
    t = strategy_transform("borehole", "fanova-da")
    data = _data("borehole", 20)
    q = t.forward(data)
    expected = data.y / (data.column("r_w") ** 2 * data.column("K_w"))
    np.testing.assert_allclose(q.y, expected, rtol=1e-15)
    np.testing.assert_allclose(t.invert_output(q.y, data), data.y, rtol=1e-12)


def test_sphere_log_output_row():
    t = strategy_transform("sphere", "fanova-da")
    row = {"R": 0.5, "r": 0.1, "t": 100.0, "T_m": 240.0, "Delta_T": 50.0, "h_c": 120.0, "k": 50.0, "T_s": 260.0}
    data = Dataset.from_columns(row, output="T_s")
    assert t.forward(data).y[0] == pytest.approx(np.log(0.4), rel=1e-15)


def test_derived_input_counts():
    assert len(strategy_transform("borehole", "fanova-da").inputs) == 6
    assert len(strategy_transform("gravity", "fanova-da").inputs) == 2
    assert len(strategy_transform("pythagorean", "fanova-da").inputs) == 1
    assert len(strategy_transform("sphere", "t-da").inputs) == 5


def test_arrangement_column_counts():
    assert len(arranged_names([f"x{i}" for i in range(8)], "expanded-log")) == 64
    assert len(arranged_names([f"x{i}" for i in range(6)], "expanded-log")) == 36
    assert len(arranged_names(["x"], "expanded-log")) == 1
    assert trend_names(["a", "b"], InputArrangement.EXPANDED_LOG) == ["log(a)", "log(b)"]


def test_arrange_inputs_values():
    d = Dataset.from_columns({"a": [1.0, np.e], "b": [2.0, 4.0], "y": [0.0, 1.0]}, output="y")
    out = arrange_inputs(d, "expanded-log")
    assert out.columns == ("log(a)", "log(b)", "log(a)+log(b)", "log(a)-log(b)", "y")
    np.testing.assert_allclose(out.column("log(a)-log(b)"), np.log([0.5, np.e / 4]))
    np.testing.assert_array_equal(out.y, d.y)


def test_recommend_basis_borehole():
    pct = {"r_w": 83.0, "r": 0.0, "T_u": 0.0, "H_u": 4.0, "T_l": 0.0, "H_l": 4.0, "L": 4.0, "K_w": 1.0}
    # r_w and the heads share dimension L: the first rank-raising input after r_w is K_w
    assert recommend_basis(BOREHOLE_SPEC, pct).members == ("r_w", "K_w")


def test_recommend_basis_order_and_ties():
    pct = {"y0": 0.1, "V0": 2.0, "t": 60.0, "g": 24.0}
    assert recommend_basis(GRAVITY_SPEC, pct).members == ("t", "g")
    tie = {"y0": 10.0, "V0": 10.0, "t": 10.0, "g": 10.0}
    assert recommend_basis(GRAVITY_SPEC, tie).members == ("y0", "V0")


def test_recommend_basis_infeasible():
    D = DimensionVector.of
    spec = SystemSpec(
        (VariableSpec("a", D(L=1), training_range=(1, 2)),
         VariableSpec("c", D(T=1), role=Role.CONSTANT, training_range=(1.0, 1.0))),
        VariableSpec("y", D(L=1), role=Role.OUTPUT),
    )
    with pytest.raises(Infeasible):
        recommend_basis(spec, {"a": 100.0})


@pytest.mark.parametrize("scale", [1.0, 1e-3, 1e4])
def test_recommend_basis_invariant_to_percentage_scale(scale):
    pct = {"y0": 0.1, "V0": 2.0, "t": 60.0, "g": 24.0}
    assert recommend_basis(GRAVITY_SPEC, {k: v * scale for k, v in pct.items()}).members == ("t", "g")


def _all_strategies():
    for tb in ("gravity", "borehole", "sphere", "pythagorean"):
        for s in available_strategies(tb):
            yield tb, s


@pytest.mark.parametrize("testbed,strategy", list(_all_strategies()))
@pytest.mark.parametrize("mode", ["training", "extrapolation"])
def test_output_round_trip(testbed, strategy, mode):
    t = strategy_transform(testbed, strategy)
    data = _data(testbed, 200, 11, mode)
    q = t.forward(data)
    back = t.invert_output(q.y, data)
    np.testing.assert_allclose(back, data.y, rtol=1e-12, atol=0)


def test_curated_recipes_are_dimensionless():
    for s in ("t-da", "fanova-da"):
        t = strategy_transform("sphere", s)
        assert all(r.source == "curated" for r in t.inputs)


def test_unavailable_strategy():
    with pytest.raises(UnavailableStrategy):
        strategy_transform("gravity", "t-da")


def test_identity_transform_is_untouched():
    data = _data("gravity", 10)
    t = PiTransform.identity(GRAVITY_SPEC)
    out = t.forward(data)
    np.testing.assert_array_equal(out.X, data.select(["y0", "V0", "t", "g"]))


def test_pythagorean_identity_and_scale_invariance():
    rng = np.random.default_rng(0)
    x1, x2 = rng.uniform(1, 5, 1000), rng.uniform(0.5, 10, 1000)
    t = strategy_transform("pythagorean", "fanova-da")

    def q(s):
        d = Dataset.from_columns({"x1": s * x1, "x2": s * x2, "y": np.hypot(s * x1, s * x2)}, output="y")
        out = t.forward(d)
        return out.X[:, 0], out.y

    q1, q0 = q(1.0)
    np.testing.assert_allclose(q0, np.sqrt(1 + q1**2), rtol=1e-12)
    s1, s0 = q(1e5)
    np.testing.assert_allclose(s1, q1, rtol=1e-12)
    np.testing.assert_allclose(s0, q0, rtol=1e-12)


def test_build_transform_rejects_non_dimensionless_curated():
    from pisurrogate.buckingham import CuratedNotDimensionless, CuratedRecipes
    from pisurrogate.dimensions import parse_expr

    basis = validate_basis(("T_m", "t", "r", "h_c"), SPHERE_SPEC)
    bad = CuratedRecipes(output=parse_expr("T_s"))
    with pytest.raises(CuratedNotDimensionless):
        build_pi_transform(SPHERE_SPEC, basis, bad)
