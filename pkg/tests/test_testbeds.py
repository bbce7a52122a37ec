import math

import numpy as np
import pytest

from pisurrogate.dimensions import DomainError
from pisurrogate.testbeds import (
    SPHERE_SPEC, TESTBEDS, _one_minus_eta_cot, borehole, get_testbed, gravity, pythagorean, sphere, sphere_eta,
)


def test_gravity_hand_value():
    assert gravity(1, 1, 1, 2) == 1.0


def test_pythagorean_identity():
    assert pythagorean(3.0, 4.0) == 5.0


def test_borehole_equal_heads_give_zero_flow():
    assert borehole(0.1, 1000, 80000, 900, 80, 900, 1400, 11000) == 0.0


def test_borehole_domain():
    with pytest.raises(DomainError):
        borehole(0.1, 0.05, 80000, 1000, 80, 800, 1400, 11000)


def test_borehole_reference_value():
    # direct transcription of the closed form at the training-box centre
    r_w, r, T_u, H_u, T_l, H_l, L, K_w = 0.1, 25050, 89335, 1050, 89.55, 760, 1400, 10950
    lr = math.log(r / r_w)
    expected = 2 * math.pi * T_u * (H_u - H_l) / (lr * (1 + 2 * L * T_u / (lr * r_w**2 * K_w) + T_u / T_l))
    assert borehole(r_w, r, T_u, H_u, T_l, H_l, L, K_w) == pytest.approx(expected, rel=1e-14)


# Biot extremes over training and extrapolation boxes, plus the closed-form case biot = 1
BIOTS = np.array([100 * 0.05 / 100, 160 * 0.25 / 30, 1.0, 0.05, 0.25 * 160 / 30])


@pytest.mark.parametrize("i", [1, 2, 3, 4])
def test_eta_roots_residual_and_bracket(i):
    eta = sphere_eta(BIOTS, i)
    resid = np.abs(_one_minus_eta_cot(eta) - BIOTS)
    assert np.all(resid <= 1e-12)
    assert np.all(eta > (i - 1) * math.pi) and np.all(eta < i * math.pi)


def test_first_root_at_unit_biot_is_half_pi():
    assert sphere_eta(np.array([1.0]), 1)[0] == pytest.approx(math.pi / 2, rel=1e-14)


def test_eta_rejects_nonpositive_biot():
    with pytest.raises(DomainError):
        sphere_eta(np.array([0.0]), 1)


def _centre(**kw):
    base = dict(R=0.5, r=0.1, t=100.0, T_m=255.0, Delta_T=65.0, h_c=130.0, k=65.0)
    base.update(kw)
    return base


def _random_configs(count: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield {v.name: rng.uniform(*v.training_range) for v in SPHERE_SPEC.varying_inputs if v.name != "t"}


def test_sphere_cools_monotonically():
    # four terms wiggle by up to 0.1 K at small Fourier numbers (t below ~90 s);
    # the converged series does not
    for c in _random_configs(100):
        late = sphere(t=np.linspace(100, 750, 300), **c)
        assert np.all(np.diff(late) <= 1e-9)
        full = sphere(t=np.linspace(1, 750, 300), terms=100, **c)
        assert np.all(np.diff(full) <= 1e-9)


def test_sphere_temperature_between_medium_and_start():
    T = sphere(**_centre(t=np.array([1.0, 5.0, 20.0])))
    assert np.all(T > 255.0) and np.all(T < 255.0 + 65.0)
    rng = np.random.default_rng(0)
    cols = {v.name: rng.uniform(*v.training_range, 1000) for v in SPHERE_SPEC.varying_inputs}
    T = sphere(**cols, terms=100)
    assert np.all(T > cols["T_m"])
    # interior points near t = 0 sit at the initial temperature up to rounding
    assert np.all(T <= (cols["T_m"] + cols["Delta_T"]) * (1 + 1e-12))


def test_sphere_late_time_approaches_medium():
    T = sphere(**_centre(t=1e6))
    assert T == pytest.approx(255.0, abs=1e-9)


def test_registry():
    assert set(TESTBEDS) == {"gravity", "borehole", "sphere", "pythagorean"}
    with pytest.raises(ValueError):
        get_testbed("nope")


def test_outside_range_warns():
    tb = get_testbed("gravity")
    with pytest.warns(UserWarning):
        tb.evaluate({"y0": [100.0], "V0": [1.0], "t": [1.0], "g": [2.0]})
