"""Closed-form reference systems with their dimensions and input ranges.

Each testbed bundles a :class:`SystemSpec` with a vectorised evaluator taking a
``{name: array}`` mapping.  Evaluators warn (they do not fail) when asked for
points outside the declared training and extrapolation boxes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .dataset import Dataset
from .dimensions import DimensionVector, DomainError, Role, SystemSpec, VariableSpec


class BracketFailure(RuntimeError):
    pass


def _dim(**kw) -> DimensionVector:
    return DimensionVector.of(kw)


def _in(name, dim, units, train, extrap=None, desc="") -> VariableSpec:
    return VariableSpec(name, dim, units, Role.INPUT, train, extrap, desc)


def _const(name, dim, units, value, desc="") -> VariableSpec:
    return VariableSpec(name, dim, units, Role.CONSTANT, (value, value), None, desc)


def _out(name, dim, units, desc="") -> VariableSpec:
    return VariableSpec(name, dim, units, Role.OUTPUT, description=desc)


# ---------------------------------------------------------------------------
# gravity


def gravity(y0, V0, t, g):
    """Vertical displacement of an object falling in a vacuum."""
    y0, V0, t, g = (np.asarray(a, dtype=float) for a in (y0, V0, t, g))
    return y0 + V0 * t - g * t**2 / 2


GRAVITY_SPEC = SystemSpec(
    name="gravity",
    inputs=(
        _in("y0", _dim(L=1), "m", (1, 10), (10, 20), "initial position"),
        _in("V0", _dim(L=1, T=-1), "m s^-1", (1, 10), (10, 20), "initial velocity"),
        _in("t", _dim(T=1), "s", (1, 10), (10, 20), "time of displacement"),
        _in("g", _dim(L=1, T=-2), "m s^-2", (1.62, 9.81), (10.44, 24.79), "gravitational acceleration"),
    ),
    output=_out("y", _dim(L=1), "m", "vertical displacement"),
)


# ---------------------------------------------------------------------------
# borehole


def borehole(r_w, r, T_u, H_u, T_l, H_l, L, K_w):
    """Water flow rate through a borehole between two aquifers.

    Evaluated as ``num / (log_ratio * bracket)`` with
    ``bracket = 1 + (2*L*T_u) / (log_ratio * r_w**2 * K_w) + T_u / T_l``, left to right.
    """
    r_w, r, T_u, H_u, T_l, H_l, L, K_w = (np.asarray(a, dtype=float) for a in (r_w, r, T_u, H_u, T_l, H_l, L, K_w))
    if np.any(r <= r_w):
        raise DomainError("borehole needs r > r_w")
    log_ratio = np.log(r / r_w)
    num = 2.0 * math.pi * T_u * (H_u - H_l)
    bracket = 1.0 + (2.0 * L * T_u) / (log_ratio * r_w**2 * K_w) + T_u / T_l
    return num / (log_ratio * bracket)


BOREHOLE_SPEC = SystemSpec(
    name="borehole",
    inputs=(
        _in("r_w", _dim(L=1), "m", (0.05, 0.15), (0.15, 0.25), "radius of borehole"),
        _in("r", _dim(L=1), "m", (100, 50000), None, "radius of influence"),
        _in("T_u", _dim(L=2, T=-1), "m^2 year^-1", (63070, 115600), None, "transmissivity of upper aquifer"),
        _in("H_u", _dim(L=1), "m", (990, 1110), (1110, 1170), "potentiometric head of upper aquifer"),
        _in("T_l", _dim(L=2, T=-1), "m^2 year^-1", (63.1, 116), None, "transmissivity of lower aquifer"),
        _in("H_l", _dim(L=1), "m", (700, 820), (820, 880), "potentiometric head of lower aquifer"),
        _in("L", _dim(L=1), "m", (1120, 1680), (1680, 1960), "length of borehole"),
        _in("K_w", _dim(L=1, T=-1), "m year^-1", (9855, 12045), None, "hydraulic conductivity of borehole"),
    ),
    output=_out("y_b", _dim(L=3, T=-1), "m^3 year^-1", "flow rate"),
)


# ---------------------------------------------------------------------------
# solid sphere

_SMALL = 1e-4


def _one_minus_eta_cot(eta: np.ndarray) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    small = np.abs(eta) < _SMALL
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = 1.0 - eta / np.tan(eta)
    e2 = eta * eta
    series = e2 / 3.0 + e2 * e2 / 45.0 + 2.0 * e2**3 / 945.0
    return np.where(small, series, direct)


def sphere_eta(biot, i: int, max_iter: int = 200) -> np.ndarray:
    """i-th positive root of ``1 - eta*cot(eta) = biot`` in ``((i-1)*pi, i*pi)``.

    Vectorised bisection on the bracket shrunk by 1e-9 at the cotangent poles;
    the first bracket starts at 0, where the left side vanishes like eta**2/3.
    """
    if i < 1:
        raise ValueError("root index starts at 1")
    biot = np.asarray(biot, dtype=float)
    if np.any(biot <= 0):
        raise DomainError("Biot number must be positive")
    lo = np.full(biot.shape, 0.0 if i == 1 else (i - 1) * math.pi + 1e-9)
    hi = np.full(biot.shape, i * math.pi - 1e-9)
    f_lo = _one_minus_eta_cot(lo) - biot
    f_hi = _one_minus_eta_cot(hi) - biot
    if np.any(f_lo > 0) or np.any(f_hi < 0):
        raise BracketFailure(f"no sign change for root {i}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = _one_minus_eta_cot(mid) - biot
        left = f_mid > 0
        hi = np.where(left, mid, hi)
        lo = np.where(left, lo, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(hi, 1.0)):
            break
    # pick the endpoint with the smaller residual
    r_lo = np.abs(_one_minus_eta_cot(lo) - biot)
    r_hi = np.abs(_one_minus_eta_cot(hi) - biot)
    return np.where(r_lo <= r_hi, lo, hi)


def _sinc_term(x: np.ndarray) -> np.ndarray:
    """sin(x)/x with a series guard near 0."""
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)


def sphere_series(q1, q2, q3, q4, terms: int = 4) -> np.ndarray:
    """Dimensionless sphere temperature from temperature ratio, position ratio, Biot and Fourier numbers."""
    q1, q2, q3, q4 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (q1, q2, q3, q4)))
    total = np.array(q1, dtype=float, copy=True)
    for i in range(1, terms + 1):
        eta = sphere_eta(q3, i)
        small = eta < _SMALL
        safe = np.where(small, 1.0, eta)
        coef = 4.0 * (np.sin(safe) - safe * np.cos(safe)) / (2.0 * safe - np.sin(2.0 * safe))
        coef = np.where(small, 1.0, coef)
        total = total + coef * np.exp(-eta**2 * q4) * _sinc_term(eta * q2)
    return total


def sphere(R, r, t, T_m, Delta_T, h_c, k, c=400.0, rho=8000.0, terms: int = 4):
    """Temperature of a solid sphere cooling in a fluid, truncated to ``terms`` series terms."""
    R, r, t, T_m, Delta_T, h_c, k, c, rho = (
        np.asarray(a, dtype=float) for a in (R, r, t, T_m, Delta_T, h_c, k, c, rho)
    )
    if np.any(R <= 0):
        raise DomainError("R must be positive")
    if np.any(Delta_T <= 0):
        raise DomainError("Delta_T must be positive")
    biot = h_c * r / k
    fourier = k * t / (c * rho * r**2)
    q0 = sphere_series(T_m / Delta_T, R, biot, fourier, terms)
    return q0 * Delta_T


SPHERE_SPEC = SystemSpec(
    name="sphere",
    inputs=(
        _in("R", _dim(), "", (0.01, 1), None, "distance from centre over sphere radius"),
        _in("r", _dim(L=1), "m", (0.05, 0.2), (0.2, 0.25), "radius of sphere"),
        _in("t", _dim(T=1), "s", (1, 600), (600, 750), "time"),
        _in("T_m", _dim(Theta=1), "K", (240, 270), (270, 280), "temperature of medium"),
        # shifted below the training range, as tabled
        _in("Delta_T", _dim(Theta=1), "K", (50, 80), (40, 50), "initial sphere minus medium temperature"),
        _in("h_c", _dim(M=1, T=-3, Theta=-1), "kg s^-3 K^-1", (100, 160), None, "convective heat transfer coefficient"),
        _in("k", _dim(M=1, L=1, T=-3, Theta=-1), "kg m s^-3 K^-1", (30, 100), None, "thermal conductivity"),
        _const("c", _dim(L=2, T=-2, Theta=-1), "m^2 s^-2 K^-1", 400.0, "specific heat"),
        _const("rho", _dim(M=1, L=-3), "kg m^-3", 8000.0, "density"),
    ),
    output=_out("T_s", _dim(Theta=1), "K", "sphere temperature"),
)


# ---------------------------------------------------------------------------
# Pythagorean triangle


def pythagorean(x1, x2):
    return np.hypot(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))


PYTHAGOREAN_SPEC = SystemSpec(
    name="pythagorean",
    inputs=(
        _in("x1", _dim(L=1), "cm", (1, 5), (1e5, 5e5), "first leg"),
        _in("x2", _dim(L=1), "cm", (0.5, 10), (0.5e5, 10e5), "second leg"),
    ),
    output=_out("y", _dim(L=1), "cm", "hypotenuse"),
)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Testbed:
    id: str
    spec: SystemSpec
    evaluator: Callable[..., np.ndarray]
    kernel: str  # default correlation family for this testbed

    def evaluate(self, columns: Mapping[str, np.ndarray] | Dataset, check_ranges: bool = True) -> np.ndarray:
        if isinstance(columns, Dataset):
            columns = columns.as_dict()
        args = {}
        for v in self.spec.inputs:
            if v.name in columns:
                args[v.name] = np.asarray(columns[v.name], dtype=float)
            elif v.is_constant:
                args[v.name] = v.value
            else:
                raise KeyError(f"missing input {v.name}")
            if check_ranges and not v.is_constant:
                self._warn_outside(v, args[v.name])
        return self.evaluator(**args)

    def with_output(self, data: Dataset) -> Dataset:
        """``data`` plus the evaluated output column."""
        return data.with_column(self.spec.output.name, self.evaluate(data), output=True)

    @staticmethod
    def _warn_outside(v: VariableSpec, x: np.ndarray) -> None:
        lo = min(v.range_for("training")[0], v.range_for("extrapolation")[0])
        hi = max(v.range_for("training")[1], v.range_for("extrapolation")[1])
        span = hi - lo
        if np.any(x < lo - 1e-9 * span) or np.any(x > hi + 1e-9 * span):
            warnings.warn(f"{v.name} outside its declared ranges [{lo}, {hi}]", stacklevel=3)


TESTBEDS: dict[str, Testbed] = {
    "gravity": Testbed("gravity", GRAVITY_SPEC, gravity, "squared_exponential"),
    "borehole": Testbed("borehole", BOREHOLE_SPEC, borehole, "power_exponential"),
    "sphere": Testbed("sphere", SPHERE_SPEC, sphere, "power_exponential"),
    "pythagorean": Testbed("pythagorean", PYTHAGOREAN_SPEC, pythagorean, "squared_exponential"),
}


def get_testbed(name: str) -> Testbed:
    try:
        return TESTBEDS[name]
    except KeyError:
        raise ValueError(f"unknown testbed {name!r}; choose from {sorted(TESTBEDS)}") from None
