"""Named transform strategies for each testbed."""

from __future__ import annotations

from .buckingham import CuratedRecipes, PiTransform, build_pi_transform, validate_basis
from .dimensions import parse_expr
from .testbeds import get_testbed

STRATEGIES = ("non-da", "initial-da", "fanova-da", "slc-da", "t-da")

# basis quantities for the generic monomial strategies
_BASES: dict[tuple[str, str], tuple[str, ...]] = {
    ("gravity", "initial-da"): ("y0", "t"),
    ("gravity", "fanova-da"): ("t", "g"),
    ("borehole", "fanova-da"): ("r_w", "K_w"),
    # smallest range ratios (upper / lower limit) among the candidate bases
    ("borehole", "slc-da"): ("H_u", "T_u"),
    ("pythagorean", "fanova-da"): ("x1",),
}

# curated sphere recipes: (basis, derived inputs, derived output)
_CURATED: dict[tuple[str, str], tuple[tuple[str, ...], tuple[str, ...], str]] = {
    ("sphere", "t-da"): (
        ("T_m", "t", "r", "h_c"),
        ("T_m/Delta_T", "R", "h_c*r/k", "k*t/(c*rho*r^2)", "h_c^2/(Delta_T*c^3*rho^2)"),
        "T_s/Delta_T",
    ),
    ("sphere", "fanova-da"): (
        ("T_m", "t", "r", "h_c"),
        ("R", "Delta_T/(T_m+Delta_T)", "k/(h_c*r)", "sqrt(c*t^2*T_m/r^2)", "cbrt(h_c*t^3*T_m/(rho*r^3))"),
        "log((T_s-T_m)/Delta_T)",
    ),
}


class UnavailableStrategy(ValueError):
    pass


def available_strategies(testbed: str) -> tuple[str, ...]:
    get_testbed(testbed)
    keys = {s for (tb, s) in (*_BASES, *_CURATED) if tb == testbed}
    return ("non-da",) + tuple(s for s in STRATEGIES if s in keys)


def strategy_transform(testbed: str, strategy: str) -> PiTransform:
    """The :class:`PiTransform` for ``strategy`` applied to ``testbed``."""
    spec = get_testbed(testbed).spec
    if strategy == "non-da":
        return PiTransform.identity(spec)
    key = (testbed, strategy)
    if key in _BASES:
        return build_pi_transform(spec, validate_basis(_BASES[key], spec), label=strategy)
    if key in _CURATED:
        basis, inputs, output = _CURATED[key]
        curated = CuratedRecipes(tuple(parse_expr(e) for e in inputs), parse_expr(output))
        return build_pi_transform(spec, validate_basis(basis, spec), curated, label=strategy)
    raise UnavailableStrategy(
        f"strategy {strategy!r} is not defined for {testbed}; choose from {available_strategies(testbed)}"
    )
