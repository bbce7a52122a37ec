"""Exact dimension-vector algebra, variable/system specs and dimensional checking.

Exponents are :class:`fractions.Fraction` values, so chains of products and
rational powers never accumulate floating-point drift.  Units strings are
display metadata only; callers are expected to use a consistent unit system.
"""

from __future__ import annotations

import ast
import enum
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


class DimensionError(ValueError):
    """Base class for dimensional-analysis failures."""


class DimensionMismatch(DimensionError):
    """Sum or difference of quantities with unequal dimensions."""


class NonDimensionlessArg(DimensionError):
    """Transcendental function applied to a dimensioned quantity."""


class UnknownVariable(DimensionError, KeyError):
    """Expression leaf that does not resolve to a declared variable."""


class DomainError(ValueError):
    """Numerical evaluation outside a function's domain (log of 0, root of a negative, ...)."""


class FundamentalDimension(enum.Enum):
    """The seven fundamental dimensions, in the fixed order M, L, T, Θ, Q, N, Iᵥ."""

    M = "M"
    L = "L"
    T = "T"
    THETA = "Θ"
    Q = "Q"
    N = "N"
    IV = "Iv"


DIMENSIONS: tuple[FundamentalDimension, ...] = tuple(FundamentalDimension)

_ALIASES = {
    "M": FundamentalDimension.M,
    "L": FundamentalDimension.L,
    "T": FundamentalDimension.T,
    "Θ": FundamentalDimension.THETA,
    "THETA": FundamentalDimension.THETA,
    "Theta": FundamentalDimension.THETA,
    "Q": FundamentalDimension.Q,
    "I": FundamentalDimension.Q,
    "N": FundamentalDimension.N,
    "Iv": FundamentalDimension.IV,
    "IV": FundamentalDimension.IV,
    "Iᵥ": FundamentalDimension.IV,
}


def parse_dimension_name(name: str) -> FundamentalDimension:
    try:
        return _ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown fundamental dimension {name!r}") from None


def _to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not exponents")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        if not value.is_integer():
            raise TypeError(f"float exponent {value!r} is not exact; pass a Fraction or 'num/den' string")
        return Fraction(int(value))
    raise TypeError(f"cannot interpret {value!r} as a rational exponent")


@dataclass(frozen=True)
class DimensionVector:
    """Rational exponents over the seven fundamental dimensions.

    Supports ``*`` and ``/`` between vectors and ``**`` with a rational power.

    >>> L = DimensionVector.of(L=1); T = DimensionVector.of(T=1)
    >>> str(L / T**2)
    'L T^-2'
    """

    exponents: tuple[Fraction, ...] = (Fraction(0),) * 7

    def __post_init__(self):
        if len(self.exponents) != len(DIMENSIONS):
            raise ValueError("a DimensionVector has exactly seven exponents")
        object.__setattr__(self, "exponents", tuple(_to_fraction(e) for e in self.exponents))

    @classmethod
    def of(cls, mapping: Mapping[str, object] | None = None, **kwargs) -> DimensionVector:
        """Build from a ``{name: exponent}`` mapping; exponents may be ints, Fractions or 'a/b' strings."""
        items = dict(mapping or {})
        items.update(kwargs)
        exps = [Fraction(0)] * len(DIMENSIONS)
        for name, value in items.items():
            dim = name if isinstance(name, FundamentalDimension) else parse_dimension_name(name)
            exps[DIMENSIONS.index(dim)] += _to_fraction(value)
        return cls(tuple(exps))

    @classmethod
    def dimensionless(cls) -> DimensionVector:
        return cls()

    def __getitem__(self, dim: FundamentalDimension | str) -> Fraction:
        if not isinstance(dim, FundamentalDimension):
            dim = parse_dimension_name(dim)
        return self.exponents[DIMENSIONS.index(dim)]

    @property
    def is_dimensionless(self) -> bool:
        return all(e == 0 for e in self.exponents)

    def __mul__(self, other: DimensionVector) -> DimensionVector:
        return dim_mul(self, other)

    def __truediv__(self, other: DimensionVector) -> DimensionVector:
        return dim_mul(self, dim_pow(other, -1))

    def __pow__(self, r) -> DimensionVector:
        return dim_pow(self, r)

    def inverse(self) -> DimensionVector:
        return dim_pow(self, -1)

    def as_dict(self) -> dict[str, str | int]:
        out: dict[str, str | int] = {}
        for dim, e in zip(DIMENSIONS, self.exponents):
            if e != 0:
                out[dim.value] = int(e) if e.denominator == 1 else f"{e.numerator}/{e.denominator}"
        return out

    def __str__(self) -> str:
        parts = []
        for dim, e in zip(DIMENSIONS, self.exponents):
            if e == 1:
                parts.append(dim.value)
            elif e != 0:
                parts.append(f"{dim.value}^{e}")
        return " ".join(parts) if parts else "1"


def dim_mul(a: DimensionVector, b: DimensionVector) -> DimensionVector:
    """Product of two dimensions: componentwise sum of exponents."""
    return DimensionVector(tuple(x + y for x, y in zip(a.exponents, b.exponents)))


def dim_pow(a: DimensionVector, r) -> DimensionVector:
    """Raise a dimension to a rational power."""
    r = _to_fraction(r)
    return DimensionVector(tuple(x * r for x in a.exponents))


DIMENSIONLESS = DimensionVector()


# ---------------------------------------------------------------------------
# Variables and systems


class Role(str, enum.Enum):
    INPUT = "input"
    OUTPUT = "output"
    CONSTANT = "constant"


@dataclass(frozen=True)
class VariableSpec:
    """A physical quantity with its dimension, units label and ranges."""

    name: str
    dimension: DimensionVector
    units: str = ""
    role: Role = Role.INPUT
    training_range: tuple[float, float] | None = None
    extrapolation_range: tuple[float, float] | None = None
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        for attr in ("training_range", "extrapolation_range"):
            rng = getattr(self, attr)
            if rng is None:
                continue
            lo, hi = (float(v) for v in rng)
            if lo > hi:
                raise ValueError(f"{self.name}: {attr} has lo > hi ({lo} > {hi})")
            object.__setattr__(self, attr, (lo, hi))
        if self.role is Role.CONSTANT:
            if self.training_range is None or self.training_range[0] != self.training_range[1]:
                raise ValueError(f"constant {self.name} needs a degenerate training range")
            if self.extrapolation_range is None:
                object.__setattr__(self, "extrapolation_range", self.training_range)

    @property
    def is_constant(self) -> bool:
        return self.role is Role.CONSTANT

    @property
    def value(self) -> float:
        """Fixed value of a constant."""
        if not self.is_constant:
            raise ValueError(f"{self.name} is not a constant")
        return self.training_range[0]

    def range_for(self, mode: str) -> tuple[float, float]:
        """Range for ``mode`` in {'training', 'extrapolation'}; the extrapolation range
        falls back to the training range when the variable is not shifted."""
        if mode in ("training", "interpolation"):
            rng = self.training_range
        elif mode == "extrapolation":
            rng = self.extrapolation_range or self.training_range
        else:
            raise ValueError(f"unknown range mode {mode!r}")
        if rng is None:
            raise ValueError(f"{self.name} has no {mode} range")
        return rng


@dataclass(frozen=True)
class SystemSpec:
    """Inputs (including physical constants) and the output of a physical system."""

    inputs: tuple[VariableSpec, ...]
    output: VariableSpec
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        names = [v.name for v in self.inputs] + [self.output.name]
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique within a system")
        if self.output.role is not Role.OUTPUT:
            object.__setattr__(self, "output", _replace_role(self.output, Role.OUTPUT))
        for v in self.inputs:
            if v.role is Role.OUTPUT:
                raise ValueError(f"{v.name}: inputs cannot have role 'output'")

    @property
    def variables(self) -> tuple[VariableSpec, ...]:
        return self.inputs + (self.output,)

    @property
    def varying_inputs(self) -> tuple[VariableSpec, ...]:
        return tuple(v for v in self.inputs if not v.is_constant)

    @property
    def constants(self) -> tuple[VariableSpec, ...]:
        return tuple(v for v in self.inputs if v.is_constant)

    @property
    def d(self) -> int:
        """Number of non-constant inputs."""
        return len(self.varying_inputs)

    @property
    def present_dimensions(self) -> tuple[FundamentalDimension, ...]:
        """Fundamental dimensions with a nonzero exponent somewhere in the system."""
        return tuple(
            dim for k, dim in enumerate(DIMENSIONS)
            if any(v.dimension.exponents[k] != 0 for v in self.variables)
        )

    @property
    def p(self) -> int:
        return len(self.present_dimensions)

    def __getitem__(self, name: str) -> VariableSpec:
        for v in self.variables:
            if v.name == name:
                return v
        raise UnknownVariable(name)

    def __contains__(self, name: str) -> bool:
        return any(v.name == name for v in self.variables)

    @property
    def input_names(self) -> list[str]:
        return [v.name for v in self.inputs]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "inputs": [_variable_to_dict(v) for v in self.inputs],
            "output": _variable_to_dict(self.output),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> SystemSpec:
        inputs = [_variable_from_dict(v) for v in data["inputs"]]
        output = _variable_from_dict({"role": "output", **data["output"]})
        return cls(inputs=tuple(inputs), output=output, name=data.get("name", ""))


def _replace_role(v: VariableSpec, role: Role) -> VariableSpec:
    return VariableSpec(v.name, v.dimension, v.units, role, v.training_range,
                        v.extrapolation_range, v.description)


def _variable_to_dict(v: VariableSpec) -> dict:
    out = {"name": v.name, "dimension": v.dimension.as_dict(), "units": v.units, "role": v.role.value}
    if v.training_range is not None:
        out["training_range"] = list(v.training_range)
    if v.extrapolation_range is not None and v.extrapolation_range != v.training_range:
        out["extrapolation_range"] = list(v.extrapolation_range)
    if v.description:
        out["description"] = v.description
    return out


def _variable_from_dict(d: Mapping) -> VariableSpec:
    rng = d.get("training_range")
    ext = d.get("extrapolation_range")
    return VariableSpec(
        name=d["name"],
        dimension=DimensionVector.of(d.get("dimension") or {}),
        units=d.get("units", ""),
        role=Role(d.get("role", "input")),
        training_range=tuple(rng) if rng is not None else None,
        extrapolation_range=tuple(ext) if ext is not None else None,
        description=d.get("description", ""),
    )


def load_system(path: str | Path) -> SystemSpec:
    """Read a SystemSpec from a JSON or YAML file."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    return SystemSpec.from_dict(data)


def dump_system(system: SystemSpec, path: str | Path) -> None:
    path = Path(path)
    data = system.to_dict()
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        path.write_text(yaml.safe_dump(data, sort_keys=False, allow_unicode=True))
    else:
        path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Quantity expressions


class Expr:
    """Node of a quantity expression tree.  Python operators build trees:

    >>> y, g, t = var("y"), var("g"), var("t")
    >>> str(y / (g * t**2))
    'y/(g*t^2)'
    """

    def __mul__(self, other):
        return Mul(self, _wrap(other))

    def __rmul__(self, other):
        return Mul(_wrap(other), self)

    def __truediv__(self, other):
        return Div(self, _wrap(other))

    def __rtruediv__(self, other):
        return Div(_wrap(other), self)

    def __add__(self, other):
        return Add(self, _wrap(other))

    def __radd__(self, other):
        return Add(_wrap(other), self)

    def __sub__(self, other):
        return Sub(self, _wrap(other))

    def __rsub__(self, other):
        return Sub(_wrap(other), self)

    def __pow__(self, r):
        return Pow(self, _to_fraction(r))

    def leaves(self) -> set[str]:
        raise NotImplementedError

    def _prec(self) -> int:
        return 9


def _wrap(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, Fraction)):
        return Const(float(x))
    raise TypeError(f"cannot use {x!r} in a quantity expression")


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str

    def leaves(self):
        return {self.name}

    def __str__(self):
        return self.name


@dataclass(frozen=True, eq=True)
class Const(Expr):
    """Pure dimensionless number."""

    value: float

    def leaves(self):
        return set()

    def __str__(self):
        return repr(self.value) if not float(self.value).is_integer() else str(int(self.value))


@dataclass(frozen=True, eq=True)
class _Binary(Expr):
    left: Expr
    right: Expr

    def leaves(self):
        return self.left.leaves() | self.right.leaves()


class Add(_Binary):
    def _prec(self):
        return 1

    def __str__(self):
        return f"{_paren(self.left, 1)}+{_paren(self.right, 1)}"


class Sub(_Binary):
    def _prec(self):
        return 1

    def __str__(self):
        return f"{_paren(self.left, 1)}-{_paren(self.right, 2)}"


class Mul(_Binary):
    def _prec(self):
        return 3

    def __str__(self):
        return f"{_paren(self.left, 3)}*{_paren(self.right, 3)}"


class Div(_Binary):
    def _prec(self):
        return 3

    def __str__(self):
        return f"{_paren(self.left, 3)}/{_paren(self.right, 4)}"


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: Fraction

    def leaves(self):
        return self.base.leaves()

    def _prec(self):
        return 5

    def __str__(self):
        e = self.exponent
        es = str(e) if e.denominator == 1 and e >= 0 else f"({e})"
        return f"{_paren(self.base, 6)}^{es}"


@dataclass(frozen=True, eq=True)
class Root(Expr):
    base: Expr
    k: int

    def leaves(self):
        return self.base.leaves()

    def __str__(self):
        return f"sqrt({self.base})" if self.k == 2 else f"root{self.k}({self.base})"


@dataclass(frozen=True, eq=True)
class Log(Expr):
    arg: Expr

    def leaves(self):
        return self.arg.leaves()

    def __str__(self):
        return f"log({self.arg})"


@dataclass(frozen=True, eq=True)
class Exp(Expr):
    arg: Expr

    def leaves(self):
        return self.arg.leaves()

    def __str__(self):
        return f"exp({self.arg})"


def _paren(e: Expr, min_prec: int) -> str:
    s = str(e)
    return f"({s})" if e._prec() < min_prec else s


def var(name: str) -> Var:
    return Var(name)


def log(e: Expr) -> Log:
    return Log(_wrap(e))


def exp(e: Expr) -> Exp:
    return Exp(_wrap(e))


def sqrt(e: Expr) -> Root:
    return Root(_wrap(e), 2)


def root(e: Expr, k: int) -> Root:
    return Root(_wrap(e), int(k))


def check_expr(e: Expr, env: SystemSpec | Mapping[str, DimensionVector]) -> DimensionVector:
    """Dimension of ``e``; raises on sums of unequal dimensions or
    transcendental functions of dimensioned arguments."""
    if isinstance(env, SystemSpec):
        dims = {v.name: v.dimension for v in env.variables}
    else:
        dims = dict(env)
    return _check(e, dims)


def _check(e: Expr, dims: Mapping[str, DimensionVector]) -> DimensionVector:
    if isinstance(e, Var):
        try:
            return dims[e.name]
        except KeyError:
            raise UnknownVariable(e.name) from None
    if isinstance(e, Const):
        return DIMENSIONLESS
    if isinstance(e, Mul):
        return dim_mul(_check(e.left, dims), _check(e.right, dims))
    if isinstance(e, Div):
        return _check(e.left, dims) / _check(e.right, dims)
    if isinstance(e, (Add, Sub)):
        a, b = _check(e.left, dims), _check(e.right, dims)
        if a != b:
            raise DimensionMismatch(f"{e}: cannot combine [{a}] with [{b}]")
        return a
    if isinstance(e, Pow):
        return dim_pow(_check(e.base, dims), e.exponent)
    if isinstance(e, Root):
        return dim_pow(_check(e.base, dims), Fraction(1, e.k))
    if isinstance(e, (Log, Exp)):
        a = _check(e.arg, dims)
        if not a.is_dimensionless:
            raise NonDimensionlessArg(f"{e}: argument has dimension [{a}]")
        return DIMENSIONLESS
    raise TypeError(f"not a quantity expression: {e!r}")


def evaluate(e: Expr, columns: Mapping[str, np.ndarray | float]) -> np.ndarray:
    """Evaluate ``e`` elementwise on arrays of variable values."""
    if isinstance(e, Var):
        try:
            return np.asarray(columns[e.name], dtype=float)
        except KeyError:
            raise UnknownVariable(e.name) from None
    if isinstance(e, Const):
        return np.asarray(e.value, dtype=float)
    if isinstance(e, Mul):
        return evaluate(e.left, columns) * evaluate(e.right, columns)
    if isinstance(e, Div):
        return evaluate(e.left, columns) / evaluate(e.right, columns)
    if isinstance(e, Add):
        return evaluate(e.left, columns) + evaluate(e.right, columns)
    if isinstance(e, Sub):
        return evaluate(e.left, columns) - evaluate(e.right, columns)
    if isinstance(e, Pow):
        base = evaluate(e.base, columns)
        if e.exponent.denominator != 1 and np.any(base < 0):
            raise DomainError(f"{e}: fractional power of a negative value")
        if e.exponent < 0 and np.any(base == 0):
            raise DomainError(f"{e}: negative power of zero")
        return base ** float(e.exponent)
    if isinstance(e, Root):
        base = evaluate(e.base, columns)
        if np.any(base < 0):
            raise DomainError(f"{e}: root of a negative value")
        return np.cbrt(base) if e.k == 3 else base ** (1.0 / e.k)
    if isinstance(e, Log):
        arg = evaluate(e.arg, columns)
        if np.any(arg <= 0):
            raise DomainError(f"{e}: log of a nonpositive value")
        return np.log(arg)
    if isinstance(e, Exp):
        return np.exp(evaluate(e.arg, columns))
    raise TypeError(f"not a quantity expression: {e!r}")


def solve_for(e: Expr, name: str, value: np.ndarray, columns: Mapping[str, np.ndarray | float]) -> np.ndarray:
    """Invert ``e(..., name, ...) = value`` for ``name``.

    Works when ``name`` occurs exactly once in ``e`` and every node on its path is
    invertible.  Raises ValueError otherwise.
    """
    if _count(e, name) != 1:
        raise ValueError(f"{name} must occur exactly once in {e}")
    value = np.asarray(value, dtype=float)
    while not isinstance(e, Var):
        if isinstance(e, _Binary):
            in_left = name in e.left.leaves()
            other = evaluate(e.right if in_left else e.left, columns)
            if isinstance(e, Add):
                value = value - other
            elif isinstance(e, Sub):
                value = value + other if in_left else other - value
            elif isinstance(e, Mul):
                value = value / other
            elif isinstance(e, Div):
                value = value * other if in_left else other / value
            e = e.left if in_left else e.right
        elif isinstance(e, Pow):
            if e.exponent == 0:
                raise ValueError(f"{e} is not invertible")
            value = value ** float(1 / e.exponent)
            e = e.base
        elif isinstance(e, Root):
            value = value ** e.k
            e = e.base
        elif isinstance(e, Log):
            value = np.exp(value)
            e = e.arg
        elif isinstance(e, Exp):
            value = np.log(value)
            e = e.arg
        else:
            raise ValueError(f"cannot invert through {e!r}")
    return value


def _count(e: Expr, name: str) -> int:
    if isinstance(e, Var):
        return int(e.name == name)
    if isinstance(e, Const):
        return 0
    if isinstance(e, _Binary):
        return _count(e.left, name) + _count(e.right, name)
    if isinstance(e, (Pow, Root)):
        return _count(e.base, name)
    if isinstance(e, (Log, Exp)):
        return _count(e.arg, name)
    raise TypeError(e)


_FUNCS = {"log": log, "ln": log, "exp": exp, "sqrt": sqrt, "cbrt": lambda a: root(a, 3)}


def parse_expr(text: str) -> Expr:
    """Parse a restricted arithmetic expression such as ``"log((T_s - T_m)/Delta_T)"``.

    Allowed: names, numbers, ``+ - * /``, ``**`` or ``^`` with a rational exponent,
    ``log/ln/exp/sqrt/cbrt`` and ``root(x, k)``.
    """
    tree = ast.parse(text.replace("^", "**"), mode="eval")
    return _from_ast(tree.body)


def _from_ast(node) -> Expr:
    if isinstance(node, ast.Name):
        return Var(node.id)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return Const(float(node.value))
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            return Pow(_from_ast(node.left), _rational_from_ast(node.right))
        a, b = _from_ast(node.left), _from_ast(node.right)
        ops = {ast.Add: Add, ast.Sub: Sub, ast.Mult: Mul, ast.Div: Div}
        for op, cls in ops.items():
            if isinstance(node.op, op):
                return cls(a, b)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return Mul(Const(-1.0), _from_ast(node.operand))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        fname = node.func.id
        if fname == "root" and len(node.args) == 2:
            return root(_from_ast(node.args[0]), int(_rational_from_ast(node.args[1])))
        if fname in _FUNCS and len(node.args) == 1:
            return _FUNCS[fname](_from_ast(node.args[0]))
    raise ValueError(f"unsupported expression syntax: {ast.dump(node)}")


def _rational_from_ast(node) -> Fraction:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return _to_fraction(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_rational_from_ast(node.operand)
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Div):
        return _rational_from_ast(node.left) / _rational_from_ast(node.right)
    raise ValueError("exponents must be rational literals such as 2, -1 or 1/3")


def monomial(numerator: str, basis: Sequence[str], exponents: Sequence[Fraction]) -> Expr:
    """``numerator / prod(basis_k ** a_k)`` written with positive powers only.

    Basis members with negative exponents move to the numerator; zero exponents are dropped.
    """
    num: Expr = Var(numerator)
    den = None
    for b, a in zip(basis, exponents):
        a = Fraction(a)
        if a == 0:
            continue
        term = Var(b) if abs(a) == 1 else Pow(Var(b), abs(a))
        if a < 0:
            num = Mul(num, term)
        else:
            den = term if den is None else Mul(den, term)
    return num if den is None else Div(num, den)


__all__ = [
    "DIMENSIONLESS", "DIMENSIONS", "Add", "Const", "DimensionError", "DimensionMismatch",
    "DimensionVector", "Div", "DomainError", "Exp", "Expr", "FundamentalDimension", "Log",
    "Mul", "NonDimensionlessArg", "Pow", "Role", "Root", "Sub", "SystemSpec", "UnknownVariable",
    "Var", "VariableSpec", "check_expr", "dim_mul", "dim_pow", "dump_system", "evaluate",
    "exp", "load_system", "log", "monomial", "parse_expr", "root", "solve_for", "sqrt", "var",
]
