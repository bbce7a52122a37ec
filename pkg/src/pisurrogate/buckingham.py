"""Buckingham Pi machinery: basis validation, exponent solving and dataset transforms.

All linear algebra on dimension exponents is exact (``fractions.Fraction``
Gaussian elimination), so rank decisions never depend on a floating-point
tolerance.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset
from .dimensions import (
    Const, DimensionError, DomainError, Expr, FundamentalDimension, Pow, SystemSpec,
    UnknownVariable, Var, VariableSpec, check_expr, evaluate, monomial, solve_for,
)


class BasisError(DimensionError):
    """A candidate basis set violates the Pi-theorem constraints."""


class WrongCount(BasisError):
    pass


class NotIndependent(BasisError):
    pass


class NotRepresentative(BasisError):
    pass


class Infeasible(BasisError):
    """No valid basis can be assembled from the available inputs."""


class CuratedNotDimensionless(DimensionError):
    pass


class NoInverse(ValueError):
    """The output recipe cannot be solved for the original output variable."""


# ---------------------------------------------------------------------------
# exact rational elimination


def rational_rank(rows: Sequence[Sequence[Fraction]]) -> int:
    """Rank of a rational matrix by fraction-exact row reduction."""
    m = [list(map(Fraction, r)) for r in rows]
    if not m:
        return 0
    n_rows, n_cols = len(m), len(m[0])
    rank = 0
    for c in range(n_cols):
        piv = next((r for r in range(rank, n_rows) if m[r][c] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for r in range(n_rows):
            if r != rank and m[r][c] != 0:
                f = m[r][c] / m[rank][c]
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        rank += 1
        if rank == n_rows:
            break
    return rank


def rational_solve(a: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> list[Fraction] | None:
    """Solve ``a @ x = b`` exactly.  Returns one solution (free variables set to
    zero) or None when the system is inconsistent."""
    n_rows = len(a)
    n_cols = len(a[0]) if n_rows else 0
    m = [list(map(Fraction, row)) + [Fraction(rhs)] for row, rhs in zip(a, b)]
    pivots = []
    rank = 0
    for c in range(n_cols):
        piv = next((r for r in range(rank, n_rows) if m[r][c] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        p = m[rank][c]
        m[rank] = [v / p for v in m[rank]]
        for r in range(n_rows):
            if r != rank and m[r][c] != 0:
                f = m[r][c]
                m[r] = [u - f * v for u, v in zip(m[r], m[rank])]
        pivots.append(c)
        rank += 1
    if any(m[r][-1] != 0 for r in range(rank, n_rows)):
        return None
    x = [Fraction(0)] * n_cols
    for r, c in enumerate(pivots):
        x[c] = m[r][-1]
    return x


# ---------------------------------------------------------------------------
# dimension matrix and basis sets


@dataclass(frozen=True)
class DimensionMatrix:
    """Exponents of the present fundamental dimensions (rows) for each variable (columns)."""

    rows: tuple[FundamentalDimension, ...]
    columns: tuple[str, ...]
    entries: tuple[tuple[Fraction, ...], ...]

    @classmethod
    def of(cls, system: SystemSpec, names: Sequence[str] | None = None) -> DimensionMatrix:
        rows = system.present_dimensions
        names = tuple(names) if names is not None else tuple(v.name for v in system.variables)
        entries = tuple(tuple(system[nm].dimension[dim] for nm in names) for dim in rows)
        return cls(rows, names, entries)

    def column(self, name: str) -> tuple[Fraction, ...]:
        j = self.columns.index(name)
        return tuple(row[j] for row in self.entries)

    @property
    def rank(self) -> int:
        return rational_rank(self.entries)


@dataclass(frozen=True)
class BasisSet:
    members: tuple[str, ...]
    basis_matrix: DimensionMatrix

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def __contains__(self, name):
        return name in self.members


def validate_basis(candidates: Sequence[str], system: SystemSpec) -> BasisSet:
    """Check a candidate basis against the count, representativity and independence rules.

    Representativity is checked before independence, so a rank-deficient set that
    also fails to span a dimension reports :class:`NotRepresentative`.
    """
    candidates = tuple(candidates)
    for c in candidates:
        if c not in system:
            raise UnknownVariable(c)
        if c == system.output.name:
            raise BasisError("the output cannot be a basis quantity")
    if len(set(candidates)) != len(candidates):
        raise WrongCount("duplicate basis members")
    if len(candidates) != system.p:
        raise WrongCount(f"need {system.p} basis quantities, got {len(candidates)}")
    bm = DimensionMatrix.of(system, candidates)
    full = DimensionMatrix.of(system)
    for v in system.variables:
        if v.name in candidates:
            continue
        if rational_solve(bm.entries, full.column(v.name)) is None:
            raise NotRepresentative(f"dimension [{v.dimension}] of {v.name} is not spanned by {candidates}")
    if bm.rank < system.p:
        raise NotIndependent(f"{candidates} have rank {bm.rank} < p = {system.p}")
    return BasisSet(candidates, bm)


def solve_exponents(v: VariableSpec, basis: BasisSet) -> tuple[Fraction, ...]:
    """Exponents ``a`` with ``dim(v) = prod_k dim(b_k) ** a_k``."""
    rhs = [v.dimension[dim] for dim in basis.basis_matrix.rows]
    sol = rational_solve(basis.basis_matrix.entries, rhs)
    if sol is None:
        raise NotRepresentative(f"{v.name} is not representable in basis {basis.members}")
    return tuple(sol)


def recommend_basis(system: SystemSpec, fanova) -> BasisSet:
    """Greedy basis from main-effect percentages.

    Inputs are visited by decreasing main-effect percentage (ties keep declaration
    order) and admitted when they raise the rank of the selected dimension
    submatrix, until the rank reaches ``p``.

    ``fanova`` is a FanovaReport or a plain ``{input: percentage}`` mapping.
    """
    main = getattr(fanova, "main_effects", fanova)
    order = [v.name for v in system.varying_inputs]
    missing = [nm for nm in order if nm not in main]
    if missing:
        raise ValueError(f"FANOVA report lacks inputs {missing}")
    ranked = sorted(order, key=lambda nm: -float(main[nm]))  # stable: ties keep declaration order
    chosen: list[str] = []
    rank = 0
    for nm in ranked:
        if rank == system.p:
            break
        trial = DimensionMatrix.of(system, chosen + [nm]).rank
        if trial > rank:
            chosen.append(nm)
            rank = trial
    if rank < system.p:
        raise Infeasible(f"inputs span only {rank} of {system.p} dimensions")
    return validate_basis(chosen, system)


# ---------------------------------------------------------------------------
# transforms


@dataclass(frozen=True)
class Recipe:
    """One derived column: its expression and where it came from."""

    expr: Expr
    source: str  # "solved", "curated" or "identity"
    exponents: tuple[Fraction, ...] | None = None

    @property
    def name(self) -> str:
        return str(self.expr)


@dataclass(frozen=True)
class CuratedRecipes:
    """Hand-chosen replacements for the generic monomial recipes."""

    inputs: tuple[Expr, ...] | None = None
    output: Expr | None = None


@dataclass(frozen=True)
class PiTransform:
    """Dimensionless re-expression of a system's inputs and output.

    ``forward`` maps original-variable datasets to derived columns;
    ``invert_output`` recovers the original output from predicted ``q0`` values
    plus the original inputs.
    """

    system: SystemSpec
    basis: BasisSet | None
    inputs: tuple[Recipe, ...]
    output: Recipe
    label: str = ""

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.inputs)

    @property
    def output_name(self) -> str:
        return self.output.name

    @property
    def leaves(self) -> set[str]:
        out = set()
        for r in self.inputs:
            out |= r.expr.leaves()
        return out

    @classmethod
    def identity(cls, system: SystemSpec, label: str = "non-da") -> PiTransform:
        """Original varying inputs and output, untouched."""
        inputs = tuple(Recipe(Var(v.name), "identity") for v in system.varying_inputs)
        return cls(system, None, inputs, Recipe(Var(system.output.name), "identity"), label)

    def _env(self, data: Dataset) -> dict[str, np.ndarray | float]:
        env: dict[str, np.ndarray | float] = {c: data.column(c) for c in data.columns}
        for v in self.system.constants:
            env.setdefault(v.name, v.value)
        return env

    def forward(self, data: Dataset) -> Dataset:
        return apply_transform(self, data)

    def invert_output(self, q0, data: Dataset) -> np.ndarray:
        """Original-scale output from derived-output values ``q0`` at the rows of ``data``."""
        env = self._env(data)
        env.pop(self.system.output.name, None)
        return solve_for(self.output.expr, self.system.output.name, np.asarray(q0, dtype=float), env)


def build_pi_transform(system: SystemSpec, basis: BasisSet, curated: CuratedRecipes | None = None,
                       label: str = "") -> PiTransform:
    """Generic monomial recipes for every non-basis variable, optionally overridden.

    The number of derived inputs is (number of inputs, constants included) - p.
    """
    curated = curated or CuratedRecipes()
    inputs: list[Recipe]
    if curated.inputs is not None:
        inputs = [_curated(e, system) for e in curated.inputs]
    else:
        inputs = []
        for v in system.inputs:
            if v.name in basis:
                continue
            a = solve_exponents(v, basis)
            inputs.append(Recipe(monomial(v.name, basis.members, a), "solved", a))
    expected = len(system.inputs) - system.p
    if len(inputs) != expected:
        raise ValueError(f"expected {expected} derived inputs, got {len(inputs)}")
    if curated.output is not None:
        out = _curated(curated.output, system)
    else:
        a = solve_exponents(system.output, basis)
        out = Recipe(monomial(system.output.name, basis.members, a), "solved", a)
    _check_invertible(out.expr, system.output.name)
    for r in inputs:
        if system.output.name in r.expr.leaves():
            raise ValueError(f"derived input {r.name} uses the output")
    return PiTransform(system, basis, tuple(inputs), out, label)


def _curated(e: Expr, system: SystemSpec) -> Recipe:
    dim = check_expr(e, system)
    if not dim.is_dimensionless:
        raise CuratedNotDimensionless(f"{e} has dimension [{dim}]")
    return Recipe(e, "curated")


def _check_invertible(e: Expr, name: str) -> None:
    count = _occurrences(e, name)
    if count != 1:
        raise NoInverse(f"output {name} occurs {count} times in {e}")
    node = e
    while not isinstance(node, Var):
        if isinstance(node, Pow) and node.exponent == 0:
            raise NoInverse(f"{e} discards {name} through a zero power")
        children = [c for c in _children(node) if name in c.leaves()]
        node = children[0]


def _children(e: Expr) -> list[Expr]:
    return [getattr(e, a) for a in ("left", "right", "base", "arg") if hasattr(e, a)]


def _occurrences(e: Expr, name: str) -> int:
    if isinstance(e, Var):
        return int(e.name == name)
    if isinstance(e, Const):
        return 0
    return sum(_occurrences(c, name) for c in _children(e))


def apply_transform(t: PiTransform, data: Dataset) -> Dataset:
    """Evaluate every recipe on ``data``; the output recipe only when the output is present.

    Missing physical constants are filled from their declared values.
    """
    env = t._env(data)
    cols: dict[str, np.ndarray] = {}
    for r in t.inputs:
        cols[r.name] = evaluate(r.expr, env)
    output = None
    if t.system.output.name in data.columns:
        cols[t.output.name] = evaluate(t.output.expr, env)
        output = t.output.name
    return Dataset.from_columns(cols, provenance=data.provenance, output=output)


# ---------------------------------------------------------------------------
# input arrangements


class InputArrangement(str, enum.Enum):
    RAW = "raw"
    LOG = "log"
    EXPANDED_LOG = "expanded_log"

    @classmethod
    def parse(cls, text: str) -> InputArrangement:
        return cls(text.replace("-", "_"))


def arranged_names(names: Sequence[str], kind: InputArrangement | str) -> list[str]:
    """Column names produced by :func:`arrange_inputs` for the given input names."""
    kind = InputArrangement.parse(kind) if isinstance(kind, str) else kind
    if kind is InputArrangement.RAW:
        return list(names)
    logs = [f"log({c})" for c in names]
    if kind is InputArrangement.LOG:
        return logs
    out = list(logs)
    for a, b in itertools.combinations(logs, 2):
        out += [f"{a}+{b}", f"{a}-{b}"]
    return out


def trend_names(names: Sequence[str], kind: InputArrangement | str) -> list[str]:
    """Linear-trend regressors for an arrangement: the unexpanded (possibly logged) inputs."""
    kind = InputArrangement.parse(kind) if isinstance(kind, str) else kind
    return arranged_names(names, InputArrangement.RAW if kind is InputArrangement.RAW else InputArrangement.LOG)


def arrange_inputs(data: Dataset, kind: InputArrangement | str) -> Dataset:
    """Raw, logged, or logged-plus-pairwise-sums-and-differences input columns.

    The output column is carried through untouched.
    """
    kind = InputArrangement.parse(kind) if isinstance(kind, str) else kind
    names = list(data.input_columns)
    if kind is InputArrangement.RAW:
        cols = {c: data.column(c) for c in names}
    else:
        X = data.select(names)
        if np.any(X <= 0):
            bad = [c for c in names if np.any(data.column(c) <= 0)]
            raise DomainError(f"log arrangement needs positive columns; offending: {bad}")
        L = np.log(X)
        logs = [f"log({c})" for c in names]
        cols = dict(zip(logs, L.T))
        if kind is InputArrangement.EXPANDED_LOG:
            for i, j in itertools.combinations(range(len(names)), 2):
                cols[f"{logs[i]}+{logs[j]}"] = L[:, i] + L[:, j]
                cols[f"{logs[i]}-{logs[j]}"] = L[:, i] - L[:, j]
    if data.output is not None:
        cols[data.output] = data.column(data.output)
    return Dataset.from_columns(cols, provenance=data.provenance, output=data.output)
