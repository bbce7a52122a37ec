"""Latin hypercube designs: random and maximin-optimised.

Designs are built in the original variables.  Optimisation happens in the unit
cube, where each column is a permutation of the ``n`` strata plus jitter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .dimensions import VariableSpec


@dataclass(frozen=True)
class DesignRequest:
    n: int
    variables: tuple[VariableSpec, ...]
    range_mode: str = "training"
    seed: int = 0
    optimize: bool = True
    midpoints: bool = False
    constants: tuple[VariableSpec, ...] = ()

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("a design needs n >= 2 runs")
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "constants", tuple(self.constants))
        for v in self.variables:
            if v.is_constant:
                raise ValueError(f"{v.name} is constant; pass it through `constants`")
            v.range_for(self.range_mode)


def unit_lhd(n: int, d: int, rng: np.random.Generator, midpoints: bool = False) -> np.ndarray:
    """``n x d`` Latin hypercube in [0, 1): column j is ``(perm_j + jitter) / n``."""
    perms = np.column_stack([rng.permutation(n) for _ in range(d)]) if d else np.empty((n, 0))
    jitter = 0.5 if midpoints else rng.random((n, d))
    return (perms + jitter) / n


def _min_distance(D: np.ndarray) -> float:
    return float(np.sqrt(D.min()))


def maximin_swaps(U: np.ndarray, budget: int, rng: np.random.Generator,
                  history: list[float] | None = None) -> np.ndarray:
    """Hill-climb the minimum pairwise distance by within-column swaps.

    A swap of rows ``a`` and ``b`` in one column is kept when no distance
    involving ``a`` or ``b`` falls below the current minimum; the other pairs are
    untouched, so the design's minimum distance never decreases.
    """
    U = np.array(U, dtype=float, copy=True)
    n, d = U.shape
    if budget <= 0 or n < 3 or d == 0:
        if history is not None:
            history.append(_min_distance(_sqdist(U)) if n > 1 else np.inf)
        return U
    D = _sqdist(U)
    current = D.min()
    if history is not None:
        history.append(float(np.sqrt(current)))
    cols = rng.integers(0, d, size=budget)
    rows_a = rng.integers(0, n, size=budget)
    rows_b = (rows_a + rng.integers(1, n, size=budget)) % n
    for j, a, b in zip(cols, rows_a, rows_b):
        new_a = U[a].copy()
        new_b = U[b].copy()
        new_a[j], new_b[j] = U[b, j], U[a, j]
        da = ((U - new_a) ** 2).sum(axis=1)
        db = ((U - new_b) ** 2).sum(axis=1)
        da[a] = db[b] = np.inf
        # distance between the swapped pair itself is unchanged
        da[b] = db[a] = D[a, b]
        if min(da.min(), db.min()) < current:
            continue
        U[a], U[b] = new_a, new_b
        D[a, :] = D[:, a] = da
        D[b, :] = D[:, b] = db
        current = D.min()
        if history is not None:
            history.append(float(np.sqrt(current)))
    return U


def _sqdist(U: np.ndarray) -> np.ndarray:
    D = ((U[:, None, :] - U[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(D, np.inf)
    return D


def min_pairwise_distance(U: np.ndarray) -> float:
    return _min_distance(_sqdist(np.asarray(U, dtype=float)))


def _to_dataset(req: DesignRequest, U: np.ndarray) -> Dataset:
    lo = np.array([v.range_for(req.range_mode)[0] for v in req.variables])
    hi = np.array([v.range_for(req.range_mode)[1] for v in req.variables])
    X = lo + U * (hi - lo)
    names = [v.name for v in req.variables]
    specs = {v.name: v for v in req.variables}
    for c in req.constants:
        X = np.column_stack([X, np.full(req.n, c.value)])
        names.append(c.name)
        specs[c.name] = c
    provenance = "training" if req.range_mode == "training" else "test"
    return Dataset(tuple(names), X, provenance=provenance, specs=specs)


def lhd(req: DesignRequest) -> Dataset:
    """Random Latin hypercube on the requested ranges."""
    rng = np.random.default_rng(req.seed)
    return _to_dataset(req, unit_lhd(req.n, len(req.variables), rng, req.midpoints))


def maximin_lhd(req: DesignRequest, budget: int | None = None) -> Dataset:
    """Latin hypercube improved by maximin swaps; ``budget`` defaults to 20000 * d.

    With ``budget=0`` the result equals :func:`lhd` for the same request.
    """
    d = len(req.variables)
    budget = 20000 * d if budget is None else budget
    rng = np.random.default_rng(req.seed)
    U = unit_lhd(req.n, d, rng, req.midpoints)
    return _to_dataset(req, maximin_swaps(U, budget, rng))


def design(req: DesignRequest, budget: int | None = None) -> Dataset:
    return maximin_lhd(req, budget) if req.optimize else lhd(req)


def strata(U: np.ndarray) -> np.ndarray:
    """Stratum index of each unit-cube value."""
    n = U.shape[0]
    return np.minimum(np.floor(np.asarray(U) * n).astype(int), n - 1)


def request_for(variables: Sequence[VariableSpec], n: int, seed: int, range_mode: str = "training",
                optimize: bool = True, include_constants: bool = False) -> DesignRequest:
    varying = tuple(v for v in variables if not v.is_constant)
    consts = tuple(v for v in variables if v.is_constant) if include_constants else ()
    return DesignRequest(n, varying, range_mode, seed, optimize, constants=consts)
