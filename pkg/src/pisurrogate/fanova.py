"""Functional ANOVA of a trained GaSP predictor under uniform input weights.

The predictor is a sum of separable terms: trend terms ``beta_t * prod_j phi_tj(x_j)``
(with ``phi`` equal to 1 or ``x_j``) and kernel terms ``gamma_i * prod_j R_j(x_j, x_ij)``.
Every integral over a subset of inputs therefore factorises into 1-D integrals,
which are done by Gauss-Legendre quadrature on each input's range.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import linalg

from .gasp import KERNEL_FAMILIES, GaspModel, correlation

DEFAULT_NODES = 64


class NonProductKernel(ValueError):
    pass


class UnknownInput(KeyError):
    pass


@dataclass(frozen=True)
class EffectCurve:
    """Centred main effect on an equispaced grid with approximate 95% pointwise bands."""

    input: str
    x: np.ndarray
    effect: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "effect", "lo", "hi"])
            for row in zip(self.x, self.effect, self.lower, self.upper):
                w.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class FanovaReport:
    """Percentages are relative to ``total_variance`` (all orders of interaction)."""

    mean: float
    total_variance: float
    main_effects: dict[str, float]
    interactions: dict[tuple[str, str], float]
    residual: float
    curves: dict[str, EffectCurve] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def ranked(self) -> list[tuple[str, float]]:
        """Main effects and interactions, largest first."""
        items = [(k, v) for k, v in self.main_effects.items()]
        items += [(f"{a}:{b}", v) for (a, b), v in self.interactions.items()]
        return sorted(items, key=lambda kv: -kv[1])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["effect", "percent"])
            for name, pct in self.ranked():
                w.writerow([name, repr(float(pct))])
            w.writerow(["residual", repr(float(self.residual))])


class _Terms:
    """Per-dimension quadrature tables of the separable predictor terms.

    Row ``t`` of every table belongs to term ``t``: trend terms first, then one
    kernel term per training run.  Coordinates are the model's scaled inputs.
    """

    def __init__(self, model: GaspModel, ranges: Mapping[str, tuple[float, float]] | None, nodes: int):
        if model.kernel.family not in KERNEL_FAMILIES:
            raise NonProductKernel(model.kernel.family)
        self.model = model
        d = model.d
        ranges = dict(ranges or {})
        unknown = set(ranges) - set(model.columns)
        if unknown:
            raise UnknownInput(f"ranges given for unknown inputs {sorted(unknown)}")
        lo = np.zeros(d)
        hi = np.ones(d)
        span = model.x_hi - model.x_lo
        for j, c in enumerate(model.columns):
            if c in ranges:
                a, b = ranges[c]
                lo[j], hi[j] = (a - model.x_lo[j]) / span[j], (b - model.x_lo[j]) / span[j]
        if np.any(hi <= lo):
            raise ValueError("every FANOVA range needs lo < hi")
        self.lo, self.hi = lo, hi
        u, w = np.polynomial.legendre.leggauss(nodes)
        self.w = w / 2.0
        self.nodes = lo[:, None] + (u[None, :] + 1.0) / 2.0 * (hi - lo)[:, None]  # (d, K)
        self.coef = np.concatenate([model.beta, model.gamma])
        # phi[j]: (T, K) values of every term's factor in dimension j at the nodes
        self.phi = np.stack([self.factor(j, self.nodes[j]) for j in range(d)])
        self.m = self.phi @ self.w  # (d, T)
        self._grams: dict[int, np.ndarray] = {}

    def factor(self, j: int, x: np.ndarray) -> np.ndarray:
        """Term factors in dimension ``j`` at scaled points ``x``: shape (T, len(x))."""
        model = self.model
        x = np.asarray(x, dtype=float)
        trend = np.ones((model.trend.size, x.size))
        if model.trend.kind == "linear":
            for t, col in enumerate(model.trend.columns, start=1):
                if col == j:
                    trend[t] = x
        theta, p = model.kernel.theta[j], model.kernel.power[j]
        kern = np.exp(-theta * np.abs(x[None, :] - model.X[:, j, None]) ** p)
        return np.vstack([trend, kern])

    def gram(self, j: int) -> np.ndarray:
        if j not in self._grams:
            self._grams[j] = (self.phi[j] * self.w) @ self.phi[j].T
        return self._grams[j]

    def prod_m(self, exclude: tuple[int, ...] = ()) -> np.ndarray:
        keep = [k for k in range(self.m.shape[0]) if k not in exclude]
        return np.prod(self.m[keep], axis=0) if keep else np.ones(self.m.shape[1])

    def main_values(self, j: int) -> np.ndarray:
        """E[y_s | x_j] at the nodes of dimension j."""
        return (self.coef * self.prod_m((j,))) @ self.phi[j]

    def pair_values(self, j: int, k: int) -> np.ndarray:
        """E[y_s | x_j, x_k] on the node grid of dimensions j and k."""
        return (self.phi[j].T * (self.coef * self.prod_m((j, k)))) @ self.phi[k]

    def total_variance(self, mu: float, qmc_points: int = 2**16, seed: int = 0) -> tuple[float, str]:
        """Var(y_s) over the box, exact when rounding allows and by scrambled Sobol otherwise.

        The exact value is a quadratic form in the predictor coefficients; for
        near-singular correlation matrices those coefficients are huge and the
        form cancels catastrophically, which the rounding bound detects.
        """
        A = np.ones((self.coef.size, self.coef.size))
        for j in range(self.model.d):
            A = A * self.gram(j)
        exact = float(self.coef @ A @ self.coef) - mu**2
        c = np.abs(self.coef)
        bound = 4 * self.coef.size * np.finfo(float).eps * float(c @ np.abs(A) @ c)
        if bound <= 1e-9 * max(exact, 0.0):
            return exact, "quadrature"
        from scipy.stats import qmc

        sampler = qmc.Sobol(self.model.d, scramble=True, seed=seed)
        U = sampler.random(qmc_points)
        values = np.concatenate([self.predictor(self.lo + U[i:i + 8192] * (self.hi - self.lo))
                                 for i in range(0, qmc_points, 8192)])
        return float(values.var()), "sobol"

    def predictor(self, Xs: np.ndarray) -> np.ndarray:
        model = self.model
        return model.trend.design_matrix(Xs) @ model.beta + correlation(Xs, model.X, model.kernel) @ model.gamma


def _clamp(v: float) -> float:
    return max(float(v), 0.0)


def fanova(model: GaspModel, ranges: Mapping[str, tuple[float, float]] | None = None,
           grid: int = DEFAULT_NODES, curve_points: int = 25, curves: bool = True) -> FanovaReport:
    """Variance decomposition of the model's predictor into main effects and pairwise interactions.

    ``ranges`` maps input names to ``(lo, hi)`` in original units and defaults to
    the training box.  ``grid`` is the number of Gauss-Legendre nodes per input.
    """
    terms = _Terms(model, ranges, grid)
    d = model.d
    w = terms.w
    mu_s = float(terms.coef @ terms.prod_m())
    total_s, method = terms.total_variance(mu_s)
    total = _clamp(total_s) * model.y_scale**2
    names = model.columns
    if total_s <= 1e-14 * max(1.0, mu_s**2):
        main = {c: 0.0 for c in names}
        inter = {(a, b): 0.0 for a, b in itertools.combinations(names, 2)}
        residual = 0.0
    else:
        v_main = np.array([float(w @ (terms.main_values(j) - mu_s) ** 2) for j in range(d)])
        main = {c: float(100.0 * _clamp(v_main[j]) / total_s) for j, c in enumerate(names)}
        inter = {}
        for j, k in itertools.combinations(range(d), 2):
            v = float(w @ (terms.pair_values(j, k) - mu_s) ** 2 @ w) - v_main[j] - v_main[k]
            inter[(names[j], names[k])] = float(100.0 * _clamp(v) / total_s)
        residual = _clamp(100.0 - sum(main.values()) - sum(inter.values()))
    report_curves = {}
    if curves:
        for c in names:
            report_curves[c] = _curve(terms, names.index(c), curve_points, mu_s)
    meta = {"denominator": "total predictor variance", "total_method": method, "nodes": grid, "weights": "uniform",
            "ranges": {c: _unscale(model, j, terms.lo[j], terms.hi[j]) for j, c in enumerate(names)}}
    return FanovaReport(model.y_mean + model.y_scale * mu_s, total, main, inter, residual, report_curves, meta)


def _unscale(model: GaspModel, j: int, a: float, b: float) -> tuple[float, float]:
    span = model.x_hi[j] - model.x_lo[j]
    return (float(model.x_lo[j] + a * span), float(model.x_lo[j] + b * span))


def _curve(terms: _Terms, j: int, points: int, mu_s: float) -> EffectCurve:
    model = terms.model
    xs = np.linspace(terms.lo[j], terms.hi[j], points)
    rest = terms.prod_m((j,))
    Phi = terms.factor(j, xs) * rest[:, None]  # (T, points): integrated term values
    effect_s = terms.coef @ Phi - mu_s
    q = model.trend.size
    fbar, rbar = Phi[:q], Phi[q:]
    # plug-in kriging variance of the integrated predictor
    dbl = np.ones(1)
    for k in range(model.d):
        if k == j:
            continue
        nk = terms.nodes[k]
        Rk = np.exp(-model.kernel.theta[k] * np.abs(nk[:, None] - nk[None, :]) ** model.kernel.power[k])
        dbl = dbl * (terms.w @ Rk @ terms.w)
    cf = (model.L, True)
    F = model.trend.design_matrix(model.X)
    RiF = linalg.cho_solve(cf, F)
    Rir = linalg.cho_solve(cf, rbar)
    u = fbar - F.T @ Rir
    A = np.linalg.inv(F.T @ RiF)
    var = float(dbl[0]) - np.einsum("ij,ij->j", rbar, Rir) + np.einsum("ij,ik,kj->j", u, A, u)
    se = model.y_scale * np.sqrt(np.maximum(model.sigma2 * var, 0.0))
    effect = model.y_scale * effect_s
    x = model.x_lo[j] + xs * (model.x_hi[j] - model.x_lo[j])
    return EffectCurve(model.columns[j], x, effect, effect - 1.96 * se, effect + 1.96 * se)


def main_effect_curve(model: GaspModel, input: str, grid: int = 25,
                      ranges: Mapping[str, tuple[float, float]] | None = None,
                      nodes: int = DEFAULT_NODES) -> EffectCurve:
    """Centred main effect of ``input`` with approximate 95% pointwise bands."""
    if input not in model.columns:
        raise UnknownInput(f"{input!r} is not a model input; inputs are {list(model.columns)}")
    terms = _Terms(model, ranges, nodes)
    mu_s = float(terms.coef @ terms.prod_m())
    return _curve(terms, model.columns.index(input), grid, mu_s)
