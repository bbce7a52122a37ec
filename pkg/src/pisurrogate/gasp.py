"""Gaussian stochastic process (GaSP) regression.

Model: ``Y(x) = f(x)^T beta + Z(x)`` with ``Z`` a zero-mean Gaussian process of
variance ``sigma^2`` and product power-exponential correlation

    R(x, x') = prod_j exp(-theta_j * |x_j - x'_j| ** p_j).

``beta`` and ``sigma^2`` are concentrated out of the likelihood by generalised
least squares; ``(log theta, p)`` are found by multi-start L-BFGS-B with
analytic gradients.  Inputs are rescaled to [0, 1] on the training data and the
output is standardised internally; both transforms are stored with the model.
"""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import linalg, optimize

from .dataset import Dataset

log = logging.getLogger(__name__)

FORMAT_VERSION = "pisurrogate.gasp/1"
POWER_EXPONENTIAL = "power_exponential"
SQUARED_EXPONENTIAL = "squared_exponential"
KERNEL_FAMILIES = (POWER_EXPONENTIAL, SQUARED_EXPONENTIAL)
NUGGET_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


class CholeskyFailure(np.linalg.LinAlgError):
    """Correlation matrix is not numerically positive definite."""


class OptimizationFailure(RuntimeError):
    pass


class ColumnMismatch(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    family: str
    theta: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        power = np.broadcast_to(np.asarray(self.power, dtype=float), theta.shape).copy()
        if self.family == SQUARED_EXPONENTIAL:
            power[:] = 2.0
        if np.any(theta < 0):
            raise ValueError("scale parameters must be nonnegative")
        if np.any((power < 1) | (power > 2)):
            raise ValueError("smoothness parameters must lie in [1, 2]")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "power", power)

    @property
    def d(self) -> int:
        return self.theta.size


@dataclass(frozen=True)
class TrendSpec:
    """Constant or linear mean; ``columns`` index the inputs used as linear regressors."""

    kind: str = "constant"
    columns: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("constant", "linear"):
            raise ValueError(f"unknown trend {self.kind!r}")
        object.__setattr__(self, "columns", tuple(int(c) for c in self.columns))

    def design_matrix(self, X: np.ndarray) -> np.ndarray:
        ones = np.ones((X.shape[0], 1))
        if self.kind == "constant":
            return ones
        return np.hstack([ones, X[:, list(self.columns)]])

    @property
    def size(self) -> int:
        return 1 if self.kind == "constant" else 1 + len(self.columns)


@dataclass(frozen=True)
class OptimizerConfig:
    n_starts: int = 8
    max_iter: int = 500
    estimate_power: bool = True
    theta_bounds: tuple[float, float] = (1e-6, 1e4)
    power_bounds: tuple[float, float] = (1.0, 2.0)
    nugget_ladder: tuple[float, ...] = NUGGET_LADDER
    seed: int = 0


def correlation(X1: np.ndarray, X2: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    """Product-form correlation matrix between the rows of ``X1`` and ``X2``."""
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    S = np.zeros((X1.shape[0], X2.shape[0]))
    for j in range(kernel.d):
        diff = np.abs(X1[:, j, None] - X2[None, :, j])
        S += kernel.theta[j] * (diff * diff if kernel.power[j] == 2.0 else diff ** kernel.power[j])
    return np.exp(-S)


def _cholesky(R: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; numerically rank-deficient matrices count as failures."""
    try:
        L = np.linalg.cholesky(R)
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure(str(exc)) from None
    if np.min(np.diag(L)) ** 2 < 10 * R.shape[0] * np.finfo(float).eps:
        raise CholeskyFailure("correlation matrix is numerically singular")
    return L


@dataclass
class _Fit:
    """GLS quantities at one parameter point."""

    L: np.ndarray
    beta: np.ndarray
    sigma2: float
    alpha: np.ndarray  # R^-1 (y - F beta)
    logdet: float
    nll: float
    nugget: float
    R0: np.ndarray


def _gls(R0: np.ndarray, y: np.ndarray, F: np.ndarray, nugget: float) -> _Fit:
    n = y.size
    R = R0 + nugget * np.eye(n) if nugget else R0
    L = _cholesky(R)
    cf = (L, True)
    RiF = linalg.cho_solve(cf, F)
    Riy = linalg.cho_solve(cf, y)
    FtRiF = F.T @ RiF
    beta = np.linalg.solve(FtRiF, F.T @ Riy)
    alpha = Riy - RiF @ beta
    resid = y - F @ beta
    sigma2 = float(resid @ alpha) / n
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    if sigma2 <= 0:
        nll = -np.inf
    else:
        nll = 0.5 * (n * math.log(sigma2) + logdet + n * (1.0 + math.log(2 * math.pi)))
    return _Fit(L, beta, sigma2, alpha, logdet, nll, nugget, R0)


def neg_log_likelihood(kernel: KernelSpec, trend: TrendSpec, data: Dataset | tuple[np.ndarray, np.ndarray],
                       nugget: float = 0.0) -> float:
    """Concentrated negative log-likelihood at fixed correlation parameters.

    Inputs are used as given (no rescaling).  Raises :class:`CholeskyFailure` when
    ``R + nugget*I`` is not numerically positive definite.
    """
    X, y = _xy(data)
    if y.size <= trend.size:
        raise ValueError("need more runs than trend coefficients")
    F = trend.design_matrix(X)
    return _gls(correlation(X, X, kernel), y, F, nugget).nll


def profile_estimates(kernel: KernelSpec, trend: TrendSpec, data, nugget: float = 0.0) -> tuple[np.ndarray, float]:
    """(beta_hat, sigma2_hat) at fixed correlation parameters."""
    X, y = _xy(data)
    fit = _gls(correlation(X, X, kernel), y, trend.design_matrix(X), nugget)
    return fit.beta, fit.sigma2


def _xy(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, Dataset):
        return data.X, data.y
    X, y = data
    return np.atleast_2d(np.asarray(X, dtype=float)), np.asarray(y, dtype=float).ravel()


class _Objective:
    """Profile NLL and gradient in ``(log theta, p)`` with the nugget ladder.

    Pairwise absolute differences are precomputed once per training set.
    """

    def __init__(self, X, y, F, family, estimate_power, ladder):
        self.y, self.F = y, F
        self.n, self.d = X.shape
        absdiff = np.abs(X.T[:, :, None] - X.T[:, None, :])  # (d, n, n)
        self.family = family
        self.estimate_power = estimate_power and family == POWER_EXPONENTIAL
        with np.errstate(divide="ignore"):
            self.logabs = np.where(absdiff > 0, np.log(np.where(absdiff > 0, absdiff, 1.0)), 0.0)
        self.zero = absdiff == 0
        self.sq = absdiff**2
        self.ladder = ladder

    def unpack(self, z):
        theta = np.exp(z[: self.d])
        power = z[self.d:] if self.estimate_power else np.full(self.d, 2.0)
        return theta, power

    def powered(self, power):
        if np.all(power == 2.0):
            return self.sq
        P = np.exp(power[:, None, None] * self.logabs)
        P[self.zero] = 0.0
        return P

    def fit(self, z) -> tuple[_Fit, np.ndarray]:
        theta, power = self.unpack(z)
        P = self.powered(power)
        R0 = np.exp(-np.tensordot(theta, P, axes=1))
        last = None
        for nugget in self.ladder:
            try:
                return _gls(R0, self.y, self.F, nugget), P
            except CholeskyFailure as exc:
                last = exc
        raise last

    def __call__(self, z):
        try:
            fit, P = self.fit(z)
        except CholeskyFailure:
            return 1e25, np.zeros_like(z)
        if not np.isfinite(fit.nll):
            return 1e25, np.zeros_like(z)
        theta, _ = self.unpack(z)
        Rinv = linalg.cho_solve((fit.L, True), np.eye(self.n))
        W = Rinv - np.outer(fit.alpha, fit.alpha) / fit.sigma2
        M = W * fit.R0
        # dR/dlog(theta_j) = -R0 * theta_j * |diff_j|^p_j
        g_theta = -0.5 * theta * np.einsum("ij,kij->k", M, P)
        if not self.estimate_power:
            return fit.nll, g_theta
        g_power = -0.5 * theta * np.einsum("ij,kij->k", M, P * self.logabs)
        return fit.nll, np.concatenate([g_theta, g_power])


@dataclass(frozen=True)
class Prediction:
    mean: np.ndarray
    se: np.ndarray


@dataclass(frozen=True)
class GaspModel:
    """A trained GaSP surrogate.

    Parameters live on the internal scale: inputs mapped to [0, 1] by
    ``(x - x_lo) / (x_hi - x_lo)`` and the output standardised by ``(y - y_mean) / y_scale``.
    """

    columns: tuple[str, ...]
    kernel: KernelSpec
    trend: TrendSpec
    beta: np.ndarray
    sigma2: float
    X: np.ndarray
    y: np.ndarray
    nugget: float
    x_lo: np.ndarray
    x_hi: np.ndarray
    y_mean: float
    y_scale: float
    loglik: float
    seed: int = 0
    output: str = "y"
    L: np.ndarray = field(default=None, repr=False)
    gamma: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.L is None:
            n = self.y.size
            R = correlation(self.X, self.X, self.kernel) + self.nugget * np.eye(n)
            object.__setattr__(self, "L", _cholesky(R))
        if self.gamma is None:
            F = self.trend.design_matrix(self.X)
            object.__setattr__(self, "gamma", linalg.cho_solve((self.L, True), self.y - F @ self.beta))

    @property
    def d(self) -> int:
        return len(self.columns)

    def scale(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.x_lo) / (self.x_hi - self.x_lo)

    def predict(self, data, return_se: bool = True) -> Prediction:
        return predict(self, data, return_se)

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "columns": list(self.columns),
            "output": self.output,
            "kernel": {"family": self.kernel.family, "theta": self.kernel.theta.tolist(),
                       "power": self.kernel.power.tolist()},
            "trend": {"kind": self.trend.kind, "columns": list(self.trend.columns)},
            "beta": self.beta.tolist(),
            "sigma2": self.sigma2,
            "nugget": self.nugget,
            "scaling": {"x_lo": self.x_lo.tolist(), "x_hi": self.x_hi.tolist(),
                        "y_mean": self.y_mean, "y_scale": self.y_scale},
            "loglik": self.loglik,
            "seed": self.seed,
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "gamma": self.gamma.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> GaspModel:
        if d.get("format") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {d.get('format')!r}")
        k, s = d["kernel"], d["scaling"]
        return cls(
            columns=tuple(d["columns"]),
            kernel=KernelSpec(k["family"], np.array(k["theta"]), np.array(k["power"])),
            trend=TrendSpec(d["trend"]["kind"], tuple(d["trend"]["columns"])),
            beta=np.array(d["beta"]),
            sigma2=float(d["sigma2"]),
            X=np.array(d["X"]),
            y=np.array(d["y"]),
            nugget=float(d["nugget"]),
            x_lo=np.array(s["x_lo"]),
            x_hi=np.array(s["x_hi"]),
            y_mean=float(s["y_mean"]),
            y_scale=float(s["y_scale"]),
            loglik=float(d["loglik"]),
            seed=int(d.get("seed", 0)),
            output=d.get("output", "y"),
            gamma=np.array(d["gamma"]) if "gamma" in d else None,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> GaspModel:
        return cls.from_dict(json.loads(Path(path).read_text()))


def _starts(d: int, n_starts: int, rng: np.random.Generator, bounds) -> list[np.ndarray]:
    """Starting log scale parameters: one central point, the rest log-uniform."""
    lo, hi = bounds
    starts = []
    for s in range(n_starts):
        if s == 0:
            log_theta = np.full(d, math.log(1.0 / d))
        else:
            log_theta = rng.uniform(math.log(0.05 / d), math.log(20.0 / d), size=d)
        starts.append(np.clip(log_theta, math.log(lo), math.log(hi)))
    return starts


def _minimize(obj, z0, bounds, max_iter):
    try:
        res = optimize.minimize(obj, z0, jac=True, method="L-BFGS-B", bounds=bounds,
                                options={"maxiter": max_iter})
    except (np.linalg.LinAlgError, ValueError) as exc:
        log.debug("start failed: %s", exc)
        return None
    if res.fun >= 1e24 or not np.isfinite(res.fun):
        return None
    return res


def fit_arrays(X: np.ndarray, y: np.ndarray, kernel: str = POWER_EXPONENTIAL, trend: str = "constant",
               trend_columns: Sequence[int] | None = None, config: OptimizerConfig | None = None,
               columns: Sequence[str] | None = None, output: str = "y") -> GaspModel:
    """Maximum-likelihood GaSP fit on raw arrays (see :func:`train`)."""
    config = config or OptimizerConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    columns = tuple(columns) if columns is not None else tuple(f"x{j + 1}" for j in range(d))
    if trend == "linear":
        trend_spec = TrendSpec("linear", tuple(range(d)) if trend_columns is None else tuple(trend_columns))
    else:
        trend_spec = TrendSpec("constant")
    if n <= trend_spec.size:
        raise ValueError("need more runs than trend coefficients")
    x_lo, x_hi = X.min(axis=0), X.max(axis=0)
    if np.any(x_hi <= x_lo):
        bad = [columns[j] for j in np.flatnonzero(x_hi <= x_lo)]
        raise ValueError(f"constant input columns cannot be modelled: {bad}")
    Xs = (X - x_lo) / (x_hi - x_lo)
    y_mean = float(y.mean())
    y_scale = float(y.std())
    F = trend_spec.design_matrix(Xs)
    if y_scale == 0.0 or y_scale < 1e-14 * max(abs(y_mean), 1e-300):
        # degenerate output: zero process variance, constant predictions
        kern = KernelSpec(kernel, np.ones(d), 2.0 if kernel == SQUARED_EXPONENTIAL else 1.9)
        return GaspModel(columns, kern, trend_spec, np.zeros(trend_spec.size), 0.0, Xs, np.zeros(n), 0.0,
                         x_lo, x_hi, y_mean, 1.0, np.inf, config.seed, output)
    ys = (y - y_mean) / y_scale

    estimate_power = config.estimate_power and kernel == POWER_EXPONENTIAL
    obj = _Objective(Xs, ys, F, kernel, estimate_power, config.nugget_ladder)
    lt = (math.log(config.theta_bounds[0]), math.log(config.theta_bounds[1]))
    bounds = [lt] * d + ([config.power_bounds] * d if estimate_power else [])
    rng = np.random.default_rng(config.seed)
    # Smoothness is released only after a fit at p = 2: joint searches started in
    # the interior tend to stall in poor local optima below the p = 2 face.
    se_obj = copy.copy(obj)
    se_obj.estimate_power = False
    best = None
    for z0 in _starts(d, config.n_starts, rng, config.theta_bounds):
        candidates = []
        res = _minimize(se_obj, z0, bounds[:d], config.max_iter)
        if res is not None and estimate_power:
            z1 = np.concatenate([res.x, np.full(d, config.power_bounds[1])])
            candidates.append(optimize.OptimizeResult(x=z1, fun=res.fun))
            candidates.append(_minimize(obj, z1, bounds, config.max_iter))
            # an interior start too; which one wins depends on the data
            p0 = rng.uniform(max(1.2, config.power_bounds[0]), config.power_bounds[1], size=d)
            candidates.append(_minimize(obj, np.concatenate([z0, p0]), bounds, config.max_iter))
        else:
            candidates.append(res)
        for c in candidates:
            if c is not None and (best is None or c.fun < best.fun):
                best = c
    if best is None:
        raise OptimizationFailure("every optimizer start failed")
    fit, _ = obj.fit(best.x)
    theta, power = obj.unpack(best.x)
    kern = KernelSpec(kernel, theta, power)
    gamma = fit.alpha
    return GaspModel(columns, kern, trend_spec, fit.beta, fit.sigma2, Xs, ys, fit.nugget, x_lo, x_hi,
                     y_mean, y_scale, -fit.nll, config.seed, output, fit.L, gamma)


def train(data: Dataset, kernel: str = POWER_EXPONENTIAL, trend: str = "constant",
          trend_columns: Sequence[str] | None = None, config: OptimizerConfig | None = None) -> GaspModel:
    """Fit a GaSP model to the inputs and output of ``data`` by maximum likelihood.

    ``trend_columns`` names the linear-trend regressors (default: every input).
    """
    cols = data.input_columns
    idx = None
    if trend == "linear" and trend_columns is not None:
        missing = [c for c in trend_columns if c not in cols]
        if missing:
            raise ColumnMismatch(f"trend regressors {missing} are not model inputs")
        idx = [cols.index(c) for c in trend_columns]
    return fit_arrays(data.X, data.y, kernel, trend, idx, config, cols, data.output or "y")


def predict(model: GaspModel, data, return_se: bool = True, chunk: int = 4096) -> Prediction:
    """BLUP mean and universal-kriging standard error at new inputs."""
    if isinstance(data, Dataset):
        missing = [c for c in model.columns if c not in data.columns]
        if missing:
            raise ColumnMismatch(f"test data lacks model inputs {missing}")
        X = data.select(model.columns)
    else:
        X = np.atleast_2d(np.asarray(data, dtype=float))
        if X.shape[1] != model.d:
            raise ColumnMismatch(f"expected {model.d} input columns, got {X.shape[1]}")
    means, ses = [], []
    cf = (model.L, True)
    F = model.trend.design_matrix(model.X)
    if return_se:
        RiF = linalg.cho_solve(cf, F)
        A = np.linalg.inv(F.T @ RiF)
    for start in range(0, X.shape[0], chunk):
        Xs = model.scale(X[start:start + chunk])
        r = correlation(Xs, model.X, model.kernel)
        f = model.trend.design_matrix(Xs)
        m = f @ model.beta + r @ model.gamma
        means.append(model.y_mean + model.y_scale * m)
        if return_se:
            Rir = linalg.cho_solve(cf, r.T)
            u = f.T - F.T @ Rir
            var = 1.0 - np.einsum("ij,ji->i", r, Rir) + np.einsum("ij,jk,ki->i", u.T, A, u)
            ses.append(model.y_scale * np.sqrt(np.maximum(model.sigma2 * var, 0.0)))
    mean = np.concatenate(means)
    se = np.concatenate(ses) if return_se else np.full(mean.shape, np.nan)
    return Prediction(mean, se)


__all__ = [
    "CholeskyFailure", "ColumnMismatch", "GaspModel", "KernelSpec", "OptimizationFailure",
    "OptimizerConfig", "Prediction", "TrendSpec", "correlation", "fit_arrays", "neg_log_likelihood",
    "predict", "profile_estimates", "train",
]
