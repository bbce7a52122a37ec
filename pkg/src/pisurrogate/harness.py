"""Replicated surrogate-accuracy experiments over strategies, input arrangements and trends.

One work unit is a ``(n, replicate)`` pair: it draws one maximin training design
in the original variables, evaluates the testbed, and trains every
``strategy x arrangement x trend`` model on that shared data.  Each model is
scored on every requested test mode, with predictions mapped back to the
original output before the error is computed.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .buckingham import BasisSet, InputArrangement, arrange_inputs, recommend_basis, trend_names
from .dataset import Dataset
from .design import design, request_for
from .fanova import FanovaReport, fanova
from .gasp import OptimizerConfig, predict, train
from .presets import UnavailableStrategy, available_strategies, strategy_transform
from .testbeds import get_testbed

log = logging.getLogger(__name__)

MODES = ("interpolation", "extrapolation")
_RANGE_MODE = {"interpolation": "training", "extrapolation": "extrapolation"}
_TEST_SALT = 0x7E57


class DegenerateDenominator(ValueError):
    pass


class InsufficientData(ValueError):
    pass


class ConfigError(ValueError):
    pass


def n_rmse(pred, truth, train_mean: float) -> float:
    """Test RMSE as a percentage of the RMSE of the constant training-mean predictor."""
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.size != truth.size or truth.size == 0:
        raise ValueError("pred and truth need equal nonzero lengths")
    den = math.sqrt(float(np.mean((train_mean - truth) ** 2)))
    if den == 0.0:
        raise DegenerateDenominator("truth is constant and equal to the training mean")
    # ratio first, so the trivial predictor scores exactly 100
    return 100.0 * (math.sqrt(float(np.mean((pred - truth) ** 2))) / den)


@dataclass(frozen=True)
class ExperimentConfig:
    testbed: str
    strategies: tuple[str, ...] = ("non-da", "fanova-da")
    arrangements: tuple[str, ...] = ("raw",)
    trends: tuple[str, ...] = ("constant",)
    n_values: tuple[int, ...] = (40,)
    replicates: int = 20
    test_size: int = 10_000
    modes: tuple[str, ...] = MODES
    master_seed: int = 1
    workers: int = 1
    kernel: str | None = None  # testbed default when None
    optimizer: OptimizerConfig = OptimizerConfig()
    design_budget: int | None = None

    def __post_init__(self):
        for name in ("strategies", "arrangements", "trends", "n_values", "modes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        tb = get_testbed(self.testbed)
        allowed = available_strategies(self.testbed)
        bad = [s for s in self.strategies if s not in allowed]
        if bad:
            raise ConfigError(f"strategies {bad} unavailable for {self.testbed}; choose from {allowed}")
        object.__setattr__(self, "arrangements",
                           tuple(InputArrangement.parse(a).value for a in self.arrangements))
        if any(t not in ("constant", "linear") for t in self.trends):
            raise ConfigError(f"unknown trend in {self.trends}")
        if any(m not in MODES for m in self.modes):
            raise ConfigError(f"unknown mode in {self.modes}")
        if not self.n_values or min(self.n_values) < 3:
            raise ConfigError("every training size must be >= 3")
        if self.replicates < 1 or self.test_size < 1 or self.workers < 1:
            raise ConfigError("replicates, test_size and workers must be positive")
        if self.kernel is None:
            object.__setattr__(self, "kernel", tb.kernel)

    def replicate_seed(self, replicate: int) -> int:
        return self.master_seed ^ replicate


@dataclass(frozen=True)
class MetricsRecord:
    testbed: str
    strategy: str
    arrangement: str
    trend: str
    n: int
    replicate: int
    mode: str
    e_nrmse: float
    wall_time: float
    nugget: float
    seed: int
    train_checksum: str = ""
    test_checksum: str = ""
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error and math.isfinite(self.e_nrmse)


# presets --------------------------------------------------------------------

_DESK_N = {"gravity": (40,), "borehole": (80, 160), "sphere": (70, 140), "pythagorean": (20,)}
_FULL_N = {"gravity": (40,), "borehole": (80, 160, 320, 640), "sphere": (70, 140, 280, 560),
           "pythagorean": (20, 40)}
_DEFAULTS = {
    "gravity": dict(strategies=("non-da", "initial-da", "fanova-da"), arrangements=("raw",), trends=("constant",)),
    "borehole": dict(strategies=("non-da", "fanova-da", "slc-da"), arrangements=("raw", "log", "expanded_log"),
                     trends=("constant",)),
    "sphere": dict(strategies=("non-da", "t-da", "fanova-da"), arrangements=("raw",), trends=("linear",)),
    "pythagorean": dict(strategies=("non-da", "fanova-da"), arrangements=("raw",), trends=("constant",)),
}


def preset_config(testbed: str, preset: str = "desk", **overrides) -> ExperimentConfig:
    """Desk scale: 5 replicates, N = 2000, small n.  Full scale: 20 replicates, N = 10000."""
    if preset == "desk":
        base = dict(replicates=5, test_size=2000, n_values=_DESK_N[testbed])
    elif preset == "full":
        base = dict(replicates=20, test_size=10_000, n_values=_FULL_N[testbed])
    else:
        raise ConfigError(f"unknown preset {preset!r}")
    base.update(_DEFAULTS[testbed])
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(testbed, **base)


# data -----------------------------------------------------------------------


def _int_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def training_data(cfg: ExperimentConfig, n: int, replicate: int) -> Dataset:
    """Maximin LHD in the original inputs plus the testbed output."""
    tb = get_testbed(cfg.testbed)
    req = request_for(tb.spec.inputs, n, _int_seed(cfg.replicate_seed(replicate), n))
    return tb.with_output(design(req, cfg.design_budget))


def test_data(cfg: ExperimentConfig, mode: str) -> Dataset:
    """Random LHD test set for ``mode``; its seed does not depend on n or the replicate."""
    tb = get_testbed(cfg.testbed)
    req = request_for(tb.spec.inputs, cfg.test_size, _int_seed(cfg.master_seed, _TEST_SALT, MODES.index(mode)),
                      range_mode=_RANGE_MODE[mode], optimize=False)
    return tb.with_output(design(req))


def _prepare(transform, data: Dataset, arrangement: str) -> Dataset:
    return arrange_inputs(transform.forward(data), arrangement)


# running ---------------------------------------------------------------------


def _run_unit(cfg: ExperimentConfig, n: int, replicate: int, tests: dict[str, Dataset]) -> list[MetricsRecord]:
    tb = get_testbed(cfg.testbed)
    train_set = training_data(cfg, n, replicate)
    y_bar = float(train_set.y.mean())
    seed = cfg.replicate_seed(replicate)
    opt = replace(cfg.optimizer, seed=seed)
    records = []
    for strategy in cfg.strategies:
        transform = strategy_transform(tb.id, strategy)
        for arrangement in cfg.arrangements:
            for trend in cfg.trends:
                base = dict(testbed=tb.id, strategy=strategy, arrangement=arrangement, trend=trend, n=n,
                            replicate=replicate, seed=seed, train_checksum=train_set.checksum())
                t0 = time.perf_counter()
                try:
                    data = _prepare(transform, train_set, arrangement)
                    cols = trend_names(transform.input_names, arrangement) if trend == "linear" else None
                    model = train(data, cfg.kernel, trend, cols, opt)
                except Exception as exc:  # recorded, not fatal
                    log.warning("training failed for %s: %s", base, exc)
                    for mode in cfg.modes:
                        records.append(MetricsRecord(**base, mode=mode, e_nrmse=math.nan,
                                                     wall_time=time.perf_counter() - t0, nugget=math.nan,
                                                     test_checksum=tests[mode].checksum(), error=repr(exc)))
                    continue
                fit_time = time.perf_counter() - t0
                for mode in cfg.modes:
                    test = tests[mode]
                    t1 = time.perf_counter()
                    try:
                        q = predict(model, _prepare(transform, test, arrangement), return_se=False).mean
                        y_hat = transform.invert_output(q, test)
                        e, err = n_rmse(y_hat, test.y, y_bar), ""
                        if not math.isfinite(e):
                            e, err = math.nan, "non-finite prediction"
                    except Exception as exc:
                        e, err = math.nan, repr(exc)
                    records.append(MetricsRecord(**base, mode=mode, e_nrmse=e,
                                                 wall_time=fit_time + time.perf_counter() - t1,
                                                 nugget=model.nugget, test_checksum=test.checksum(), error=err))
    return records


def _unit_task(args):
    cfg, n, replicate = args
    tests = {mode: test_data(cfg, mode) for mode in cfg.modes}
    return _run_unit(cfg, n, replicate, tests)


def run_experiment(cfg: ExperimentConfig) -> list[MetricsRecord]:
    """Every (strategy, arrangement, trend, n, replicate, mode) record for ``cfg``."""
    units = [(cfg, n, r) for n in cfg.n_values for r in range(cfg.replicates)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_unit_task, units))
    else:
        tests = {mode: test_data(cfg, mode) for mode in cfg.modes}
        chunks = [_run_unit(cfg, n, r, tests) for _, n, r in units]
    return [rec for chunk in chunks for rec in chunk]


# summaries -------------------------------------------------------------------


def _cell_key(r: MetricsRecord) -> tuple[str, str, str, str, str]:
    return (r.testbed, r.strategy, r.arrangement, r.trend, r.mode)


def convergence_summary(records: Iterable[MetricsRecord], require_slope: bool = True) -> dict:
    """Per cell statistics by n and the least-squares slope of log(mean error) on log(n).

    Cells with fewer than two distinct n raise :class:`InsufficientData`, or get a
    ``None`` slope when ``require_slope`` is false.
    """
    cells: dict[tuple, dict[int, list[float]]] = {}
    for r in records:
        if r.ok:
            cells.setdefault(_cell_key(r), {}).setdefault(r.n, []).append(r.e_nrmse)
    if not cells:
        raise InsufficientData("no successful records")
    out = {}
    for key, by_n in sorted(cells.items()):
        stats = {}
        for n, vals in sorted(by_n.items()):
            v = np.asarray(vals)
            q1, med, q3 = np.percentile(v, [25, 50, 75])
            stats[n] = {"mean": float(v.mean()), "median": float(med), "q1": float(q1), "q3": float(q3),
                        "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0, "count": int(v.size)}
        ns = np.array(sorted(by_n), dtype=float)
        slope = None
        if len(ns) >= 2:
            means = np.array([stats[int(n)]["mean"] for n in ns])
            slope = float(np.polyfit(np.log(ns), np.log(means), 1)[0])
        elif require_slope:
            raise InsufficientData(f"cell {key} has a single training size")
        out["|".join(key)] = {"testbed": key[0], "strategy": key[1], "arrangement": key[2], "trend": key[3],
                              "mode": key[4], "by_n": stats, "slope": slope}
    return out


def cell_means(records: Iterable[MetricsRecord]) -> dict[tuple, float]:
    """Mean error keyed by (strategy, arrangement, trend, n, mode)."""
    acc: dict[tuple, list[float]] = {}
    for r in records:
        if r.ok:
            acc.setdefault((r.strategy, r.arrangement, r.trend, r.n, r.mode), []).append(r.e_nrmse)
    return {k: float(np.mean(v)) for k, v in acc.items()}


# FANOVA stage ----------------------------------------------------------------


@dataclass
class FanovaStage:
    reports: list[FanovaReport]
    bases: list[BasisSet]
    consensus: BasisSet
    n: int
    counts: dict[tuple[str, ...], int] = field(default_factory=dict)


def fanova_stage(cfg: ExperimentConfig, n: int | None = None) -> FanovaStage:
    """FANOVA of non-DA raw-input models at the smallest n; modal recommended basis."""
    tb = get_testbed(cfg.testbed)
    n = min(cfg.n_values) if n is None else n
    reports, bases = [], []
    for r in range(cfg.replicates):
        data = training_data(cfg, n, r)
        model = train(data, cfg.kernel, "constant", None, replace(cfg.optimizer, seed=cfg.replicate_seed(r)))
        rep = fanova(model, curves=False)
        reports.append(rep)
        bases.append(recommend_basis(tb.spec, rep))
    keys = [tuple(sorted(b.members)) for b in bases]
    counts = Counter(keys)
    top = max(counts.values())
    modal = [k for k in counts if counts[k] == top]
    if len(modal) > 1:
        log.info("FANOVA consensus tie among %s; keeping the first replicate's choice", modal)
        first = next(k for k in keys if k in modal)
    else:
        first = modal[0]
    consensus = bases[keys.index(first)]
    return FanovaStage(reports, bases, consensus, n, dict(counts))


# output ----------------------------------------------------------------------


def write_records_csv(records: Sequence[MetricsRecord], path: str | Path) -> None:
    names = [f.name for f in fields(MetricsRecord)]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=names)
        w.writeheader()
        for r in records:
            w.writerow(asdict(r))


def read_records_csv(path: str | Path) -> list[MetricsRecord]:
    types = {f.name: f.type for f in fields(MetricsRecord)}
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for k, v in row.items():
                t = types[k]
                kw[k] = int(v) if t == "int" else float(v) if t == "float" else v
            out.append(MetricsRecord(**kw))
    return out


def write_outputs(records: Sequence[MetricsRecord], out_dir: str | Path, cfg: ExperimentConfig | None = None) -> dict:
    """``records.csv`` plus ``summary.json``; returns the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records_csv(records, out / "records.csv")
    summary = {"cells": convergence_summary(records, require_slope=False) if any(r.ok for r in records) else {},
               "failures": sum(not r.ok for r in records)}
    if cfg is not None:
        c = asdict(cfg)
        c["optimizer"] = asdict(cfg.optimizer)
        summary["config"] = c
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=str))
    return summary
