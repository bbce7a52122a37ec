"""Dimensional-analysis transforms for Gaussian-process surrogates of computer codes."""

from .buckingham import (
    BasisError, BasisSet, CuratedRecipes, InputArrangement, NotIndependent, NotRepresentative, PiTransform,
    apply_transform, arrange_inputs, build_pi_transform, recommend_basis, solve_exponents, validate_basis,
)
from .dataset import Dataset
from .design import DesignRequest, design, lhd, maximin_lhd, request_for
from .dimensions import (
    DIMENSIONLESS, DimensionVector, Role, SystemSpec, VariableSpec, check_expr, dim_mul, dim_pow, dump_system,
    evaluate, load_system, parse_expr,
)
from .fanova import EffectCurve, FanovaReport, fanova, main_effect_curve
from .gasp import GaspModel, KernelSpec, OptimizerConfig, Prediction, TrendSpec, fit_arrays, predict, train
from .harness import (
    ExperimentConfig, MetricsRecord, convergence_summary, fanova_stage, n_rmse, preset_config, run_experiment,
)
from .presets import available_strategies, strategy_transform
from .testbeds import TESTBEDS, get_testbed

__version__ = "0.1.0"

__all__ = [
    "BasisError", "BasisSet", "CuratedRecipes", "DIMENSIONLESS", "Dataset", "DesignRequest", "DimensionVector",
    "EffectCurve", "ExperimentConfig", "FanovaReport", "GaspModel", "InputArrangement", "KernelSpec",
    "MetricsRecord", "NotIndependent", "NotRepresentative", "OptimizerConfig", "PiTransform", "Prediction", "Role",
    "SystemSpec", "TESTBEDS", "TrendSpec", "VariableSpec", "apply_transform", "arrange_inputs",
    "available_strategies", "build_pi_transform", "check_expr", "convergence_summary", "design", "dim_mul",
    "dim_pow", "dump_system", "evaluate", "fanova", "fanova_stage", "fit_arrays", "get_testbed", "lhd",
    "load_system", "main_effect_curve", "maximin_lhd", "n_rmse", "parse_expr", "predict", "preset_config",
    "recommend_basis", "request_for", "run_experiment", "solve_exponents", "strategy_transform", "train",
    "validate_basis",
]
