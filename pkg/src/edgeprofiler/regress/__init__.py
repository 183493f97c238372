"""Cost regression: feature encoding, gradient-boosted trees, MLP
regressors, bundled predictors, and the model-comparison benchmark."""

from .features import (
    FEATURE_NAMES,
    SCHEMA_VERSION,
    TARGET_NAMES,
    NormalizationStats,
    compute_stats,
    denormalize_target,
    encode,
    encode_many,
    encode_parts,
    extract_targets,
    normalize_features,
    normalize_target,
    nrmse,
)
from .gbdt import GradientBoostedEnsemble, RegressionTree, fit_gbdt, fit_tree
from .mlp import MLPRegressor, fit_mlp_regressor
from .predictor import CostModel, SchemaMismatchError, load_model, save_model
from .benchmark import (
    BenchmarkEntry,
    BenchmarkReport,
    InsufficientDataError,
    run_benchmark,
    write_benchmark_csv,
    write_benchmark_json,
)

__all__ = [
    "FEATURE_NAMES", "SCHEMA_VERSION", "TARGET_NAMES", "NormalizationStats",
    "compute_stats", "denormalize_target", "encode", "encode_many",
    "encode_parts", "extract_targets", "normalize_features",
    "normalize_target", "nrmse",
    "GradientBoostedEnsemble", "RegressionTree", "fit_gbdt", "fit_tree",
    "MLPRegressor", "fit_mlp_regressor",
    "CostModel", "SchemaMismatchError", "load_model", "save_model",
    "BenchmarkEntry", "BenchmarkReport", "InsufficientDataError",
    "run_benchmark", "write_benchmark_csv", "write_benchmark_json",
]
