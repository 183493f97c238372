"""Feature encoding and normalization for the cost regressors.

A profiled run becomes a fixed 21-wide vector: 12 numeric columns
followed by three one-hot blocks (family 2, optimizer 4, arch_tag 3).
Size-like columns (params, MACs, learning rate) are log10-scaled.

Normalization is min-max per column, computed on the training split
only; columns with zero range map to 0 and out-of-range values clamp
to [0, 1].  The wall-time target is modeled as log10(seconds), so its
nRMSE is a log-space quantity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import workload
from ..profiler import HardwareDescriptor, ProfileSample
from ..workload import DatasetSpec, Family, ModelConfig, Optimizer

SCHEMA_VERSION = 1

FEATURE_NAMES = [
    "depth", "hidden_units", "conv_layers", "log10_params", "log10_macs",
    "epochs", "batch_size", "log10_lr", "num_samples", "clock_ghz",
    "logical_cores", "speed_factor",
    "family_mlp", "family_cnn",
    "opt_adam", "opt_sgd", "opt_rmsprop", "opt_adagrad",
    "arch_x86_64", "arch_aarch64", "arch_other",
]

TARGET_NAMES = ("flops", "macs", "log_time_s")

_OPT_ORDER = (Optimizer.ADAM, Optimizer.SGD, Optimizer.RMSPROP, Optimizer.ADAGRAD)
_ARCH_ORDER = ("x86_64", "aarch64", "other")


def encode_parts(config: ModelConfig, data: DatasetSpec,
                 hardware: HardwareDescriptor) -> np.ndarray:
    """21-wide feature vector for one (config, dataset, hardware) triple."""
    counts = workload.count_costs(config, data)
    arch = config.arch
    if arch.family is Family.MLP:
        depth = len(arch.mlp_hidden)
        hidden_units = sum(arch.mlp_hidden)
        conv_layers = 0
    else:
        depth = len(arch.conv_layers)
        hidden_units = 0
        conv_layers = len(arch.conv_layers)

    numeric = [
        float(depth), float(hidden_units), float(conv_layers),
        np.log10(counts.params),
        np.log10(counts.forward_macs_per_sample),
        float(config.epochs), float(config.batch_size),
        np.log10(config.learning_rate),
        float(data.num_samples),
        hardware.clock_ghz, float(hardware.logical_cores),
        hardware.speed_factor,
    ]
    family = [1.0 if arch.family is f else 0.0 for f in (Family.MLP, Family.CNN)]
    opt = [1.0 if config.optimizer is o else 0.0 for o in _OPT_ORDER]
    tag = [1.0 if hardware.arch_tag == t else 0.0 for t in _ARCH_ORDER]
    return np.array(numeric + family + opt + tag, dtype=np.float64)


def encode(sample: ProfileSample) -> np.ndarray:
    return encode_parts(sample.config, sample.data, sample.hardware)


def encode_many(samples: list[ProfileSample]) -> np.ndarray:
    return np.stack([encode(s) for s in samples]) if samples else \
        np.empty((0, len(FEATURE_NAMES)))


def extract_targets(samples: list[ProfileSample]) -> dict[str, np.ndarray]:
    """The three regression targets; wall time enters as log10 seconds."""
    return {
        "flops": np.array([float(s.flops) for s in samples]),
        "macs": np.array([float(s.macs) for s in samples]),
        "log_time_s": np.array([np.log10(s.total_time_s) for s in samples]),
    }


@dataclass(frozen=True)
class NormalizationStats:
    """Train-split min/max per feature column and per target."""

    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: dict[str, float]
    target_max: dict[str, float]

    def target_range(self, name: str) -> float:
        return self.target_max[name] - self.target_min[name]

    def to_dict(self) -> dict:
        return {
            "feature_min": self.feature_min.tolist(),
            "feature_max": self.feature_max.tolist(),
            "target_min": dict(self.target_min),
            "target_max": dict(self.target_max),
        }

    @staticmethod
    def from_dict(d: dict) -> "NormalizationStats":
        return NormalizationStats(
            feature_min=np.array(d["feature_min"], dtype=np.float64),
            feature_max=np.array(d["feature_max"], dtype=np.float64),
            target_min={k: float(v) for k, v in d["target_min"].items()},
            target_max={k: float(v) for k, v in d["target_max"].items()},
        )


def compute_stats(x_train: np.ndarray,
                  targets_train: dict[str, np.ndarray]) -> NormalizationStats:
    if x_train.ndim != 2 or x_train.shape[0] == 0:
        raise ValueError("need a non-empty 2-d training feature matrix")
    return NormalizationStats(
        feature_min=x_train.min(axis=0),
        feature_max=x_train.max(axis=0),
        target_min={k: float(v.min()) for k, v in targets_train.items()},
        target_max={k: float(v.max()) for k, v in targets_train.items()},
    )


def normalize_features(x: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    """Min-max scale into [0, 1]; zero-range columns become 0, the rest clamp."""
    span = stats.feature_max - stats.feature_min
    safe = np.where(span > 0, span, 1.0)
    scaled = (x - stats.feature_min) / safe
    scaled = np.where(span > 0, scaled, 0.0)
    return np.clip(scaled, 0.0, 1.0)


def normalize_target(y: np.ndarray, stats: NormalizationStats, name: str) -> np.ndarray:
    rng = stats.target_range(name)
    if rng == 0:
        return np.zeros_like(y)
    return (y - stats.target_min[name]) / rng


def denormalize_target(y: np.ndarray, stats: NormalizationStats, name: str):
    return y * stats.target_range(name) + stats.target_min[name]


def nrmse(predictions: np.ndarray, truths: np.ndarray, target_range: float) -> float:
    """RMSE divided by the training-split target range; 0 for a zero range."""
    p = np.asarray(predictions, dtype=np.float64).ravel()
    t = np.asarray(truths, dtype=np.float64).ravel()
    if p.size == 0 or p.size != t.size:
        raise ValueError("predictions and truths must be non-empty, same length")
    if target_range == 0:
        return 0.0
    return float(np.sqrt(np.mean((p - t) ** 2)) / target_range)
