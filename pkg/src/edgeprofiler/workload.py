"""Workload configuration space and analytic cost counting.

The toolkit profiles small dense and convolutional classifiers over a fixed
reference grid of architectures and hyperparameters (6 architecture variants
x 4 epoch counts x 4 optimizers x 6 learning rates x 4 batch sizes = 2,304
configurations).  This module defines the configuration types, enumerates
the grid in a deterministic order, and computes exact integer parameter /
MAC / FLOP counts for any configuration.

Counting conventions (fixed so that tests can assert exact integers):

* dense MACs per sample = in_features * out_features (biases excluded);
  dense params = in_features * out_features + out_features
* conv MACs per sample = H_out * W_out * C_out * (k^2 * C_in) with stride 1
  and same-padding (H_out = H_in); conv params = C_out * k^2 * C_in + C_out
* an optional 2x2 max-pool (stride 2, floor) follows a conv block
* FLOPs = 2 * MACs; activations, pooling, softmax and bias adds excluded
* training FLOPs = 3 * forward FLOPs * num_samples * epochs (backward pass
  costed at twice the forward pass)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np


class ShapeError(ValueError):
    """An architecture is incompatible with the input geometry."""


class Family(str, Enum):
    MLP = "mlp"
    CNN = "cnn"


class Optimizer(str, Enum):
    ADAM = "adam"
    SGD = "sgd"
    RMSPROP = "rmsprop"
    ADAGRAD = "adagrad"


@dataclass(frozen=True)
class ConvLayerSpec:
    """One conv block: same-padded k x k conv, ReLU, optional 2x2 max-pool."""

    out_channels: int
    kernel_size: int
    pool: bool = True

    def __post_init__(self) -> None:
        if self.out_channels < 1:
            raise ValueError(f"out_channels must be >= 1, got {self.out_channels}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and >= 1, got {self.kernel_size}")


@dataclass(frozen=True)
class ModelArch:
    """Either a stack of dense hidden layers or a stack of conv blocks.

    Exactly one of ``mlp_hidden`` / ``conv_layers`` is non-empty; the list
    order is the execution order.  Both families end in a single dense
    classification head.
    """

    family: Family
    mlp_hidden: tuple[int, ...] = ()
    conv_layers: tuple[ConvLayerSpec, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "mlp_hidden", tuple(int(w) for w in self.mlp_hidden))
        object.__setattr__(self, "conv_layers", tuple(self.conv_layers))
        if self.family is Family.MLP and self.conv_layers:
            raise ValueError("MLP arch must not carry conv layers")
        if self.family is Family.CNN and self.mlp_hidden:
            raise ValueError("CNN arch must not carry dense hidden widths")
        if self.family is Family.CNN and not self.conv_layers:
            raise ValueError("CNN arch needs at least one conv layer")
        if any(w < 1 for w in self.mlp_hidden):
            raise ValueError("hidden widths must be positive")

    @staticmethod
    def mlp(hidden: tuple[int, ...] | list[int]) -> "ModelArch":
        return ModelArch(Family.MLP, mlp_hidden=tuple(hidden))

    @staticmethod
    def cnn(layers: tuple[ConvLayerSpec, ...] | list[ConvLayerSpec]) -> "ModelArch":
        return ModelArch(Family.CNN, conv_layers=tuple(layers))


@dataclass(frozen=True)
class ModelConfig:
    """One trainable workload: an architecture plus training hyperparameters."""

    arch: ModelArch
    epochs: int
    optimizer: Optimizer
    learning_rate: float
    batch_size: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class DatasetSpec:
    """Shape and seed of a synthetic labelled dataset."""

    num_samples: int
    input_height: int = 28
    input_width: int = 28
    input_channels: int = 1
    num_classes: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("num_samples", "input_height", "input_width", "input_channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")

    @property
    def flat_size(self) -> int:
        return self.input_height * self.input_width * self.input_channels


@dataclass(frozen=True)
class CostCount:
    """Exact integer cost counts for one (config, dataset) pair."""

    params: int
    forward_macs_per_sample: int
    forward_flops_per_sample: int
    training_flops_total: int


# The reference grid, in enumeration order.
CNN_VARIANTS: tuple[tuple[ConvLayerSpec, ...], ...] = (
    (ConvLayerSpec(32, 5, True),),
    (ConvLayerSpec(32, 5, True), ConvLayerSpec(64, 3, True)),
    (ConvLayerSpec(32, 5, True), ConvLayerSpec(64, 3, True), ConvLayerSpec(128, 3, True)),
)
MLP_VARIANTS: tuple[tuple[int, ...], ...] = (
    (100, 50),
    (150, 100, 50),
    (200, 150, 100, 50),
)
GRID_EPOCHS: tuple[int, ...] = (5, 10, 15, 20)
GRID_OPTIMIZERS: tuple[Optimizer, ...] = (
    Optimizer.ADAM,
    Optimizer.SGD,
    Optimizer.RMSPROP,
    Optimizer.ADAGRAD,
)
GRID_LEARNING_RATES: tuple[float, ...] = (0.01, 0.05, 0.001, 0.005, 0.0001, 0.0005)
GRID_BATCH_SIZES: tuple[int, ...] = (16, 32, 64, 128)


def grid_architectures() -> list[ModelArch]:
    """The six architecture variants, CNN variants first."""
    archs = [ModelArch.cnn(v) for v in CNN_VARIANTS]
    archs += [ModelArch.mlp(v) for v in MLP_VARIANTS]
    return archs


def enumerate_grid() -> list[ModelConfig]:
    """Full cross product of the reference grid, in deterministic order.

    Nesting order: architecture, epochs, optimizer, learning rate, batch
    size; each axis in its declared order.  2,304 configurations total.
    """
    out: list[ModelConfig] = []
    for arch in grid_architectures():
        for epochs in GRID_EPOCHS:
            for opt in GRID_OPTIMIZERS:
                for lr in GRID_LEARNING_RATES:
                    for batch in GRID_BATCH_SIZES:
                        out.append(ModelConfig(arch, epochs, opt, lr, batch))
    return out


def _walk_shapes(arch: ModelArch, data: DatasetSpec) -> list[tuple[str, dict]]:
    """Layer-by-layer shape walk; returns (kind, geometry) per costed layer.

    Raises ShapeError when a conv kernel exceeds the current spatial size or
    a pool would collapse a dimension to zero.
    """
    layers: list[tuple[str, dict]] = []
    if arch.family is Family.MLP:
        prev = data.flat_size
        for width in arch.mlp_hidden:
            layers.append(("dense", {"in": prev, "out": width}))
            prev = width
        layers.append(("dense", {"in": prev, "out": data.num_classes}))
        return layers

    h, w, c = data.input_height, data.input_width, data.input_channels
    for spec in arch.conv_layers:
        if h < spec.kernel_size or w < spec.kernel_size:
            raise ShapeError(
                f"conv kernel {spec.kernel_size} exceeds input {h}x{w}"
            )
        layers.append(
            ("conv", {"h": h, "w": w, "c_in": c, "c_out": spec.out_channels,
                      "k": spec.kernel_size})
        )
        c = spec.out_channels
        if spec.pool:
            if h < 2 or w < 2:
                raise ShapeError(f"2x2 pool on degenerate input {h}x{w}")
            h, w = h // 2, w // 2
    layers.append(("dense", {"in": h * w * c, "out": data.num_classes}))
    return layers


def count_costs(config: ModelConfig, data: DatasetSpec) -> CostCount:
    """Analytic parameter / MAC / FLOP counts for one configuration.

    Pure integer arithmetic; agrees exactly with a brute-force layer walk.
    """
    params = 0
    macs = 0
    for kind, g in _walk_shapes(config.arch, data):
        if kind == "dense":
            params += g["in"] * g["out"] + g["out"]
            macs += g["in"] * g["out"]
        else:
            kk = g["k"] * g["k"] * g["c_in"]
            params += g["c_out"] * kk + g["c_out"]
            macs += g["h"] * g["w"] * g["c_out"] * kk
    flops = 2 * macs
    total = 3 * flops * data.num_samples * config.epochs
    return CostCount(params, macs, flops, total)


def synthesize_dataset(data: DatasetSpec) -> tuple[np.ndarray, np.ndarray]:
    """Seeded, label-balanced synthetic classification tensors.

    Each class has a fixed random mean pattern; samples are that pattern
    plus Gaussian noise at half scale, far enough apart to be learnable.
    Returns (X, y) with X shaped (N, H, W, C) float64 and y int64 labels.
    """
    rng = np.random.default_rng(data.seed)
    shape = (data.input_height, data.input_width, data.input_channels)
    means = rng.normal(0.0, 1.0, size=(data.num_classes, *shape))

    # Balanced labels: sizes differ by at most one across classes.
    reps = data.num_samples // data.num_classes
    extra = data.num_samples % data.num_classes
    counts = [reps + (1 if c < extra else 0) for c in range(data.num_classes)]
    y = np.repeat(np.arange(data.num_classes, dtype=np.int64), counts)
    rng.shuffle(y)

    x = means[y] + 0.5 * rng.normal(0.0, 1.0, size=(data.num_samples, *shape))
    return x, y


# -- compact strings and JSON wire formats ---------------------------------

def conv_spec_string(layers: tuple[ConvLayerSpec, ...]) -> str:
    """Compact bracketed form, e.g. ``[32k5p;64k3p]`` (p marks pooling)."""
    parts = [
        f"{s.out_channels}k{s.kernel_size}{'p' if s.pool else ''}" for s in layers
    ]
    return "[" + ";".join(parts) + "]"


def mlp_hidden_string(hidden: tuple[int, ...]) -> str:
    """Compact bracketed form, e.g. ``[100;50]``."""
    return "[" + ";".join(str(w) for w in hidden) + "]"


def parse_conv_spec(text: str) -> tuple[ConvLayerSpec, ...]:
    body = text.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise ValueError(f"malformed conv spec string: {text!r}")
    body = body[1:-1]
    if not body:
        return ()
    out = []
    for part in body.split(";"):
        channels, rest = part.split("k", 1)
        pool = rest.endswith("p")
        kernel = rest[:-1] if pool else rest
        out.append(ConvLayerSpec(int(channels), int(kernel), pool))
    return tuple(out)


def parse_mlp_hidden(text: str) -> tuple[int, ...]:
    body = text.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise ValueError(f"malformed hidden width string: {text!r}")
    body = body[1:-1]
    return tuple(int(w) for w in body.split(";")) if body else ()


def arch_to_dict(arch: ModelArch) -> dict:
    return {
        "family": arch.family.value,
        "mlp_hidden": list(arch.mlp_hidden),
        "conv_layers": [
            {"out_channels": s.out_channels, "kernel_size": s.kernel_size, "pool": s.pool}
            for s in arch.conv_layers
        ],
    }


def arch_from_dict(d: dict) -> ModelArch:
    return ModelArch(
        family=Family(d["family"]),
        mlp_hidden=tuple(d.get("mlp_hidden", ())),
        conv_layers=tuple(
            ConvLayerSpec(c["out_channels"], c["kernel_size"], c["pool"])
            for c in d.get("conv_layers", ())
        ),
    )


def config_to_dict(config: ModelConfig) -> dict:
    return {
        "arch": arch_to_dict(config.arch),
        "epochs": config.epochs,
        "optimizer": config.optimizer.value,
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
    }


def config_from_dict(d: dict) -> ModelConfig:
    return ModelConfig(
        arch=arch_from_dict(d["arch"]),
        epochs=int(d["epochs"]),
        optimizer=Optimizer(d["optimizer"]),
        learning_rate=float(d["learning_rate"]),
        batch_size=int(d["batch_size"]),
    )


def dataset_to_dict(data: DatasetSpec) -> dict:
    return {
        "num_samples": data.num_samples,
        "input_height": data.input_height,
        "input_width": data.input_width,
        "input_channels": data.input_channels,
        "num_classes": data.num_classes,
        "seed": data.seed,
    }


def dataset_from_dict(d: dict) -> DatasetSpec:
    return DatasetSpec(**{k: int(v) for k, v in d.items()})


def config_to_json(config: ModelConfig) -> str:
    return json.dumps(config_to_dict(config))


def config_from_json(text: str) -> ModelConfig:
    return config_from_dict(json.loads(text))
