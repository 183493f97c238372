"""Sweep execution and wall-clock measurement over workload configs.

Measured runs are strictly serial; the clock wraps the training loop only
(dataset synthesis, network build, and the final evaluation all sit
outside the timed region).  Rows append to a CSV flushed per row, so an
interrupted sweep loses at most the row in flight and can resume by
skipping (config, repeat_index) keys already on disk.

Hardware is captured as a small descriptor with a relative speed_factor
calibrated by a seeded matrix-multiply micro-benchmark against a fixed
reference constant.
"""

from __future__ import annotations

import csv
import os
import platform
import time
from dataclasses import dataclass

import numpy as np

from . import tinynn, workload
from .workload import DatasetSpec, Family, ModelConfig, Optimizer

# Calibration micro-benchmark: seeded square matmuls of this size/count.
# A machine finishing them in REFERENCE_SECONDS has speed_factor 1.0.
CALIBRATION_SIZE = 256
CALIBRATION_ITERS = 8
CALIBRATION_SEED = 1234
REFERENCE_SECONDS = 0.08

PROFILE_COLUMNS = [
    "family", "conv_spec", "mlp_hidden", "epochs", "optimizer",
    "learning_rate", "batch_size", "num_samples", "input_h", "input_w",
    "input_c", "num_classes", "arch_tag", "clock_ghz", "logical_cores",
    "speed_factor", "params", "flops", "macs", "total_time_s",
    "final_accuracy", "diverged", "repeat_index", "seed",
]

ARCH_TAGS = ("x86_64", "aarch64", "other")


@dataclass(frozen=True)
class HardwareDescriptor:
    """Host identity plus a relative throughput scale (reference = 1.0)."""

    arch_tag: str
    clock_ghz: float
    logical_cores: int
    speed_factor: float
    label: str = ""

    def __post_init__(self) -> None:
        if self.arch_tag not in ARCH_TAGS:
            raise ValueError(f"arch_tag must be one of {ARCH_TAGS}")
        if self.clock_ghz <= 0:
            raise ValueError("clock_ghz must be positive")
        if self.logical_cores < 1:
            raise ValueError("logical_cores must be >= 1")
        if self.speed_factor <= 0:
            raise ValueError("speed_factor must be positive")


@dataclass(frozen=True)
class ProfileSample:
    """One measured run: config, dataset, hardware, counts, and timing."""

    config: ModelConfig
    data: DatasetSpec
    hardware: HardwareDescriptor
    params: int
    flops: int
    macs: int
    total_time_s: float
    final_accuracy: float | None
    diverged: bool
    repeat_index: int
    seed: int


@dataclass(frozen=True)
class SweepPlan:
    """What to run: configs, the shared dataset spec, repeats, warmup."""

    configs: tuple[ModelConfig, ...]
    data: DatasetSpec
    repeats: int = 1
    warmup_runs: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.warmup_runs < 0:
            raise ValueError("warmup_runs must be >= 0")


@dataclass
class SweepSummary:
    path: str
    planned: int
    written: int
    skipped: int
    diverged: int
    failures: int


# -- hardware probing ------------------------------------------------------

def measure_speed_factor(*, elapsed: float | None = None) -> float:
    """reference_time / measured_time for the seeded matmul benchmark.

    Pass elapsed to compute the factor from an externally measured time
    (used by tests); otherwise the benchmark runs here.
    """
    if elapsed is None:
        rng = np.random.default_rng(CALIBRATION_SEED)
        a = rng.standard_normal((CALIBRATION_SIZE, CALIBRATION_SIZE))
        b = rng.standard_normal((CALIBRATION_SIZE, CALIBRATION_SIZE))
        a @ b  # untimed warm-up pass
        t0 = time.perf_counter()
        for _ in range(CALIBRATION_ITERS):
            a = a @ b
        elapsed = time.perf_counter() - t0
    if elapsed <= 0:
        raise ValueError("elapsed must be positive")
    return REFERENCE_SECONDS / elapsed


def _read_clock_ghz() -> float | None:
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.lower().startswith("cpu mhz"):
                    return float(line.split(":")[1]) / 1000.0
    except (OSError, ValueError, IndexError):
        pass
    return None


def probe_hardware(*, arch_tag: str | None = None, clock_ghz: float | None = None,
                   logical_cores: int | None = None,
                   speed_factor: float | None = None) -> HardwareDescriptor:
    """Describe the host, with keyword overrides winning over probed values.

    clock_ghz falls back to 1.0 (and the label records the failure) when
    the host exposes no frequency; speed_factor comes from calibration
    unless overridden.
    """
    label = "unknown"
    if arch_tag is None:
        machine = ""
        try:
            machine = platform.machine().lower()
            label = f"{platform.system()} {platform.machine()}"
        except OSError:
            pass
        if machine in ("x86_64", "amd64"):
            arch_tag = "x86_64"
        elif machine in ("aarch64", "arm64"):
            arch_tag = "aarch64"
        else:
            arch_tag = "other"
    if logical_cores is None:
        logical_cores = os.cpu_count() or 1
    if clock_ghz is None:
        clock_ghz = _read_clock_ghz() or 1.0
    if speed_factor is None:
        speed_factor = measure_speed_factor()
    return HardwareDescriptor(arch_tag=arch_tag, clock_ghz=clock_ghz,
                              logical_cores=logical_cores,
                              speed_factor=speed_factor, label=label)


# -- single measured run ---------------------------------------------------

def run_one(config: ModelConfig, data: DatasetSpec, hardware: HardwareDescriptor,
            seed: int, *, repeat_index: int = 0) -> ProfileSample:
    """Train one config and measure the training loop wall time.

    Divergence is an outcome, not an error: the sample comes back with
    diverged=True, the time measured up to the failure, and no accuracy.
    """
    counts = workload.count_costs(config, data)
    x, y = workload.synthesize_dataset(data)
    net = tinynn.build_network(config.arch, data, seed)
    opt = tinynn.OptimizerState(config.optimizer, config.learning_rate)

    diverged = False
    t0 = time.perf_counter()
    try:
        tinynn.train_epochs(net, opt, x, y, config.epochs, config.batch_size,
                            shuffle_seed=seed)
    except tinynn.DivergedError:
        diverged = True
    total_time_s = time.perf_counter() - t0

    final_accuracy = None
    if not diverged:
        loss, acc = tinynn.evaluate(net, x, y)
        if np.isfinite(loss):
            final_accuracy = acc
        else:
            diverged = True

    return ProfileSample(
        config=config, data=data, hardware=hardware,
        params=counts.params,
        flops=counts.training_flops_total,
        macs=counts.forward_macs_per_sample,
        total_time_s=total_time_s,
        final_accuracy=final_accuracy,
        diverged=diverged,
        repeat_index=repeat_index,
        seed=seed,
    )


# -- CSV wire format -------------------------------------------------------

def sample_to_row(sample: ProfileSample) -> dict[str, str]:
    cfg, data, hw = sample.config, sample.data, sample.hardware
    return {
        "family": cfg.arch.family.value,
        "conv_spec": workload.conv_spec_string(cfg.arch.conv_layers),
        "mlp_hidden": workload.mlp_hidden_string(cfg.arch.mlp_hidden),
        "epochs": str(cfg.epochs),
        "optimizer": cfg.optimizer.value,
        "learning_rate": repr(cfg.learning_rate),
        "batch_size": str(cfg.batch_size),
        "num_samples": str(data.num_samples),
        "input_h": str(data.input_height),
        "input_w": str(data.input_width),
        "input_c": str(data.input_channels),
        "num_classes": str(data.num_classes),
        "arch_tag": hw.arch_tag,
        "clock_ghz": repr(hw.clock_ghz),
        "logical_cores": str(hw.logical_cores),
        "speed_factor": repr(hw.speed_factor),
        "params": str(sample.params),
        "flops": str(sample.flops),
        "macs": str(sample.macs),
        "total_time_s": repr(sample.total_time_s),
        "final_accuracy": "" if sample.final_accuracy is None
                          else repr(sample.final_accuracy),
        "diverged": "true" if sample.diverged else "false",
        "repeat_index": str(sample.repeat_index),
        "seed": str(sample.seed),
    }


def row_to_sample(row: dict[str, str]) -> ProfileSample:
    family = Family(row["family"])
    if family is Family.CNN:
        arch = workload.ModelArch.cnn(workload.parse_conv_spec(row["conv_spec"]))
    else:
        arch = workload.ModelArch.mlp(workload.parse_mlp_hidden(row["mlp_hidden"]))
    config = ModelConfig(
        arch=arch, epochs=int(row["epochs"]),
        optimizer=Optimizer(row["optimizer"]),
        learning_rate=float(row["learning_rate"]),
        batch_size=int(row["batch_size"]),
    )
    data = DatasetSpec(
        num_samples=int(row["num_samples"]),
        input_height=int(row["input_h"]), input_width=int(row["input_w"]),
        input_channels=int(row["input_c"]), num_classes=int(row["num_classes"]),
    )
    hardware = HardwareDescriptor(
        arch_tag=row["arch_tag"], clock_ghz=float(row["clock_ghz"]),
        logical_cores=int(row["logical_cores"]),
        speed_factor=float(row["speed_factor"]),
    )
    acc = row["final_accuracy"]
    return ProfileSample(
        config=config, data=data, hardware=hardware,
        params=int(row["params"]), flops=int(row["flops"]), macs=int(row["macs"]),
        total_time_s=float(row["total_time_s"]),
        final_accuracy=float(acc) if acc else None,
        diverged=row["diverged"] == "true",
        repeat_index=int(row["repeat_index"]), seed=int(row["seed"]),
    )


def read_profile_csv(path: str) -> list[ProfileSample]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != PROFILE_COLUMNS:
            raise ValueError(f"unexpected profile columns in {path}")
        return [row_to_sample(r) for r in reader]


def _resume_key_from_row(row: dict[str, str]) -> tuple:
    return (row["family"], row["conv_spec"], row["mlp_hidden"],
            int(row["epochs"]), row["optimizer"], float(row["learning_rate"]),
            int(row["batch_size"]), int(row["repeat_index"]))


def _resume_key(config: ModelConfig, repeat_index: int) -> tuple:
    return (config.arch.family.value,
            workload.conv_spec_string(config.arch.conv_layers),
            workload.mlp_hidden_string(config.arch.mlp_hidden),
            config.epochs, config.optimizer.value, config.learning_rate,
            config.batch_size, repeat_index)


# -- sweep execution -------------------------------------------------------

def sample_grid(n: int, seed: int) -> list[ModelConfig]:
    """Seeded subsample of the reference grid, without replacement,
    returned in enumeration order."""
    grid = workload.enumerate_grid()
    if not 1 <= n <= len(grid):
        raise ValueError(f"n must be in [1, {len(grid)}]")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(grid), size=n, replace=False))
    return [grid[i] for i in idx]


def run_sweep(plan: SweepPlan, out_path: str, hardware: HardwareDescriptor,
              *, progress=None) -> SweepSummary:
    """Execute a plan serially, appending one CSV row per measured run.

    Warmup runs (first config of the plan) are executed and discarded
    before measurement starts, and are skipped entirely when every
    planned row already exists.  progress, if given, is called with
    (done, total, sample_or_None) after each measured run.
    """
    if not plan.configs:
        raise ValueError("plan has no configs")

    done_keys: set[tuple] = set()
    file_exists = os.path.exists(out_path) and os.path.getsize(out_path) > 0
    if file_exists:
        with open(out_path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != PROFILE_COLUMNS:
                raise ValueError(f"cannot resume onto {out_path}: column mismatch")
            for row in reader:
                done_keys.add(_resume_key_from_row(row))

    todo = [
        (config, rep)
        for config in plan.configs
        for rep in range(plan.repeats)
        if _resume_key(config, rep) not in done_keys
    ]

    planned = len(plan.configs) * plan.repeats
    skipped = planned - len(todo)
    written = diverged = failures = 0

    if todo:
        for _ in range(plan.warmup_runs):
            run_one(plan.configs[0], plan.data, hardware, plan.seed)

    with open(out_path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=PROFILE_COLUMNS)
        if not file_exists:
            writer.writeheader()
            fh.flush()
        for i, (config, rep) in enumerate(todo):
            try:
                sample = run_one(config, plan.data, hardware, plan.seed,
                                 repeat_index=rep)
            except Exception:
                failures += 1
                if progress:
                    progress(i + 1, len(todo), None)
                continue
            writer.writerow(sample_to_row(sample))
            fh.flush()
            written += 1
            diverged += int(sample.diverged)
            if progress:
                progress(i + 1, len(todo), sample)

    return SweepSummary(path=out_path, planned=planned, written=written,
                        skipped=skipped, diverged=diverged, failures=failures)


def timing_dispersion(times: list[float]) -> float:
    """Median absolute deviation over median; the repeat-noise yardstick."""
    t = np.asarray(times, dtype=np.float64)
    if t.size == 0:
        raise ValueError("no times given")
    med = float(np.median(t))
    if med == 0:
        raise ValueError("degenerate median")
    return float(np.median(np.abs(t - med))) / med


# -- plan wire format ------------------------------------------------------

def hardware_to_dict(hw: HardwareDescriptor) -> dict:
    return {
        "arch_tag": hw.arch_tag,
        "clock_ghz": hw.clock_ghz,
        "logical_cores": hw.logical_cores,
        "speed_factor": hw.speed_factor,
        "label": hw.label,
    }


def hardware_from_dict(d: dict) -> HardwareDescriptor:
    return HardwareDescriptor(
        arch_tag=d["arch_tag"],
        clock_ghz=float(d["clock_ghz"]),
        logical_cores=int(d["logical_cores"]),
        speed_factor=float(d["speed_factor"]),
        label=d.get("label", ""),
    )


def plan_to_dict(plan: SweepPlan) -> dict:
    return {
        "configs": [workload.config_to_dict(c) for c in plan.configs],
        "data": workload.dataset_to_dict(plan.data),
        "repeats": plan.repeats,
        "warmup_runs": plan.warmup_runs,
        "seed": plan.seed,
    }


def plan_from_dict(d: dict) -> SweepPlan:
    return SweepPlan(
        configs=tuple(workload.config_from_dict(c) for c in d["configs"]),
        data=workload.dataset_from_dict(d["data"]),
        repeats=d.get("repeats", 1),
        warmup_runs=d.get("warmup_runs", 2),
        seed=d.get("seed", 0),
    )
