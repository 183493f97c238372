"""Model-comparison benchmark over a profiling dataset.

Fits, per target, MLP regressors at three capacities and boosted
ensembles over a max_depth x subsample grid, on a seeded 80/20 split,
and reports train/test normalized RMSE for every model.

The CSV table contains only deterministic columns so identical inputs
and seed reproduce it byte for byte; wall-clock fit times and the MLP
convergence traces live in the JSON summary instead.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from ..profiler import ProfileSample
from ..workload import MLP_VARIANTS, mlp_hidden_string
from .features import (
    TARGET_NAMES,
    NormalizationStats,
    compute_stats,
    encode_many,
    extract_targets,
    normalize_features,
    normalize_target,
    nrmse,
)
from .gbdt import fit_gbdt
from .mlp import fit_mlp_regressor
from .predictor import CostModel

GBDT_DEPTHS = (3, 6, 9, 12)
GBDT_SUBSAMPLES = (0.5, 0.8, 1.0)

BENCHMARK_CSV_COLUMNS = [
    "model_family", "capacity", "max_depth", "subsample", "target",
    "param_count", "train_nrmse", "test_nrmse",
]


class InsufficientDataError(ValueError):
    """Too few usable rows to run the benchmark."""


@dataclass(frozen=True)
class BenchmarkEntry:
    model_family: str  # "mlp" | "gbdt"
    capacity: str      # widths string for MLPs, "" for ensembles
    max_depth: int | None
    subsample: float | None
    target: str
    param_count: int | None
    train_nrmse: float
    test_nrmse: float
    train_seconds: float

    @property
    def label(self) -> str:
        if self.model_family == "mlp":
            return self.capacity
        return f"d{self.max_depth}-s{self.subsample:g}"


@dataclass
class BenchmarkReport:
    entries: list[BenchmarkEntry]
    split_seed: int
    n_train: int
    n_test: int
    stats: NormalizationStats
    traces: dict[str, tuple[float, ...]] = field(default_factory=dict)
    cost_models: dict[tuple[str, str, str], CostModel] = field(default_factory=dict)

    def best(self, model_family: str, target: str) -> BenchmarkEntry:
        pool = [e for e in self.entries
                if e.model_family == model_family and e.target == target]
        return min(pool, key=lambda e: e.test_nrmse)

    def entry(self, model_family: str, label: str, target: str) -> BenchmarkEntry:
        for e in self.entries:
            if (e.model_family, e.label, e.target) == (model_family, label, target):
                return e
        raise KeyError((model_family, label, target))


def run_benchmark(samples: list[ProfileSample], split_seed: int, *,
                  mlp_epochs: int = 800, gbdt_rounds: int = 300,
                  include_diverged: bool = False) -> BenchmarkReport:
    """Fit all 15 models per target and score them on the held-out split.

    The epoch budget must be large enough that every capacity in the MLP
    ladder actually converges; an under-trained large net reports worse
    train error than the small one and the capacity comparison becomes
    an optimization artifact.
    """
    usable = [s for s in samples if include_diverged or not s.diverged]
    if len(usable) < 100:
        raise InsufficientDataError(
            f"need >= 100 usable rows, have {len(usable)}")

    x_raw = encode_many(usable)
    targets = extract_targets(usable)
    n = len(usable)
    perm = np.random.default_rng(split_seed).permutation(n)
    n_train = int(n * 0.8)
    tr, te = perm[:n_train], perm[n_train:]

    stats = compute_stats(x_raw[tr], {k: v[tr] for k, v in targets.items()})
    xn = normalize_features(x_raw, stats)

    report = BenchmarkReport(entries=[], split_seed=split_seed,
                             n_train=len(tr), n_test=len(te), stats=stats)

    for target in TARGET_NAMES:
        yn = normalize_target(targets[target], stats, target)
        y_tr, y_te = yn[tr], yn[te]

        for hidden in MLP_VARIANTS:
            label = mlp_hidden_string(hidden)
            t0 = time.perf_counter()
            reg = fit_mlp_regressor(xn[tr], y_tr, hidden=hidden,
                                    epochs=mlp_epochs, seed=split_seed,
                                    validation=(xn[te], y_te))
            seconds = time.perf_counter() - t0
            report.entries.append(BenchmarkEntry(
                model_family="mlp", capacity=label, max_depth=None,
                subsample=None, target=target, param_count=reg.param_count,
                train_nrmse=nrmse(reg.predict(xn[tr]), y_tr, 1.0),
                test_nrmse=nrmse(reg.predict(xn[te]), y_te, 1.0),
                train_seconds=seconds))
            report.traces[f"mlp:{label}:{target}"] = reg.trace
            report.cost_models[("mlp", label, target)] = CostModel(
                kind="mlp", target=target, stats=stats, model=reg)

        for depth in GBDT_DEPTHS:
            for subsample in GBDT_SUBSAMPLES:
                t0 = time.perf_counter()
                ens = fit_gbdt(xn[tr], y_tr, max_depth=depth,
                               subsample=subsample, rounds=gbdt_rounds,
                               seed=split_seed)
                seconds = time.perf_counter() - t0
                entry = BenchmarkEntry(
                    model_family="gbdt", capacity="", max_depth=depth,
                    subsample=subsample, target=target, param_count=None,
                    train_nrmse=nrmse(ens.predict(xn[tr]), y_tr, 1.0),
                    test_nrmse=nrmse(ens.predict(xn[te]), y_te, 1.0),
                    train_seconds=seconds)
                report.entries.append(entry)
                report.cost_models[("gbdt", entry.label, target)] = CostModel(
                    kind="gbdt", target=target, stats=stats, model=ens)

    return report


def write_benchmark_csv(report: BenchmarkReport, path: str) -> None:
    """Deterministic results table; identical runs write identical bytes."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCHMARK_CSV_COLUMNS)
        for e in report.entries:
            writer.writerow([
                e.model_family, e.capacity,
                "" if e.max_depth is None else e.max_depth,
                "" if e.subsample is None else repr(e.subsample),
                e.target,
                "" if e.param_count is None else e.param_count,
                repr(e.train_nrmse), repr(e.test_nrmse),
            ])


def write_benchmark_json(report: BenchmarkReport, path: str) -> None:
    """Summary with fit seconds, per-target bests, and convergence traces."""
    best = {}
    for target in TARGET_NAMES:
        b_gbdt = report.best("gbdt", target)
        b_mlp = report.best("mlp", target)
        best[target] = {
            "gbdt": {"label": b_gbdt.label, "test_nrmse": b_gbdt.test_nrmse},
            "mlp": {"label": b_mlp.label, "test_nrmse": b_mlp.test_nrmse},
            "gbdt_over_mlp_ratio": (
                b_gbdt.test_nrmse / b_mlp.test_nrmse
                if b_mlp.test_nrmse > 0 else None),
        }
    payload = {
        "split_seed": report.split_seed,
        "n_train": report.n_train,
        "n_test": report.n_test,
        "entries": [
            {"model_family": e.model_family, "capacity": e.capacity,
             "max_depth": e.max_depth, "subsample": e.subsample,
             "target": e.target, "param_count": e.param_count,
             "train_nrmse": e.train_nrmse, "test_nrmse": e.test_nrmse,
             "train_seconds": e.train_seconds}
            for e in report.entries
        ],
        "best_per_target": best,
        "convergence_traces": {k: list(v) for k, v in report.traces.items()},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
