"""Fit the cost-model ladder on profiling rows and compare families.

Boosted trees and dense regressors compete on three targets (FLOPs,
MACs, log wall time) over an 80/20 split.  The rows here are synthetic
so the demo stays quick; point run_benchmark at a measured CSV for the
real thing.
"""

import math

import numpy as np

from edgeprofiler.profiler import (
    HardwareDescriptor,
    ProfileSample,
    sample_grid,
)
from edgeprofiler.regress import TARGET_NAMES, encode, run_benchmark
from edgeprofiler.workload import DatasetSpec, count_costs

hw = HardwareDescriptor("x86_64", 2.5, 4, 1.0)
data = DatasetSpec(num_samples=1000)

rng = np.random.default_rng(5)
samples = []
for i, config in enumerate(sample_grid(150, seed=2)):
    costs = count_costs(config, data)
    seconds = costs.training_flops_total / 2.0e9 \
        * math.exp(0.05 * rng.standard_normal())
    samples.append(ProfileSample(
        config=config, data=data, hardware=hw, params=costs.params,
        flops=costs.training_flops_total,
        macs=costs.forward_macs_per_sample, total_time_s=seconds,
        final_accuracy=0.9, diverged=False, repeat_index=0, seed=i))
print(f"profiling rows: {len(samples)}")

report = run_benchmark(samples, split_seed=7, mlp_epochs=60, gbdt_rounds=120)
print(f"split: {report.n_train} train / {report.n_test} test")
print(f"models fitted: {len(report.entries)}")

print(f"\n{'target':<12} {'best gbdt':>12} {'nRMSE':>9} {'best mlp':>16} {'nRMSE':>9}")
for target in TARGET_NAMES:
    g = report.best("gbdt", target)
    m = report.best("mlp", target)
    print(f"{target:<12} {g.label:>12} {g.test_nrmse:>9.5f} "
          f"{m.label:>16} {m.test_nrmse:>9.5f}")

flops_entry = report.entry("gbdt", "d12-s0.8", "flops")
print(f"\nreference ensemble (d12-s0.8) on flops: "
      f"train {flops_entry.train_nrmse:.6f} test {flops_entry.test_nrmse:.6f}")

# each fitted model is also available as a ready-to-save predictor
model = report.cost_models[("gbdt", "d12-s0.8", "log_time_s")]
sample = samples[0]
predicted = float(model.predict_raw(encode(sample))[0])
print(f"one prediction: log10(seconds) {predicted:.3f} "
      f"vs measured {math.log10(sample.total_time_s):.3f}")
