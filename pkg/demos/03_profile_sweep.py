"""Measure a small sweep and read the CSV back.

A sweep executes each planned configuration with the engine, times it,
and appends one CSV row per run.  Re-running the same plan against the
same CSV skips completed rows, so an interrupted sweep resumes where
it stopped.
"""

import os
import tempfile

from edgeprofiler.profiler import (
    SweepPlan,
    probe_hardware,
    read_profile_csv,
    run_sweep,
)
from edgeprofiler.workload import (
    DatasetSpec,
    ModelArch,
    ModelConfig,
    Optimizer,
)

hw = probe_hardware()
print(f"host: {hw.arch_tag}, {hw.logical_cores} cores, "
      f"{hw.clock_ghz:.2f} GHz, speed factor {hw.speed_factor:.3f}")

arch = ModelArch.mlp((100, 50))
configs = [
    ModelConfig(arch, epochs=2, optimizer=opt, learning_rate=0.005,
                batch_size=bs)
    for opt in (Optimizer.ADAM, Optimizer.SGD)
    for bs in (32, 64)
]
plan = SweepPlan(configs=configs, data=DatasetSpec(num_samples=256),
                 repeats=2, warmup_runs=1, seed=0)

out = os.path.join(tempfile.mkdtemp(prefix="edgeprofiler_demo_"),
                   "profile.csv")
summary = run_sweep(plan, out, hw)
print(f"sweep: planned {summary.planned} written {summary.written} "
      f"diverged {summary.diverged}")

samples = read_profile_csv(out)
print(f"\n{'optimizer':<10} {'batch':>5} {'repeat':>6} {'seconds':>9} {'accuracy':>9}")
for s in samples:
    print(f"{s.config.optimizer.value:<10} {s.config.batch_size:>5} "
          f"{s.repeat_index:>6} {s.total_time_s:>9.3f} "
          f"{s.final_accuracy if s.final_accuracy is None else round(s.final_accuracy, 3)!s:>9}")

# resuming against the same file finds nothing left to do
again = run_sweep(plan, out, hw)
print(f"\nresume: planned {again.planned} written {again.written} "
      f"skipped {again.skipped}")
