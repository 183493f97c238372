"""Train the wall-time regressor with federated averaging.

Profiling rows are split across simulated clients; each round the
clients train locally from the broadcast weights and the server merges
the results weighted by client data counts.  The merged model is then
scored both per client and on the pooled holdout.
"""

import math

import numpy as np

from edgeprofiler.federated import (
    FedConfig,
    PartitionMode,
    RegressorTemplate,
    ValidationMode,
    fed_train,
    partition,
    validate,
)
from edgeprofiler.profiler import (
    HardwareDescriptor,
    ProfileSample,
    sample_grid,
)
from edgeprofiler.workload import DatasetSpec, count_costs

hw = HardwareDescriptor("x86_64", 2.5, 4, 1.0)
data = DatasetSpec(num_samples=1000)

rng = np.random.default_rng(9)
samples = []
for i, config in enumerate(sample_grid(160, seed=4)):
    costs = count_costs(config, data)
    seconds = costs.training_flops_total / 2.0e9 \
        * math.exp(0.05 * rng.standard_normal())
    samples.append(ProfileSample(
        config=config, data=data, hardware=hw, params=costs.params,
        flops=costs.training_flops_total,
        macs=costs.forward_macs_per_sample, total_time_s=seconds,
        final_accuracy=0.9, diverged=False, repeat_index=0, seed=i))

parts = partition(samples, PartitionMode.IID, num_clients=4, seed=1)
for part in parts:
    print(f"client {part.client_id}: {len(part.rows)} train rows, "
          f"{len(part.holdout)} holdout rows")

fed = FedConfig(num_clients=4, rounds=20, local_epochs=2, seed=3)
template = RegressorTemplate(hidden=(16, 8), learning_rate=0.3,
                             batch_size=16)
result = fed_train(parts, fed, template, target="log_time_s")
trace = result.regressor.trace
print(f"\nglobal RMSE by round: start {trace[0]:.4f} "
      f"mid {trace[len(trace) // 2]:.4f} end {trace[-1]:.4f}")
if result.excluded:
    print(f"clients excluded for divergence: {result.excluded}")

model = result.as_model()
fed_scores = validate(model, parts, ValidationMode.FEDERATED)
print("\nper-client holdout nRMSE:",
      [round(v, 4) for v in fed_scores.per_client])
print(f"count-weighted overall: {fed_scores.overall:.4f}")

pooled = [s for part in parts for s in part.holdout]
central = validate(model, parts, ValidationMode.CENTRALIZED,
                   server_holdout=pooled)
print(f"pooled-holdout nRMSE:   {central.overall:.4f}")
print(f"model provenance tag:   {model.provenance}")
