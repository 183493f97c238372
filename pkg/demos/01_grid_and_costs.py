"""Walk the reference configuration grid and count analytic costs.

The grid crosses six architectures with four epoch counts, four
optimizers, six learning rates, and four batch sizes.  Every config
gets closed-form parameter, MAC, and FLOP counts without running any
training.
"""

from edgeprofiler.workload import (
    DatasetSpec,
    ModelConfig,
    Optimizer,
    conv_spec_string,
    count_costs,
    enumerate_grid,
    grid_architectures,
    mlp_hidden_string,
)

data = DatasetSpec(num_samples=1000)

grid = enumerate_grid()
print(f"full grid: {len(grid)} configurations")
print(f"first: {grid[0]}")
print(f"last:  {grid[-1]}")

print("\nper-architecture costs at batch-independent granularity:")
header = f"{'architecture':<28} {'params':>10} {'MACs/sample':>12} {'train FLOPs (5 ep)':>20}"
print(header)
print("-" * len(header))
for arch in grid_architectures():
    config = ModelConfig(arch, epochs=5, optimizer=Optimizer.ADAM,
                         learning_rate=0.001, batch_size=32)
    costs = count_costs(config, data)
    if arch.conv_layers:
        name = f"cnn:{conv_spec_string(arch.conv_layers)}"
    else:
        name = f"mlp:{mlp_hidden_string(arch.mlp_hidden)}"
    print(f"{name:<28} {costs.params:>10,} "
          f"{costs.forward_macs_per_sample:>12,} "
          f"{costs.training_flops_total:>20,}")

# doubling epochs doubles total training work, nothing else changes
base = count_costs(ModelConfig(grid_architectures()[3], epochs=5,
                               optimizer=Optimizer.SGD, learning_rate=0.01,
                               batch_size=64), data)
double = count_costs(ModelConfig(grid_architectures()[3], epochs=10,
                                 optimizer=Optimizer.SGD, learning_rate=0.01,
                                 batch_size=64), data)
print(f"\nepoch scaling check: {double.training_flops_total} "
      f"== 2 * {base.training_flops_total} -> "
      f"{double.training_flops_total == 2 * base.training_flops_total}")
