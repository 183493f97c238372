"""Train one small network with the bundled numpy engine.

Shows the build -> train -> evaluate loop, the deterministic seeding,
and what happens when a learning rate is aggressive enough to diverge.
"""

import numpy as np

from edgeprofiler.tinynn import (
    DivergedError,
    OptimizerState,
    build_network,
    evaluate,
    train_epochs,
)
from edgeprofiler.workload import (
    DatasetSpec,
    ModelArch,
    Optimizer,
    synthesize_dataset,
)

data = DatasetSpec(num_samples=256, seed=7)
x, y = synthesize_dataset(data)
print(f"dataset: x {x.shape} y {y.shape}")

arch = ModelArch.mlp((100, 50))
net = build_network(arch, data, seed=0)
print(f"network: {[layer.kind for layer in net.layers]}")
print(f"trainable parameters: {net.param_count:,}")

opt = OptimizerState(Optimizer.ADAM, learning_rate=0.005)
loss0, acc0 = evaluate(net, x, y)
for epoch in range(5):
    train_epochs(net, opt, x, y, 1, batch_size=32, shuffle_seed=0,
                 epoch_offset=epoch)
    loss, acc = evaluate(net, x, y)
    print(f"epoch {epoch + 1}: loss {loss:.4f} accuracy {acc:.3f}")
print(f"(started from loss {loss0:.4f} accuracy {acc0:.3f})")

# determinism: same seeds, same floats
net_a = build_network(arch, data, seed=0)
net_b = build_network(arch, data, seed=0)
for wa, wb in zip(net_a.get_weights(), net_b.get_weights()):
    assert np.array_equal(wa, wb)
print("re-built network is bit-identical")

# an absurd learning rate blows up into a reported divergence
hot = build_network(arch, data, seed=0)
try:
    train_epochs(hot, OptimizerState(Optimizer.SGD, learning_rate=1e9),
                 x, y, 3, batch_size=32, shuffle_seed=0)
except DivergedError as exc:
    print(f"divergence detected as designed: {exc}")
