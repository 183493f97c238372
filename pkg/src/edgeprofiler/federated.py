"""Federated training of the dense cost regressor.

Clients hold disjoint slices of a profiling dataset.  Each round the
server broadcasts the global weights, clients run a few epochs of local
squared-error training, and the server replaces the global weights with
the sample-count-weighted mean of the returned weights.  Communication
is an in-process round loop; the procedure is deterministic given the
seeds no matter how client work is scheduled.

Only the dense regressor is federated.  Boosted ensembles have no
parameter-wise average, so they stay centralized.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import tinynn
from .profiler import ProfileSample
from .regress import (
    CostModel,
    NormalizationStats,
    compute_stats,
    encode_many,
    extract_targets,
    MLPRegressor,
    normalize_features,
    normalize_target,
    nrmse,
)
from .workload import Optimizer, conv_spec_string, mlp_hidden_string

log = logging.getLogger(__name__)


class PartitionMode(str, Enum):
    IID = "iid"
    BY_CONFIG_FAMILY = "by_config_family"


class Aggregation(str, Enum):
    FEDAVG = "fedavg"


@dataclass(frozen=True)
class ClientPartition:
    """One client's slice: training rows plus a local holdout."""

    client_id: int
    rows: tuple[ProfileSample, ...]
    holdout: tuple[ProfileSample, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "holdout", tuple(self.holdout))
        if len(self.rows) < 1 or len(self.holdout) < 1:
            raise ValueError(
                "every client needs >= 1 training and >= 1 holdout row")


@dataclass(frozen=True)
class FedConfig:
    """Server-side schedule: client count, rounds, and local work."""

    num_clients: int
    rounds: int
    local_epochs: int = 1
    partition_mode: PartitionMode = PartitionMode.IID
    aggregation: Aggregation = Aggregation.FEDAVG
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "partition_mode",
                           PartitionMode(self.partition_mode))
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))
        if self.num_clients < 2:
            raise ValueError("num_clients must be >= 2")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.local_epochs < 0:
            raise ValueError("local_epochs must be >= 0")


@dataclass(frozen=True)
class RegressorTemplate:
    """Architecture and local-training hyperparameters for every client.

    Plain SGD is the default: it carries no optimizer state, so nothing
    is lost when clients restart from broadcast weights each round.
    """

    hidden: tuple[int, ...]
    optimizer: Optimizer = Optimizer.SGD
    learning_rate: float = 0.05
    batch_size: int = 32

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        if not self.hidden or any(w < 1 for w in self.hidden):
            raise ValueError("hidden widths must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def fed_config_to_dict(fed: FedConfig) -> dict:
    return {
        "num_clients": fed.num_clients,
        "rounds": fed.rounds,
        "local_epochs": fed.local_epochs,
        "partition_mode": fed.partition_mode.value,
        "aggregation": fed.aggregation.value,
        "seed": fed.seed,
    }


def fed_config_from_dict(d: dict) -> FedConfig:
    return FedConfig(
        num_clients=int(d["num_clients"]), rounds=int(d["rounds"]),
        local_epochs=int(d.get("local_epochs", 1)),
        partition_mode=PartitionMode(d.get("partition_mode", "iid")),
        aggregation=Aggregation(d.get("aggregation", "fedavg")),
        seed=int(d.get("seed", 0)),
    )


def _arch_key(sample: ProfileSample) -> tuple[str, str, str]:
    arch = sample.config.arch
    return (arch.family.value, conv_spec_string(arch.conv_layers),
            mlp_hidden_string(arch.mlp_hidden))


def _split_holdout(rows: list[ProfileSample], client_id: int, seed: int,
                   holdout_fraction: float) -> ClientPartition:
    n = len(rows)
    if n < 2:
        raise ValueError(f"client {client_id} has {n} rows; needs >= 2")
    rng = np.random.default_rng([seed, client_id])
    order = rng.permutation(n)
    n_hold = max(1, int(n * holdout_fraction))
    hold = [rows[i] for i in order[:n_hold]]
    train = [rows[i] for i in order[n_hold:]]
    return ClientPartition(client_id=client_id, rows=tuple(train),
                           holdout=tuple(hold))


def partition(samples: list[ProfileSample], mode: PartitionMode,
              num_clients: int, seed: int, *,
              holdout_fraction: float = 0.2) -> list[ClientPartition]:
    """Split profiling rows into disjoint per-client train/holdout slices.

    IID deals a seeded shuffle round-robin.  by_config_family hands each
    client a contiguous chunk of the distinct architectures (family
    first), so clients see disjoint model families.
    """
    mode = PartitionMode(mode)
    if num_clients < 1:
        raise ValueError("num_clients must be >= 1")
    if len(samples) < 2 * num_clients:
        raise ValueError(
            f"need >= {2 * num_clients} rows for {num_clients} clients, "
            f"have {len(samples)}")
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError("holdout_fraction must be in (0, 1)")

    if mode is PartitionMode.IID:
        order = np.random.default_rng(seed).permutation(len(samples))
        buckets = [[samples[i] for i in order[c::num_clients]]
                   for c in range(num_clients)]
    else:
        keys = sorted({_arch_key(s) for s in samples})
        if len(keys) < num_clients:
            raise ValueError(
                f"{len(keys)} distinct architectures cannot cover "
                f"{num_clients} clients")
        chunks = np.array_split(np.arange(len(keys)), num_clients)
        owner = {keys[i]: c for c, chunk in enumerate(chunks) for i in chunk}
        buckets = [[] for _ in range(num_clients)]
        for s in samples:
            buckets[owner[_arch_key(s)]].append(s)

    return [_split_holdout(rows, cid, seed, holdout_fraction)
            for cid, rows in enumerate(buckets)]


def fedavg(entries: list[tuple[int, int, list[np.ndarray]]]) -> list[np.ndarray]:
    """Sample-count-weighted mean of client weight lists.

    `entries` holds (client_id, row_count, weights).  Computed as the
    lowest-id client's weights plus weighted deltas, so identical inputs
    aggregate to themselves bit-for-bit and order never matters.
    """
    if not entries:
        raise ValueError("nothing to aggregate")
    ordered = sorted(entries, key=lambda e: e[0])
    total = sum(e[1] for e in ordered)
    if total <= 0:
        raise ValueError("row counts must be positive")
    base = ordered[0][2]
    merged = [w.copy() for w in base]
    for _, count, weights in ordered[1:]:
        alpha = count / total
        for m, w, b in zip(merged, weights, base):
            m += alpha * (w - b)
    return merged


@dataclass(frozen=True, eq=False)
class FedTrainResult:
    """The aggregated regressor plus its broadcast input pipeline."""

    regressor: MLPRegressor
    stats: NormalizationStats
    target: str
    excluded: tuple[tuple[int, int], ...]  # (round, client_id) skipped

    def as_model(self) -> CostModel:
        return CostModel(kind="mlp", target=self.target, stats=self.stats,
                         model=self.regressor, provenance="federated")


def fed_train(partitions: list[ClientPartition], fed: FedConfig,
              template: RegressorTemplate, *,
              target: str = "log_time_s") -> FedTrainResult:
    """Run FedAvg rounds over the partitions and return the global model.

    Normalization is computed once on the union of training rows and
    broadcast with the weights.  All clients share the template and the
    schedule's shuffle seed; a client whose local fit diverges is left
    out of that round's average and logged.
    """
    if not partitions:
        raise ValueError("need at least one client partition")
    ordered = sorted(partitions, key=lambda p: p.client_id)
    ids = [p.client_id for p in ordered]
    if len(set(ids)) != len(ids):
        raise ValueError("client ids must be unique")

    union = [s for p in ordered for s in p.rows]
    stats = compute_stats(encode_many(union), extract_targets(union))
    clients = []
    for p in ordered:
        xn = normalize_features(encode_many(list(p.rows)), stats)
        yn = normalize_target(extract_targets(list(p.rows))[target],
                              stats, target).reshape(-1, 1)
        clients.append((p.client_id, xn, yn))
    union_x = np.vstack([c[1] for c in clients])
    union_y = np.vstack([c[2] for c in clients])

    n_features = union_x.shape[1]
    net = tinynn.build_regressor_network(n_features, template.hidden,
                                         fed.seed)
    global_w = net.get_weights()
    excluded: list[tuple[int, int]] = []
    trace = []
    for rnd in range(fed.rounds):
        survivors = []
        for cid, xn, yn in clients:
            local = tinynn.build_regressor_network(n_features,
                                                   template.hidden, fed.seed)
            local.set_weights(global_w)
            opt = tinynn.OptimizerState(template.optimizer,
                                        template.learning_rate)
            try:
                tinynn.train_epochs(
                    local, opt, xn, yn, fed.local_epochs,
                    min(template.batch_size, xn.shape[0]),
                    shuffle_seed=fed.seed,
                    epoch_offset=rnd * fed.local_epochs, loss="mse")
            except tinynn.DivergedError:
                log.warning("round %d: client %d diverged, excluded",
                            rnd, cid)
                excluded.append((rnd, cid))
                continue
            survivors.append((cid, xn.shape[0], local.get_weights()))
        if survivors:
            global_w = fedavg(survivors)
        net.set_weights(global_w)
        mse, _ = tinynn.evaluate(net, union_x, union_y, loss="mse")
        trace.append(float(np.sqrt(mse)))

    regressor = MLPRegressor(network=net, hidden=template.hidden,
                             param_count=net.param_count,
                             trace=tuple(trace))
    return FedTrainResult(regressor=regressor, stats=stats, target=target,
                          excluded=tuple(excluded))


class ValidationMode(str, Enum):
    FEDERATED = "federated"
    CENTRALIZED = "centralized"


@dataclass(frozen=True)
class ValidationResult:
    mode: ValidationMode
    per_client: tuple[float, ...]
    overall: float


def validate(model: CostModel, partitions: list[ClientPartition],
             mode: ValidationMode,
             server_holdout: list[ProfileSample] | None = None,
             ) -> ValidationResult:
    """Score the global model either on per-client holdouts or centrally.

    Federated mode reports one nRMSE per client holdout plus their
    sample-weighted mean; centralized mode reports a single nRMSE on the
    server-held rows.  The denominator is the model's stored target
    range in both modes.
    """
    mode = ValidationMode(mode)
    span = model.stats.target_range(model.target)

    def score(rows: list[ProfileSample]) -> float:
        preds = model.predict_raw(encode_many(rows))
        truth = extract_targets(rows)[model.target]
        return nrmse(preds, truth, span)

    if mode is ValidationMode.CENTRALIZED:
        if not server_holdout:
            raise ValueError("centralized validation needs server holdout rows")
        return ValidationResult(mode, (), score(list(server_holdout)))

    ordered = sorted(partitions, key=lambda p: p.client_id)
    if not ordered:
        raise ValueError("federated validation needs client partitions")
    per_client = [score(list(p.holdout)) for p in ordered]
    weights = [len(p.holdout) for p in ordered]
    # anchored weighted mean: a lone client's score passes through exactly
    total = sum(weights)
    overall = per_client[0] + sum(
        w / total * (v - per_client[0])
        for v, w in zip(per_client[1:], weights[1:]))
    return ValidationResult(mode, tuple(per_client), float(overall))
