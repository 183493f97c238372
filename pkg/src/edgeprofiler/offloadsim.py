"""Discrete-event simulation of offloaded training tasks on edge nodes.

Nodes run one task at a time and differ only by their speed_factor.
Tasks are dispatched in arrival order, immediately and non-preemptively;
the scheduling policies differ only in which node each task is committed
to.  Ground-truth runtimes come from a reference-time lookup scaled by
the node's speed and a seeded lognormal noise factor, since the
simulator cannot execute real training for thousands of tasks.

The noise draw is per task, not per (task, node), so policies and nodes
see the same luck at the same seed and comparisons stay fair.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .profiler import HardwareDescriptor, ProfileSample, hardware_from_dict, \
    hardware_to_dict
from .regress import SCHEMA_VERSION, CostModel, SchemaMismatchError, \
    encode_parts
from .workload import DatasetSpec, ModelConfig, config_from_dict, \
    config_to_dict, conv_spec_string, dataset_from_dict, dataset_to_dict, \
    mlp_hidden_string


@dataclass
class EdgeNode:
    """One executor; busy_until advances as tasks are committed to it."""

    node_id: int
    hardware: HardwareDescriptor
    busy_until: float = 0.0

    def __post_init__(self) -> None:
        if self.node_id < 0:
            raise ValueError("node_id must be >= 0")
        if self.busy_until < 0:
            raise ValueError("busy_until must be >= 0")


@dataclass(frozen=True)
class LinkModel:
    """Uniform link: latency plus payload megabits over bandwidth."""

    bandwidth_mbps: float
    latency_s: float = 0.0

    def __post_init__(self) -> None:
        if not self.bandwidth_mbps > 0:
            raise ValueError("bandwidth_mbps must be positive")
        if self.latency_s < 0:
            raise ValueError("latency_s must be >= 0")

    def transfer_time(self, payload_mb: float) -> float:
        return self.latency_s + payload_mb * 8.0 / self.bandwidth_mbps

    @staticmethod
    def zero_cost() -> "LinkModel":
        return LinkModel(bandwidth_mbps=math.inf, latency_s=0.0)


class TaskOrigin(str, Enum):
    DEVICE = "device"
    BROKER = "broker"


@dataclass(frozen=True)
class TaskRequest:
    """One offloaded training job and its shipping cost."""

    task_id: int
    config: ModelConfig
    data: DatasetSpec
    payload_mb: float
    arrival_s: float
    deadline_s: float | None = None
    origin: TaskOrigin = TaskOrigin.DEVICE

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", TaskOrigin(self.origin))
        if self.payload_mb <= 0:
            raise ValueError("payload_mb must be positive")
        if self.arrival_s < 0:
            raise ValueError("arrival_s must be >= 0")
        if self.deadline_s is not None and not self.deadline_s > self.arrival_s:
            raise ValueError("deadline_s must be after arrival_s")


class PolicyKind(str, Enum):
    FCFS = "fcfs"
    ROUND_ROBIN = "round_robin"
    GREEDY_PREDICTED = "greedy_predicted"
    GREEDY_ORACLE = "greedy_oracle"


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    predictor: CostModel | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.kind is PolicyKind.GREEDY_PREDICTED and self.predictor is None:
            raise ValueError("greedy_predicted needs a trained predictor")


@dataclass(frozen=True)
class TaskRecord:
    task_id: int
    node_id: int
    arrival_s: float
    start_s: float
    finish_s: float
    predicted_runtime_s: float | None
    actual_runtime_s: float
    deadline_met: bool | None  # None when the task had no deadline


@dataclass(frozen=True)
class SimResult:
    records: tuple[TaskRecord, ...]
    makespan_s: float
    mean_completion_s: float
    deadline_violation_count: int


class ReferenceTimes:
    """Exact-match lookup from (config, dataset) to reference seconds."""

    def __init__(self, table: dict[tuple, float]):
        self._table = dict(table)

    @staticmethod
    def _key(config: ModelConfig, data: DatasetSpec) -> tuple:
        arch = config.arch
        return (arch.family.value, conv_spec_string(arch.conv_layers),
                mlp_hidden_string(arch.mlp_hidden), config.epochs,
                config.optimizer.value, config.learning_rate,
                config.batch_size, data.num_samples, data.input_height,
                data.input_width, data.input_channels, data.num_classes)

    @classmethod
    def from_samples(cls, samples: list[ProfileSample]) -> "ReferenceTimes":
        """Mean measured time per distinct config over non-diverged rows."""
        sums: dict[tuple, list[float]] = {}
        for s in samples:
            if s.diverged:
                continue
            sums.setdefault(cls._key(s.config, s.data), []).append(
                s.total_time_s)
        return cls({k: sum(v) / len(v) for k, v in sums.items()})

    @classmethod
    def from_pairs(cls,
                   pairs: list[tuple[ModelConfig, DatasetSpec, float]],
                   ) -> "ReferenceTimes":
        return cls({cls._key(c, d): t for c, d, t in pairs})

    def __len__(self) -> int:
        return len(self._table)

    def lookup(self, config: ModelConfig, data: DatasetSpec) -> float:
        key = self._key(config, data)
        if key not in self._table:
            raise ValueError(f"no reference time for config {key}")
        return self._table[key]


def predict_runtime(task: TaskRequest, node: EdgeNode,
                    predictor: CostModel) -> float:
    """Predicted seconds for this task on this node.

    The model yields log10 reference-machine seconds; the node's
    speed_factor divides the de-logged value.  Hardware feature columns
    collapse to constants under single-machine training data, so this
    scaling law is what differentiates nodes.
    """
    if predictor.target != "log_time_s":
        raise ValueError("runtime prediction needs a log_time_s model")
    if predictor.schema_version != SCHEMA_VERSION:
        raise SchemaMismatchError(
            f"predictor schema {predictor.schema_version!r} "
            f"differs from {SCHEMA_VERSION}")
    features = encode_parts(task.config, task.data, node.hardware)
    log_seconds = float(predictor.predict_raw(features)[0])
    return 10.0 ** log_seconds / node.hardware.speed_factor


def decide_offload(task: TaskRequest, local: EdgeNode,
                   remotes: list[EdgeNode], link: LinkModel,
                   predictor: CostModel) -> str | int:
    """Pick "local" or a remote node_id minimizing predicted finish.

    Local execution pays no transfer.  Queue wait is the node's backlog
    beyond the task's arrival, never negative.  Ties go to local, then
    to the lowest node_id.
    """
    if not remotes:
        raise ValueError("need at least one remote node")
    now = task.arrival_s

    def wait(node: EdgeNode) -> float:
        return max(0.0, node.busy_until - now)

    best: str | int = "local"
    best_cost = wait(local) + predict_runtime(task, local, predictor)
    for node in sorted(remotes, key=lambda n: n.node_id):
        cost = (link.transfer_time(task.payload_mb) + wait(node)
                + predict_runtime(task, node, predictor))
        if cost < best_cost:
            best, best_cost = node.node_id, cost
    return best


def _pick_node(task: TaskRequest, ready: dict[int, float],
               nodes: dict[int, EdgeNode], policy: Policy, link: LinkModel,
               dispatch_index: int, actual: dict[int, float]) -> int:
    """The committed node_id for one task under the given policy."""
    ids = sorted(ready)
    if policy.kind is PolicyKind.FCFS:
        return min(ids, key=lambda i: (ready[i], i))
    if policy.kind is PolicyKind.ROUND_ROBIN:
        return ids[dispatch_index % len(ids)]

    def finish(node_id: int, runtime: float) -> float:
        start = max(task.arrival_s + link.transfer_time(task.payload_mb),
                    ready[node_id])
        return start + runtime

    if policy.kind is PolicyKind.GREEDY_PREDICTED:
        return min(ids, key=lambda i: (
            finish(i, predict_runtime(task, nodes[i], policy.predictor)), i))
    return min(ids, key=lambda i: (finish(i, actual[i]), i))


def simulate(tasks: list[TaskRequest], nodes: list[EdgeNode],
             link: LinkModel, policy: Policy, seed: int, *,
             reference: ReferenceTimes,
             noise_sigma: float = 0.1) -> SimResult:
    """Run one policy over the workload and return per-task records.

    Tasks are committed in arrival order.  A task's actual runtime on a
    node is reference_seconds / speed_factor * exp(sigma * z) with one
    standard-normal z per task, drawn from (seed, arrival position); at
    the same seed every policy sees identical ground truth.  Input node
    objects are never mutated.
    """
    if not nodes:
        raise ValueError("need at least one node")
    ids = [n.node_id for n in nodes]
    if len(set(ids)) != len(ids):
        raise ValueError("node ids must be unique")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    by_id = {n.node_id: n for n in nodes}
    ready = {n.node_id: n.busy_until for n in nodes}

    ordered = sorted(tasks, key=lambda t: t.arrival_s)
    records = []
    for index, task in enumerate(ordered):
        z = float(np.random.default_rng([seed, index]).standard_normal())
        noise = math.exp(noise_sigma * z)
        reference_s = reference.lookup(task.config, task.data)
        actual = {i: reference_s / by_id[i].hardware.speed_factor * noise
                  for i in ready}

        chosen = _pick_node(task, ready, by_id, policy, link, index, actual)
        start = max(task.arrival_s + link.transfer_time(task.payload_mb),
                    ready[chosen])
        runtime = actual[chosen]
        finish = start + runtime
        ready[chosen] = finish

        predicted = None
        if policy.kind is PolicyKind.GREEDY_PREDICTED:
            predicted = predict_runtime(task, by_id[chosen], policy.predictor)
        met = None if task.deadline_s is None else finish <= task.deadline_s
        records.append(TaskRecord(
            task_id=task.task_id, node_id=chosen, arrival_s=task.arrival_s,
            start_s=start, finish_s=finish, predicted_runtime_s=predicted,
            actual_runtime_s=runtime, deadline_met=met))

    if not records:
        return SimResult(records=(), makespan_s=0.0, mean_completion_s=0.0,
                         deadline_violation_count=0)
    first_arrival = min(r.arrival_s for r in records)
    last_finish = max(r.finish_s for r in records)
    mean_completion = sum(r.finish_s - r.arrival_s
                          for r in records) / len(records)
    violations = sum(1 for r in records if r.deadline_met is False)
    return SimResult(records=tuple(records),
                     makespan_s=last_finish - first_arrival,
                     mean_completion_s=mean_completion,
                     deadline_violation_count=violations)


def report(results: dict[str, SimResult]) -> dict:
    """Aggregate table over simulated policies plus pairwise ratios.

    Ratios compare mean completion times; `"a/b"` below 1.0 means policy
    `a` finished tasks faster on average than policy `b`.
    """
    if not results:
        raise ValueError("nothing to report")
    if all(len(r.records) == 0 for r in results.values()):
        raise ValueError("no simulated tasks to report")
    table = {
        name: {
            "tasks": len(r.records),
            "makespan_s": r.makespan_s,
            "mean_completion_s": r.mean_completion_s,
            "deadline_violation_count": r.deadline_violation_count,
        }
        for name, r in results.items()
    }
    ratios = {}
    for a, ra in results.items():
        for b, rb in results.items():
            if a != b and rb.mean_completion_s > 0:
                ratios[f"{a}/{b}"] = (ra.mean_completion_s
                                      / rb.mean_completion_s)
    return {"policies": table, "ratios": ratios}


def generate_workload(n_tasks: int, *, rate_per_s: float,
                      configs: list[ModelConfig], data: DatasetSpec,
                      seed: int,
                      payload_mb_range: tuple[float, float] = (0.5, 8.0),
                      deadline_slack_s: float | None = None,
                      ) -> list[TaskRequest]:
    """Seeded Poisson arrivals drawing configs uniformly from a pool."""
    if n_tasks < 0:
        raise ValueError("n_tasks must be >= 0")
    if rate_per_s <= 0:
        raise ValueError("rate_per_s must be positive")
    if not configs:
        raise ValueError("need a non-empty config pool")
    lo, hi = payload_mb_range
    if not 0 < lo <= hi:
        raise ValueError("payload_mb_range must be positive and ordered")
    rng = np.random.default_rng(seed)
    clock = 0.0
    tasks = []
    for i in range(n_tasks):
        clock += float(rng.exponential(1.0 / rate_per_s))
        config = configs[int(rng.integers(len(configs)))]
        deadline = None if deadline_slack_s is None else clock + deadline_slack_s
        tasks.append(TaskRequest(
            task_id=i, config=config, data=data,
            payload_mb=float(rng.uniform(lo, hi)), arrival_s=clock,
            deadline_s=deadline))
    return tasks


# -- wire formats ----------------------------------------------------------

def task_to_dict(task: TaskRequest) -> dict:
    return {
        "task_id": task.task_id,
        "config": config_to_dict(task.config),
        "data": dataset_to_dict(task.data),
        "payload_mb": task.payload_mb,
        "arrival_s": task.arrival_s,
        "deadline_s": task.deadline_s,
        "origin": task.origin.value,
    }


def task_from_dict(d: dict) -> TaskRequest:
    return TaskRequest(
        task_id=int(d["task_id"]),
        config=config_from_dict(d["config"]),
        data=dataset_from_dict(d["data"]),
        payload_mb=float(d["payload_mb"]),
        arrival_s=float(d["arrival_s"]),
        deadline_s=None if d.get("deadline_s") is None else float(d["deadline_s"]),
        origin=TaskOrigin(d.get("origin", "device")),
    )


def node_to_dict(node: EdgeNode) -> dict:
    return {
        "node_id": node.node_id,
        "hardware": hardware_to_dict(node.hardware),
        "busy_until": node.busy_until,
    }


def node_from_dict(d: dict) -> EdgeNode:
    return EdgeNode(
        node_id=int(d["node_id"]),
        hardware=hardware_from_dict(d["hardware"]),
        busy_until=float(d.get("busy_until", 0.0)),
    )


RESULT_CSV_COLUMNS = ["task_id", "node_id", "arrival_s", "start_s",
                      "finish_s", "predicted_runtime_s", "actual_runtime_s",
                      "deadline_met"]


def write_result_csv(result: SimResult, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_CSV_COLUMNS)
        for r in result.records:
            writer.writerow([
                r.task_id, r.node_id, repr(r.arrival_s), repr(r.start_s),
                repr(r.finish_s),
                "" if r.predicted_runtime_s is None
                else repr(r.predicted_runtime_s),
                repr(r.actual_runtime_s),
                "" if r.deadline_met is None else str(r.deadline_met).lower(),
            ])


def result_aggregates(result: SimResult) -> dict:
    return {
        "tasks": len(result.records),
        "makespan_s": result.makespan_s,
        "mean_completion_s": result.mean_completion_s,
        "deadline_violation_count": result.deadline_violation_count,
    }
