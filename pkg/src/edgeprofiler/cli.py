"""Command line front end wiring the pipeline end to end.

Subcommands: probe, sweep, fit, benchmark, fedfit, simulate, report.
Every run that produces artifacts drops a RunManifest JSON next to them
so the artifact can be regenerated from the manifest alone (timing
numbers excepted, since those depend on the machine).

Exit codes: 0 success, 1 bad arguments, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, dataclass

from . import __version__
from .federated import (
    FedConfig,
    PartitionMode,
    RegressorTemplate,
    ValidationMode,
    fed_train,
    partition,
    validate,
)
from .offloadsim import (
    EdgeNode,
    LinkModel,
    Policy,
    PolicyKind,
    ReferenceTimes,
    generate_workload,
    result_aggregates,
    simulate,
    write_result_csv,
)
from .profiler import (
    HardwareDescriptor,
    hardware_to_dict,
    plan_from_dict,
    probe_hardware,
    read_profile_csv,
    run_sweep,
)
from .regress import (
    TARGET_NAMES,
    CostModel,
    compute_stats,
    encode_many,
    extract_targets,
    fit_gbdt,
    fit_mlp_regressor,
    load_model,
    normalize_features,
    normalize_target,
    run_benchmark,
    save_model,
    write_benchmark_csv,
    write_benchmark_json,
)


class UsageError(ValueError):
    """Bad flag combination detected after parsing; maps to exit 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags by default; the contract here
    # reserves 2 for runtime failures, so remap argument errors to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


@dataclass
class RunManifest:
    """Reproducibility record written next to every output artifact."""

    toolkit_version: str
    subcommand: str
    config: dict
    inputs: list
    outputs: list
    seeds: dict
    started_utc: str
    finished_utc: str


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _write_json_atomic(payload, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2)
    os.replace(tmp, path)


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _config_snapshot(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _parse_int_list(text: str, flag: str) -> tuple[int, ...]:
    try:
        values = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated integers")
    if not values:
        raise UsageError(f"{flag} must name at least one value")
    return values


def _parse_float_list(text: str, flag: str) -> tuple[float, ...]:
    try:
        values = tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated numbers")
    if not values:
        raise UsageError(f"{flag} must name at least one value")
    return values


def _usable_samples(path: str, *, include_diverged: bool = False):
    samples = read_profile_csv(path)
    if include_diverged:
        return samples
    return [s for s in samples if not s.diverged]


# -- subcommands -----------------------------------------------------------
# Each returns (inputs, outputs, seeds) for the manifest.


def cmd_probe(args):
    hw = probe_hardware()
    out = os.path.join(_out_dir(args), "probe.json")
    _write_json_atomic({"hardware": hardware_to_dict(hw)}, out)
    print(f"probe: {hw.arch_tag} {hw.logical_cores} cores "
          f"{hw.clock_ghz:.2f} GHz speed_factor {hw.speed_factor:.3f}")
    return [], [out], {}


def cmd_sweep(args):
    with open(args.plan) as fh:
        plan = plan_from_dict(json.load(fh))
    hw = probe_hardware()
    out = os.path.join(_out_dir(args), "profile.csv")
    summary = run_sweep(plan, out, hw)
    print(f"sweep: planned {summary.planned} written {summary.written} "
          f"skipped {summary.skipped} diverged {summary.diverged} "
          f"failures {summary.failures} -> {out}")
    return [args.plan], [out], {"plan_seed": plan.seed}


def cmd_fit(args):
    samples = _usable_samples(args.data)
    if len(samples) < 2:
        raise RuntimeError(f"{args.data} holds {len(samples)} usable rows; "
                           "need at least 2 to fit")
    x = encode_many(samples)
    targets = extract_targets(samples)
    stats = compute_stats(x, targets)
    xn = normalize_features(x, stats)
    yn = normalize_target(targets[args.target], stats, args.target)
    if args.kind == "gbdt":
        model = fit_gbdt(xn, yn, max_depth=args.max_depth,
                         subsample=args.subsample, rounds=args.rounds,
                         seed=args.seed)
    else:
        model = fit_mlp_regressor(xn, yn.reshape(-1, 1),
                                  hidden=_parse_int_list(args.hidden,
                                                         "--hidden"),
                                  epochs=args.epochs, seed=args.seed)
    cost_model = CostModel(kind=args.kind, target=args.target, stats=stats,
                           model=model)
    out = os.path.join(_out_dir(args), f"model_{args.target}.json")
    save_model(cost_model, out)
    print(f"fit: {args.kind} model for {args.target} "
          f"on {len(samples)} rows -> {out}")
    return [args.data], [out], {"seed": args.seed}


def cmd_benchmark(args):
    samples = read_profile_csv(args.data)
    report = run_benchmark(samples, split_seed=args.seed)
    out_dir = _out_dir(args)
    out_csv = os.path.join(out_dir, "benchmark.csv")
    out_json = os.path.join(out_dir, "benchmark.json")
    write_benchmark_csv(report, out_csv)
    write_benchmark_json(report, out_json)
    for target in TARGET_NAMES:
        best = report.best("gbdt", target)
        print(f"benchmark: best gbdt {target} = {best.label} "
              f"test nRMSE {best.test_nrmse:.5f}")
    return [args.data], [out_csv, out_json], {"split_seed": args.seed}


def cmd_fedfit(args):
    samples = _usable_samples(args.data)
    mode = PartitionMode(args.partition)
    parts = partition(samples, mode, args.clients, args.seed)
    fed = FedConfig(num_clients=args.clients, rounds=args.rounds,
                    local_epochs=args.local_epochs, partition_mode=mode,
                    seed=args.seed)
    template = RegressorTemplate(hidden=_parse_int_list(args.hidden,
                                                        "--hidden"),
                                 learning_rate=args.learning_rate,
                                 batch_size=args.batch_size)
    result = fed_train(parts, fed, template, target=args.target)
    model = result.as_model()
    out_dir = _out_dir(args)
    out_model = os.path.join(out_dir, f"fed_model_{args.target}.json")
    save_model(model, out_model)
    fed_val = validate(model, parts, ValidationMode.FEDERATED)
    pooled = [s for part in parts for s in part.holdout]
    cen_val = validate(model, parts, ValidationMode.CENTRALIZED,
                       server_holdout=pooled)
    out_summary = os.path.join(out_dir, "fed_summary.json")
    _write_json_atomic({
        "target": args.target,
        "clients": args.clients,
        "rounds": args.rounds,
        "local_epochs": args.local_epochs,
        "excluded": [list(pair) for pair in result.excluded],
        "round_trace": list(result.regressor.trace),
        "validation": {
            "federated": {"per_client": list(fed_val.per_client),
                          "overall": fed_val.overall},
            "centralized": {"overall": cen_val.overall},
        },
    }, out_summary)
    print(f"fedfit: {args.clients} clients, {args.rounds} rounds -> "
          f"holdout nRMSE {fed_val.overall:.5f} (federated) "
          f"{cen_val.overall:.5f} (centralized)")
    return [args.data], [out_model, out_summary], {"seed": args.seed}


def cmd_simulate(args):
    samples = _usable_samples(args.data)
    if not samples:
        raise RuntimeError(f"{args.data} holds no usable rows")
    reference = ReferenceTimes.from_samples(samples)
    configs = list(dict.fromkeys(s.config for s in samples))
    kind = PolicyKind(args.policy)
    predictor = None
    if kind is PolicyKind.GREEDY_PREDICTED:
        if args.model is None:
            raise UsageError("--policy greedy_predicted requires --model")
        predictor = load_model(args.model)
    policy = Policy(kind, predictor)
    base = samples[0].hardware
    nodes = [
        EdgeNode(i, HardwareDescriptor(base.arch_tag, base.clock_ghz,
                                       base.logical_cores, factor,
                                       base.label))
        for i, factor in enumerate(
            _parse_float_list(args.speed_factors, "--speed-factors"))
    ]
    tasks = generate_workload(args.tasks, rate_per_s=args.rate,
                              configs=configs, data=samples[0].data,
                              seed=args.seed,
                              deadline_slack_s=args.deadline_slack)
    result = simulate(tasks, nodes,
                      LinkModel(args.bandwidth, args.latency), policy,
                      seed=args.seed, reference=reference,
                      noise_sigma=args.noise_sigma)
    out_dir = _out_dir(args)
    out_csv = os.path.join(out_dir, "sim_result.csv")
    out_json = os.path.join(out_dir, "sim_summary.json")
    write_result_csv(result, out_csv)
    _write_json_atomic(result_aggregates(result), out_json)
    print(f"simulate: {args.policy} over {args.tasks} tasks on "
          f"{len(nodes)} nodes -> makespan {result.makespan_s:.2f} s, "
          f"mean completion {result.mean_completion_s:.2f} s")
    inputs = [args.data] + ([args.model] if args.model else [])
    return inputs, [out_csv, out_json], {"seed": args.seed}


def cmd_report(args):
    with open(args.data) as fh:
        payload = json.load(fh)
    entries = payload.get("entries")
    if not isinstance(entries, list) or not entries:
        raise RuntimeError(f"{args.data} is not a benchmark summary")
    out_dir = _out_dir(args)
    out_capacity = os.path.join(out_dir, "capacity_vs_nrmse.csv")
    out_depth = os.path.join(out_dir, "depth_subsample_vs_nrmse.csv")
    with open(out_capacity, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["capacity", "param_count", "target",
                         "train_nrmse", "test_nrmse"])
        for e in entries:
            if e["model_family"] == "mlp":
                writer.writerow([e["capacity"], e["param_count"],
                                 e["target"], repr(e["train_nrmse"]),
                                 repr(e["test_nrmse"])])
    with open(out_depth, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["max_depth", "subsample", "target",
                         "train_nrmse", "test_nrmse"])
        for e in entries:
            if e["model_family"] == "gbdt":
                writer.writerow([e["max_depth"], repr(e["subsample"]),
                                 e["target"], repr(e["train_nrmse"]),
                                 repr(e["test_nrmse"])])
    print(f"report: wrote {out_capacity} and {out_depth}")
    return [args.data], [out_capacity, out_depth], {}


# -- wiring ----------------------------------------------------------------


def _add_out(p):
    p.add_argument("--out", default=os.environ.get("PROFILER_OUT", "."),
                   help="output directory (default: $PROFILER_OUT or .)")


def _add_seed(p):
    p.add_argument("--seed", type=int, default=0,
                   help="seed for every stochastic step (default: 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="edgeprofiler",
        description="Profile training workloads, fit cost models, and "
                    "simulate offloading decisions.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    sub.required = True

    p = sub.add_parser("probe", help="describe the host hardware")
    _add_out(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("sweep", help="run a measurement plan to CSV")
    p.add_argument("--plan", required=True, help="plan JSON path")
    _add_out(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="fit one cost model from a profile CSV")
    p.add_argument("--data", required=True, help="profile CSV path")
    p.add_argument("--target", choices=TARGET_NAMES, default="log_time_s",
                   help="prediction target (default: log_time_s)")
    p.add_argument("--kind", choices=("gbdt", "mlp"), default="gbdt",
                   help="model family (default: gbdt)")
    p.add_argument("--max-depth", type=int, default=12,
                   help="tree depth for gbdt (default: 12)")
    p.add_argument("--subsample", type=float, default=0.8,
                   help="row fraction per round for gbdt (default: 0.8)")
    p.add_argument("--rounds", type=int, default=300,
                   help="boosting rounds for gbdt (default: 300)")
    p.add_argument("--hidden", default="100,50",
                   help="hidden widths for mlp (default: 100,50)")
    p.add_argument("--epochs", type=int, default=200,
                   help="training epochs for mlp (default: 200)")
    _add_seed(p)
    _add_out(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("benchmark",
                       help="fit the full model ladder and write the "
                            "accuracy table")
    p.add_argument("--data", required=True, help="profile CSV path")
    _add_seed(p)
    _add_out(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("fedfit", help="train the regressor with federated "
                                      "averaging over partitioned rows")
    p.add_argument("--data", required=True, help="profile CSV path")
    p.add_argument("--target", choices=TARGET_NAMES, default="log_time_s",
                   help="prediction target (default: log_time_s)")
    p.add_argument("--clients", type=int, default=4,
                   help="number of clients (default: 4)")
    p.add_argument("--rounds", type=int, default=30,
                   help="federated rounds (default: 30)")
    p.add_argument("--local-epochs", type=int, default=2,
                   help="local epochs per round (default: 2)")
    p.add_argument("--partition", choices=[m.value for m in PartitionMode],
                   default="iid", help="row split mode (default: iid)")
    p.add_argument("--hidden", default="100,50",
                   help="hidden widths (default: 100,50)")
    p.add_argument("--learning-rate", type=float, default=0.05,
                   help="client learning rate (default: 0.05)")
    p.add_argument("--batch-size", type=int, default=32,
                   help="client batch size (default: 32)")
    _add_seed(p)
    _add_out(p)
    p.set_defaults(func=cmd_fedfit)

    p = sub.add_parser("simulate", help="replay a generated workload "
                                        "against a scheduling policy")
    p.add_argument("--data", required=True,
                   help="profile CSV supplying reference runtimes")
    p.add_argument("--policy", required=True,
                   choices=[k.value for k in PolicyKind],
                   help="scheduling policy")
    p.add_argument("--model", default=None,
                   help="cost model JSON (needed by greedy_predicted)")
    p.add_argument("--tasks", type=int, default=50,
                   help="workload size (default: 50)")
    p.add_argument("--rate", type=float, default=0.05,
                   help="Poisson arrival rate per second (default: 0.05)")
    p.add_argument("--speed-factors", default="0.5,1,2,4",
                   help="per-node speed factors (default: 0.5,1,2,4)")
    p.add_argument("--noise-sigma", type=float, default=0.1,
                   help="lognormal runtime noise (default: 0.1)")
    p.add_argument("--bandwidth", type=float, default=100.0,
                   help="link bandwidth in Mbps (default: 100)")
    p.add_argument("--latency", type=float, default=0.01,
                   help="link latency in seconds (default: 0.01)")
    p.add_argument("--deadline-slack", type=float, default=None,
                   help="deadline = arrival + slack when set")
    _add_seed(p)
    _add_out(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="render plot-ready CSVs from a "
                                      "benchmark summary JSON")
    p.add_argument("--data", required=True, help="benchmark JSON path")
    _add_out(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage text already printed
        return int(exc.code or 0)
    started = _now()
    try:
        inputs, outputs, seeds = args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    manifest = RunManifest(
        toolkit_version=__version__, subcommand=args.subcommand,
        config=_config_snapshot(args), inputs=inputs, outputs=outputs,
        seeds=seeds, started_utc=started, finished_utc=_now())
    path = os.path.join(_out_dir(args),
                        f"{args.subcommand}_manifest.json")
    _write_json_atomic(asdict(manifest), path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
