"""Profiler tests: calibration math, CSV schema and round-trip, sweep
resume behaviour, and the frozen analytic-count passthrough."""

import csv

import pytest

from edgeprofiler.profiler import (
    PROFILE_COLUMNS,
    REFERENCE_SECONDS,
    HardwareDescriptor,
    ProfileSample,
    SweepPlan,
    measure_speed_factor,
    plan_from_dict,
    plan_to_dict,
    probe_hardware,
    read_profile_csv,
    run_one,
    run_sweep,
    sample_grid,
    sample_to_row,
    timing_dispersion,
)
from edgeprofiler.workload import (
    DatasetSpec,
    ModelArch,
    ModelConfig,
    Optimizer,
    enumerate_grid,
)

REF_HW = HardwareDescriptor(arch_tag="x86_64", clock_ghz=2.5, logical_cores=4,
                            speed_factor=1.0)

TINY_DATA = DatasetSpec(num_samples=16, input_height=8, input_width=8,
                        num_classes=2)


def tiny_config(epochs=1, batch_size=8, lr=0.01, optimizer=Optimizer.SGD,
                hidden=(4,)):
    return ModelConfig(ModelArch.mlp(hidden), epochs=epochs,
                       optimizer=optimizer, learning_rate=lr,
                       batch_size=batch_size)


class TestCalibration:
    def test_reference_time_gives_unit_factor(self):
        assert measure_speed_factor(elapsed=REFERENCE_SECONDS) == 1.0

    def test_twice_as_fast_gives_factor_two(self):
        got = measure_speed_factor(elapsed=REFERENCE_SECONDS / 2)
        assert got == pytest.approx(2.0, rel=0.10)

    def test_real_benchmark_is_positive(self):
        assert measure_speed_factor() > 0

    def test_nonpositive_elapsed_rejected(self):
        with pytest.raises(ValueError):
            measure_speed_factor(elapsed=0.0)


class TestProbeHardware:
    def test_override_passthrough(self):
        hw = probe_hardware(clock_ghz=3.5, speed_factor=1.0)
        assert hw.clock_ghz == 3.5
        assert hw.speed_factor == 1.0

    def test_probed_fields_are_sane(self):
        hw = probe_hardware(speed_factor=1.0)
        assert hw.arch_tag in ("x86_64", "aarch64", "other")
        assert hw.logical_cores >= 1
        assert hw.clock_ghz > 0

    def test_descriptor_validation(self):
        with pytest.raises(ValueError):
            HardwareDescriptor("sparc", 2.0, 4, 1.0)
        with pytest.raises(ValueError):
            HardwareDescriptor("x86_64", -1.0, 4, 1.0)
        with pytest.raises(ValueError):
            HardwareDescriptor("x86_64", 2.0, 4, 0.0)
        with pytest.raises(ValueError):
            HardwareDescriptor("x86_64", 2.0, 0, 1.0)


class TestRunOne:
    def test_analytic_counts_for_reference_mlp(self):
        # the [100;50] MLP at 1000 samples x 5 epochs
        config = ModelConfig(ModelArch.mlp((100, 50)), epochs=5,
                             optimizer=Optimizer.ADAM, learning_rate=0.001,
                             batch_size=128)
        data = DatasetSpec(num_samples=1000)
        sample = run_one(config, data, REF_HW, seed=0)
        assert sample.flops == 2_517_000_000
        assert sample.macs == 83_900
        assert sample.params == 84_060
        assert sample.total_time_s > 0
        assert not sample.diverged
        assert 0.0 <= sample.final_accuracy <= 1.0

    def test_counts_identical_across_repeats(self):
        a = run_one(tiny_config(), TINY_DATA, REF_HW, seed=3, repeat_index=0)
        b = run_one(tiny_config(), TINY_DATA, REF_HW, seed=3, repeat_index=1)
        assert (a.params, a.flops, a.macs) == (b.params, b.flops, b.macs)
        assert a.repeat_index == 0 and b.repeat_index == 1

    def test_more_epochs_take_longer(self):
        config_1 = tiny_config(epochs=1, hidden=(64, 32))
        config_9 = tiny_config(epochs=9, hidden=(64, 32))
        data = DatasetSpec(num_samples=512)
        short = run_one(config_1, data, REF_HW, seed=0)
        long = run_one(config_9, data, REF_HW, seed=0)
        assert long.total_time_s > short.total_time_s

    def test_divergence_recorded_not_raised(self):
        config = tiny_config(epochs=40, lr=50.0, hidden=(16,))
        data = DatasetSpec(num_samples=64)
        sample = run_one(config, data, REF_HW, seed=0)
        assert sample.diverged
        assert sample.final_accuracy is None
        assert sample.total_time_s > 0


class TestCsvFormat:
    def test_header_matches_contract(self, tmp_path):
        out = tmp_path / "p.csv"
        plan = SweepPlan(configs=(tiny_config(),), data=TINY_DATA,
                         warmup_runs=0)
        run_sweep(plan, str(out), REF_HW)
        header = out.read_text().splitlines()[0]
        assert header == (
            "family,conv_spec,mlp_hidden,epochs,optimizer,learning_rate,"
            "batch_size,num_samples,input_h,input_w,input_c,num_classes,"
            "arch_tag,clock_ghz,logical_cores,speed_factor,params,flops,"
            "macs,total_time_s,final_accuracy,diverged,repeat_index,seed"
        )

    def test_round_trip_preserves_sample(self, tmp_path):
        sample = run_one(tiny_config(optimizer=Optimizer.RMSPROP, lr=0.005),
                         TINY_DATA, REF_HW, seed=11, repeat_index=2)
        out = tmp_path / "p.csv"
        with open(out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=PROFILE_COLUMNS)
            writer.writeheader()
            writer.writerow(sample_to_row(sample))
        (back,) = read_profile_csv(str(out))
        assert back.config == sample.config
        assert back.data == sample.data
        assert back.hardware.speed_factor == sample.hardware.speed_factor
        assert back.total_time_s == sample.total_time_s
        assert back.final_accuracy == sample.final_accuracy
        assert back.diverged == sample.diverged
        assert (back.params, back.flops, back.macs, back.repeat_index,
                back.seed) == (sample.params, sample.flops, sample.macs, 2, 11)

    def test_diverged_row_round_trips_with_empty_accuracy(self, tmp_path):
        sample = ProfileSample(
            config=tiny_config(), data=TINY_DATA, hardware=REF_HW,
            params=1, flops=2, macs=3, total_time_s=0.5, final_accuracy=None,
            diverged=True, repeat_index=0, seed=0)
        row = sample_to_row(sample)
        assert row["final_accuracy"] == ""
        assert row["diverged"] == "true"
        out = tmp_path / "p.csv"
        with open(out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=PROFILE_COLUMNS)
            writer.writeheader()
            writer.writerow(row)
        (back,) = read_profile_csv(str(out))
        assert back.diverged and back.final_accuracy is None

    def test_unexpected_columns_rejected(self, tmp_path):
        out = tmp_path / "bad.csv"
        out.write_text("family,epochs\nmlp,5\n")
        with pytest.raises(ValueError):
            read_profile_csv(str(out))


class TestSweep:
    def test_row_cardinality(self, tmp_path):
        configs = (tiny_config(), tiny_config(batch_size=4),
                   tiny_config(optimizer=Optimizer.ADAM))
        plan = SweepPlan(configs=configs, data=TINY_DATA, repeats=2,
                         warmup_runs=0)
        out = tmp_path / "sweep.csv"
        summary = run_sweep(plan, str(out), REF_HW)
        assert summary.planned == 6
        assert summary.written == 6
        assert summary.failures == 0
        assert len(read_profile_csv(str(out))) == 6

    def test_rerun_skips_everything(self, tmp_path):
        plan = SweepPlan(configs=(tiny_config(),), data=TINY_DATA,
                         repeats=2, warmup_runs=0)
        out = tmp_path / "sweep.csv"
        run_sweep(plan, str(out), REF_HW)
        again = run_sweep(plan, str(out), REF_HW)
        assert again.skipped == 2
        assert again.written == 0
        assert len(read_profile_csv(str(out))) == 2

    def test_resume_fills_only_missing_rows(self, tmp_path):
        configs = (tiny_config(), tiny_config(batch_size=4))
        plan = SweepPlan(configs=configs, data=TINY_DATA, warmup_runs=0)
        out = tmp_path / "sweep.csv"
        run_sweep(plan, str(out), REF_HW)
        lines = out.read_text().splitlines(keepends=True)
        with open(out, "w") as fh:
            fh.writelines(lines[:-1])  # drop the last data row
        summary = run_sweep(plan, str(out), REF_HW)
        assert summary.skipped == 1
        assert summary.written == 1
        rows = read_profile_csv(str(out))
        assert len(rows) == 2
        assert len({(r.config, r.repeat_index) for r in rows}) == 2

    def test_warmup_runs_leave_no_rows(self, tmp_path):
        plan = SweepPlan(configs=(tiny_config(),), data=TINY_DATA,
                         warmup_runs=2)
        out = tmp_path / "sweep.csv"
        summary = run_sweep(plan, str(out), REF_HW)
        assert summary.written == 1
        assert len(read_profile_csv(str(out))) == 1

    def test_per_run_failure_recorded_and_sweep_continues(self, tmp_path):
        bad = tiny_config(batch_size=64)  # 64 > 16 samples
        plan = SweepPlan(configs=(tiny_config(), bad, tiny_config(epochs=2)),
                         data=TINY_DATA, warmup_runs=0)
        out = tmp_path / "sweep.csv"
        summary = run_sweep(plan, str(out), REF_HW)
        assert summary.failures == 1
        assert summary.written == 2
        assert len(read_profile_csv(str(out))) == 2

    def test_empty_plan_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            run_sweep(SweepPlan(configs=(), data=TINY_DATA),
                      str(tmp_path / "x.csv"), REF_HW)

    def test_progress_callback_sees_every_run(self, tmp_path):
        seen = []
        plan = SweepPlan(configs=(tiny_config(), tiny_config(epochs=2)),
                         data=TINY_DATA, warmup_runs=0)
        run_sweep(plan, str(tmp_path / "s.csv"), REF_HW,
                  progress=lambda done, total, s: seen.append((done, total)))
        assert seen == [(1, 2), (2, 2)]


class TestSampleGrid:
    def test_seeded_and_deterministic(self):
        a = sample_grid(300, seed=7)
        b = sample_grid(300, seed=7)
        c = sample_grid(300, seed=8)
        assert a == b
        assert a != c
        assert len(a) == 300

    def test_no_duplicates_and_enumeration_order(self):
        grid = enumerate_grid()
        index = {cfg: i for i, cfg in enumerate(grid)}
        picked = sample_grid(50, seed=3)
        positions = [index[cfg] for cfg in picked]
        assert len(set(positions)) == 50
        assert positions == sorted(positions)

    def test_bounds_checked(self):
        with pytest.raises(ValueError):
            sample_grid(0, seed=0)
        with pytest.raises(ValueError):
            sample_grid(2305, seed=0)


class TestPlanWire:
    def test_round_trip(self):
        plan = SweepPlan(configs=(tiny_config(), tiny_config(epochs=3)),
                         data=TINY_DATA, repeats=2, warmup_runs=1, seed=9)
        assert plan_from_dict(plan_to_dict(plan)) == plan


def test_timing_dispersion():
    assert timing_dispersion([1.0, 1.1, 0.9]) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        timing_dispersion([])
