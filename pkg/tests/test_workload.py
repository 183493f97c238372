import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgeprofiler.workload import (
    CNN_VARIANTS,
    ConvLayerSpec,
    DatasetSpec,
    Family,
    ModelArch,
    ModelConfig,
    Optimizer,
    ShapeError,
    config_from_json,
    config_to_json,
    conv_spec_string,
    count_costs,
    dataset_from_dict,
    dataset_to_dict,
    enumerate_grid,
    grid_architectures,
    mlp_hidden_string,
    parse_conv_spec,
    parse_mlp_hidden,
    synthesize_dataset,
)


def brute_force_costs(arch: ModelArch, data: DatasetSpec) -> tuple[int, int]:
    """Independent layer-walking counter: explicit loops, no closed forms.

    Returns (params, forward_macs_per_sample).
    """
    params = 0
    macs = 0

    def dense(n_in: int, n_out: int) -> None:
        nonlocal params, macs
        for _ in range(n_out):
            params += n_in + 1  # weights into one neuron plus its bias
            macs += n_in

    if arch.family is Family.MLP:
        prev = data.flat_size
        for width in arch.mlp_hidden:
            dense(prev, width)
            prev = width
        dense(prev, data.num_classes)
        return params, macs

    h, w, c = data.input_height, data.input_width, data.input_channels
    for spec in arch.conv_layers:
        k = spec.kernel_size
        for _ in range(spec.out_channels):
            params += k * k * c + 1
        # one MAC per kernel tap per output position per output channel
        for _ in range(h):
            for _ in range(w):
                macs += spec.out_channels * k * k * c
        c = spec.out_channels
        if spec.pool:
            h, w = h // 2, w // 2
    dense(h * w * c, data.num_classes)
    return params, macs


DATA = DatasetSpec(num_samples=1000, seed=3)


class TestGrid:
    def test_cardinality(self):
        grid = enumerate_grid()
        assert len(grid) == 2304

    def test_first_element(self):
        first = enumerate_grid()[0]
        assert first.arch.family is Family.CNN
        assert first.arch.conv_layers == (ConvLayerSpec(32, 5, True),)
        assert first.epochs == 5
        assert first.optimizer is Optimizer.ADAM
        assert first.learning_rate == 0.01
        assert first.batch_size == 16

    def test_no_duplicates(self):
        grid = enumerate_grid()
        assert len(set(grid)) == len(grid)

    def test_deterministic_across_calls(self):
        assert enumerate_grid() == enumerate_grid()

    def test_architecture_order(self):
        archs = grid_architectures()
        assert [a.family for a in archs] == [Family.CNN] * 3 + [Family.MLP] * 3
        assert archs[2].conv_layers[-1].out_channels == 128
        assert archs[5].mlp_hidden == (200, 150, 100, 50)


class TestCountCosts:
    def test_mlp_100_50(self):
        cfg = ModelConfig(ModelArch.mlp([100, 50]), 5, Optimizer.SGD, 0.01, 16)
        cost = count_costs(cfg, DATA)
        assert cost.params == 84_060
        assert cost.forward_macs_per_sample == 83_900

    def test_cnn_single_block(self):
        cfg = ModelConfig(ModelArch.cnn([ConvLayerSpec(32, 5, True)]), 5,
                          Optimizer.SGD, 0.01, 16)
        cost = count_costs(cfg, DATA)
        assert cost.params == 63_562
        assert cost.forward_macs_per_sample == 689_920

    def test_training_flops_total(self):
        cfg = ModelConfig(ModelArch.mlp([100, 50]), 5, Optimizer.SGD, 0.01, 16)
        cost = count_costs(cfg, DATA)
        assert cost.training_flops_total == 2_517_000_000
        assert cost.forward_flops_per_sample == 2 * cost.forward_macs_per_sample

    def test_single_layer_degenerate_mlp(self):
        cfg = ModelConfig(ModelArch.mlp([]), 5, Optimizer.SGD, 0.01, 16)
        assert count_costs(cfg, DATA).params == 7_850

    def test_matches_brute_force_for_all_grid_variants(self):
        for arch in grid_architectures():
            cfg = ModelConfig(arch, 10, Optimizer.ADAM, 0.001, 32)
            cost = count_costs(cfg, DATA)
            params, macs = brute_force_costs(arch, DATA)
            assert cost.params == params, arch
            assert cost.forward_macs_per_sample == macs, arch

    def test_shape_mismatch_raises(self):
        # two pools shrink 4x4 to 1x1, below the final 5x5 kernel
        arch = ModelArch.cnn([
            ConvLayerSpec(4, 3, True),
            ConvLayerSpec(4, 1, True),
            ConvLayerSpec(4, 5, False),
        ])
        small = DatasetSpec(num_samples=10, input_height=4, input_width=4,
                            input_channels=1, num_classes=2, seed=0)
        cfg = ModelConfig(arch, 1, Optimizer.SGD, 0.01, 2)
        with pytest.raises(ShapeError):
            count_costs(cfg, small)

    def test_counts_ignore_optimizer_lr_batch(self):
        base = ModelConfig(ModelArch.mlp([100, 50]), 5, Optimizer.ADAM, 0.01, 16)
        other = ModelConfig(ModelArch.mlp([100, 50]), 5, Optimizer.ADAGRAD, 0.0005, 128)
        assert count_costs(base, DATA) == count_costs(other, DATA)

    @given(epochs=st.integers(1, 40), samples=st.integers(1, 5000))
    @settings(max_examples=40, deadline=None)
    def test_training_flops_linear_in_epochs_and_samples(self, epochs, samples):
        arch = ModelArch.mlp([100, 50])
        data = DatasetSpec(num_samples=samples, seed=0)
        cfg = ModelConfig(arch, epochs, Optimizer.SGD, 0.01, 1)
        cost = count_costs(cfg, data)
        per_unit = 3 * cost.forward_flops_per_sample
        assert cost.training_flops_total == per_unit * samples * epochs

    # Unrestricted layer additions CAN shrink the network (pooling or a
    # narrow appended layer shrinks the dense head), so monotonicity holds
    # in two forms: appending a layer at least as wide as its predecessor,
    # and MACs along both grid ladders.
    @given(widths=st.lists(st.integers(1, 300), min_size=1, max_size=5),
           delta=st.integers(0, 100))
    @settings(max_examples=60, deadline=None)
    def test_appending_wider_hidden_layer_never_decreases_counts(self, widths, delta):
        extra = widths[-1] + delta
        cfg = ModelConfig(ModelArch.mlp(widths), 5, Optimizer.SGD, 0.01, 16)
        bigger = ModelConfig(ModelArch.mlp(widths + [extra]), 5, Optimizer.SGD, 0.01, 16)
        a, b = count_costs(cfg, DATA), count_costs(bigger, DATA)
        assert b.params >= a.params
        assert b.forward_macs_per_sample >= a.forward_macs_per_sample

    def test_macs_grow_along_grid_ladders(self):
        archs = grid_architectures()
        cnn_macs = [count_costs(ModelConfig(a, 5, Optimizer.SGD, 0.01, 16), DATA)
                    .forward_macs_per_sample for a in archs[:3]]
        mlp_macs = [count_costs(ModelConfig(a, 5, Optimizer.SGD, 0.01, 16), DATA)
                    .forward_macs_per_sample for a in archs[3:]]
        assert cnn_macs == sorted(cnn_macs) and len(set(cnn_macs)) == 3
        assert mlp_macs == sorted(mlp_macs) and len(set(mlp_macs)) == 3


class TestSynthesizeDataset:
    def test_shapes_and_balance(self):
        data = DatasetSpec(num_samples=103, num_classes=10, seed=5)
        x, y = synthesize_dataset(data)
        assert x.shape == (103, 28, 28, 1)
        assert x.dtype == np.float64
        counts = np.bincount(y, minlength=10)
        assert counts.max() - counts.min() <= 1

    def test_deterministic(self):
        data = DatasetSpec(num_samples=50, seed=11)
        x1, y1 = synthesize_dataset(data)
        x2, y2 = synthesize_dataset(data)
        assert np.array_equal(x1, x2)
        assert np.array_equal(y1, y2)

    def test_seed_changes_data(self):
        x1, _ = synthesize_dataset(DatasetSpec(num_samples=50, seed=1))
        x2, _ = synthesize_dataset(DatasetSpec(num_samples=50, seed=2))
        assert not np.array_equal(x1, x2)


class TestWireFormats:
    def test_compact_strings(self):
        assert conv_spec_string(CNN_VARIANTS[1]) == "[32k5p;64k3p]"
        assert mlp_hidden_string((100, 50)) == "[100;50]"
        assert mlp_hidden_string(()) == "[]"
        assert parse_conv_spec("[32k5p;64k3p]") == CNN_VARIANTS[1]
        assert parse_conv_spec("[8k3]") == (ConvLayerSpec(8, 3, False),)
        assert parse_mlp_hidden("[100;50]") == (100, 50)
        assert parse_mlp_hidden("[]") == ()

    def test_config_json_round_trip(self):
        for cfg in enumerate_grid()[::97]:
            assert config_from_json(config_to_json(cfg)) == cfg

    def test_config_json_field_names(self):
        import json

        cfg = enumerate_grid()[0]
        d = json.loads(config_to_json(cfg))
        assert set(d) == {"arch", "epochs", "optimizer", "learning_rate", "batch_size"}
        assert set(d["arch"]) == {"family", "mlp_hidden", "conv_layers"}
        assert d["arch"]["conv_layers"][0] == {
            "out_channels": 32, "kernel_size": 5, "pool": True}

    def test_dataset_dict_round_trip(self):
        data = DatasetSpec(num_samples=64, num_classes=4, seed=9)
        d = dataset_to_dict(data)
        assert set(d) == {"num_samples", "input_height", "input_width",
                          "input_channels", "num_classes", "seed"}
        assert dataset_from_dict(d) == data
