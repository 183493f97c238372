"""Boosted-tree tests.  The split search is checked against a brute-force
oracle that scores every (feature, midpoint-threshold) pair directly."""

import numpy as np
import pytest

from edgeprofiler.regress.gbdt import (
    GradientBoostedEnsemble,
    RegressionTree,
    best_split,
    fit_gbdt,
    fit_tree,
)


def brute_force_best_split(x, y):
    """Exhaustively score every candidate split by summed child SSE.

    Scans features in index order and thresholds ascending, keeping a
    candidate only when strictly better, which mirrors the declared
    tie-breaks.  Returns (feature, threshold) or None.
    """
    n = x.shape[0]
    if n < 2 or np.all(y == y[0]):
        return None
    best = None
    best_sse = np.inf
    for feat in range(x.shape[1]):
        vals = np.unique(x[:, feat])
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = (lo + hi) / 2.0
            mask = x[:, feat] <= thr
            yl, yr = y[mask], y[~mask]
            sse = (np.sum((yl - yl.mean()) ** 2)
                   + np.sum((yr - yr.mean()) ** 2))
            if sse < best_sse:
                best_sse = sse
                best = (feat, float(thr))
    total_sse = float(np.sum((y - y.mean()) ** 2))
    if best is None or not best_sse < total_sse:
        return None
    return best


def walk_and_compare(tree, x, y, rows=None, node=0):
    """Re-derive every internal node's row set and compare its split to
    the oracle's choice on those rows.  Returns the number of nodes
    checked."""
    if tree.feature_index.size == 0:
        return 0
    if rows is None:
        rows = np.arange(x.shape[0])
    expected = brute_force_best_split(x[rows], y[rows])
    got = (int(tree.feature_index[node]), float(tree.threshold[node]))
    assert expected == got, f"node {node}: oracle {expected}, greedy {got}"
    checked = 1
    mask = x[rows, tree.feature_index[node]] <= tree.threshold[node]
    for child, sub in ((tree.left[node], rows[mask]),
                       (tree.right[node], rows[~mask])):
        if child >= 0:
            checked += walk_and_compare(tree, x, y, sub, int(child))
    return checked


class TestBestSplit:
    def test_step_function_four_points(self):
        x = np.array([[1.0], [2.0], [3.0], [4.0]])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        assert best_split(x, y) == (0, 2.5)

    def test_constant_target_gives_no_split(self):
        x = np.array([[1.0], [2.0], [3.0]])
        assert best_split(x, np.full(3, 0.7)) is None

    def test_single_row_gives_no_split(self):
        assert best_split(np.array([[1.0]]), np.array([2.0])) is None

    def test_constant_feature_gives_no_split(self):
        x = np.ones((5, 1))
        y = np.arange(5.0)
        assert best_split(x, y) is None

    def test_tie_breaks_to_lowest_feature(self):
        # both columns are identical, so every gain ties exactly
        x = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        feat, thr = best_split(x, y)
        assert feat == 0
        assert thr == 2.5

    def test_tie_breaks_to_smallest_threshold(self):
        # splitting at 1.5 and 2.5 are equally good; 1.5 must win
        x = np.array([[1.0], [2.0], [3.0]])
        y = np.array([1.0, 0.0, 1.0])
        assert best_split(x, y) == (0, 1.5)

    def test_matches_exhaustive_search_on_random_data(self):
        checked = 0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(10, 60))
            d = int(rng.integers(1, 4))
            x = rng.normal(size=(n, d))
            y = rng.normal(size=n)
            tree = fit_tree(x, y, max_depth=3)
            checked += walk_and_compare(tree, x, y)
        assert checked >= 30  # the walk really exercised many nodes

    def test_matches_exhaustive_search_with_duplicate_values(self):
        rng = np.random.default_rng(42)
        x = rng.integers(0, 4, size=(40, 2)).astype(np.float64)
        y = rng.normal(size=40)
        tree = fit_tree(x, y, max_depth=3)
        assert walk_and_compare(tree, x, y) >= 1


class TestFitTree:
    def test_depth_bound_holds(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(80, 3))
        y = rng.normal(size=80)
        for depth in (0, 1, 2, 4):
            tree = fit_tree(x, y, depth)
            assert max(tree.depths()) <= depth

    def test_depth_zero_predicts_the_mean(self):
        x = np.array([[1.0], [2.0], [3.0]])
        y = np.array([1.0, 2.0, 6.0])
        tree = fit_tree(x, y, 0)
        np.testing.assert_allclose(tree.predict(x), np.mean(y))

    def test_deep_tree_fits_distinct_rows_exactly(self):
        # greedy splits need not be balanced, so allow depth up to n-1
        rng = np.random.default_rng(1)
        x = np.arange(8.0).reshape(-1, 1)
        y = rng.normal(size=8)
        tree = fit_tree(x, y, 7)
        np.testing.assert_array_equal(tree.predict(x), y)

    def test_step_tree_leaves_are_exact(self):
        x = np.array([[1.0], [2.0], [3.0], [4.0]])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        tree = fit_tree(x, y, 1)
        np.testing.assert_array_equal(
            tree.predict(np.array([[1.5], [3.7]])), [0.0, 1.0])

    def test_input_validation(self):
        with pytest.raises(ValueError):
            fit_tree(np.zeros((3,)), np.zeros(3), 2)
        with pytest.raises(ValueError):
            fit_tree(np.zeros((3, 1)), np.zeros(2), 2)
        with pytest.raises(ValueError):
            fit_tree(np.zeros((3, 1)), np.zeros(3), -1)

    def test_json_round_trip(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(30, 2))
        y = rng.normal(size=30)
        tree = fit_tree(x, y, 3)
        clone = RegressionTree.from_dict(tree.to_dict())
        probe = rng.normal(size=(50, 2))
        np.testing.assert_array_equal(tree.predict(probe), clone.predict(probe))


class TestGradientBoosting:
    def test_constant_target_reproduced_exactly(self):
        x = np.arange(8.0).reshape(-1, 1)
        y = np.full(8, 0.7)
        ens = fit_gbdt(x, y, max_depth=3, rounds=5)
        probe = np.array([[-3.0], [0.5], [99.0]])
        assert list(ens.predict(probe)) == [0.7, 0.7, 0.7]
        for tree in ens.trees:
            assert tree.feature_index.size == 0
            assert list(tree.leaf_values) == [0.0]

    def test_zero_rounds_predicts_the_training_mean(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(20, 2))
        y = rng.normal(size=20)
        ens = fit_gbdt(x, y, max_depth=3, rounds=0)
        np.testing.assert_allclose(ens.predict(x), np.mean(y))
        assert len(ens.trees) == 0

    def test_tree_count_equals_rounds(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(20, 2))
        y = rng.normal(size=20)
        ens = fit_gbdt(x, y, max_depth=2, rounds=7, subsample=0.5)
        assert len(ens.trees) == 7

    def test_training_error_non_increasing_at_full_subsample(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(60, 3))
        y = rng.normal(size=60)
        ens = fit_gbdt(x, y, max_depth=3, rounds=50)
        errors = ens.staged_train_errors(x, y)
        assert np.all(np.diff(errors) <= 1e-12)

    def test_deeper_trees_reach_lower_training_error(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(size=(80, 2))
        y = np.sin(5 * x[:, 0]) + x[:, 1] ** 2
        rmse = {}
        for depth in (3, 6, 9):
            ens = fit_gbdt(x, y, max_depth=depth, rounds=40, seed=11)
            rmse[depth] = float(np.sqrt(np.mean((ens.predict(x) - y) ** 2)))
        assert rmse[6] <= rmse[3] + 1e-12
        assert rmse[9] <= rmse[6] + 1e-12

    def test_deterministic_target_driven_below_1e3_of_range(self):
        # 24 distinct feature combos, each with an exact target value
        rng = np.random.default_rng(6)
        combos = np.array([(a, b) for a in range(6) for b in range(4)],
                          dtype=np.float64)
        values = rng.uniform(0, 1, size=len(combos))
        x = np.repeat(combos, 3, axis=0)
        y = np.repeat(values, 3)
        ens = fit_gbdt(x, y, max_depth=6, rounds=300)
        rmse = float(np.sqrt(np.mean((ens.predict(x) - y) ** 2)))
        assert rmse / (y.max() - y.min()) < 1e-3

    def test_seeded_subsampling_is_deterministic(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(50, 3))
        y = rng.normal(size=50)
        a = fit_gbdt(x, y, max_depth=3, rounds=20, subsample=0.6, seed=5)
        b = fit_gbdt(x, y, max_depth=3, rounds=20, subsample=0.6, seed=5)
        c = fit_gbdt(x, y, max_depth=3, rounds=20, subsample=0.6, seed=6)
        np.testing.assert_array_equal(a.predict(x), b.predict(x))
        assert not np.array_equal(a.predict(x), c.predict(x))

    def test_monotone_feature_rescale_preserves_predictions(self):
        # trees see only the ordering of a column, not its scale; the
        # guarantee covers fitted rows, so keep every row in-sample
        rng = np.random.default_rng(8)
        x = rng.normal(size=(60, 3))
        y = rng.normal(size=60)
        x2 = x.copy()
        x2[:, 0] = np.exp(2.0 * x2[:, 0])
        a = fit_gbdt(x, y, max_depth=4, rounds=25, seed=9)
        b = fit_gbdt(x2, y, max_depth=4, rounds=25, seed=9)
        np.testing.assert_array_equal(a.predict(x), b.predict(x2))

    def test_hyperparameter_validation(self):
        x = np.zeros((4, 1))
        y = np.zeros(4)
        with pytest.raises(ValueError):
            fit_gbdt(x, y, max_depth=2, subsample=0.0)
        with pytest.raises(ValueError):
            fit_gbdt(x, y, max_depth=2, shrinkage=1.5)
        with pytest.raises(ValueError):
            fit_gbdt(x, y, max_depth=2, rounds=-1)
        with pytest.raises(ValueError):
            fit_gbdt(np.zeros((1, 1)), np.zeros(1), max_depth=2)

    def test_ensemble_json_round_trip(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(40, 2))
        y = rng.normal(size=40)
        ens = fit_gbdt(x, y, max_depth=3, rounds=10, subsample=0.7, seed=2)
        clone = GradientBoostedEnsemble.from_dict(ens.to_dict())
        probe = rng.normal(size=(30, 2))
        np.testing.assert_array_equal(ens.predict(probe), clone.predict(probe))
        assert clone.shrinkage == ens.shrinkage
        assert clone.base_prediction == ens.base_prediction
