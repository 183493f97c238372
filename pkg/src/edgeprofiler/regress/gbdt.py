"""Gradient-boosted regression trees with exact greedy split search.

Squared-error boosting: the base prediction is the training-target mean,
and each round fits a tree to the current residuals on a seeded row
subsample.  Splits maximize variance reduction over every feature and
every candidate threshold (midpoints of consecutive distinct sorted
values) with no histogramming, so an exhaustive brute-force search must
agree with the chosen split.  Ties break to the lowest feature index,
then the smallest threshold.  Rows with feature value <= threshold go
left.

Trees are stored as parallel node arrays; a negative child ref encodes
leaf index ~i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """One fitted tree: parallel node arrays plus leaf values.

    left/right entries >= 0 index another node; negative entries encode
    a leaf as ~leaf_index.  An empty node array means the tree is the
    single leaf leaf_values[0].
    """

    feature_index: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_values: np.ndarray
    max_depth: int

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        n = x.shape[0]
        if self.feature_index.size == 0:
            return np.full(n, self.leaf_values[0])
        cur = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        out = np.empty(n)
        for _ in range(self.max_depth + 1):
            if rows.size == 0:
                break
            idx = cur[rows]
            go_left = x[rows, self.feature_index[idx]] <= self.threshold[idx]
            nxt = np.where(go_left, self.left[idx], self.right[idx])
            at_leaf = nxt < 0
            leaf_rows = rows[at_leaf]
            out[leaf_rows] = self.leaf_values[~nxt[at_leaf]]
            rows = rows[~at_leaf]
            cur[rows] = nxt[~at_leaf]
        return out

    def depths(self) -> list[int]:
        """Root-to-leaf path lengths (edges), one per leaf."""
        if self.feature_index.size == 0:
            return [0]
        out: list[int] = []
        stack = [(0, 0)]
        while stack:
            node, d = stack.pop()
            for child in (self.left[node], self.right[node]):
                if child < 0:
                    out.append(d + 1)
                else:
                    stack.append((int(child), d + 1))
        return out

    def to_dict(self) -> dict:
        nodes = [
            {"feature_index": int(f), "threshold": float(t),
             "left": int(l), "right": int(r)}
            for f, t, l, r in zip(self.feature_index, self.threshold,
                                  self.left, self.right)
        ]
        return {"nodes": nodes, "leaves": self.leaf_values.tolist(),
                "max_depth": self.max_depth}

    @staticmethod
    def from_dict(d: dict) -> "RegressionTree":
        nodes = d["nodes"]
        return RegressionTree(
            feature_index=np.array([n["feature_index"] for n in nodes], dtype=np.int64),
            threshold=np.array([n["threshold"] for n in nodes], dtype=np.float64),
            left=np.array([n["left"] for n in nodes], dtype=np.int64),
            right=np.array([n["right"] for n in nodes], dtype=np.int64),
            leaf_values=np.array(d["leaves"], dtype=np.float64),
            max_depth=int(d["max_depth"]),
        )


def best_split(x: np.ndarray, y: np.ndarray) -> tuple[int, float] | None:
    """Greedy (feature, threshold) maximizing variance reduction, or None.

    Candidate thresholds are midpoints of consecutive distinct sorted
    values per feature.  The winner is the first maximum scanning
    features in index order and thresholds ascending, which implements
    the declared tie-breaks.
    """
    n = x.shape[0]
    if n < 2 or np.all(y == y[0]):
        return None
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    ys = y[order]
    prefix = np.cumsum(ys, axis=0)
    total = prefix[-1]

    left_n = np.arange(1, n, dtype=np.float64)[:, None]
    right_n = n - left_n
    left_sum = prefix[:-1]
    right_sum = total - left_sum
    # SSE reduction up to the constant total^2/n, larger is better
    proxy = left_sum**2 / left_n + right_sum**2 / right_n
    proxy[xs[:-1] == xs[1:]] = -np.inf

    flat = np.argmax(proxy.T)  # feature-major scan: lowest feature, then threshold
    feat, pos = divmod(int(flat), n - 1)
    if proxy[pos, feat] == -np.inf:
        return None
    baseline = float(total[feat]) ** 2 / n
    if not proxy[pos, feat] > baseline:
        return None
    thr = (xs[pos, feat] + xs[pos + 1, feat]) / 2.0
    return feat, float(thr)


def fit_tree(x: np.ndarray, y: np.ndarray, max_depth: int) -> RegressionTree:
    """CART-style regression tree on (x, y); leaves hold row means."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise ValueError("x must be 2-d and row-aligned with y")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")

    features: list[int] = []
    thresholds: list[float] = []
    lefts: list[int] = []
    rights: list[int] = []
    leaves: list[float] = []

    def grow(rows: np.ndarray, depth: int) -> int:
        """Returns a child ref: node index if split, ~leaf index if not."""
        if depth < max_depth:
            found = best_split(x[rows], y[rows])
        else:
            found = None
        if found is None:
            leaves.append(float(np.mean(y[rows])))
            return ~(len(leaves) - 1)
        feat, thr = found
        node = len(features)
        features.append(feat)
        thresholds.append(thr)
        lefts.append(0)
        rights.append(0)
        mask = x[rows, feat] <= thr
        lefts[node] = grow(rows[mask], depth + 1)
        rights[node] = grow(rows[~mask], depth + 1)
        return node

    grow(np.arange(x.shape[0]), 0)
    return RegressionTree(
        feature_index=np.array(features, dtype=np.int64),
        threshold=np.array(thresholds, dtype=np.float64),
        left=np.array(lefts, dtype=np.int64),
        right=np.array(rights, dtype=np.int64),
        leaf_values=np.array(leaves, dtype=np.float64),
        max_depth=max_depth,
    )


@dataclass(frozen=True, eq=False)
class GradientBoostedEnsemble:
    trees: tuple[RegressionTree, ...]
    shrinkage: float
    base_prediction: float
    max_depth: int
    subsample: float
    rounds: int
    seed: int

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = np.full(x.shape[0], self.base_prediction)
        for tree in self.trees:
            out += self.shrinkage * tree.predict(x)
        return out

    def staged_train_errors(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Root-mean-squared error after each boosting round."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        pred = np.full(x.shape[0], self.base_prediction)
        errors = np.empty(len(self.trees))
        for i, tree in enumerate(self.trees):
            pred = pred + self.shrinkage * tree.predict(x)
            errors[i] = np.sqrt(np.mean((pred - y) ** 2))
        return errors

    def to_dict(self) -> dict:
        return {
            "base": self.base_prediction,
            "shrinkage": self.shrinkage,
            "max_depth": self.max_depth,
            "subsample": self.subsample,
            "rounds": self.rounds,
            "seed": self.seed,
            "trees": [t.to_dict() for t in self.trees],
        }

    @staticmethod
    def from_dict(d: dict) -> "GradientBoostedEnsemble":
        return GradientBoostedEnsemble(
            trees=tuple(RegressionTree.from_dict(t) for t in d["trees"]),
            shrinkage=float(d["shrinkage"]),
            base_prediction=float(d["base"]),
            max_depth=int(d["max_depth"]),
            subsample=float(d["subsample"]),
            rounds=int(d["rounds"]),
            seed=int(d["seed"]),
        )


def fit_gbdt(x: np.ndarray, y: np.ndarray, *, max_depth: int,
             subsample: float = 1.0, rounds: int = 300,
             shrinkage: float = 0.1, seed: int = 0) -> GradientBoostedEnsemble:
    """Squared-error gradient boosting on (x, y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("x must be 2-d and row-aligned with y")
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least 2 training rows")
    if not 0.0 < subsample <= 1.0:
        raise ValueError("subsample must be in (0, 1]")
    if not 0.0 < shrinkage <= 1.0:
        raise ValueError("shrinkage must be in (0, 1]")
    if rounds < 0:
        raise ValueError("rounds must be >= 0")

    rng = np.random.default_rng(seed)
    base = float(np.mean(y))
    residual = y - base
    trees: list[RegressionTree] = []
    m = max(1, int(round(subsample * n)))
    for _ in range(rounds):
        if subsample < 1.0:
            rows = np.sort(rng.choice(n, size=m, replace=False))
        else:
            rows = np.arange(n)
        tree = fit_tree(x[rows], residual[rows], max_depth)
        residual = residual - shrinkage * tree.predict(x)
        trees.append(tree)
    return GradientBoostedEnsemble(
        trees=tuple(trees), shrinkage=shrinkage, base_prediction=base,
        max_depth=max_depth, subsample=subsample, rounds=rounds, seed=seed,
    )
