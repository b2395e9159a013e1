"""Random forest of Gini decision trees, built from scratch.

Trees split greedily on the (feature, threshold) pair minimizing the
weighted child Gini impurity. Thresholds are midpoints between consecutive
distinct sorted feature values. Ties break toward the lowest feature index,
then the lowest threshold, which together with seeded per-tree generators
makes training fully deterministic. Splits with zero impurity improvement
are still taken when the node is impure: patterns like XOR are separable
only through an initially gain-free split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Two float split scores closer than this are treated as equal, so the
# lowest-feature / lowest-threshold tie-break decides.
_SCORE_EPS = 1e-12


@dataclass(eq=False)
class TreeNode:
    """Internal node (feature, threshold, children) or leaf (fraction, count).

    Rows route left iff row[feature] <= threshold. Leaf `attack_fraction` is
    the fraction of attack rows that reached the leaf during training.
    """

    attack_fraction: float
    sample_count: int
    feature: int = -1
    threshold: float = math.nan
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass(frozen=True)
class ForestConfig:
    """Forest hyperparameters; m_try=None resolves to ceil(sqrt(d)).

    `bootstrap=False` trains every tree on the full sample (test hook for
    the single-tree reduction).
    """

    n_trees: int = 50
    m_try: int | None = None
    max_depth: int | None = None
    min_samples_leaf: int = 1
    bootstrap: bool = True

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.m_try is not None and self.m_try < 1:
            raise ValueError(f"m_try must be >= 1, got {self.m_try}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")

    def resolve_m_try(self, n_features: int) -> int:
        if self.m_try is not None:
            return min(self.m_try, n_features)
        return min(math.ceil(math.sqrt(n_features)), n_features)


@dataclass(eq=False)
class RandomForestModel:
    trees: tuple[TreeNode, ...]
    n_features: int
    m_try: int
    seed: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def gini(counts: tuple[int, int]) -> float:
    """Gini impurity 1 - p_benign^2 - p_attack^2 of a (benign, attack) count pair."""
    n_benign, n_attack = counts
    total = n_benign + n_attack
    if total < 1:
        raise ValueError("gini impurity is undefined for an empty node")
    p0 = n_benign / total
    p1 = n_attack / total
    return 1.0 - p0 * p0 - p1 * p1


def _best_split_for_feature(
    values: np.ndarray, y: np.ndarray, min_leaf: int
) -> tuple[float, float] | None:
    """Best (weighted child Gini, threshold) for one feature, or None.

    Scans every midpoint between consecutive distinct sorted values; among
    equal scores the lowest threshold wins.
    """
    order = np.argsort(values, kind="stable")
    v = values[order]
    labels = y[order]
    n = v.size

    attack_prefix = np.cumsum(labels)
    total_attack = attack_prefix[-1]
    # split after position i puts i+1 rows on the left
    cut = np.flatnonzero(v[:-1] < v[1:])
    if cut.size == 0:
        return None
    n_left = cut + 1
    n_right = n - n_left
    valid = (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    cut = cut[valid]
    n_left = n_left[valid]
    n_right = n_right[valid]

    a_left = attack_prefix[cut]
    b_left = n_left - a_left
    a_right = total_attack - a_left
    b_right = n_right - a_right

    gini_left = 1.0 - (b_left / n_left) ** 2 - (a_left / n_left) ** 2
    gini_right = 1.0 - (b_right / n_right) ** 2 - (a_right / n_right) ** 2
    weighted = (n_left * gini_left + n_right * gini_right) / n

    best = weighted.min()
    first = int(np.flatnonzero(weighted <= best + _SCORE_EPS)[0])
    threshold = 0.5 * (v[cut[first]] + v[cut[first] + 1])
    return float(weighted[first]), float(threshold)


def train_tree(
    X: np.ndarray,
    y: np.ndarray,
    cfg: ForestConfig,
    rng: np.random.Generator,
) -> TreeNode:
    """Grow one decision tree by greedy Gini splitting.

    At each node, m_try candidate features are drawn without replacement from
    `rng` (consumed in preorder, left child before right), and the best valid
    split among them is taken. A node becomes a leaf when it is pure, at
    max_depth, too small to split, or none of its candidate features admits a
    valid partition.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("training data must be a nonempty 2-D matrix")
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"label count {y.shape[0]} does not match row count {X.shape[0]}")
    if y.size and not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be binary 0/1")

    d = X.shape[1]
    m_try = cfg.resolve_m_try(d)
    root = TreeNode(attack_fraction=0.0, sample_count=0)
    # work stack of (node, row indices, depth); preorder so rng draws are
    # reproducible without recursion-depth limits
    stack: list[tuple[TreeNode, np.ndarray, int]] = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, rows, depth = stack.pop()
        labels = y[rows]
        n_attack = int(labels.sum())
        node.sample_count = rows.size
        node.attack_fraction = n_attack / rows.size

        pure = n_attack == 0 or n_attack == rows.size
        at_depth = cfg.max_depth is not None and depth >= cfg.max_depth
        too_small = rows.size < 2 * cfg.min_samples_leaf
        if pure or at_depth or too_small:
            continue

        candidates = np.sort(rng.choice(d, size=m_try, replace=False)) if d else np.empty(0, int)
        best_score = math.inf
        best_feature = -1
        best_threshold = math.nan
        for f in candidates:
            found = _best_split_for_feature(X[rows, f], labels, cfg.min_samples_leaf)
            if found is None:
                continue
            score, threshold = found
            if score < best_score - _SCORE_EPS:
                best_score, best_feature, best_threshold = score, int(f), threshold
        if best_feature < 0:
            continue  # all candidate features constant on this node

        node.feature = best_feature
        node.threshold = best_threshold
        go_left = X[rows, best_feature] <= best_threshold
        node.left = TreeNode(attack_fraction=0.0, sample_count=0)
        node.right = TreeNode(attack_fraction=0.0, sample_count=0)
        # push right first so the left child is processed (and draws rng) first
        stack.append((node.right, rows[~go_left], depth + 1))
        stack.append((node.left, rows[go_left], depth + 1))
    return root


def tree_score(root: TreeNode, X: np.ndarray) -> np.ndarray:
    """Leaf attack fraction for every row of X."""
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape[0], dtype=np.float64)
    stack: list[tuple[TreeNode, np.ndarray]] = [(root, np.arange(X.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if rows.size == 0:
            continue
        if node.is_leaf:
            out[rows] = node.attack_fraction
            continue
        go_left = X[rows, node.feature] <= node.threshold
        stack.append((node.left, rows[go_left]))
        stack.append((node.right, rows[~go_left]))
    return out


def train_forest(X: np.ndarray, y: np.ndarray, cfg: ForestConfig, seed: int) -> RandomForestModel:
    """Train n_trees trees on bootstrap resamples with per-node feature subsampling.

    Tree i uses the generator seeded by the seed sequence (seed, spawn_key=i),
    so the forest is reproducible and trees are independent.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    trees = []
    for i in range(cfg.n_trees):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        if cfg.bootstrap:
            sample = rng.integers(0, n, size=n)
            trees.append(train_tree(X[sample], y[sample], cfg, rng))
        else:
            trees.append(train_tree(X, y, cfg, rng))
    return RandomForestModel(tuple(trees), X.shape[1], cfg.resolve_m_try(X.shape[1]), seed)


def forest_score(model: RandomForestModel, X: np.ndarray) -> np.ndarray:
    """Attack score per row: mean leaf attack fraction across the trees."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(
            f"feature dimensionality mismatch: model expects {model.n_features}, "
            f"got {X.shape[1] if X.ndim == 2 else 'non-matrix input'}"
        )
    total = np.zeros(X.shape[0], dtype=np.float64)
    for tree in model.trees:
        total += tree_score(tree, X)
    return total / model.n_trees


def _node_to_json(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"fraction": node.attack_fraction, "count": node.sample_count}
    return {
        "fraction": node.attack_fraction,
        "count": node.sample_count,
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_json(node.left),
        "right": _node_to_json(node.right),
    }


def _node_from_json(obj: dict) -> TreeNode:
    node = TreeNode(attack_fraction=float(obj["fraction"]), sample_count=int(obj["count"]))
    if "feature" in obj:
        node.feature = int(obj["feature"])
        node.threshold = float(obj["threshold"])
        node.left = _node_from_json(obj["left"])
        node.right = _node_from_json(obj["right"])
    return node


def forest_to_json(model: RandomForestModel) -> dict:
    return {
        "format": "zdeval-model",
        "version": 1,
        "kind": "forest",
        "n_features": model.n_features,
        "m_try": model.m_try,
        "seed": model.seed,
        "trees": [_node_to_json(t) for t in model.trees],
    }


def forest_from_json(obj: dict) -> RandomForestModel:
    if obj.get("kind") != "forest":
        raise ValueError(f"not a forest model document: kind={obj.get('kind')!r}")
    trees = tuple(_node_from_json(t) for t in obj["trees"])
    return RandomForestModel(trees, int(obj["n_features"]), int(obj["m_try"]), int(obj["seed"]))
