"""Interpretable decision tree that maps dataset characteristics to the
algorithm expected to win on them.

A plain CART with Gini impurity: candidate thresholds are midpoints of
consecutive distinct feature values, a node only splits while its depth is
below the maximum AND its impurity is at least ``min_impurity``, and
leaves predict the majority class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEATURE_NAMES = (
    "train_n_sessions",
    "train_avg_session_length",
    "test_avg_session_length",
    "train_avg_item_frequency",
    "test_avg_item_frequency",
    "train_n_items",
)

# fixed tie-break order for winner labels
CLASS_ORDER = (
    "spop",
    "vsknn",
    "narm",
    "stamp",
    "nextitnet",
    "srgnn",
    "csrm",
)


@dataclass(frozen=True)
class MetaInstance:
    features: tuple
    label: str


@dataclass
class TreeNode:
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    label: str | None = None
    class_counts: dict | None = None
    depth: int = 0

    @property
    def is_leaf(self):
        return self.feature is None


def _class_rank(label):
    try:
        return (0, CLASS_ORDER.index(label))
    except ValueError:
        return (1, label)


def gini(labels):
    """Gini impurity of a label multiset: 1 - sum of squared class shares."""
    if len(labels) == 0:
        return 0.0
    _, counts = np.unique(np.asarray(labels, dtype=object), return_counts=True)
    p = counts / len(labels)
    return float(1.0 - np.sum(p**2))


def _majority(labels):
    values, counts = np.unique(np.asarray(labels, dtype=object), return_counts=True)
    top = counts.max()
    tied = [v for v, c in zip(values, counts) if c == top]
    return min(tied, key=_class_rank)


def fit_tree(table, max_depth=6, min_impurity=0.3):
    """Grow a CART on MetaInstances.

    A node becomes a leaf when it is pure, its depth reached ``max_depth``,
    its impurity is below ``min_impurity``, or no split reduces the
    weighted child impurity.
    """
    if not table:
        raise ValueError("empty meta table")
    X = np.asarray([t.features for t in table], dtype=np.float64)
    y = [t.label for t in table]
    return _grow(X, y, depth=0, max_depth=max_depth, min_impurity=min_impurity)


def _grow(X, y, depth, max_depth, min_impurity):
    counts = {}
    for label in y:
        counts[label] = counts.get(label, 0) + 1
    node = TreeNode(label=_majority(y), class_counts=counts, depth=depth)
    impurity = gini(y)
    if depth >= max_depth or impurity < min_impurity or impurity == 0.0:
        return node

    best = None  # (weighted_impurity, feature, threshold)
    n = len(y)
    for f in range(X.shape[1]):
        values = np.unique(X[:, f])
        for a, b in zip(values[:-1], values[1:]):
            thr = (a + b) / 2.0
            mask = X[:, f] <= thr
            left_y = [lbl for lbl, m in zip(y, mask) if m]
            right_y = [lbl for lbl, m in zip(y, mask) if not m]
            w = (len(left_y) * gini(left_y) + len(right_y) * gini(right_y)) / n
            if best is None or w < best[0] - 1e-12:
                best = (w, f, thr)
    if best is None or best[0] >= impurity - 1e-12:
        return node

    _, f, thr = best
    mask = X[:, f] <= thr
    node.feature = f
    node.threshold = thr
    node.left = _grow(
        X[mask], [lbl for lbl, m in zip(y, mask) if m], depth + 1, max_depth, min_impurity
    )
    node.right = _grow(
        X[~mask],
        [lbl for lbl, m in zip(y, mask) if not m],
        depth + 1,
        max_depth,
        min_impurity,
    )
    return node


def predict_tree(tree, features):
    """Root-to-leaf descent; values equal to a threshold go left."""
    node = tree
    while not node.is_leaf:
        if features[node.feature] <= node.threshold:
            node = node.left
        else:
            node = node.right
    return node.label


def tree_depth(tree):
    if tree.is_leaf:
        return 0
    return 1 + max(tree_depth(tree.left), tree_depth(tree.right))


def cross_validate(table, folds=10, seed=0, max_depth=6, min_impurity=0.3):
    """Seeded shuffled k-fold; returns (mean train acc, mean holdout acc)."""
    n = len(table)
    if folds > n:
        raise ValueError(f"{folds} folds but only {n} instances")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(n)
    fold_ids = np.array_split(order, folds)
    train_accs = []
    test_accs = []
    for hold in fold_ids:
        hold_set = set(int(i) for i in hold)
        fit_part = [table[i] for i in range(n) if i not in hold_set]
        hold_part = [table[i] for i in hold_set]
        tree = fit_tree(fit_part, max_depth=max_depth, min_impurity=min_impurity)
        train_accs.append(_accuracy(tree, fit_part))
        test_accs.append(_accuracy(tree, hold_part))
    return float(np.mean(train_accs)), float(np.mean(test_accs))


def _accuracy(tree, instances):
    hits = sum(predict_tree(tree, t.features) == t.label for t in instances)
    return hits / len(instances)


def build_meta_table(rows):
    """Turn per-(split, model) metric summaries into labeled instances.

    ``rows`` is a list of dicts with keys ``split`` (an identifier),
    ``model``, ``mrr5``, ``hr5``, and ``features`` (the per-split feature
    tuple).  One instance is produced per split; the label is the model
    with the highest MRR@5, ties by HR@5 then class order.
    """
    by_split = {}
    for row in rows:
        by_split.setdefault(row["split"], []).append(row)
    table = []
    for split in sorted(by_split, key=str):
        group = by_split[split]
        features = group[0]["features"]
        winner = min(
            group,
            key=lambda r: (-r["mrr5"], -r["hr5"], _class_rank(r["model"])),
        )
        table.append(MetaInstance(features=tuple(features), label=winner["model"]))
    return table


def export_rules(tree, feature_names=FEATURE_NAMES):
    """Indented-text dump of the tree's decision rules."""
    lines = []

    def walk(node, indent):
        pad = "  " * indent
        if node.is_leaf:
            lines.append(f"{pad}predict {node.label} {node.class_counts}")
            return
        name = feature_names[node.feature]
        lines.append(f"{pad}if {name} <= {node.threshold:g}:")
        walk(node.left, indent + 1)
        lines.append(f"{pad}else:")
        walk(node.right, indent + 1)

    walk(tree, 0)
    return "\n".join(lines)


def export_dot(tree, feature_names=FEATURE_NAMES):
    """Graphviz dot text for rendering the fitted tree."""
    lines = ["digraph tree {", "  node [shape=box];"]
    counter = [0]

    def walk(node):
        my_id = counter[0]
        counter[0] += 1
        if node.is_leaf:
            lines.append(f'  n{my_id} [label="{node.label}\\n{node.class_counts}"];')
        else:
            name = feature_names[node.feature]
            lines.append(f'  n{my_id} [label="{name} <= {node.threshold:g}"];')
            left_id = walk(node.left)
            right_id = walk(node.right)
            lines.append(f"  n{my_id} -> n{left_id} [label=yes];")
            lines.append(f"  n{my_id} -> n{right_id} [label=no];")
        return my_id

    walk(tree)
    lines.append("}")
    return "\n".join(lines)
