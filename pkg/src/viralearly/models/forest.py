"""Random forest classifier: bagged Gini trees with sqrt-feature sampling.

Trees grow to purity (no depth cap by default) with at least two samples per
split. Feature importance is the Gini impurity decrease accumulated over
splits, normalized per tree and averaged, so the vector sums to one.

Rows are put into a canonical (lexicographic) order before the seeded
bootstrap draws, which makes a fit invariant to permutations of the input
rows: the generator samples positions in the canonical order, not in
whatever order the caller supplied.
"""

from __future__ import annotations

import numpy as np

from ._common import check_training_data


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "prob")

    def __init__(self, prob: float):
        self.feature = -1
        self.threshold = 0.0
        self.left: "_Node | None" = None
        self.right: "_Node | None" = None
        self.prob = prob


class RandomForestModel:
    kind = "random_forest"

    def __init__(self, trees: list[_Node], n_features: int, importance: np.ndarray):
        self.trees = trees
        self.n_features = int(n_features)
        self._importance = importance

    @property
    def importances(self) -> np.ndarray:
        return self._importance.copy()

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros(len(X))
        for tree in self.trees:
            out += _predict_tree(tree, X)
        return out / len(self.trees)

    def to_payload(self) -> dict:
        return {
            "n_features": self.n_features,
            "importance": self._importance.tolist(),
            "trees": [_node_to_dict(t) for t in self.trees],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "RandomForestModel":
        trees = [_node_from_dict(t) for t in payload["trees"]]
        return cls(trees, payload["n_features"], np.asarray(payload["importance"]))


def _node_to_dict(node: _Node) -> dict:
    if node.feature < 0:
        return {"prob": node.prob}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
        "prob": node.prob,
    }


def _node_from_dict(d: dict) -> _Node:
    node = _Node(d["prob"])
    if "feature" in d:
        node.feature = d["feature"]
        node.threshold = d["threshold"]
        node.left = _node_from_dict(d["left"])
        node.right = _node_from_dict(d["right"])
    return node


def _predict_tree(root: _Node, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))
    stack = [(root, np.arange(len(X)))]
    while stack:
        node, rows = stack.pop()
        if node.feature < 0 or len(rows) == 0:
            out[rows] = node.prob
            continue
        go_left = X[rows, node.feature] < node.threshold
        stack.append((node.left, rows[go_left]))
        stack.append((node.right, rows[~go_left]))
    return out


def _gini(n_pos: float, n: float) -> float:
    if n <= 0:
        return 0.0
    p = n_pos / n
    return 2.0 * p * (1.0 - p)


def fit_random_forest(
    X,
    y,
    n_trees: int = 100,
    max_features: str | int = "sqrt",
    min_samples_split: int = 2,
    max_depth: int | None = None,
    seed: int = 42,
) -> RandomForestModel:
    X, y = check_training_data(X, y)
    n, d = X.shape

    # Canonical row order: primary key column 0, then the rest, labels last.
    keys = (y.astype(np.float64),) + tuple(X[:, j] for j in range(d - 1, -1, -1))
    order = np.lexsort(keys)
    Xc, yc = X[order], y[order].astype(np.float64)

    mtry = max(1, int(np.sqrt(d))) if max_features == "sqrt" else max(1, int(max_features))
    depth_cap = np.inf if max_depth is None else max_depth

    importance = np.zeros(d)
    trees: list[_Node] = []
    for child_seq in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child_seq)
        boot = rng.integers(0, n, size=n)
        tree_imp = np.zeros(d)
        root = _build_node(Xc[boot], yc[boot], rng, mtry, min_samples_split, depth_cap, 0, tree_imp, n)
        total = tree_imp.sum()
        if total > 0:
            importance += tree_imp / total
        trees.append(root)

    total = importance.sum()
    if total > 0:
        importance /= total
    return RandomForestModel(trees, d, importance)


def _build_node(Xn, yn, rng, mtry, min_samples_split, depth_cap, depth, tree_imp, n_total) -> _Node:
    n = len(yn)
    n_pos = float(yn.sum())
    node = _Node(prob=n_pos / n)
    parent_gini = _gini(n_pos, n)
    if n < min_samples_split or parent_gini == 0.0 or depth >= depth_cap:
        return node

    d = Xn.shape[1]
    candidates = np.sort(rng.choice(d, size=min(mtry, d), replace=False))
    best_imp, best_j, best_thr = 0.0, -1, 0.0
    for j in candidates:
        col = Xn[:, j]
        sort_idx = np.argsort(col, kind="mergesort")
        vals = col[sort_idx]
        cut = np.nonzero(vals[:-1] < vals[1:])[0]  # boundaries between distinct values
        if len(cut) == 0:
            continue
        pos_cum = np.cumsum(yn[sort_idx])[cut]
        n_left = cut + 1.0
        n_right = n - n_left
        pos_right = n_pos - pos_cum
        child = (n_left * _gini_vec(pos_cum, n_left) + n_right * _gini_vec(pos_right, n_right)) / n
        improvement = parent_gini - child
        b = int(np.argmax(improvement))
        # Strict > keeps ties resolved toward the lowest feature index.
        if best_j < 0 or improvement[b] > best_imp + 1e-15:
            lo, hi = float(vals[cut[b]]), float(vals[cut[b] + 1])
            mid = (lo + hi) / 2.0
            best_imp = float(improvement[b])
            best_j = int(j)
            # midpoint can round down onto lo for adjacent floats; fall back
            # to hi so both children stay non-empty
            best_thr = mid if lo < mid else hi

    if best_j < 0:
        return node

    go_left = Xn[:, best_j] < best_thr
    tree_imp[best_j] += (n / n_total) * best_imp
    node.feature = best_j
    node.threshold = best_thr
    node.left = _build_node(
        Xn[go_left], yn[go_left], rng, mtry, min_samples_split, depth_cap, depth + 1, tree_imp, n_total
    )
    node.right = _build_node(
        Xn[~go_left], yn[~go_left], rng, mtry, min_samples_split, depth_cap, depth + 1, tree_imp, n_total
    )
    return node


def _gini_vec(n_pos: np.ndarray, n: np.ndarray) -> np.ndarray:
    p = n_pos / n
    return 2.0 * p * (1.0 - p)
