"""Native classifiers: decision tree, KNN, random forest, multiclass AdaBoost.

Every model exposes predict (hard labels) and predict_proba (rows are valid
distributions). Trees accept per-sample weights, substituting weight sums
for counts inside the impurity formulas; that is what lets the same tree
code serve as the boosting base learner.

Determinism contract: a fixed seed yields bit-identical fitted models and
predictions, regardless of how training is scheduled.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from math import ceil, sqrt
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FeatureMatrix
from .neighbors import knn_search

MODEL_FORMAT = "sfcrime-model"
MODEL_VERSION = 1

# Stand-in error rate when a boosting round is perfect; keeps alpha finite.
_PERFECT_ROUND_ERR = 1e-10


class TrainingError(Exception):
    """Training cannot proceed (reported rather than silently swallowed)."""


def gini_impurity(counts: Sequence[float] | np.ndarray) -> float:
    """1 - sum((c_i / n)^2) over a non-negative count vector."""
    counts = np.asarray(counts, dtype=np.float64)
    if (counts < 0).any():
        raise ValueError("counts must be non-negative")
    n = counts.sum()
    if n <= 0:
        raise ValueError("counts must sum to at least 1")
    p = counts / n
    return float(1.0 - np.square(p).sum())


def entropy(counts: Sequence[float] | np.ndarray) -> float:
    """-sum((c_i / n) * log2(c_i / n)), with 0 * log 0 = 0."""
    counts = np.asarray(counts, dtype=np.float64)
    if (counts < 0).any():
        raise ValueError("counts must be non-negative")
    n = counts.sum()
    if n <= 0:
        raise ValueError("counts must sum to at least 1")
    p = counts / n
    logp = np.log2(np.where(p > 0.0, p, 1.0))
    return float(-(p * logp).sum())


@dataclass(frozen=True)
class DecisionTreeParams:
    criterion: str = "gini"
    min_samples_split: int = 2
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.criterion not in ("gini", "entropy"):
            raise ValueError(f"criterion must be 'gini' or 'entropy', got {self.criterion!r}")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")


@dataclass(frozen=True)
class KnnParams:
    n_neighbors: int = 5
    metric: str = "euclidean"
    distance_weighted: bool = False

    def __post_init__(self):
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be >= 1")
        if self.metric != "euclidean":
            raise ValueError(f"unsupported metric {self.metric!r}")


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 100
    tree_params: DecisionTreeParams = field(default_factory=DecisionTreeParams)
    bootstrap: bool = True
    features_per_split: int | None = None  # None -> ceil(sqrt(d))
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")


@dataclass(frozen=True)
class AdaboostParams:
    n_estimators: int = 50
    base: DecisionTreeParams = field(default_factory=lambda: DecisionTreeParams(max_depth=3))
    learning_rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


# ---------------------------------------------------------------------------
# Tree internals
# ---------------------------------------------------------------------------

def _gini_rows(class_w: np.ndarray, totals: np.ndarray) -> np.ndarray:
    p = class_w / totals[:, None]
    return 1.0 - np.square(p).sum(axis=1)


def _entropy_rows(class_w: np.ndarray, totals: np.ndarray) -> np.ndarray:
    p = class_w / totals[:, None]
    logp = np.log2(np.where(p > 0.0, p, 1.0))
    return -(p * logp).sum(axis=1)


_CRITERIA = {"gini": _gini_rows, "entropy": _entropy_rows}


@dataclass
class _Tree:
    """Flat binary tree: feature < 0 marks a leaf; leaves index leaf_counts."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_index: np.ndarray
    leaf_counts: np.ndarray
    n_classes: int
    n_features: int


def _best_split(X, y, w, idx, total_counts, criterion, max_features, rng):
    """Exhaustive best (feature, threshold) by impurity decrease.

    Threshold candidates are midpoints between consecutive distinct sorted
    values. Ties break toward the lower feature index, then the lower
    threshold. Returns None when no split strictly reduces impurity.
    """
    d = X.shape[1]
    n_classes = total_counts.shape[0]
    if max_features is not None and max_features < d:
        candidates = np.sort(rng.choice(d, size=max_features, replace=False))
    else:
        candidates = np.arange(d)

    impurity_rows = _CRITERIA[criterion]
    total_w = total_counts.sum()
    parent_impurity = impurity_rows(total_counts[None, :], np.array([total_w]))[0]
    y_sub = y[idx]
    w_sub = w[idx]

    best_decrease = 0.0
    best: tuple[int, float] | None = None
    for f in candidates:
        x = X[idx, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        boundaries = np.flatnonzero(xs[:-1] != xs[1:])
        if boundaries.size == 0:
            continue
        class_w = np.zeros((idx.size, n_classes))
        class_w[np.arange(idx.size), y_sub[order]] = w_sub[order]
        np.cumsum(class_w, axis=0, out=class_w)
        left_w = class_w[boundaries]
        left_tot = left_w.sum(axis=1)
        right_w = total_counts[None, :] - left_w
        right_tot = total_w - left_tot
        child_impurity = (
            left_tot * impurity_rows(left_w, left_tot)
            + right_tot * impurity_rows(right_w, right_tot)
        ) / total_w
        decrease = parent_impurity - child_impurity
        j = int(np.argmax(decrease))  # first max -> lowest threshold on ties
        if decrease[j] > best_decrease:
            best_decrease = float(decrease[j])
            b = boundaries[j]
            thr = (xs[b] + xs[b + 1]) / 2.0
            if thr >= xs[b + 1]:  # adjacent floats round the midpoint up
                thr = xs[b]
            best = (int(f), float(thr))
    return best


def _fit_tree(X, y, w, n_classes, params: DecisionTreeParams,
              max_features: int | None = None, rng=None) -> _Tree:
    n, d = X.shape
    if rng is None:
        rng = np.random.default_rng(params.seed)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    leaf_index: list[int] = []
    leaf_counts: list[np.ndarray] = []

    def alloc() -> int:
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        leaf_index.append(-1)
        return len(feature) - 1

    root = alloc()
    stack: list[tuple[int, np.ndarray, int]] = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = np.bincount(y[idx], weights=w[idx], minlength=n_classes)
        at_depth_cap = params.max_depth is not None and depth >= params.max_depth
        pure = np.count_nonzero(counts) <= 1
        split = None
        if not (idx.size < params.min_samples_split or at_depth_cap or pure):
            split = _best_split(X, y, w, idx, counts, params.criterion,
                                max_features, rng)
        if split is None:
            leaf_index[node] = len(leaf_counts)
            leaf_counts.append(counts)
            continue
        f, thr = split
        go_left = X[idx, f] <= thr
        left_id, right_id = alloc(), alloc()
        feature[node] = f
        threshold[node] = thr
        left[node] = left_id
        right[node] = right_id
        # right pushed first so the left child is expanded first; keeps the
        # per-node rng draw order independent of tree shape surprises
        stack.append((right_id, idx[~go_left], depth + 1))
        stack.append((left_id, idx[go_left], depth + 1))

    return _Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        leaf_index=np.array(leaf_index, dtype=np.int64),
        leaf_counts=np.vstack(leaf_counts),
        n_classes=n_classes,
        n_features=d,
    )


def _tree_apply(tree: _Tree, X: np.ndarray) -> np.ndarray:
    """Route rows to leaves; returns leaf node ids."""
    cur = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        feat = tree.feature[cur]
        rows = np.flatnonzero(feat >= 0)
        if rows.size == 0:
            return cur
        f = feat[rows]
        thr = tree.threshold[cur[rows]]
        go_left = X[rows, f] <= thr
        cur[rows] = np.where(go_left, tree.left[cur[rows]], tree.right[cur[rows]])


def _tree_proba(tree: _Tree, X: np.ndarray) -> np.ndarray:
    leaves = _tree_apply(tree, X)
    counts = tree.leaf_counts[tree.leaf_index[leaves]]
    return counts / counts.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Model wrappers
# ---------------------------------------------------------------------------

def _as_values(rows: FeatureMatrix | np.ndarray) -> np.ndarray:
    if isinstance(rows, FeatureMatrix):
        return rows.values
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D array of rows")
    return arr


class Model:
    """Fitted classifier: immutable, safe for concurrent prediction."""

    variant: str
    n_classes: int
    n_features: int

    def predict_proba(self, rows: FeatureMatrix | np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, rows: FeatureMatrix | np.ndarray) -> np.ndarray:
        """Argmax of predict_proba; ties go to the lowest class code."""
        return np.argmax(self.predict_proba(rows), axis=1)

    def _check_features(self, values: np.ndarray) -> np.ndarray:
        if values.shape[1] != self.n_features:
            raise ValueError(
                f"rows have {values.shape[1]} features, model expects {self.n_features}"
            )
        return values


class DecisionTreeModel(Model):
    variant = "tree"

    def __init__(self, tree: _Tree, params: DecisionTreeParams):
        self.tree = tree
        self.params = params
        self.n_classes = tree.n_classes
        self.n_features = tree.n_features

    def predict_proba(self, rows):
        values = self._check_features(_as_values(rows))
        return _tree_proba(self.tree, values)


class KnnModel(Model):
    variant = "knn"

    def __init__(self, train_x: np.ndarray, train_y: np.ndarray,
                 params: KnnParams, n_classes: int):
        self.train_x = train_x
        self.train_y = train_y
        self.params = params
        self.n_classes = n_classes
        self.n_features = train_x.shape[1]

    def predict_proba(self, rows):
        values = self._check_features(_as_values(rows))
        k = self.params.n_neighbors
        idx, d2 = knn_search(values, self.train_x, k)
        neighbor_labels = self.train_y[idx]
        proba = np.zeros((values.shape[0], self.n_classes))
        if self.params.distance_weighted:
            weights = 1.0 / (np.sqrt(d2) + 1e-12)
        else:
            weights = np.ones_like(d2)
        rows_idx = np.repeat(np.arange(values.shape[0]), k)
        np.add.at(proba, (rows_idx, neighbor_labels.ravel()), weights.ravel())
        return proba / proba.sum(axis=1, keepdims=True)


class RandomForestModel(Model):
    variant = "forest"

    def __init__(self, trees: list[_Tree], params: ForestParams, n_classes: int,
                 n_features: int):
        self.trees = trees
        self.params = params
        self.n_classes = n_classes
        self.n_features = n_features

    def predict_proba(self, rows):
        values = self._check_features(_as_values(rows))
        acc = np.zeros((values.shape[0], self.n_classes))
        for tree in self.trees:
            acc += _tree_proba(tree, values)
        return acc / len(self.trees)


class AdaboostModel(Model):
    variant = "adaboost"

    def __init__(self, trees: list[_Tree], alphas: np.ndarray,
                 params: AdaboostParams, n_classes: int, n_features: int):
        self.trees = trees
        self.alphas = alphas
        self.params = params
        self.n_classes = n_classes
        self.n_features = n_features

    def predict_proba(self, rows):
        """Weighted votes of the boosted trees, normalized to sum 1."""
        values = self._check_features(_as_values(rows))
        votes = np.zeros((values.shape[0], self.n_classes))
        row_ids = np.arange(values.shape[0])
        for tree, alpha in zip(self.trees, self.alphas):
            pred = np.argmax(_tree_proba(tree, values), axis=1)
            votes[row_ids, pred] += alpha
        return votes / votes.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Fitting entry points
# ---------------------------------------------------------------------------

def _unpack_train(train: FeatureMatrix, n_classes: int | None = None):
    if train.n == 0:
        raise ValueError("empty training set")
    X = train.values
    y = train.labels
    if y.min() < 0:
        raise ValueError("labels must be non-negative class codes")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    return X, y, n_classes


def fit_decision_tree(
    train: FeatureMatrix,
    params: DecisionTreeParams = DecisionTreeParams(),
    sample_weight: np.ndarray | None = None,
    n_classes: int | None = None,
) -> DecisionTreeModel:
    """Greedy recursive partitioning under the configured criterion.

    Stops when a node is smaller than min_samples_split, pure, at the depth
    cap, or when no split strictly reduces impurity. Leaves keep the class
    weight vector of their training rows.
    """
    X, y, n_classes = _unpack_train(train, n_classes)
    w = np.ones(train.n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    tree = _fit_tree(X, y, w, n_classes, params)
    return DecisionTreeModel(tree, params)


def fit_knn(train: FeatureMatrix, params: KnnParams = KnnParams(),
            n_classes: int | None = None) -> KnnModel:
    """Store the training set; queries scan for the k smallest distances."""
    X, y, n_classes = _unpack_train(train, n_classes)
    if params.n_neighbors > train.n:
        raise ValueError(f"n_neighbors={params.n_neighbors} exceeds training size {train.n}")
    return KnnModel(X.copy(), y.copy(), params, n_classes)


def fit_random_forest(train: FeatureMatrix, params: ForestParams = ForestParams(),
                      n_classes: int | None = None) -> RandomForestModel:
    """Bagged trees with per-node random feature candidates.

    Tree t draws its bootstrap resample from a generator seeded seed + t, so
    forests are reproducible no matter how tree training is scheduled.
    """
    X, y, n_classes = _unpack_train(train, n_classes)
    max_features = params.features_per_split
    if max_features is None:
        max_features = ceil(sqrt(train.d))
    trees = []
    for t in range(params.n_estimators):
        rng = np.random.default_rng(params.seed + t)
        if params.bootstrap:
            idx = rng.integers(0, train.n, size=train.n)
        else:
            idx = np.arange(train.n)
        tree = _fit_tree(X[idx], y[idx], np.ones(idx.size), n_classes,
                         params.tree_params, max_features=max_features, rng=rng)
        trees.append(tree)
    return RandomForestModel(trees, params, n_classes, train.d)


def _boost_round(X: np.ndarray, y: np.ndarray, w: np.ndarray,
                 base: DecisionTreeParams, n_classes: int, round_seed: int):
    """One SAMME round: weighted base fit, weighted error, misclass mask."""
    rng = np.random.default_rng(round_seed)
    tree = _fit_tree(X, y, w, n_classes, base, rng=rng)
    pred = np.argmax(_tree_proba(tree, X), axis=1)
    mis = pred != y
    err = float(w[mis].sum())
    return tree, mis, err


def _samme_alpha(err: float, n_classes: int, learning_rate: float) -> float:
    return float(learning_rate * (np.log((1.0 - err) / err) + np.log(n_classes - 1)))


def fit_adaboost(train: FeatureMatrix, params: AdaboostParams = AdaboostParams(),
                 n_classes: int | None = None) -> AdaboostModel:
    """Multiclass AdaBoost (SAMME, discrete) over weighted decision trees.

    Per round: fit the base tree on the current weights, compute the
    weighted error, set alpha = learning_rate * (ln((1-err)/err) +
    ln(n_classes-1)), then upweight misclassified samples by e^alpha and
    renormalize. A round no better than chance stops training (and raises if
    it is the first); a perfect round ends training with a large capped
    alpha.
    """
    X, y, n_classes = _unpack_train(train, n_classes)
    if n_classes < 2:
        raise ValueError("boosting needs at least 2 classes")

    w = np.full(train.n, 1.0 / train.n)
    chance = 1.0 - 1.0 / n_classes
    trees: list[_Tree] = []
    alphas: list[float] = []
    for m in range(params.n_estimators):
        tree, mis, err = _boost_round(X, y, w, params.base, n_classes, params.seed + m)
        if err >= chance:
            if m == 0:
                raise TrainingError(
                    f"base learner no better than chance on round 1 "
                    f"(weighted error {err:.4f} >= {chance:.4f})"
                )
            break  # discard this round and stop
        if err <= 0.0:
            trees.append(tree)
            alphas.append(_samme_alpha(_PERFECT_ROUND_ERR, n_classes, params.learning_rate))
            break  # perfect round; nothing left to reweight
        trees.append(tree)
        alphas.append(_samme_alpha(err, n_classes, params.learning_rate))
        w[mis] *= np.exp(alphas[-1])
        w /= w.sum()
    return AdaboostModel(trees, np.array(alphas), params, n_classes, train.d)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _tree_to_arrays(tree: _Tree, prefix: str) -> dict[str, np.ndarray]:
    return {
        f"{prefix}feature": tree.feature,
        f"{prefix}threshold": tree.threshold,
        f"{prefix}left": tree.left,
        f"{prefix}right": tree.right,
        f"{prefix}leaf_index": tree.leaf_index,
        f"{prefix}leaf_counts": tree.leaf_counts,
    }


def _tree_from_arrays(data, prefix: str, n_classes: int, n_features: int) -> _Tree:
    return _Tree(
        feature=data[f"{prefix}feature"],
        threshold=data[f"{prefix}threshold"],
        left=data[f"{prefix}left"],
        right=data[f"{prefix}right"],
        leaf_index=data[f"{prefix}leaf_index"],
        leaf_counts=data[f"{prefix}leaf_counts"],
        n_classes=n_classes,
        n_features=n_features,
    )


def save_model(model: Model, path: str | Path) -> None:
    """Serialize to a self-describing .npz with a version-tagged meta block."""
    meta = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "variant": model.variant,
        "n_classes": model.n_classes,
        "n_features": model.n_features,
        "params": asdict(model.params),
    }
    arrays: dict[str, np.ndarray] = {"meta": np.asarray(json.dumps(meta, sort_keys=True))}
    if isinstance(model, DecisionTreeModel):
        arrays.update(_tree_to_arrays(model.tree, "tree_"))
    elif isinstance(model, KnnModel):
        arrays["train_x"] = model.train_x
        arrays["train_y"] = model.train_y
    elif isinstance(model, RandomForestModel):
        arrays["n_trees"] = np.asarray(len(model.trees))
        for t, tree in enumerate(model.trees):
            arrays.update(_tree_to_arrays(tree, f"t{t}_"))
    elif isinstance(model, AdaboostModel):
        arrays["n_trees"] = np.asarray(len(model.trees))
        arrays["alphas"] = model.alphas
        for t, tree in enumerate(model.trees):
            arrays.update(_tree_to_arrays(tree, f"t{t}_"))
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    with Path(path).open("wb") as fh:
        np.savez(fh, **arrays)


def load_model(path: str | Path) -> Model:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["meta"][()]))
        if meta.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a {MODEL_FORMAT} file: {path}")
        if meta.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {meta.get('version')}")
        variant = meta["variant"]
        n_classes = meta["n_classes"]
        n_features = meta["n_features"]
        p = meta["params"]
        if variant == "tree":
            params = DecisionTreeParams(**p)
            return DecisionTreeModel(
                _tree_from_arrays(data, "tree_", n_classes, n_features), params)
        if variant == "knn":
            params = KnnParams(**p)
            return KnnModel(data["train_x"], data["train_y"], params, n_classes)
        if variant == "forest":
            params = ForestParams(**{**p, "tree_params": DecisionTreeParams(**p["tree_params"])})
            trees = [_tree_from_arrays(data, f"t{t}_", n_classes, n_features)
                     for t in range(int(data["n_trees"][()]))]
            return RandomForestModel(trees, params, n_classes, n_features)
        if variant == "adaboost":
            params = AdaboostParams(**{**p, "base": DecisionTreeParams(**p["base"])})
            trees = [_tree_from_arrays(data, f"t{t}_", n_classes, n_features)
                     for t in range(int(data["n_trees"][()]))]
            return AdaboostModel(trees, data["alphas"], params, n_classes, n_features)
    raise ValueError(f"unknown model variant {variant!r}")
