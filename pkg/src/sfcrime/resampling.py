"""Class-rebalancing transforms: SMOTE, random undersampling, and ENN.

All three are pure, seed-deterministic transforms of a feature matrix. In
the default pipeline they are applied to the training split only; the
runner enforces that the test split is never touched.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .features import FeatureMatrix
from .neighbors import knn_search

logger = logging.getLogger(__name__)

RESAMPLE_METHODS = ("smote", "random_under", "enn")

_DEFAULT_K = {"smote": 5, "enn": 3}


@dataclass(frozen=True)
class ResampleConfig:
    method: str
    k: int | None = None  # None -> method default (smote 5, enn 3)
    target: int | None = None  # smote per-class goal; None -> majority count
    seed: int = 0

    def __post_init__(self):
        if self.method not in RESAMPLE_METHODS:
            raise ValueError(f"method must be one of {RESAMPLE_METHODS}, got {self.method!r}")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.target is not None and self.target < 1:
            raise ValueError("target must be >= 1")

    @property
    def effective_k(self) -> int:
        if self.k is not None:
            return self.k
        return _DEFAULT_K.get(self.method, 5)


def resample(train: FeatureMatrix, cfg: ResampleConfig) -> FeatureMatrix:
    """Dispatch on cfg.method."""
    if cfg.method == "smote":
        return smote(train, cfg)
    if cfg.method == "random_under":
        return random_undersample(train, cfg)
    return enn_undersample(train, cfg)


def smote(train: FeatureMatrix, cfg: ResampleConfig) -> FeatureMatrix:
    """Oversample minority classes up to cfg.target (default: majority count).

    Each synthetic row is x + u * (z - x) for a random same-class row x, one
    of its k nearest same-class neighbours z, and u uniform on [0, 1], so
    synthetics always lie on a segment between two real rows of the class.
    Original rows are retained, synthetics appended. k is clamped to
    class size - 1; a single-row class is duplicated verbatim with a
    warning.
    """
    rng = np.random.default_rng(cfg.seed)
    labels = train.labels
    classes, counts = np.unique(labels, return_counts=True)
    target = int(counts.max()) if cfg.target is None else cfg.target

    new_rows: list[np.ndarray] = []
    new_labels: list[np.ndarray] = []
    for cls, count in zip(classes, counts):
        deficit = max(target - int(count), 0)
        if deficit == 0:
            continue
        members = np.flatnonzero(labels == cls)
        points = train.values[members]
        if count == 1:
            logger.warning(
                "class %d has a single sample; duplicating it verbatim %d times",
                cls, deficit,
            )
            new_rows.append(np.repeat(points, deficit, axis=0))
            new_labels.append(np.full(deficit, cls, dtype=np.int64))
            continue
        k = min(cfg.effective_k, int(count) - 1)
        nn_idx, _ = knn_search(points, points, k, exclude_index=np.arange(points.shape[0]))
        parents = rng.integers(0, points.shape[0], size=deficit)
        neighbor_pick = rng.integers(0, k, size=deficit)
        u = rng.uniform(0.0, 1.0, size=deficit)
        x = points[parents]
        z = points[nn_idx[parents, neighbor_pick]]
        new_rows.append(x + u[:, None] * (z - x))
        new_labels.append(np.full(deficit, cls, dtype=np.int64))

    if not new_rows:
        return train
    values = np.vstack([train.values] + new_rows)
    out_labels = np.concatenate([labels] + new_labels)
    return FeatureMatrix(values, train.column_names, out_labels)


def random_undersample(train: FeatureMatrix, cfg: ResampleConfig) -> FeatureMatrix:
    """Downsample every class, without replacement, to the minority count.

    Output rows are a subset of the input rows, in original row order.
    """
    rng = np.random.default_rng(cfg.seed)
    labels = train.labels
    classes, counts = np.unique(labels, return_counts=True)
    target = int(counts.min())
    keep: list[np.ndarray] = []
    for cls, count in zip(classes, counts):
        members = np.flatnonzero(labels == cls)
        if count == target:
            keep.append(members)
        else:
            keep.append(rng.choice(members, size=target, replace=False))
    idx = np.sort(np.concatenate(keep))
    return train.take_rows(idx)


def enn_undersample(train: FeatureMatrix, cfg: ResampleConfig) -> FeatureMatrix:
    """Wilson editing: drop rows out-voted by their k nearest neighbours.

    Neighbourhoods are computed once in the original set (self excluded);
    a row is removed when its label differs from the majority label of its
    k neighbours (majority ties resolve to the lowest class code). Single
    pass; output is a subset of the input.
    """
    k = cfg.effective_k
    if k >= train.n:
        raise ValueError(f"k={k} must be smaller than the training size {train.n}")
    nn_idx, _ = knn_search(train.values, train.values, k,
                           exclude_index=np.arange(train.n))
    neighbor_labels = train.labels[nn_idx]  # (n, k)
    n_classes = int(train.labels.max()) + 1
    votes = np.zeros((train.n, n_classes), dtype=np.int64)
    np.add.at(votes, (np.repeat(np.arange(train.n), k), neighbor_labels.ravel()), 1)
    majority = np.argmax(votes, axis=1)  # first max -> lowest class code on ties
    keep = np.flatnonzero(majority == train.labels)
    return train.take_rows(keep)
