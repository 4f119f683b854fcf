"""Feature matrix assembly, train/test splitting, PCA, and F-test selection.

All operations are pure functions of their inputs plus an explicit seed, so
repeated runs with the same arguments produce identical results. Matrices
are dense float64 throughout; the feature count here never exceeds ten, so
PCA uses an exact symmetric eigendecomposition rather than anything
iterative.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from math import ceil
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingest import CrimeRecord, assign_time_block

CACHE_MAGIC = b"SFCRFMX1"

BASE_COLUMNS = ("year", "month", "date", "hour", "time_block",
                "day_code", "district_code", "address_code", "x", "y")

# Sentinel score for a perfect separator (within-group variance zero but
# between-group variance positive): sorts above every finite statistic.
F_SCORE_MAX = np.finfo(np.float64).max


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense n_samples x n_features reals with named columns and labels."""

    values: np.ndarray
    column_names: tuple[str, ...]
    labels: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if values.ndim != 2:
            raise ValueError("values must be 2-D")
        if values.shape[1] != len(self.column_names):
            raise ValueError("column_names length must equal n_features")
        if values.shape[0] != labels.shape[0]:
            raise ValueError("labels length must equal n_samples")
        if values.size and not np.isfinite(values).all():
            raise ValueError("values contain NaN or infinite entries")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def take_rows(self, idx: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(self.values[idx], self.column_names, self.labels[idx])

    def take_columns(self, idx: Sequence[int]) -> "FeatureMatrix":
        idx = list(idx)
        return FeatureMatrix(
            self.values[:, idx],
            tuple(self.column_names[i] for i in idx),
            self.labels,
        )

    def drop_column(self, name: str) -> "FeatureMatrix":
        keep = [i for i, c in enumerate(self.column_names) if c != name]
        if len(keep) == len(self.column_names):
            raise KeyError(f"no column named {name!r}")
        return self.take_columns(keep)

    def with_labels(self, labels: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(self.values, self.column_names, labels)


@dataclass(frozen=True)
class SplitPair:
    train: FeatureMatrix
    test: FeatureMatrix
    seed: int
    test_fraction: float


@dataclass(frozen=True)
class PCAModel:
    """Mean vector plus top-k principal axes of the training data.

    Component rows are orthonormal; explained_variance is non-increasing.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray


@dataclass(frozen=True)
class FeatureSelection:
    scores: np.ndarray
    selected: tuple[int, ...]
    percentile: int


@dataclass(frozen=True)
class Standardizer:
    """Per-column z-scoring parameters fit on training data only."""

    mean: np.ndarray
    scale: np.ndarray  # std with zeros replaced by 1 to keep constants at 0


def build_features(records: Sequence[CrimeRecord], use_time_block: bool = True) -> FeatureMatrix:
    """Assemble the feature matrix in the fixed documented column order.

    Columns: year, month, date, hour, time_block (when flagged), day_code,
    district_code, address_code, x, y. Labels are the category codes.
    """
    if len(records) == 0:
        raise ValueError("cannot build features from an empty record list")
    rows = np.empty((len(records), 10), dtype=np.float64)
    labels = np.empty(len(records), dtype=np.int64)
    for i, r in enumerate(records):
        rows[i] = (r.year, r.month, r.date, r.hour, assign_time_block(r.hour),
                   r.day_code, r.district_code, r.address_code, r.x, r.y)
        labels[i] = r.label
    m = FeatureMatrix(rows, BASE_COLUMNS, labels)
    return m if use_time_block else m.drop_column("time_block")


def train_test_split(m: FeatureMatrix, test_fraction: float, seed: int) -> SplitPair:
    """Uniform random disjoint partition, fully determined by the seed."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    if m.n < 2:
        raise ValueError("need at least 2 samples to split")
    n_test = int(round(test_fraction * m.n))
    n_test = min(max(n_test, 1), m.n - 1)
    perm = np.random.default_rng(seed).permutation(m.n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return SplitPair(
        train=m.take_rows(train_idx),
        test=m.take_rows(test_idx),
        seed=seed,
        test_fraction=test_fraction,
    )


def stratified_subsample(m: FeatureMatrix, n_rows: int, seed: int) -> FeatureMatrix:
    """Seeded per-class proportional subsample of exactly n_rows rows.

    Quotas use largest-remainder rounding so the total is exact; classes
    rarer than half a quota can drop out, which mirrors their weight in the
    source data.
    """
    if n_rows >= m.n:
        return m
    if n_rows < 1:
        raise ValueError("n_rows must be >= 1")
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(m.labels, return_counts=True)
    exact = counts * (n_rows / m.n)
    quotas = np.floor(exact).astype(np.int64)
    remainder = n_rows - int(quotas.sum())
    if remainder > 0:
        frac = exact - quotas
        order = np.lexsort((classes, -frac))  # biggest fraction first, low class on ties
        quotas[order[:remainder]] += 1
    keep = []
    for cls, quota in zip(classes, quotas):
        if quota == 0:
            continue
        members = np.flatnonzero(m.labels == cls)
        keep.append(rng.choice(members, size=min(quota, members.size), replace=False))
    idx = np.sort(np.concatenate(keep))
    return m.take_rows(idx)


def fit_standardizer(m: FeatureMatrix) -> Standardizer:
    mean = m.values.mean(axis=0)
    std = m.values.std(axis=0)
    scale = np.where(std == 0.0, 1.0, std)
    return Standardizer(mean=mean, scale=scale)


def apply_standardizer(s: Standardizer, m: FeatureMatrix) -> FeatureMatrix:
    return FeatureMatrix((m.values - s.mean) / s.scale, m.column_names, m.labels)


def pca_fit(m: FeatureMatrix, n_components: int) -> PCAModel:
    """Exact PCA via eigendecomposition of the sample covariance.

    Components are the top-k eigenvectors ordered by eigenvalue; each row's
    sign is fixed so its largest-magnitude entry is positive.
    """
    if not 1 <= n_components <= m.d:
        raise ValueError(f"n_components must be in [1, {m.d}]")
    if m.n < 2:
        raise ValueError("PCA needs at least 2 samples")
    mean = m.values.mean(axis=0)
    centered = m.values - mean
    cov = (centered.T @ centered) / (m.n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:n_components]
    variances = np.maximum(eigvals[order], 0.0)  # clip eigh's tiny negatives
    components = eigvecs[:, order].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PCAModel(mean=mean, components=components, explained_variance=variances)


def pca_transform(model: PCAModel, m: FeatureMatrix) -> FeatureMatrix:
    """Project rows onto the principal axes: (rows - mean) @ components.T."""
    if m.d != model.mean.shape[0]:
        raise ValueError(f"matrix has {m.d} features, model expects {model.mean.shape[0]}")
    projected = (m.values - model.mean) @ model.components.T
    names = tuple(f"pc{i}" for i in range(model.components.shape[0]))
    return FeatureMatrix(projected, names, m.labels)


def anova_f_scores(m: FeatureMatrix) -> np.ndarray:
    """One-way ANOVA F statistic per feature, grouping rows by label.

    F = between-group mean square / within-group mean square. Degenerate
    columns: both variances zero scores 0; a perfect separator (within-group
    variance zero, between positive) scores the maximal sentinel.
    """
    classes = np.unique(m.labels)
    k = classes.size
    n = m.n
    if k < 2:
        raise ValueError("ANOVA needs at least 2 classes")
    if n - k <= 0:
        raise ValueError("ANOVA needs more samples than classes")

    grand_mean = m.values.mean(axis=0)
    ss_between = np.zeros(m.d)
    ss_within = np.zeros(m.d)
    for cls in classes:
        group = m.values[m.labels == cls]
        gmean = group.mean(axis=0)
        ss_between += group.shape[0] * (gmean - grand_mean) ** 2
        ss_within += ((group - gmean) ** 2).sum(axis=0)
    ms_between = ss_between / (k - 1)
    ms_within = ss_within / (n - k)

    scores = np.zeros(m.d)
    regular = ms_within > 0.0
    scores[regular] = ms_between[regular] / ms_within[regular]
    scores[(~regular) & (ms_between > 0.0)] = F_SCORE_MAX
    return scores


def select_percentile(scores: np.ndarray, percentile: int) -> FeatureSelection:
    """Retain the top ceil(p/100 * d) features by score, minimum one.

    Ties are broken toward the lower column index; the selected index list
    is sorted ascending.
    """
    if not 0 < percentile <= 100:
        raise ValueError("percentile must be in (0, 100]")
    scores = np.asarray(scores, dtype=np.float64)
    d = scores.shape[0]
    n_keep = max(1, ceil(percentile / 100.0 * d))
    order = np.lexsort((np.arange(d), -scores))  # score desc, index asc on ties
    selected = tuple(sorted(int(i) for i in order[:n_keep]))
    return FeatureSelection(scores=scores, selected=selected, percentile=percentile)


def apply_selection(m: FeatureMatrix, selection: FeatureSelection) -> FeatureMatrix:
    return m.take_columns(selection.selected)


def save_matrix(m: FeatureMatrix, path: str | Path) -> None:
    """Write the documented flat binary cache layout.

    Layout (all integers little-endian uint64):
        magic   8 bytes, b"SFCRFMX1"
        n, d, name_block_len
        name_block: utf-8, column names joined by "\\n"
        labels: n int64
        values: n*d float64, row-major
    """
    names = "\n".join(m.column_names).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<QQQ", m.n, m.d, len(names)))
        fh.write(names)
        fh.write(np.ascontiguousarray(m.labels, dtype="<i8").tobytes())
        fh.write(np.ascontiguousarray(m.values, dtype="<f8").tobytes())


def load_matrix(path: str | Path) -> FeatureMatrix:
    with Path(path).open("rb") as fh:
        magic = fh.read(8)
        if magic != CACHE_MAGIC:
            raise ValueError(f"not a feature cache (bad magic {magic!r})")
        n, d, name_len = struct.unpack("<QQQ", fh.read(24))
        names = tuple(fh.read(name_len).decode("utf-8").split("\n"))
        labels = np.frombuffer(fh.read(8 * n), dtype="<i8").copy()
        values = np.frombuffer(fh.read(8 * n * d), dtype="<f8").reshape(n, d).copy()
    return FeatureMatrix(values, names, labels)
