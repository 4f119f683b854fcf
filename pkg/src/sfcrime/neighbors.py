"""Exact brute-force nearest-neighbour search with deterministic tie rules.

Distances are squared Euclidean, computed in query chunks so memory stays
bounded on large training sets. Ties are broken toward the lower point
index, which keeps every consumer (KNN, SMOTE, ENN) reproducible.
"""

from __future__ import annotations

import numpy as np

# Queries are processed in chunks sized so the distance block stays near
# this many float64 entries (~256 MB).
_CHUNK_BUDGET = 32_000_000


def squared_distances(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Full (n_q, n_p) squared-distance matrix, clipped at zero."""
    q = np.asarray(queries, dtype=np.float64)
    p = np.asarray(points, dtype=np.float64)
    qq = np.square(q).sum(axis=1)[:, None]
    pp = np.square(p).sum(axis=1)[None, :]
    d2 = qq + pp - 2.0 * (q @ p.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _k_smallest_row(d: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest entries, exact ties to the lower index."""
    if k >= d.size:
        cand = np.arange(d.size)
    else:
        part = np.argpartition(d, k - 1)[:k]
        thresh = d[part].max()
        cand = np.flatnonzero(d <= thresh)
    order = np.lexsort((cand, d[cand]))
    return cand[order[:k]]


def knn_search(
    queries: np.ndarray,
    points: np.ndarray,
    k: int,
    exclude_index: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """k nearest points per query, ordered by (distance, point index).

    exclude_index, when given, holds one point index per query that must not
    be returned (used to drop self-matches when queries are the points).
    Returns (indices, squared distances), both (n_q, k).
    """
    queries = np.asarray(queries, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    n_q, n_p = queries.shape[0], points.shape[0]
    available = n_p - (0 if exclude_index is None else 1)
    if k > available:
        raise ValueError(f"k={k} exceeds available points ({available})")

    idx_out = np.empty((n_q, k), dtype=np.int64)
    d2_out = np.empty((n_q, k), dtype=np.float64)
    chunk = max(1, _CHUNK_BUDGET // max(n_p, 1))
    for start in range(0, n_q, chunk):
        stop = min(start + chunk, n_q)
        d2 = squared_distances(queries[start:stop], points)
        if exclude_index is not None:
            rows = np.arange(stop - start)
            d2[rows, exclude_index[start:stop]] = np.inf
        for i in range(stop - start):
            nn = _k_smallest_row(d2[i], k)
            idx_out[start + i] = nn
            d2_out[start + i] = d2[i, nn]
    return idx_out, d2_out
