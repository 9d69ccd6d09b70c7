"""Row/column graphs from lagged correlations, plus the grid-graph baseline.

For an N x N image ``A`` and cyclic shift ``C`` (row i of ``C^n A`` is row
``(i + n) mod N`` of ``A``) the lag-n row correlation is

    r_n = (1/N) A (C^n A)^T

Every unordered row pair {i, j} (diagonal included) gets the vector of its
symmetrized correlations over all N lags, and a deterministic 2-means splits
the pairs into edges and non-edges.  Column graphs run the same procedure on
``A^T``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputContractError, LagOutOfRange

DEFAULT_MAX_ITERS = 100
DEGENERATE_TOL = 1e-12
MAX_SPLITS_PER_DIRECTION = 24


@dataclass(frozen=True)
class CorrelationStack:
    axis: str  # "row" or "column"
    mats: np.ndarray  # (N, N, N); mats[n] is the lag-n correlation matrix

    @property
    def size(self) -> int:
        return self.mats.shape[0]


@dataclass(frozen=True)
class PairFeatureTable:
    pairs: np.ndarray  # (P, 2) int, i <= j
    features: np.ndarray  # (P, N)
    size: int


def _check_square(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 2:
        raise InputContractError(f"expected a square image with N >= 2, got shape {A.shape}")
    return A


def shift_index(N: int, n: int) -> np.ndarray:
    """Index map of ``C^n``: output position i reads input position (i + n) mod N."""
    return (np.arange(N) + n) % N


def lagged_image_rows(A: np.ndarray, n: int) -> np.ndarray:
    A = np.asarray(A)
    N = A.shape[0]
    if not 0 <= n < N:
        raise LagOutOfRange(f"lag {n} outside 0..{N - 1}")
    return A[shift_index(N, n)]


def row_correlations(A: np.ndarray) -> CorrelationStack:
    A = _check_square(A)
    N = A.shape[0]
    # (C^n A)^T only permutes the columns of A A^T
    gram = (A @ A.T) / N
    lags = (np.arange(N)[:, None] + np.arange(N)[None, :]) % N  # lags[n, j] = (j + n) mod N
    mats = gram[:, lags].transpose(1, 0, 2)
    return CorrelationStack("row", np.ascontiguousarray(mats))


def col_correlations(A: np.ndarray) -> CorrelationStack:
    stack = row_correlations(_check_square(A).T)
    return CorrelationStack("column", stack.mats)


def pair_features(stack: CorrelationStack) -> PairFeatureTable:
    N = stack.size
    i, j = np.triu_indices(N)
    mats = stack.mats
    feats = (mats[:, i, j] + mats[:, j, i]).T / 2.0
    return PairFeatureTable(np.stack([i, j], axis=1), feats, N)


def _first_by_pair(candidates: np.ndarray, pairs: np.ndarray) -> int:
    """Among candidate rows pick the one with the lexicographically lowest pair."""
    keys = pairs[candidates]
    best = np.lexsort((keys[:, 1], keys[:, 0]))[0]
    return int(candidates[best])


def _init_centroids(X: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1)
    hi = _first_by_pair(np.flatnonzero(norms == norms.max()), pairs)
    lo = _first_by_pair(np.flatnonzero(norms == norms.min()), pairs)
    if hi == lo:
        # all norms equal: seed the second centroid with the farthest vector
        dist = np.linalg.norm(X - X[hi], axis=1)
        lo = _first_by_pair(np.flatnonzero(dist == dist.max()), pairs)
    return np.stack([X[hi], X[lo]])


def _assign(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    # ties go to cluster 0
    return (d[:, 1] < d[:, 0]).astype(np.int64)


def within_sse(X: np.ndarray, assign: np.ndarray, weights: np.ndarray | None = None) -> float:
    w = np.ones(len(X)) if weights is None else np.asarray(weights, dtype=np.float64)
    total = 0.0
    for k in range(2):
        m = assign == k
        if m.any():
            c = (w[m, None] * X[m]).sum(axis=0) / w[m].sum()
            total += float((w[m] * ((X[m] - c) ** 2).sum(axis=1)).sum())
    return total


def lloyd2(X: np.ndarray, pairs: np.ndarray, max_iters: int = DEFAULT_MAX_ITERS):
    """Plain two-cluster Lloyd iterations from the max-/min-norm initialization.

    Returns ``(assignment, centroids, sse_history)``; the history holds the
    within-cluster SSE after every assignment step.
    """
    if max_iters < 1:
        raise InputContractError("max_iters must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    centroids = _init_centroids(X, pairs)
    assign = _assign(X, centroids)
    history = [within_sse(X, assign)]
    for _ in range(max_iters - 1):
        for k in range(2):
            members = X[assign == k]
            if len(members):
                centroids[k] = members.mean(axis=0)
        new_assign = _assign(X, centroids)
        history.append(within_sse(X, new_assign))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    for k in range(2):
        members = X[assign == k]
        if len(members):
            centroids[k] = members.mean(axis=0)
    return assign, centroids, history


# Multi-start refinement.  Everything below runs on the distinct pair vectors
# (sorted by value, weighted by multiplicity), so results do not depend on the
# order of the table rows and identical vectors always share a label.


def _batched_centroids(U, w, assign):
    """Weighted centroids for S candidate partitions: assign (S, U) -> (S, 2, d)."""
    onehot = np.stack([assign == 0, assign == 1], axis=1) * w  # (S, 2, U)
    mass = onehot.sum(axis=2)
    sums = onehot @ U
    with np.errstate(invalid="ignore", divide="ignore"):
        return sums / mass[:, :, None], mass


def _unique_rows(assign):
    """Distinct candidate partitions, kept in first-occurrence order."""
    _, first = np.unique(assign, axis=0, return_index=True)
    return assign[np.sort(first)]


def _batched_lloyd(U, w, assign, max_iters):
    sq = (U ** 2).sum(axis=1)
    for _ in range(max_iters):
        cents, mass = _batched_centroids(U, w, assign)
        cents = np.nan_to_num(cents)
        # squared distances via |u|^2 - 2 u.c + |c|^2, shape (S, 2, U)
        d = sq[None, None, :] - 2.0 * cents @ U.T + (cents ** 2).sum(axis=2)[:, :, None]
        empty = mass == 0
        new = (d[:, 1, :] < d[:, 0, :]).astype(np.int64)
        # a start collapsed to one cluster keeps its current partition
        new = np.where(empty.any(axis=1)[:, None], assign, new)
        if np.array_equal(new, assign):
            break
        assign = new
    return assign


def _batched_hartigan(U, w, assign, max_moves):
    """Best-improvement single-group transfers until no move lowers the SSE."""
    rows = np.arange(len(assign))
    for _ in range(max_moves):
        cents, mass = _batched_centroids(U, w, assign)
        cents = np.nan_to_num(cents)
        src, dst = assign, 1 - assign
        m_src = np.take_along_axis(mass, src, axis=1)
        m_dst = np.take_along_axis(mass, dst, axis=1)
        c_src = cents[rows[:, None], src]
        c_dst = cents[rows[:, None], dst]
        gain_in = w * m_dst / (m_dst + w) * ((U - c_dst) ** 2).sum(axis=2)
        with np.errstate(invalid="ignore", divide="ignore"):
            loss_out = w * m_src / (m_src - w) * ((U - c_src) ** 2).sum(axis=2)
        delta = np.where(m_src > w, gain_in - loss_out, np.inf)
        best = np.argmin(delta, axis=1)
        improve = delta[rows, best] < -1e-12 * (1.0 + np.abs(loss_out[rows, best]))
        if not improve.any():
            break
        assign = assign.copy()
        assign[rows[improve], best[improve]] ^= 1
    return assign


def _batched_sse(U, w, assign):
    cents, _ = _batched_centroids(U, w, assign)
    rows = np.arange(len(assign))
    c = cents[rows[:, None], assign]
    c = np.nan_to_num(c)
    return (w * ((U - c) ** 2).sum(axis=2)).sum(axis=1)


def _split_starts(U, n_directions, max_splits=MAX_SPLITS_PER_DIRECTION):
    """Threshold splits of the projections on the leading principal directions.

    At most ``max_splits`` evenly spaced thresholds are taken per direction.
    """
    Uc = U - U.mean(axis=0)
    _, _, vt = np.linalg.svd(Uc, full_matrices=False)
    starts = []
    for v in vt[:n_directions]:
        proj = Uc @ v
        order = np.argsort(proj, kind="stable")
        sp = proj[order]
        cuts = np.flatnonzero(np.diff(sp) > 0) + 1
        if len(cuts) > max_splits:
            cuts = cuts[np.linspace(0, len(cuts) - 1, max_splits).round().astype(int)]
        for k in cuts:
            a = np.zeros(len(U), dtype=np.int64)
            a[order[k:]] = 1
            starts.append(a)
    return starts


def refine2(X: np.ndarray, pairs: np.ndarray, max_iters: int = DEFAULT_MAX_ITERS,
            n_directions: int = 2):
    """Lowest-SSE 2-partition over deterministic Lloyd + transfer starts.

    The first start is Lloyd from the max-/min-norm initialization; the others
    are threshold splits along the leading principal directions.  Each start is
    run through Lloyd and then best-improvement single transfers.  Returns
    ``(assignment, centroids)`` over the rows of ``X``.
    """
    X = np.asarray(X, dtype=np.float64)
    U, inverse, counts = np.unique(X, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    w = counts.astype(np.float64)

    base, _, _ = lloyd2(X, pairs, max_iters)
    first = np.zeros(len(U), dtype=np.int64)
    first[inverse] = base
    starts = np.array([first] + _split_starts(U, n_directions))

    assign = _batched_lloyd(U, w, _unique_rows(starts), max_iters)
    assign = _batched_hartigan(U, w, _unique_rows(assign), max_moves=max_iters * len(U))
    sse = _batched_sse(U, w, assign)
    # lowest SSE wins; relative tolerance keeps near-equal candidates in start order
    best = int(np.flatnonzero(sse <= sse.min() * (1 + 1e-12) + 1e-300)[0])
    out = assign[best][inverse]
    cents = np.stack([X[out == k].mean(axis=0) if (out == k).any() else np.zeros(X.shape[1])
                      for k in range(2)])
    return out, cents


def is_degenerate(X: np.ndarray) -> bool:
    return bool(np.all(np.abs(X - X[0]) <= DEGENERATE_TOL))


def kmeans2(table: PairFeatureTable, max_iters: int = DEFAULT_MAX_ITERS) -> np.ndarray:
    """Classify each pair as edge (True) or non-edge (False).

    The edge cluster is the one whose final centroid has the larger norm.
    Degenerate tables, where every pair vector is the same, yield no edges.
    """
    if max_iters < 1:
        raise InputContractError("max_iters must be >= 1")
    X = np.asarray(table.features, dtype=np.float64)
    if len(X) == 0 or is_degenerate(X):
        return np.zeros(len(X), dtype=bool)
    assign, centroids = refine2(X, np.asarray(table.pairs), max_iters)
    norms = np.linalg.norm(centroids, axis=1)
    edge_cluster = 1 if norms[1] > norms[0] else 0
    return assign == edge_cluster


def build_graph(labels: np.ndarray, N: int, pairs: np.ndarray | None = None) -> np.ndarray:
    """Symmetric 0/1 adjacency from per-pair edge labels.

    ``labels`` follow ``pairs``, or the canonical ``np.triu_indices(N)`` order
    when ``pairs`` is omitted.
    """
    labels = np.asarray(labels, dtype=bool)
    if pairs is None:
        i, j = np.triu_indices(N)
    else:
        i, j = np.asarray(pairs).T
    if len(labels) != len(i) or len(i) != N * (N + 1) // 2:
        raise InputContractError(f"need labels for all {N * (N + 1) // 2} pairs, got {len(labels)}")
    adj = np.zeros((N, N), dtype=np.uint8)
    adj[i[labels], j[labels]] = 1
    adj[j[labels], i[labels]] = 1
    return adj


def infer_graph(stack: CorrelationStack, max_iters: int = DEFAULT_MAX_ITERS) -> np.ndarray:
    table = pair_features(stack)
    return build_graph(kmeans2(table, max_iters), table.size, table.pairs)


def row_graph(A: np.ndarray, max_iters: int = DEFAULT_MAX_ITERS) -> np.ndarray:
    return infer_graph(row_correlations(A), max_iters)


def column_graph(A: np.ndarray, max_iters: int = DEFAULT_MAX_ITERS) -> np.ndarray:
    return infer_graph(col_correlations(A), max_iters)


def grid_graph(N: int) -> np.ndarray:
    """4-neighbour pixel lattice on N*N nodes, node (i, u) -> i*N + u."""
    if N < 2:
        raise InputContractError("grid needs N >= 2")
    idx = np.arange(N * N).reshape(N, N)
    adj = np.zeros((N * N, N * N), dtype=np.uint8)
    for a, b in ((idx[:, :-1], idx[:, 1:]), (idx[:-1, :], idx[1:, :])):
        adj[a.ravel(), b.ravel()] = 1
        adj[b.ravel(), a.ravel()] = 1
    return adj
