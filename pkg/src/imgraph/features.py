"""Node features: raw pixels, standard image statistics and correlation features.

Correlation features for node ``(i, u)`` of the product graph are row
``i * N + u`` of

    G_mean = (G_r (x) G_c + G_c (x) G_r) / 2

with ``G_r`` the lag-averaged row feature matrix and ``G_c`` the same for the
transposed image.  ``G_mean`` has N^2 x N^2 entries, so :class:`KronFeatures`
keeps only the two factors and applies the matrix lazily.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corrgraph import shift_index
from .errors import DimMismatch, ImageTooSmall, InputContractError

GRAPH_KINDS = ("row", "column", "product")

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T


def pixel_features(A, graph_kind: str) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if graph_kind == "row":
        return A.copy()
    if graph_kind == "column":
        return A.T.copy()
    if graph_kind in ("product", "grid"):
        return A.reshape(-1, 1).copy()
    raise InputContractError(f"unknown graph kind {graph_kind!r}")


def _windows(A):
    """The 9 replicate-padded 3x3 neighbours of every pixel, shape (3, 3, N, N)."""
    N = A.shape[0]
    P = np.pad(A, 1, mode="edge")
    return np.stack([np.stack([P[di:di + N, du:du + N] for du in range(3)]) for di in range(3)])


def standard_features(A) -> np.ndarray:
    """Per-pixel [mean, variance, gradient magnitude, gradient direction].

    Mean and population variance are over the 3x3 neighbourhood, gradients use
    3x3 Sobel kernels; both with replicate padding.  Direction is
    ``atan2(gy, gx)`` in (-pi, pi], gx pointing along increasing column index
    and gy along increasing row index.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.shape[0] < 3:
        raise ImageTooSmall(f"standard features need N >= 3, got {A.shape[0]}")
    win = _windows(A)
    flat = win.reshape(9, *A.shape)
    mean = flat.mean(axis=0)
    var = flat.var(axis=0)
    # separable Sobel: smooth across, then difference along; identical rows
    # (or columns) give an exact zero instead of round-off
    smooth = np.array([1.0, 2.0, 1.0])
    gx = np.einsum("a,aij->ij", smooth, win[:, 2] - win[:, 0]) + 0.0
    gy = np.einsum("b,bij->ij", smooth, win[2] - win[0]) + 0.0
    mag = np.hypot(gx, gy)
    direction = np.arctan2(gy, gx)
    direction[direction == -np.pi] = np.pi
    return np.stack([mean, var, mag, direction], axis=-1).reshape(-1, 4)


def correlation_feature_matrix(A, axis: str = "row") -> np.ndarray:
    """Average over all lags l of ``(A + (C^l A)^T) / 2``; column axis uses ``A^T``."""
    A = np.asarray(A, dtype=np.float64)
    if axis == "column":
        A = A.T
    elif axis != "row":
        raise InputContractError(f"unknown axis {axis!r}")
    N = A.shape[0]
    total = np.zeros_like(A)
    for lag in range(N):
        total += (A + A[shift_index(N, lag)].T) / 2.0
    return total / N


def g_mean(G_r, G_c) -> np.ndarray:
    G_r = np.asarray(G_r, dtype=np.float64)
    G_c = np.asarray(G_c, dtype=np.float64)
    if G_r.shape != G_c.shape or G_r.ndim != 2 or G_r.shape[0] != G_r.shape[1]:
        raise DimMismatch(f"G_r {G_r.shape} and G_c {G_c.shape} must both be N x N")
    return (np.kron(G_r, G_c) + np.kron(G_c, G_r)) / 2.0


@dataclass(frozen=True)
class KronFeatures:
    """Lazy ``(G_r (x) G_c + G_c (x) G_r) / 2`` supporting ``X @ W`` and ``X.T``."""

    G_r: np.ndarray
    G_c: np.ndarray

    @property
    def shape(self):
        n = self.G_r.shape[0] ** 2
        return (n, n)

    @property
    def dtype(self):
        return self.G_r.dtype

    def astype(self, dtype) -> "KronFeatures":
        return KronFeatures(self.G_r.astype(dtype), self.G_c.astype(dtype))

    @property
    def T(self) -> "KronFeatures":
        return KronFeatures(self.G_r.T, self.G_c.T)

    def __matmul__(self, W):
        W = np.asarray(W)
        N = self.G_r.shape[0]
        vec = W.ndim == 1
        Wr = W.reshape(N, N, -1)  # Wr[j, v, k] = W[j * N + v, k]
        out = self._apply(self.G_r, self.G_c, Wr) + self._apply(self.G_c, self.G_r, Wr)
        out = out.reshape(N * N, -1) * out.dtype.type(0.5)
        return out[:, 0] if vec else out

    @staticmethod
    def _apply(P, Q, Wr):
        # sum_{j, v} P[i, j] Q[u, v] Wr[j, v, k]
        N, _, K = Wr.shape
        left = (P @ Wr.reshape(N, N * K)).reshape(N, N, K)  # [i, v, k]
        return np.matmul(Q[None, :, :], left)  # [i, u, k]

    def toarray(self) -> np.ndarray:
        return g_mean(self.G_r, self.G_c)

    def __array__(self, dtype=None, copy=None):
        out = self.toarray()
        return out if dtype is None else out.astype(dtype)


def correlation_features(A, lazy: bool = True):
    G_r = correlation_feature_matrix(A, "row")
    G_c = correlation_feature_matrix(A, "column")
    return KronFeatures(G_r, G_c) if lazy else g_mean(G_r, G_c)


def correlation_feature_image(A) -> np.ndarray:
    """Diagonal of G_mean reshaped to N x N, a one-image view of correlation features."""
    G_r = correlation_feature_matrix(A, "row")
    G_c = correlation_feature_matrix(A, "column")
    dr, dc = np.diag(G_r), np.diag(G_c)
    return (np.outer(dr, dc) + np.outer(dc, dr)) / 2
