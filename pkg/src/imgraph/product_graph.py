"""Cartesian product of a row graph and a column graph.

Node ``(i, u)`` (image row i, image column u) has index ``i * N + u``.  With
``A_r`` the row graph and ``A_c`` the column graph:

    A_2 = A_r (x) I + I (x) A_c
    A_x = binarize(A_2 * (A_r (x) A_c + A_c (x) A_r))

where ``(x)`` is the Kronecker product and ``*`` is elementwise.
"""
from __future__ import annotations

import numpy as np

from .errors import DimMismatch


def kron(A, B) -> np.ndarray:
    """``out[(i, u), (j, v)] = A[i, j] * B[u, v]``."""
    return np.kron(np.asarray(A), np.asarray(B))


def _pair(A_r, A_c):
    A_r = np.asarray(A_r, dtype=np.int64)
    A_c = np.asarray(A_c, dtype=np.int64)
    if A_r.ndim != 2 or A_r.shape[0] != A_r.shape[1] or A_r.shape != A_c.shape:
        raise DimMismatch(f"row graph {A_r.shape} and column graph {A_c.shape} must both be N x N")
    return A_r, A_c


def cartesian_sum(A_r, A_c) -> np.ndarray:
    A_r, A_c = _pair(A_r, A_c)
    eye = np.eye(len(A_r), dtype=np.int64)
    return kron(A_r, eye) + kron(eye, A_c)


def product_mask(A_r, A_c) -> np.ndarray:
    A_r, A_c = _pair(A_r, A_c)
    return kron(A_r, A_c) + kron(A_c, A_r)


def masked_product_raw(A_r, A_c) -> np.ndarray:
    """Integer-valued ``A_2 * M`` before binarization (debugging aid)."""
    return cartesian_sum(A_r, A_c) * product_mask(A_r, A_c)


def masked_product(A_r, A_c) -> np.ndarray:
    return (masked_product_raw(A_r, A_c) != 0).astype(np.uint8)
