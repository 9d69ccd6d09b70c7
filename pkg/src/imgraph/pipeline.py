"""Turn images into (adjacency, features) pairs for every representation."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import corrgraph, features, product_graph
from .errors import InputContractError

GRAPH_TYPES = ("grid", "row", "column", "product")
FEATURE_TYPES = ("pixel", "standard", "correlation")

# standard and correlation features are per pixel, so they need N^2 nodes;
# correlation features are only defined for the product graph
VALID_CELLS = {
    "grid": ("pixel", "standard"),
    "row": ("pixel",),
    "column": ("pixel",),
    "product": ("pixel", "standard", "correlation"),
}


def check_cell(graph_type: str, feature_type: str):
    if graph_type not in VALID_CELLS:
        raise InputContractError(f"unknown graph type {graph_type!r}")
    if feature_type not in VALID_CELLS[graph_type]:
        raise InputContractError(f"{feature_type!r} features are not defined for {graph_type!r} graphs")


def adjacency(A, graph_type: str, max_iters: int = corrgraph.DEFAULT_MAX_ITERS) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if graph_type == "grid":
        return corrgraph.grid_graph(A.shape[0])
    if graph_type == "row":
        return corrgraph.row_graph(A, max_iters)
    if graph_type == "column":
        return corrgraph.column_graph(A, max_iters)
    if graph_type == "product":
        return product_graph.masked_product(corrgraph.row_graph(A, max_iters),
                                            corrgraph.column_graph(A, max_iters))
    raise InputContractError(f"unknown graph type {graph_type!r}")


def node_features(A, graph_type: str, feature_type: str, lazy: bool = False):
    check_cell(graph_type, feature_type)
    if feature_type == "pixel":
        return features.pixel_features(A, graph_type)
    if feature_type == "standard":
        return features.standard_features(A)
    return features.correlation_features(A, lazy=lazy)


def represent(A, graph_type: str, feature_type: str, lazy: bool = False):
    check_cell(graph_type, feature_type)
    return adjacency(A, graph_type), node_features(A, graph_type, feature_type, lazy)


def parallel_map(fn, items, threads: int = 1):
    """Order-preserving map; results never depend on ``threads``."""
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


class ImageGraphs:
    """All representations of one image, sharing the row/column graph work."""

    def __init__(self, A, max_iters: int = corrgraph.DEFAULT_MAX_ITERS):
        self.A = np.asarray(A, dtype=np.float64)
        self.row = corrgraph.row_graph(self.A, max_iters)
        self.column = corrgraph.column_graph(self.A, max_iters)
        self._product = None

    @property
    def product(self):
        if self._product is None:
            self._product = product_graph.masked_product(self.row, self.column)
        return self._product

    def adjacency(self, graph_type: str):
        if graph_type == "grid":
            return corrgraph.grid_graph(self.A.shape[0])
        return getattr(self, graph_type)
