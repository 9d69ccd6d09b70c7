"""Desk-scale comparison of graph representations with the GCN.

For every dataset the train/test subsets are drawn once (``data_seed``); each
training seed then varies initialization and batch order only.  Graph
construction is shared between cells: the row and column graphs of an image
are computed once and reused by the row, column and product cells.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import corrgraph, product_graph
from .errors import InputContractError
from .gnn import GcnConfig, NormalizedGraph, normalize_adjacency_sparse, train
from .image_io import LabeledDataset, load_dataset, stratified_subset
from .pipeline import VALID_CELLS, ImageGraphs, node_features, parallel_map

DATA_DIR_ENV = "IMGRAPH_DATA_DIR"
DATASETS = {"mnist": "mnist", "fashion-mnist": "fashion"}  # tag -> sub-directory

ALL_CELLS = tuple(f"{g}_{f}" for g, feats in VALID_CELLS.items() for f in feats)


@dataclass(frozen=True)
class Scale:
    train_per_class: int | None  # None: whole split
    test_per_class: int | None
    epochs: int


SCALES = {
    "smoke": Scale(10, 10, 2),
    "desk": Scale(200, 100, 30),
    "full": Scale(None, None, 30),
}


def _short(cell: str) -> str:
    return cell.replace("_correlation", "_corr")


@dataclass(frozen=True)
class OrderCheck:
    dataset: str
    better: str
    worse: str
    margin_pp: float = 0.0  # required gap of the means, percentage points
    seed_fraction: float | None = None  # instead: fraction of seeds where better > worse

    @property
    def name(self) -> str:
        pair = f"{_short(self.better)}>{_short(self.worse)}"
        if self.seed_fraction is not None:
            return f"{pair} per-seed>={self.seed_fraction:.3g}"
        return f"{pair} +{self.margin_pp:g}pp"

    def evaluate(self, results: dict):
        a = np.asarray(results[self.better]) * 100
        b = np.asarray(results[self.worse]) * 100
        if self.seed_fraction is not None:
            wins = int((a > b).sum())
            need = math.ceil(self.seed_fraction * len(a) - 1e-9)
            return wins >= need, f"{wins}/{len(a)} seeds"
        gap = a.mean() - b.mean()
        return gap >= self.margin_pp, f"gap {gap:.2f}pp"


ORDER_CHECKS = (
    OrderCheck("mnist", "product_correlation", "grid_pixel", margin_pp=15.0),
    OrderCheck("mnist", "column_pixel", "row_pixel", seed_fraction=2 / 3),
    OrderCheck("fashion-mnist", "product_correlation", "grid_pixel", margin_pp=10.0),
)


def default_data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def dataset_paths(data_dir, tag: str, split: str):
    prefix = "train" if split == "train" else "t10k"
    root = Path(data_dir) / DATASETS[tag]
    return root / f"{prefix}-images-idx3-ubyte", root / f"{prefix}-labels-idx1-ubyte"


def available(data_dir, tag: str) -> bool:
    return all(p.exists() for split in ("train", "test") for p in dataset_paths(data_dir, tag, split))


def load_split(data_dir, tag: str, split: str, per_class: int | None, seed: int) -> LabeledDataset:
    ds = load_dataset(*dataset_paths(data_dir, tag, split), split=split)
    return ds if per_class is None else stratified_subset(ds, per_class, seed)


def _split_cell(cell: str):
    graph_type, feature_type = cell.split("_", 1)
    if feature_type not in VALID_CELLS.get(graph_type, ()):
        raise InputContractError(f"invalid cell {cell!r}; valid cells: {', '.join(ALL_CELLS)}")
    return graph_type, feature_type


class GraphCache:
    """Per-image graphs for one labeled dataset, built once."""

    def __init__(self, ds: LabeledDataset, threads: int = 1, need_corr: bool = True):
        self.ds = ds
        self.images = (parallel_map(ImageGraphs, list(ds.images), threads) if need_corr else None)
        self._grid = None

    def grid(self):
        if self._grid is None:
            self._grid = normalize_adjacency_sparse(corrgraph.grid_graph(self.ds.side))
        return self._grid

    def graphs(self, cell: str):
        graph_type, feature_type = _split_cell(cell)
        out = []
        for k, (A, y) in enumerate(zip(self.ds.images, self.ds.labels)):
            if graph_type == "grid":
                adj = self.grid()
            elif graph_type == "product":
                # not cached on the image: 784x784 dense per image adds up fast
                ig = self.images[k]
                adj = normalize_adjacency_sparse(sp.csr_matrix(product_graph.masked_product(ig.row, ig.column)))
            else:
                adj = normalize_adjacency_sparse(sp.csr_matrix(self.images[k].adjacency(graph_type)))
            x = node_features(A, graph_type, feature_type, lazy=True)
            out.append(NormalizedGraph(adj, x, int(y)))
        return out


@dataclass
class CellResult:
    dataset: str
    cell: str
    accuracies: list = field(default_factory=list)
    reports: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))


def run_cells(train_ds, test_ds, cells, seeds, base: GcnConfig, dataset: str = "",
              threads: int = 1, log=None) -> dict:
    """Train every cell for every seed; returns ``{cell: CellResult}``."""
    need_corr = any(not c.startswith("grid_") for c in cells)
    if log:
        log(f"[{dataset}] building graphs for {len(train_ds)} train / {len(test_ds)} test images")
    tr, te = GraphCache(train_ds, threads, need_corr), GraphCache(test_ds, threads, need_corr)
    results = {}
    for cell in cells:
        train_graphs, test_graphs = tr.graphs(cell), te.graphs(cell)
        res = CellResult(dataset, cell)
        for seed in seeds:
            cfg = replace(base, seed=seed)
            graph_type, feature_type = _split_cell(cell)
            _, report = train(train_graphs, cfg, test=test_graphs,
                              tags={"dataset": dataset, "graph_type": graph_type, "feature_type": feature_type})
            res.accuracies.append(report.test_accuracy)
            res.reports.append(report)
            if log:
                log(f"[{dataset}] {cell} seed={seed} test_acc={report.test_accuracy:.4f} ({report.seconds:.0f}s)")
        results[cell] = res
    return results


def order_lines(all_results: dict, checks=ORDER_CHECKS):
    """``{dataset: {cell: CellResult}}`` -> list of (check, passed, detail)."""
    out = []
    for check in checks:
        cells = all_results.get(check.dataset, {})
        if check.better not in cells or check.worse not in cells:
            continue
        acc = {c: cells[c].accuracies for c in (check.better, check.worse)}
        passed, detail = check.evaluate(acc)
        out.append((check, passed, detail))
    return out


def format_order(check: OrderCheck, passed: bool, detail: str) -> str:
    return f"ORDER {check.dataset} {check.name}: {'PASS' if passed else 'FAIL'} ({detail})"


def format_table(all_results: dict, cells=ALL_CELLS) -> str:
    header = ["dataset"] + list(cells)
    rows = [header]
    for dataset, res in all_results.items():
        row = [dataset]
        for c in cells:
            row.append(f"{res[c].mean * 100:.2f} ± {res[c].std * 100:.2f}" if c in res else "-")
        rows.append(row)
    widths = [max(len(r[k]) for r in rows) for k in range(len(header))]
    return "\n".join("  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in rows) + "\n"


TSV_COLUMNS = ("dataset", "cell", "graph_type", "feature_type", "seed", "test_acc")


def tsv_rows(all_results: dict) -> str:
    lines = ["\t".join(TSV_COLUMNS)]
    for dataset, res in all_results.items():
        for cell, r in res.items():
            g, f = _split_cell(cell)
            for rep in r.reports:
                lines.append("\t".join([dataset, cell, g, f, str(rep.config.seed), repr(rep.test_accuracy)]))
    return "\n".join(lines) + "\n"
