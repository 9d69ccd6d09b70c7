"""Command line entry point: ``imgraph build|train|reproduce|dot``.

Exit codes: 0 success, 2 usage, 3 input-contract violation (including
unreadable paths), 4 data corruption, 5 internal invariant breach.
"""
from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import __version__, corrgraph
from . import dataset_store as store
from . import experiment
from .errors import IoFailure, PipelineError, TagMismatch
from .gnn import GcnConfig, NormalizedGraph, normalize_adjacency_sparse, train
from .image_io import load_dataset, stratified_subset
from .pipeline import FEATURE_TYPES, GRAPH_TYPES, adjacency, check_cell, node_features, parallel_map

BUILD_CHUNK = 64  # images per parallel batch; bounds memory of in-flight records


def _err(msg: str):
    print(msg, file=sys.stderr, flush=True)


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# ---------------------------------------------------------------- build

def build_record(A, label: int, graph_type: str, feature_type: str) -> store.GraphRecord:
    adj = adjacency(A, graph_type)
    feats = node_features(A, graph_type, feature_type, lazy=False)
    return store.GraphRecord.from_adjacency(adj, feats, label)


def cmd_build(args) -> int:
    check_cell(args.graph_type, args.feature_type)
    ds = load_dataset(args.images, args.labels)
    if args.per_class is not None:
        ds = stratified_subset(ds, args.per_class, args.seed)
    config = {
        "graph_type": args.graph_type, "feature_type": args.feature_type, "source": args.source,
        "N": ds.side, "per_class": args.per_class, "seed": args.seed,
        "kmeans_max_iters": corrgraph.DEFAULT_MAX_ITERS,
        "images_sha256": _file_digest(args.images), "labels_sha256": _file_digest(args.labels),
    }
    header = store.DatasetHeader(args.graph_type, args.feature_type, args.source, ds.side, len(ds),
                                 store.config_hash(config))
    n = len(ds)

    def one(k):
        return build_record(ds.images[k], int(ds.labels[k]), args.graph_type, args.feature_type)

    def records():
        chunk = BUILD_CHUNK * max(1, args.threads)
        for start in range(0, n, chunk):
            yield from parallel_map(one, range(start, min(n, start + chunk)), args.threads)
            if not args.quiet:
                _err(f"built {min(n, start + chunk)}/{n}")

    size = store.write_dataset(records(), header, args.out)
    print(f"wrote {n} records ({size} bytes) to {args.out}")
    return 0


# ---------------------------------------------------------------- train

def record_to_graph(rec: store.GraphRecord) -> NormalizedGraph:
    i, j = rec.edges.T.astype(np.int64)
    off = i != j
    rows = np.concatenate([i, j[off]])
    cols = np.concatenate([j, i[off]])
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(rec.node_count,) * 2)
    return NormalizedGraph(normalize_adjacency_sparse(A), rec.features, rec.label)


def gcn_config(args, **overrides) -> GcnConfig:
    kw = dict(layer_dims=(args.width,) * args.layers, learning_rate=args.lr, epochs=args.epochs,
              batch_size=args.batch, seed=getattr(args, "seed", 0), norm=args.norm, dtype=args.dtype)
    kw.update(overrides)
    return GcnConfig(**kw)


def cmd_train(args) -> int:
    h_train, train_recs = store.read_dataset(args.train, mmap_features=True)
    h_test, test_recs = store.read_dataset(args.test, mmap_features=True)
    for field in ("graph_type", "feature_type", "N"):
        if getattr(h_train, field) != getattr(h_test, field):
            raise TagMismatch(f"train/test disagree on {field}: "
                              f"{getattr(h_train, field)!r} vs {getattr(h_test, field)!r}")
    cfg = gcn_config(args)
    tags = {"graph_type": h_train.graph_type, "feature_type": h_train.feature_type,
            "source": h_train.source, "N": h_train.N,
            "train_config": h_train.config_hash.hex(), "test_config": h_test.config_hash.hex(),
            "train_count": h_train.count, "test_count": h_test.count,
            "self_loops": "kept (weight 2 before normalization)"}
    log = None if args.quiet else _err
    _, report = train([record_to_graph(r) for r in train_recs], cfg,
                      test=[record_to_graph(r) for r in test_recs], tags=tags, log=log)
    if args.report_out:
        try:
            Path(args.report_out).write_text(report.to_text())
        except OSError as exc:
            raise IoFailure(f"cannot write {args.report_out}: {exc.strerror}") from exc
    if not args.quiet:
        _err(f"trained in {report.seconds:.1f}s")
    print(f"test_acc={report.test_accuracy!r}")
    return 0


# ---------------------------------------------------------------- reproduce

def cmd_reproduce(args) -> int:
    scale = experiment.SCALES[args.scale]
    seeds = [int(s) for s in args.seeds.split(",")]
    cells = args.cells.split(",") if args.cells else list(experiment.ALL_CELLS)
    for c in cells:
        experiment._split_cell(c)
    wanted = args.datasets.split(",")
    for tag in wanted:
        if tag not in experiment.DATASETS:
            raise IoFailure(f"unknown dataset {tag!r}; choose from {', '.join(experiment.DATASETS)}")
    present = [t for t in wanted if experiment.available(args.data_dir, t)]
    for t in wanted:
        if t not in present:
            _err(f"skipping {t}: files not found under {Path(args.data_dir) / experiment.DATASETS[t]}")
    if not present:
        raise IoFailure(f"no dataset files under {args.data_dir}")

    base = gcn_config(args, epochs=args.epochs if args.epochs is not None else scale.epochs, seed=seeds[0])
    log = None if args.quiet else _err
    results = {}
    for tag in present:
        tr = experiment.load_split(args.data_dir, tag, "train", scale.train_per_class, args.data_seed)
        te = experiment.load_split(args.data_dir, tag, "test", scale.test_per_class, args.data_seed)
        results[tag] = experiment.run_cells(tr, te, cells, seeds, base, dataset=tag,
                                            threads=args.threads, log=log)

    out = Path(args.out_dir)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    table = experiment.format_table(results, cells)
    orders = [experiment.format_order(*o) for o in experiment.order_lines(results)]
    (out / "table.txt").write_text(table + "".join(line + "\n" for line in orders))
    (out / "results.tsv").write_text(experiment.tsv_rows(results))
    for tag, res in results.items():
        for cell, r in res.items():
            for rep in r.reports:
                (out / "reports" / f"{tag}_{cell}_seed{rep.config.seed}.txt").write_text(rep.to_text())
    sys.stdout.write(table)
    for line in orders:
        print(line)
    return 0


# ---------------------------------------------------------------- dot

def cmd_dot(args) -> int:
    header, recs = store.read_dataset(args.dataset, mmap_features=True)
    if not 0 <= args.index < len(recs):
        raise IoFailure(f"record index {args.index} out of range (dataset has {len(recs)})")
    text = store.export_dot(recs[args.index], name=f"{header.graph_type}_{args.index}")
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------- parser

def _add_gcn_args(p, epochs_default=30):
    p.add_argument("--layers", type=int, default=3, help="number of GCN layers")
    p.add_argument("--width", type=int, default=64, help="hidden width of every layer")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=epochs_default)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--norm", choices=("node", "none"), default="node",
                   help="per-graph channel standardization after each propagation")
    p.add_argument("--dtype", choices=("float32", "float64"), default="float32")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="imgraph", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="turn IDX images into a CGDS1 graph dataset")
    b.add_argument("--images", required=True)
    b.add_argument("--labels", required=True)
    b.add_argument("--graph-type", required=True, choices=GRAPH_TYPES)
    b.add_argument("--feature-type", required=True, choices=FEATURE_TYPES)
    b.add_argument("--out", required=True)
    b.add_argument("--per-class", type=int, default=None, help="stratified subset size per class")
    b.add_argument("--seed", type=int, default=0, help="subset sampling seed")
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--source", choices=store.SOURCE_TAGS, default="mnist")
    b.add_argument("--quiet", action="store_true")
    b.set_defaults(func=cmd_build)

    t = sub.add_parser("train", help="train and evaluate the GCN on two CGDS1 datasets")
    t.add_argument("--train", required=True)
    t.add_argument("--test", required=True)
    _add_gcn_args(t)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--report-out", default=None)
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("reproduce", help="run the representation comparison table")
    r.add_argument("--data-dir", default=str(experiment.default_data_dir()),
                   help=f"holds mnist/ and fashion/ IDX files (default ${experiment.DATA_DIR_ENV} or ./data)")
    r.add_argument("--out-dir", default="results")
    r.add_argument("--seeds", default="0,1,2", help="comma-separated training seeds")
    r.add_argument("--scale", choices=tuple(experiment.SCALES), default="desk")
    r.add_argument("--datasets", default="mnist,fashion-mnist")
    r.add_argument("--cells", default=None, help=f"subset of {','.join(experiment.ALL_CELLS)}")
    r.add_argument("--data-seed", type=int, default=0, help="seed of the train/test subsets")
    r.add_argument("--threads", type=int, default=1, help="graph-building threads")
    _add_gcn_args(r, epochs_default=None)
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_reproduce)

    d = sub.add_parser("dot", help="export one record of a dataset as DOT")
    d.add_argument("dataset")
    d.add_argument("--index", type=int, default=0)
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_dot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        _err(f"error: {type(exc).__name__}: {exc}")
        return exc.exit_code
    except OSError as exc:
        _err(f"error: {exc}")
        return IoFailure.exit_code


if __name__ == "__main__":
    sys.exit(main())
