"""Desk-scale representation table for MNIST and Fashion-MNIST.

Equivalent to ``imgraph reproduce --scale desk`` but also writes per-cell
timings, which the CLI leaves out to keep its artifacts byte-stable.

    python scripts/run_desk.py --data-dir data --out-dir results/desk
"""
import argparse
import json
import time
from pathlib import Path

from imgraph import experiment as ex
from imgraph.gnn import GcnConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data-dir", type=Path, default=ex.default_data_dir())
    parser.add_argument("--out-dir", type=Path, default=Path("results/desk"))
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--cells", default=",".join(ex.ALL_CELLS))
    parser.add_argument("--datasets", default="mnist,fashion-mnist")
    parser.add_argument("--scale", choices=tuple(ex.SCALES), default="desk")
    args = parser.parse_args()

    scale = ex.SCALES[args.scale]
    seeds = [int(s) for s in args.seeds.split(",")]
    cells = args.cells.split(",")
    cfg = GcnConfig(layer_dims=(64, 64, 64), epochs=scale.epochs, dtype="float32")
    args.out_dir.mkdir(parents=True, exist_ok=True)
    log_file = open(args.out_dir / "log.txt", "a")

    def log(msg):
        line = f"{time.strftime('%H:%M:%S')} {msg}"
        print(line, flush=True)
        log_file.write(line + "\n")
        log_file.flush()

    results, timings = {}, {}
    for tag in args.datasets.split(","):
        if not ex.available(args.data_dir, tag):
            log(f"skipping {tag}: no files")
            continue
        tr = ex.load_split(args.data_dir, tag, "train", scale.train_per_class, 0)
        te = ex.load_split(args.data_dir, tag, "test", scale.test_per_class, 0)
        t0 = time.perf_counter()
        results[tag] = ex.run_cells(tr, te, cells, seeds, cfg, dataset=tag, log=log)
        timings[tag] = {c: [rep.seconds for rep in r.reports] for c, r in results[tag].items()}
        timings[tag]["total"] = time.perf_counter() - t0

    table = ex.format_table(results, cells)
    orders = [ex.format_order(*o) for o in ex.order_lines(results)]
    (args.out_dir / "table.txt").write_text(table + "".join(o + "\n" for o in orders))
    (args.out_dir / "results.tsv").write_text(ex.tsv_rows(results))
    (args.out_dir / "timings.json").write_text(json.dumps(timings, indent=2))
    print(table + "\n".join(orders))


if __name__ == "__main__":
    main()
