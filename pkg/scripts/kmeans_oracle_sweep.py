"""How often does each 2-means strategy reach the exhaustive minimum SSE?

Compares plain Lloyd from the max/min-norm start with the multi-start
refinement used by ``kmeans2`` on random tables small enough to brute-force.

    python scripts/kmeans_oracle_sweep.py --tables 2000 --max-rows 12
"""
import argparse
import itertools

import numpy as np

from imgraph import corrgraph as cg


def exhaustive(X):
    P = len(X)
    best = np.inf
    for bits in itertools.product((0, 1), repeat=P - 1):
        assign = np.array(bits + (0,))
        best = min(best, cg.within_sse(X, assign))
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--tables", type=int, default=1000)
    parser.add_argument("--max-rows", type=int, default=12)
    parser.add_argument("--max-dim", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    misses = {"lloyd": 0, "kmeans2": 0}
    for t in range(args.tables):
        P = int(rng.integers(2, args.max_rows + 1))
        X = rng.normal(size=(P, int(rng.integers(1, args.max_dim + 1))))
        best = exhaustive(X)
        pairs = np.zeros((P, 2), dtype=int)
        lloyd, _, _ = cg.lloyd2(X, pairs)
        refined = cg.kmeans2(cg.PairFeatureTable(pairs, X, X.shape[1])).astype(int)
        misses["lloyd"] += cg.within_sse(X, lloyd) > best + 1e-9
        misses["kmeans2"] += cg.within_sse(X, refined) > best + 1e-9
    for name, m in misses.items():
        print(f"{name:8s} above exhaustive minimum: {m}/{args.tables} ({100 * m / args.tables:.1f}%)")


if __name__ == "__main__":
    main()
