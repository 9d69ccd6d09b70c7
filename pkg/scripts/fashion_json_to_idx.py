"""Convert the per-class JSON dump of Fashion-MNIST (npm package ``fashion-mnist``)
into the standard IDX files the pipeline reads.

The JSON dump is not split, so the first ``--train-per-class`` samples of each
class become the train split and the rest the test split.  Samples are
interleaved by class in a fixed round-robin order so the output is
deterministic.

    python scripts/fashion_json_to_idx.py path/to/package/src/clothes out_dir
"""
import argparse
import json
from pathlib import Path

import numpy as np

from imgraph.image_io import encode_idx_images, encode_idx_labels


def write_idx(out_dir, prefix, images, labels):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{prefix}-images-idx3-ubyte").write_bytes(encode_idx_images(images.astype(np.uint8)))
    (out_dir / f"{prefix}-labels-idx1-ubyte").write_bytes(encode_idx_labels(labels.astype(np.uint8)))


def interleave(per_class):
    # round-robin over classes keeps every prefix roughly balanced
    images, labels = [], []
    longest = max(len(v) for v in per_class)
    for k in range(longest):
        for c, samples in enumerate(per_class):
            if k < len(samples):
                images.append(samples[k])
                labels.append(c)
    return np.asarray(images, dtype=np.uint8).reshape(-1, 28, 28), np.asarray(labels, dtype=np.uint8)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("clothes_dir", type=Path)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--train-per-class", type=int, default=6000)
    args = parser.parse_args()

    train, test = [], []
    for c in range(10):
        data = json.loads((args.clothes_dir / f"{c}.json").read_text())["data"]
        # the dump carries a couple of empty entries
        data = [x for x in data if len(x) == 28 * 28]
        train.append(data[: args.train_per_class])
        test.append(data[args.train_per_class:])

    for prefix, split in (("train", train), ("t10k", test)):
        images, labels = interleave(split)
        write_idx(args.out_dir, prefix, images, labels)
        print(f"{prefix}: {len(labels)} images")


if __name__ == "__main__":
    main()
