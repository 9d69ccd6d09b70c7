"""IDX parsing, normalization and stratified subsets.

IDX layout (big endian)::

    u32 magic      0x00000803 images / 0x00000801 labels
    u32 count
    u32 rows       images only
    u32 cols       images only
    u8[]           payload, row-major

Raw images are ``uint8`` arrays of shape ``(count, N, N)``; normalized images
are ``float64`` in ``[0, 1]``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagic, InsufficientClass, InputContractError, NonSquare, Truncated

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
NUM_CLASSES = 10


@dataclass(frozen=True)
class LabeledDataset:
    images: np.ndarray  # (count, N, N) float64 in [0, 1]
    labels: np.ndarray  # (count,) uint8
    split: str = "train"

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise InputContractError(
                f"{len(self.images)} images but {len(self.labels)} labels")
        if len(self.labels) and int(np.max(self.labels)) >= NUM_CLASSES:
            raise InputContractError("labels must lie in 0..9")

    def __len__(self):
        return len(self.labels)

    @property
    def side(self) -> int:
        return self.images.shape[1]


def _header(data: bytes, n_fields: int, magic: int, what: str):
    need = 4 * n_fields
    if len(data) < need:
        raise Truncated(f"{what}: header needs {need} bytes, got {len(data)}")
    fields = struct.unpack(f">{n_fields}I", data[:need])
    if fields[0] != magic:
        raise BadMagic(f"{what}: magic 0x{fields[0]:08x}, expected 0x{magic:08x}")
    return fields[1:], need


def parse_idx_images(data: bytes) -> np.ndarray:
    """Parse an IDX image file into a ``(count, N, N)`` uint8 array."""
    (count, rows, cols), offset = _header(data, 4, IMAGE_MAGIC, "images")
    if rows != cols:
        raise NonSquare(f"images are {rows}x{cols}; only square images are supported")
    size = count * rows * cols
    if len(data) - offset < size:
        raise Truncated(f"images: header declares {count} images ({size} bytes), "
                        f"payload has {len(data) - offset}")
    return np.frombuffer(data, dtype=np.uint8, count=size, offset=offset).reshape(count, rows, cols).copy()


def parse_idx_labels(data: bytes) -> np.ndarray:
    (count,), offset = _header(data, 2, LABEL_MAGIC, "labels")
    if len(data) - offset < count:
        raise Truncated(f"labels: header declares {count} labels, payload has {len(data) - offset}")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=offset).copy()


def encode_idx_images(raw: np.ndarray) -> bytes:
    raw = np.asarray(raw, dtype=np.uint8)
    count, rows, cols = raw.shape
    return struct.pack(">IIII", IMAGE_MAGIC, count, rows, cols) + raw.tobytes()


def encode_idx_labels(labels) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", LABEL_MAGIC, len(labels)) + labels.tobytes()


def normalize(raw: np.ndarray) -> np.ndarray:
    """Map 8-bit intensities to [0, 1] by dividing by 255."""
    return np.asarray(raw, dtype=np.float64) / 255.0


def load_dataset(images_path, labels_path, split: str = "train") -> LabeledDataset:
    images = parse_idx_images(Path(images_path).read_bytes())
    labels = parse_idx_labels(Path(labels_path).read_bytes())
    return LabeledDataset(normalize(images), labels, split)


def stratified_subset(ds: LabeledDataset, per_class: int, seed: int) -> LabeledDataset:
    """Draw ``per_class`` items of every class 0..9.

    The choice depends only on the dataset order, ``per_class`` and ``seed``;
    selected items keep their original relative order.
    """
    if per_class < 0:
        raise InputContractError("per_class must be non-negative")
    rng = np.random.default_rng(seed)
    chosen = []
    for c in range(NUM_CLASSES):
        idx = np.flatnonzero(ds.labels == c)
        if len(idx) < per_class:
            raise InsufficientClass(f"class {c} has {len(idx)} items, need {per_class}")
        if per_class:
            chosen.append(rng.choice(idx, size=per_class, replace=False))
    order = np.sort(np.concatenate(chosen)) if chosen else np.zeros(0, dtype=np.int64)
    return LabeledDataset(ds.images[order], ds.labels[order], ds.split)
