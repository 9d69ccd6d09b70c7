import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from imgraph.errors import BadMagic, InsufficientClass, NonSquare, Truncated
from imgraph.image_io import (
    LabeledDataset,
    encode_idx_images,
    encode_idx_labels,
    load_dataset,
    normalize,
    parse_idx_images,
    parse_idx_labels,
    stratified_subset,
)


def image_header(count, rows, cols, magic=0x803):
    return struct.pack(">IIII", magic, count, rows, cols)


def test_zero_payload_gives_black_image():
    out = parse_idx_images(image_header(1, 28, 28) + bytes(784))
    assert out.shape == (1, 28, 28)
    assert out.dtype == np.uint8
    assert not out.any()


def test_short_payload_is_truncated():
    with pytest.raises(Truncated):
        parse_idx_images(image_header(2, 28, 28) + bytes(784))


def test_wrong_magic_rejected():
    with pytest.raises(BadMagic):
        parse_idx_images(image_header(1, 2, 2, magic=0x801) + bytes(4))
    with pytest.raises(BadMagic):
        parse_idx_labels(struct.pack(">II", 0x803, 0))


def test_non_square_rejected():
    with pytest.raises(NonSquare):
        parse_idx_images(image_header(1, 2, 3) + bytes(6))


def test_row_major_order_preserved():
    out = parse_idx_images(image_header(1, 2, 2) + bytes([1, 2, 3, 4]))
    assert out[0].tolist() == [[1, 2], [3, 4]]


def test_labels():
    assert parse_idx_labels(struct.pack(">II", 0x801, 3) + bytes([5, 0, 4])).tolist() == [5, 0, 4]
    assert parse_idx_labels(struct.pack(">II", 0x801, 0)).tolist() == []
    with pytest.raises(Truncated):
        parse_idx_labels(struct.pack(">II", 0x801, 1))


def test_normalize_values():
    assert normalize(np.array([255, 0, 51], dtype=np.uint8)).tolist() == [1.0, 0.0, 0.2]


@given(arrays(np.uint8, st.tuples(st.integers(0, 4), st.integers(2, 6)).map(lambda t: (t[0], t[1], t[1]))))
def test_image_roundtrip(raw):
    data = encode_idx_images(raw)
    back = parse_idx_images(data)
    assert np.array_equal(back, raw)
    assert encode_idx_images(back) == data


@given(arrays(np.uint8, st.integers(0, 50), elements=st.integers(0, 9)))
def test_label_roundtrip(labels):
    data = encode_idx_labels(labels)
    assert parse_idx_labels(data).tolist() == labels.tolist()
    assert encode_idx_labels(parse_idx_labels(data)) == data


@given(arrays(np.uint8, 20))
def test_normalize_monotone_and_in_range(raw):
    out = normalize(raw)
    order = np.argsort(raw, kind="stable")
    assert (np.diff(out[order]) >= 0).all()
    assert ((out >= 0) & (out <= 1)).all()


def toy_dataset(per_class=12, N=3, seed=0):
    r = np.random.default_rng(seed)
    labels = np.repeat(np.arange(10), per_class).astype(np.uint8)
    r.shuffle(labels)
    return LabeledDataset(r.random((len(labels), N, N)), labels)


def test_subset_counts_and_determinism():
    ds = toy_dataset()
    a = stratified_subset(ds, 5, seed=7)
    b = stratified_subset(ds, 5, seed=7)
    assert np.bincount(a.labels, minlength=10).tolist() == [5] * 10
    assert a.images.tobytes() == b.images.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()
    assert len(stratified_subset(ds, 0, seed=1)) == 0


def test_subset_keeps_source_order():
    ds = toy_dataset()
    ds = LabeledDataset(np.arange(len(ds.labels), dtype=float)[:, None, None] * np.ones((1, 2, 2)), ds.labels)
    picked = stratified_subset(ds, 4, seed=3).images[:, 0, 0]
    assert (np.diff(picked) > 0).all()


def test_subset_insufficient_class():
    with pytest.raises(InsufficientClass):
        stratified_subset(toy_dataset(per_class=3), 4, seed=0)


@given(st.integers(0, 12), st.integers(0, 2**32 - 1))
def test_subset_histogram_uniform(k, seed):
    sub = stratified_subset(toy_dataset(), k, seed)
    assert np.bincount(sub.labels, minlength=10).tolist() == [k] * 10


def test_mismatched_lengths_rejected():
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((2, 2, 2)), np.zeros(3, dtype=np.uint8))


def test_real_mnist(mnist_dir):
    ds = load_dataset(mnist_dir / "train-images-idx3-ubyte", mnist_dir / "train-labels-idx1-ubyte")
    assert len(ds) == 60000
    assert ds.side == 28
    assert ds.labels[:3].tolist() == [5, 0, 4]
    raw = (mnist_dir / "train-labels-idx1-ubyte").read_bytes()
    assert list(raw[8:11]) == [5, 0, 4]  # byte offsets straight from the IDX layout
    assert ds.images.min() == 0.0 and ds.images.max() == 1.0
    assert len(stratified_subset(ds, 100, seed=0)) == 1000
