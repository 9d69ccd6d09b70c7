"""CGDS1: a bit-exact binary container for graph datasets.

All integers are little-endian.  Header (56 bytes)::

    offset  size  field
    0       5     magic b"CGDS1"
    5       1     graph type    (0 grid, 1 row, 2 column, 3 product)
    6       1     feature type  (0 pixel, 1 standard, 2 correlation)
    7       1     source        (0 synthetic, 1 mnist, 2 fashion-mnist)
    8       4     u32 N (image side)
    12      4     u32 record count
    16      32    config hash (SHA-256 of the canonical build config)
    48      4     u32 CRC32 of the payload (all record bytes)
    52      4     u32 CRC32 of header bytes 0..51

Each record::

    u32 node_count, u32 edge_count, u32 feature_dim, u8 label
    edge_count x (u32 i, u32 j)           sorted, i <= j, strictly ascending
    node_count * feature_dim x f32        row-major features
"""
from __future__ import annotations

import hashlib
import io
import json
import mmap
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagic, CorruptRecord, InputContractError, IoFailure, TooLarge, TruncatedFile

MAGIC = b"CGDS1"
HEADER_SIZE = 56
GRAPH_TAGS = ("grid", "row", "column", "product")
FEATURE_TAGS = ("pixel", "standard", "correlation")
SOURCE_TAGS = ("synthetic", "mnist", "fashion-mnist")
DOT_MAX_NODES = 10_000

_HEAD = struct.Struct("<5sBBBII32sI")
_REC = struct.Struct("<IIIB")


def config_hash(config: dict) -> bytes:
    return hashlib.sha256(json.dumps(config, sort_keys=True, separators=(",", ":")).encode()).digest()


@dataclass(frozen=True)
class DatasetHeader:
    graph_type: str
    feature_type: str
    source: str
    N: int
    count: int
    config_hash: bytes = bytes(32)

    def __post_init__(self):
        for value, allowed in ((self.graph_type, GRAPH_TAGS), (self.feature_type, FEATURE_TAGS),
                               (self.source, SOURCE_TAGS)):
            if value not in allowed:
                raise InputContractError(f"tag {value!r} not in {allowed}")
        if len(self.config_hash) != 32:
            raise InputContractError("config hash must be 32 bytes")

    def pack(self, payload_crc: int) -> bytes:
        body = _HEAD.pack(MAGIC, GRAPH_TAGS.index(self.graph_type), FEATURE_TAGS.index(self.feature_type),
                          SOURCE_TAGS.index(self.source), self.N, self.count, self.config_hash, payload_crc)
        return body + struct.pack("<I", zlib.crc32(body))

    @classmethod
    def unpack(cls, data: bytes):
        """Parse and verify a header; returns ``(header, payload_crc)``."""
        if len(data) < HEADER_SIZE:
            if data[:5] != MAGIC[:len(data[:5])]:
                raise BadMagic("not a CGDS1 file")
            raise TruncatedFile(f"header needs {HEADER_SIZE} bytes, got {len(data)}")
        if data[:5] != MAGIC:
            raise BadMagic(f"bad magic {data[:5]!r}")
        body = data[:HEADER_SIZE - 4]
        (head_crc,) = struct.unpack("<I", data[HEADER_SIZE - 4:HEADER_SIZE])
        if zlib.crc32(body) != head_crc:
            raise CorruptRecord("header checksum mismatch")
        _, g, f, s, N, count, digest, payload_crc = _HEAD.unpack(body)
        try:
            header = cls(GRAPH_TAGS[g], FEATURE_TAGS[f], SOURCE_TAGS[s], N, count, digest)
        except IndexError as exc:
            raise CorruptRecord("unknown tag in header") from exc
        return header, payload_crc


@dataclass(frozen=True)
class GraphRecord:
    node_count: int
    edges: np.ndarray  # (E, 2) uint32, sorted, i <= j
    features: np.ndarray  # (node_count, feature_dim) float32
    label: int

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @classmethod
    def from_adjacency(cls, adj, features, label: int) -> "GraphRecord":
        adj = np.asarray(adj)
        i, j = np.nonzero(np.triu(adj))  # row-major order is already sorted
        feats = np.asarray(features, dtype=np.float32)
        if feats.ndim == 1:
            feats = feats[:, None]
        return cls(adj.shape[0], np.stack([i, j], axis=1).astype(np.uint32), feats, int(label))

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.node_count, self.node_count), dtype=np.uint8)
        i, j = self.edges.T.astype(np.int64)
        adj[i, j] = 1
        adj[j, i] = 1
        return adj

    def encode(self) -> bytes:
        edges = np.ascontiguousarray(self.edges, dtype="<u4")
        feats = np.ascontiguousarray(self.features, dtype="<f4")
        if feats.shape[0] != self.node_count:
            raise InputContractError(f"{feats.shape[0]} feature rows for {self.node_count} nodes")
        if not 0 <= self.label <= 255:
            raise InputContractError("label must fit in a byte")
        _validate_edges(edges, self.node_count, InputContractError)
        return _REC.pack(self.node_count, len(edges), feats.shape[1], self.label) + edges.tobytes() + feats.tobytes()

    def __eq__(self, other):
        if not isinstance(other, GraphRecord):
            return NotImplemented
        return (self.node_count == other.node_count and self.label == other.label
                and np.array_equal(self.edges, other.edges)
                and self.features.shape == other.features.shape
                and self.features.tobytes() == other.features.tobytes())


def _validate_edges(edges, node_count, error):
    if len(edges) == 0:
        return
    e = edges.astype(np.int64)
    if (e[:, 0] > e[:, 1]).any():
        raise error("edge with i > j")
    if e.max() >= node_count:
        raise error("edge endpoint out of range")
    keys = e[:, 0] * node_count + e[:, 1]
    if (np.diff(keys) <= 0).any():
        raise error("edges not strictly ascending")


def _decode_record(buf, offset: int, copy: bool):
    if len(buf) - offset < _REC.size:
        raise TruncatedFile("record header cut short")
    n, E, fdim, label = _REC.unpack_from(buf, offset)
    offset += _REC.size
    size_e, size_f = 8 * E, 4 * n * fdim
    if len(buf) - offset < size_e + size_f:
        raise TruncatedFile("record payload cut short")
    edges = np.frombuffer(buf, dtype="<u4", count=2 * E, offset=offset).reshape(E, 2)
    feats = np.frombuffer(buf, dtype="<f4", count=n * fdim, offset=offset + size_e).reshape(n, fdim)
    if copy:
        edges, feats = edges.copy(), feats.copy()
    _validate_edges(edges, n, CorruptRecord)
    return GraphRecord(n, edges, feats, label), offset + size_e + size_f


def write_dataset(records, header: DatasetHeader, sink) -> int:
    """Write header and records; ``sink`` is a path or a seekable binary file.

    Records may be any iterable and are encoded one at a time.  Returns the
    number of bytes written.
    """
    if isinstance(sink, (str, Path)):
        try:
            f = open(sink, "wb")
        except OSError as exc:
            raise IoFailure(f"cannot write {sink}: {exc.strerror}") from exc
        with f:
            return write_dataset(records, header, f)
    start = sink.tell()
    sink.write(bytes(HEADER_SIZE))
    crc, written, count = 0, HEADER_SIZE, 0
    for rec in records:
        blob = rec.encode()
        crc = zlib.crc32(blob, crc)
        sink.write(blob)
        written += len(blob)
        count += 1
    if count != header.count:
        raise InputContractError(f"header declares {header.count} records, got {count}")
    end = sink.tell()
    sink.seek(start)
    sink.write(header.pack(crc))
    sink.seek(end)
    return written


def encode_dataset(records, header: DatasetHeader) -> bytes:
    buf = io.BytesIO()
    write_dataset(records, header, buf)
    return buf.getvalue()


def decode_dataset(data, copy: bool = True):
    header, payload_crc = DatasetHeader.unpack(bytes(data[:HEADER_SIZE]))
    if zlib.crc32(memoryview(data)[HEADER_SIZE:]) != payload_crc:
        # distinguish a short file from flipped bits
        _walk(data, header, copy)
        raise CorruptRecord("payload checksum mismatch")
    return header, _walk(data, header, copy)


def _walk(data, header, copy):
    records, offset = [], HEADER_SIZE
    for _ in range(header.count):
        rec, offset = _decode_record(data, offset, copy)
        records.append(rec)
    if offset != len(data):
        raise CorruptRecord(f"{len(data) - offset} trailing bytes after the last record")
    return records


def read_dataset(source, mmap_features: bool = False):
    """Read and verify a dataset; returns ``(header, records)``.

    With ``mmap_features`` the record arrays are read-only views into a memory
    map of the file, which keeps large correlation-feature datasets off the heap.
    """
    if isinstance(source, (bytes, bytearray, memoryview)):
        return decode_dataset(source)
    if hasattr(source, "read"):
        return decode_dataset(source.read())
    path = Path(source)
    if not mmap_features:
        return decode_dataset(path.read_bytes())
    with open(path, "rb") as f:
        if path.stat().st_size == 0:
            raise BadMagic("empty file")
        mm = mmap.mmap(f.fileno(), 0, access=mmap.ACCESS_READ)
    return decode_dataset(mm, copy=False)


def export_dot(record: GraphRecord, name: str = "G") -> str:
    if record.node_count > DOT_MAX_NODES:
        raise TooLarge(f"{record.node_count} nodes exceeds the DOT limit of {DOT_MAX_NODES}")
    lines = [f"graph {name} {{"]
    lines += [f"  {k};" for k in range(record.node_count)]
    lines += [f"  {i} -- {j};" for i, j in record.edges.tolist()]
    lines.append("}")
    return "\n".join(lines) + "\n"
