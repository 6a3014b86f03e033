"""Bit-exact file formats.

All binary formats are little-endian:

==========  =======================================================
``FSGR``    graph: magic, u32 version=1, u8 index width (4|8),
            u64 num_nodes, u64 nnz, row pointers, source indices
``FSFT``    features: magic, u32 version=1, u64 num_nodes, u32 dim,
            u8 dtype code (0 = float32), row-major payload
``FSPM``    partition map: magic, u32 version=1, u64 num_nodes,
            u32 machine count, u32 machine id per node
``FSMB``    sampled block: magic, u32 version=1, the block in FSGR
            body layout, then dst and src global-id sections
==========  =======================================================

Text formats: edge lists are one "src dst" pair per line with '#' comments;
label sets one node id per line; partition maps one "node machine" pair per
line.  Readers parse fully before constructing anything, so a bad file never
yields a partial object.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import (
    BadMagicError,
    FormatError,
    SizeMismatchError,
    TruncatedError,
    UnsupportedVersionError,
)
from .graphs import CooGraph, CscGraph, FeatureMatrix, LabelSet
from .partition import PartitionMap
from .sampling import MfgBlock

__all__ = [
    "read_graph",
    "write_graph",
    "read_features",
    "write_features",
    "read_edgelist_text",
    "read_labels",
    "write_labels",
    "read_partition_map",
    "write_partition_map",
    "read_partition_map_text",
    "write_partition_map_text",
    "read_block",
    "write_block",
]

GRAPH_MAGIC = b"FSGR"
FEATURE_MAGIC = b"FSFT"
PARTITION_MAGIC = b"FSPM"
BLOCK_MAGIC = b"FSMB"
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise TruncatedError(f"short read of {what}: wanted {n} bytes, got {len(buf)}")
    return buf


def _expect_magic(f, magic: bytes):
    got = f.read(len(magic))
    if len(got) != len(magic):
        raise TruncatedError("file shorter than its magic")
    if got != magic:
        raise BadMagicError(f"expected magic {magic!r}, found {got!r}")


def _expect_version(f, expected: int = 1):
    (version,) = _U32.unpack(_read_exact(f, 4, "version"))
    if version != expected:
        raise UnsupportedVersionError(f"unsupported format version {version}")


def _expect_eof(f):
    if f.read(1):
        raise FormatError("trailing bytes after payload")


def _index_dtype(width: int) -> np.dtype:
    if width == 4:
        return np.dtype("<u4")
    if width == 8:
        return np.dtype("<u8")
    raise UnsupportedVersionError(f"unsupported index width {width}")


def _pick_width(num_nodes: int, nnz: int) -> int:
    return 4 if max(num_nodes, nnz) <= 0xFFFFFFFF else 8


def _write_index_array(f, arr: np.ndarray, width: int):
    f.write(np.ascontiguousarray(arr).astype(_index_dtype(width)).tobytes())


def _read_index_array(f, count: int, width: int, what: str) -> np.ndarray:
    raw = _read_exact(f, count * width, what)
    return np.frombuffer(raw, dtype=_index_dtype(width)).astype(np.int64)


def _write_graph_body(f, g: CscGraph, width: int | None):
    if width is None:
        width = _pick_width(g.num_nodes, g.nnz)
    f.write(struct.pack("<B", width))
    f.write(_U64.pack(g.num_nodes))
    f.write(_U64.pack(g.nnz))
    _write_index_array(f, g.indptr, width)
    _write_index_array(f, g.indices, width)


def _read_graph_body(f, num_cols: int | None = None) -> CscGraph:
    (width,) = struct.unpack("<B", _read_exact(f, 1, "index width"))
    (num_nodes,) = _U64.unpack(_read_exact(f, 8, "node count"))
    (nnz,) = _U64.unpack(_read_exact(f, 8, "edge count"))
    indptr = _read_index_array(f, num_nodes + 1, width, "row pointers")
    indices = _read_index_array(f, nnz, width, "source indices")
    return CscGraph(num_nodes, indptr, indices, num_cols=num_cols)


def write_graph(path, g: CscGraph, width: int | None = None):
    with open(path, "wb") as f:
        f.write(GRAPH_MAGIC)
        f.write(_U32.pack(1))
        _write_graph_body(f, g, width)


def read_graph(path) -> CscGraph:
    with open(path, "rb") as f:
        _expect_magic(f, GRAPH_MAGIC)
        _expect_version(f)
        g = _read_graph_body(f)
        _expect_eof(f)
    return g


def read_graph_header(path) -> tuple[int, int]:
    """(num_nodes, nnz) without loading the payload."""
    with open(path, "rb") as f:
        _expect_magic(f, GRAPH_MAGIC)
        _expect_version(f)
        _read_exact(f, 1, "index width")
        (num_nodes,) = _U64.unpack(_read_exact(f, 8, "node count"))
        (nnz,) = _U64.unpack(_read_exact(f, 8, "edge count"))
    return num_nodes, nnz


def write_features(path, feats: FeatureMatrix):
    with open(path, "wb") as f:
        f.write(FEATURE_MAGIC)
        f.write(_U32.pack(1))
        f.write(_U64.pack(feats.num_nodes))
        f.write(_U32.pack(feats.dim))
        f.write(struct.pack("<B", 0))
        f.write(feats.data.astype("<f4").tobytes())


def read_features(path) -> FeatureMatrix:
    with open(path, "rb") as f:
        _expect_magic(f, FEATURE_MAGIC)
        _expect_version(f)
        (num_nodes,) = _U64.unpack(_read_exact(f, 8, "node count"))
        (dim,) = _U32.unpack(_read_exact(f, 4, "feature dim"))
        (dtype_code,) = struct.unpack("<B", _read_exact(f, 1, "dtype code"))
        if dtype_code != 0:
            raise UnsupportedVersionError(f"unsupported feature dtype code {dtype_code}")
        raw = _read_exact(f, num_nodes * dim * 4, "feature payload")
        _expect_eof(f)
    data = np.frombuffer(raw, dtype="<f4").reshape(num_nodes, dim)
    return FeatureMatrix(data.astype(np.float32))


def read_edgelist_text(path, num_nodes: int | None = None) -> CooGraph:
    """Parse "src dst" pairs; the edge is stored under its destination."""
    srcs: list[int] = []
    dsts: list[int] = []
    with open(path, "r", encoding="ascii") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError(f"line {lineno}: expected 'src dst', got {line!r}")
            try:
                s, d = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise FormatError(f"line {lineno}: non-integer field") from exc
            srcs.append(s)
            dsts.append(d)
    src = np.array(srcs, dtype=np.int64)
    dst = np.array(dsts, dtype=np.int64)
    if num_nodes is None:
        num_nodes = int(max(src.max(initial=-1), dst.max(initial=-1))) + 1
    return CooGraph(num_nodes, dst, src)


def write_labels(path, labels: LabelSet):
    with open(path, "w", encoding="ascii") as f:
        for v in labels.nodes:
            f.write(f"{v}\n")


def read_labels(path, num_nodes: int | None = None) -> LabelSet:
    seen: list[int] = []
    with open(path, "r", encoding="ascii") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                seen.append(int(line))
            except ValueError as exc:
                raise FormatError(f"line {lineno}: non-integer node id") from exc
    arr = np.array(sorted(seen), dtype=np.int64)
    if len(arr) and len(np.unique(arr)) != len(arr):
        raise FormatError("duplicate node id in label file")
    return LabelSet(arr, num_nodes=num_nodes)


def write_partition_map(path, pmap: PartitionMap):
    with open(path, "wb") as f:
        f.write(PARTITION_MAGIC)
        f.write(_U32.pack(1))
        f.write(_U64.pack(pmap.num_nodes))
        f.write(_U32.pack(pmap.num_machines))
        f.write(pmap.assignment.astype("<u4").tobytes())


def read_partition_map(path, expected_num_nodes: int | None = None) -> PartitionMap:
    with open(path, "rb") as f:
        _expect_magic(f, PARTITION_MAGIC)
        _expect_version(f)
        (num_nodes,) = _U64.unpack(_read_exact(f, 8, "node count"))
        (machines,) = _U32.unpack(_read_exact(f, 4, "machine count"))
        raw = _read_exact(f, num_nodes * 4, "assignment payload")
        _expect_eof(f)
    assignment = np.frombuffer(raw, dtype="<u4").astype(np.int64)
    if expected_num_nodes is not None and num_nodes != expected_num_nodes:
        raise SizeMismatchError(f"map covers {num_nodes} nodes, graph has {expected_num_nodes}")
    if len(assignment) and assignment.max() >= machines:
        raise FormatError("machine id exceeds declared machine count")
    return PartitionMap(assignment, machines)


def write_partition_map_text(path, pmap: PartitionMap):
    with open(path, "w", encoding="ascii") as f:
        for v, m in enumerate(pmap.assignment):
            f.write(f"{v} {m}\n")


def read_partition_map_text(
    path,
    num_machines: int | None = None,
    expected_num_nodes: int | None = None,
) -> PartitionMap:
    pairs: dict[int, int] = {}
    with open(path, "r", encoding="ascii") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError(f"line {lineno}: expected 'node machine'")
            try:
                v, m = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise FormatError(f"line {lineno}: non-integer field") from exc
            if v in pairs:
                raise FormatError(f"line {lineno}: duplicate node {v}")
            pairs[v] = m
    n = len(pairs)
    if sorted(pairs) != list(range(n)):
        raise FormatError("node ids must cover 0..n-1 exactly once")
    if expected_num_nodes is not None and n != expected_num_nodes:
        raise SizeMismatchError(f"map covers {n} nodes, graph has {expected_num_nodes}")
    assignment = np.array([pairs[v] for v in range(n)], dtype=np.int64)
    machines = num_machines if num_machines is not None else (int(assignment.max()) + 1 if n else 1)
    if n and assignment.max() >= machines:
        raise FormatError("machine id exceeds declared machine count")
    return PartitionMap(assignment, machines)


def write_block(path, block: MfgBlock):
    with open(path, "wb") as f:
        f.write(BLOCK_MAGIC)
        f.write(_U32.pack(1))
        _write_graph_body(f, block.csc, None)
        for ids in (block.dst_globals, block.src_globals):
            f.write(_U64.pack(len(ids)))
            f.write(ids.astype("<u8").tobytes())


def read_block(path) -> MfgBlock:
    with open(path, "rb") as f:
        _expect_magic(f, BLOCK_MAGIC)
        _expect_version(f)
        (width,) = struct.unpack("<B", _read_exact(f, 1, "index width"))
        (rows,) = _U64.unpack(_read_exact(f, 8, "row count"))
        (nnz,) = _U64.unpack(_read_exact(f, 8, "edge count"))
        indptr = _read_index_array(f, rows + 1, width, "row pointers")
        indices = _read_index_array(f, nnz, width, "local indices")
        sections = []
        for what in ("destination ids", "source ids"):
            (count,) = _U64.unpack(_read_exact(f, 8, what + " count"))
            raw = _read_exact(f, count * 8, what)
            sections.append(np.frombuffer(raw, dtype="<u8").astype(np.int64))
        _expect_eof(f)
    dst, src = sections
    csc = CscGraph(int(rows), indptr, indices, num_cols=len(src))
    return MfgBlock(dst_globals=dst, src_globals=src, csc=csc)
