"""Immutable sparse-adjacency containers, conversions, and synthetic generators.

Adjacency is destination-indexed throughout: compressed row ``v`` of a
:class:`CscGraph` lists the *in*-neighbors of node ``v``, which is the access
pattern the sampling kernels need (all incoming edges of a destination in one
contiguous slice).  The coordinate form stores the same edges as parallel
``dst``/``src`` vectors.

Canonical ordering: ``build_csc`` stores each row's sources ascending and the
matching coordinate order is (dst, src) lexicographic.  Conversions between
the canonical forms are bijective, so round-trip tests can demand bit
equality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MalformedInputError, ContractViolationError, ParameterError

__all__ = [
    "CooGraph",
    "CscGraph",
    "FeatureMatrix",
    "LabelSet",
    "build_csc",
    "csc_to_coo",
    "in_neighbors",
    "generate_erdos_renyi",
    "generate_rmat",
    "generate_features",
    "generate_labels",
]


def _index_vector(a, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.int64)
    if arr.ndim != 1:
        raise MalformedInputError(f"{name} must be one-dimensional")
    return arr


def ragged_arange(counts: np.ndarray) -> np.ndarray:
    """[0..counts[0]), [0..counts[1]), ... concatenated into one vector.

    The basic building block for gathering or scattering variable-length
    row slices in one vectorized shot.
    """
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    out = np.arange(total, dtype=np.int64)
    offsets = np.cumsum(counts, dtype=np.int64) - counts
    return out - np.repeat(offsets, counts)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class CooGraph:
    """Edge list in coordinate form: edge i runs src[i] -> dst[i]."""

    num_nodes: int
    dst: np.ndarray
    src: np.ndarray

    def __post_init__(self):
        dst = _index_vector(self.dst, "dst")
        src = _index_vector(self.src, "src")
        if len(dst) != len(src):
            raise MalformedInputError("dst and src must have equal length")
        if self.num_nodes < 0:
            raise MalformedInputError("num_nodes must be nonnegative")
        for name, arr in (("dst", dst), ("src", src)):
            if len(arr) and (arr.min() < 0 or arr.max() >= self.num_nodes):
                raise MalformedInputError(f"{name} entry out of range [0, {self.num_nodes})")
        object.__setattr__(self, "dst", _freeze(dst))
        object.__setattr__(self, "src", _freeze(src))

    @property
    def nnz(self) -> int:
        return len(self.dst)


@dataclass(frozen=True, eq=False)
class CscGraph:
    """Compressed destination-indexed adjacency.

    ``indptr`` has length ``num_nodes + 1``; ``indices[indptr[v]:indptr[v+1]]``
    are the in-neighbors (edge sources) of destination ``v``.  For bipartite
    blocks and partition slices the column universe may differ from the row
    count, in which case ``num_cols`` bounds the stored indices.
    """

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    num_cols: int | None = None

    def __post_init__(self):
        indptr = _index_vector(self.indptr, "indptr")
        indices = _index_vector(self.indices, "indices")
        ncols = self.num_cols if self.num_cols is not None else self.num_nodes
        object.__setattr__(self, "num_cols", ncols)
        if self.num_nodes < 0 or ncols < 0:
            raise MalformedInputError("negative node count")
        if len(indptr) != self.num_nodes + 1:
            raise MalformedInputError("indptr length must be num_nodes + 1")
        if len(indptr) == 0 or indptr[0] != 0:
            raise MalformedInputError("indptr must start at 0")
        if np.any(np.diff(indptr) < 0):
            raise MalformedInputError("indptr must be nondecreasing")
        if indptr[-1] != len(indices):
            raise MalformedInputError("indptr[-1] must equal len(indices)")
        if len(indices) and (indices.min() < 0 or indices.max() >= ncols):
            raise MalformedInputError(f"indices entry out of range [0, {ncols})")
        object.__setattr__(self, "indptr", _freeze(indptr))
        object.__setattr__(self, "indices", _freeze(indices))

    @property
    def nnz(self) -> int:
        return len(self.indices)

    @property
    def num_rows(self) -> int:
        return self.num_nodes

    def in_degree(self, v: int) -> int:
        self._check_node(v)
        return int(self.indptr[v + 1] - self.indptr[v])

    def in_degrees(self, nodes: np.ndarray) -> np.ndarray:
        return self.indptr[nodes + 1] - self.indptr[nodes]

    def _check_node(self, v: int):
        if not 0 <= v < self.num_nodes:
            raise ContractViolationError(f"node {v} out of range [0, {self.num_nodes})")


def in_neighbors(g: CscGraph, v: int) -> np.ndarray:
    """Read-only view of the in-neighbor slice of destination ``v``."""
    g._check_node(v)
    return g.indices[g.indptr[v] : g.indptr[v + 1]]


def build_csc(edges: CooGraph, dedup: bool = False) -> CscGraph:
    """Compress a coordinate edge list into canonical CSC form.

    Each row's sources come out ascending; with ``dedup`` repeated
    (dst, src) pairs collapse to one edge, otherwise multi-edges survive.
    """
    order = np.lexsort((edges.src, edges.dst))
    dst = edges.dst[order]
    src = edges.src[order]
    if dedup and len(dst):
        keep = np.empty(len(dst), dtype=bool)
        keep[0] = True
        keep[1:] = (dst[1:] != dst[:-1]) | (src[1:] != src[:-1])
        dst = dst[keep]
        src = src[keep]
    counts = np.bincount(dst, minlength=edges.num_nodes)
    indptr = np.zeros(edges.num_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return CscGraph(edges.num_nodes, indptr, src)


def csc_to_coo(g: CscGraph) -> CooGraph:
    """Expand CSC back to coordinates in destination-major storage order."""
    dst = np.repeat(np.arange(g.num_nodes, dtype=np.int64), np.diff(g.indptr))
    return CooGraph(g.num_nodes, dst, g.indices.copy())


def generate_erdos_renyi(n: int, num_edges: int, seed: int) -> CooGraph:
    """Exactly ``num_edges`` distinct directed (dst, src) pairs, uniform.

    Self-loops allowed; the admissible pair universe has size n*n.  Output
    edges come out in (dst, src) lexicographic order.
    """
    if n < 0 or num_edges < 0 or num_edges > n * n:
        raise ParameterError(f"cannot place {num_edges} distinct edges in a {n}-node graph")
    if num_edges == 0:
        empty = np.empty(0, dtype=np.int64)
        return CooGraph(n, empty, empty)
    rng = np.random.default_rng(seed)
    universe = n * n
    if num_edges * 2 >= universe:
        # Dense regime: explicit permutation of the pair universe.
        codes = rng.permutation(universe)[:num_edges]
    else:
        # Sparse regime: rejection sampling, keeping first occurrences in
        # draw order (equivalent to sampling without replacement).
        distinct = np.empty(0, dtype=np.int64)
        while len(distinct) < num_edges:
            batch = rng.integers(0, universe, size=max(64, num_edges * 2))
            pool = np.concatenate([distinct, batch])
            uniq, first = np.unique(pool, return_index=True)
            distinct = uniq[np.argsort(first, kind="stable")]
        codes = distinct[:num_edges]
    codes = np.sort(codes)
    return CooGraph(n, codes // n, codes % n)


def generate_rmat(
    scale: int,
    edge_factor: int,
    probs: tuple[float, float, float, float] = (0.57, 0.19, 0.19, 0.05),
    seed: int = 0,
) -> CooGraph:
    """Recursive-quadrant power-law generator: 2**scale nodes,
    edge_factor * 2**scale edges, duplicates permitted."""
    a, b, c, d = probs
    if abs(a + b + c + d - 1.0) > 1e-9:
        raise ParameterError("quadrant probabilities must sum to 1")
    if min(a, b, c, d) < 0:
        raise ParameterError("quadrant probabilities must be nonnegative")
    if not 0 <= scale <= 30:
        raise ParameterError("scale must be in [0, 30]")
    if edge_factor < 0:
        raise ParameterError("edge_factor must be nonnegative")
    n = 1 << scale
    m = edge_factor * n
    rng = np.random.default_rng(seed)
    dst = np.zeros(m, dtype=np.int64)
    src = np.zeros(m, dtype=np.int64)
    for bit in range(scale - 1, -1, -1):
        u = rng.random(m)
        # Quadrants in (dst-bit, src-bit) order: a=(0,0) b=(0,1) c=(1,0) d=(1,1).
        dst_hi = u >= a + b
        src_hi = np.where(dst_hi, u >= a + b + c, u >= a)
        dst |= dst_hi.astype(np.int64) << bit
        src |= src_hi.astype(np.int64) << bit
    return CooGraph(n, dst, src)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Row-major float32 node features; row v is the feature vector of v."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise MalformedInputError("feature data must be 2-D (num_nodes, dim)")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def num_nodes(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def rows(self, nodes: np.ndarray) -> np.ndarray:
        return self.data[nodes]


@dataclass(frozen=True, eq=False)
class LabelSet:
    """The labeled-node subset, stored strictly increasing."""

    nodes: np.ndarray
    num_nodes: int | None = None

    def __post_init__(self):
        arr = _index_vector(self.nodes, "nodes")
        if len(arr):
            if np.any(np.diff(arr) <= 0):
                raise MalformedInputError("label set must be strictly increasing")
            if arr[0] < 0:
                raise MalformedInputError("negative node id in label set")
            if self.num_nodes is not None and arr[-1] >= self.num_nodes:
                raise MalformedInputError("label id out of range for graph")
        object.__setattr__(self, "nodes", _freeze(arr))

    def __len__(self) -> int:
        return len(self.nodes)


def generate_features(num_nodes: int, dim: int, seed: int) -> FeatureMatrix:
    """Standard-normal float32 features, deterministic per seed."""
    if num_nodes < 0 or dim < 0:
        raise ParameterError("num_nodes and dim must be nonnegative")
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((num_nodes, dim), dtype=np.float32)
    return FeatureMatrix(data)


def generate_labels(num_nodes: int, count: int, seed: int) -> LabelSet:
    """A uniform ``count``-subset of the nodes, deterministic per seed."""
    if not 0 <= count <= num_nodes:
        raise ParameterError(f"cannot label {count} of {num_nodes} nodes")
    rng = np.random.default_rng(seed)
    picked = rng.choice(num_nodes, size=count, replace=False)
    return LabelSet(np.sort(picked), num_nodes=num_nodes)
