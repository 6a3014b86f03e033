"""Edge-cut partitioning and per-machine stores.

A partition map assigns every node to a machine.  Each machine's graph
partition keeps the complete in-neighbor row of every owned node (sources
stay global ids), and its feature shard keeps exactly the owned feature
rows.  The storage report quantifies why replicating the topology while
sharding only the features is cheap: for feature-heavy graphs the adjacency
is a small fraction of the total bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, MalformedInputError, ParameterError
from .graphs import (
    CooGraph,
    CscGraph,
    FeatureMatrix,
    LabelSet,
    build_csc,
    csc_to_coo,
    ragged_arange,
)

__all__ = [
    "PartitionMap",
    "GraphPartition",
    "FeatureShard",
    "StorageReport",
    "partition_hash",
    "partition_greedy",
    "edge_cut",
    "build_graph_partition",
    "build_feature_shard",
    "storage_report",
]


@dataclass(frozen=True, eq=False)
class PartitionMap:
    """Node -> machine assignment for P machines."""

    assignment: np.ndarray
    num_machines: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.assignment, dtype=np.int64)
        if arr.ndim != 1:
            raise MalformedInputError("assignment must be one-dimensional")
        if self.num_machines < 1:
            raise MalformedInputError("need at least one machine")
        if len(arr) and (arr.min() < 0 or arr.max() >= self.num_machines):
            raise MalformedInputError("machine id out of range")
        arr.flags.writeable = False
        object.__setattr__(self, "assignment", arr)

    @property
    def num_nodes(self) -> int:
        return len(self.assignment)

    def owned_nodes(self, machine: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == machine)

    def node_counts(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.num_machines)


def partition_hash(num_nodes: int, num_machines: int) -> PartitionMap:
    """Baseline striped assignment: node v goes to machine v mod P."""
    if num_machines < 1:
        raise ParameterError("need at least one machine")
    return PartitionMap(np.arange(num_nodes, dtype=np.int64) % num_machines, num_machines)


def partition_greedy(
    g: CscGraph,
    num_machines: int,
    labels: LabelSet,
    capacity_slack: float = 0.05,
) -> PartitionMap:
    """Streaming greedy partitioner with hard node and labeled-node caps.

    Nodes stream in ascending id order.  Every node goes to the feasible
    machine holding most of its already-assigned neighbors (in either edge
    direction); ties break toward the lightest machine, then the lowest id.
    Feasible means staying within (1+slack) * ceil(n/P) nodes and
    (1+slack) * ceil(|labels|/P) labeled nodes.
    """
    if num_machines < 1:
        raise ParameterError("need at least one machine")
    if capacity_slack < 0:
        raise ParameterError("capacity_slack must be >= 0 (infeasible)")
    n = g.num_nodes
    node_cap = int((1.0 + capacity_slack) * -(-n // num_machines))
    label_cap = int((1.0 + capacity_slack) * -(-len(labels) // num_machines)) if len(labels) else 0

    reverse = build_csc(_transpose_coo(g))
    labeled = np.zeros(n, dtype=bool)
    labeled[labels.nodes] = True

    assignment = np.full(n, -1, dtype=np.int64)
    node_room = np.full(num_machines, node_cap, dtype=np.int64)
    label_room = np.full(num_machines, label_cap, dtype=np.int64)
    # Reservation bookkeeping: a machine can still absorb
    # min(node_room, label_room) labeled nodes, and the sum of those slots
    # must never drop below the labeled nodes left to place, or an unlabeled
    # streak could strand label capacity behind exhausted node capacity.
    labels_left = int(labeled.sum())
    slots = np.minimum(node_room, label_room)
    for v in range(n):
        neigh = np.concatenate(
            [
                g.indices[g.indptr[v] : g.indptr[v + 1]],
                reverse.indices[reverse.indptr[v] : reverse.indptr[v + 1]],
            ]
        )
        owners = assignment[neigh]
        scores = np.bincount(owners[owners >= 0], minlength=num_machines)
        if labeled[v]:
            feasible = (node_room >= 1) & (label_room >= 1)
        else:
            shrink = (node_room <= label_room).astype(np.int64)
            feasible = (node_room >= 1) & (slots.sum() - shrink >= labels_left)
        if not feasible.any():
            raise ParameterError("capacity_slack leaves no feasible machine")
        # Rank by (score desc, load asc, machine id asc) among feasible.
        best = -1
        for m in range(num_machines):
            if not feasible[m]:
                continue
            if best < 0 or (scores[m], node_room[m]) > (scores[best], node_room[best]):
                best = m
        assignment[v] = best
        node_room[best] -= 1
        if labeled[v]:
            label_room[best] -= 1
            labels_left -= 1
        slots[best] = min(node_room[best], label_room[best])
    return PartitionMap(assignment, num_machines)


def _transpose_coo(g: CscGraph) -> CooGraph:
    coo = csc_to_coo(g)
    return CooGraph(g.num_nodes, coo.src, coo.dst)


def _sorted_lookup(owned: np.ndarray, nodes, err, what: str) -> np.ndarray:
    """Positions of ``nodes`` in the sorted ``owned`` vector; err on misses."""
    nodes = np.asarray(nodes, dtype=np.int64)
    if len(nodes) == 0:
        return np.empty(0, dtype=np.int64)
    if len(owned) == 0:
        raise err(f"node not owned by this {what}")
    idx = np.searchsorted(owned, nodes)
    bad = (idx >= len(owned)) | (owned[np.minimum(idx, len(owned) - 1)] != nodes)
    if bad.any():
        raise err(f"node not owned by this {what}")
    return idx


def edge_cut(g: CscGraph, pmap: PartitionMap) -> int:
    """Number of edges whose endpoints live on different machines."""
    if pmap.num_nodes != g.num_nodes:
        raise MalformedInputError("partition map size does not match graph")
    dst_machine = np.repeat(pmap.assignment, np.diff(g.indptr))
    src_machine = pmap.assignment[g.indices]
    return int(np.count_nonzero(dst_machine != src_machine))


@dataclass(frozen=True, eq=False)
class GraphPartition:
    """The rows of one machine: complete in-neighbor lists of its owned
    nodes, sources kept as global ids."""

    machine_id: int
    owned_nodes: np.ndarray
    local_csc: CscGraph

    def __post_init__(self):
        owned = np.ascontiguousarray(self.owned_nodes, dtype=np.int64)
        owned.flags.writeable = False
        object.__setattr__(self, "owned_nodes", owned)
        if self.local_csc.num_rows != len(owned):
            raise MalformedInputError("partition rows must match owned node count")

    @property
    def num_owned(self) -> int:
        return len(self.owned_nodes)

    def rows_of(self, nodes: np.ndarray) -> np.ndarray:
        """Local row indices of globally-identified owned nodes."""
        return _sorted_lookup(self.owned_nodes, nodes, ContractViolationError, "partition")


def build_graph_partition(g: CscGraph, pmap: PartitionMap, machine: int) -> GraphPartition:
    """Slice out one machine's rows, preserving the parent row order."""
    if pmap.num_nodes != g.num_nodes:
        raise MalformedInputError("partition map size does not match graph")
    owned = pmap.owned_nodes(machine)
    starts = g.indptr[owned]
    counts = g.indptr[owned + 1] - starts
    indptr = np.zeros(len(owned) + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    gather = np.repeat(starts, counts) + ragged_arange(counts)
    local = CscGraph(len(owned), indptr, g.indices[gather], num_cols=g.num_nodes)
    return GraphPartition(machine, owned, local)


@dataclass(frozen=True, eq=False)
class FeatureShard:
    """One machine's slice of the node-feature matrix, rows in owned order."""

    machine_id: int
    owned_nodes: np.ndarray
    rows: np.ndarray

    def __post_init__(self):
        owned = np.ascontiguousarray(self.owned_nodes, dtype=np.int64)
        rows = np.ascontiguousarray(self.rows, dtype=np.float32)
        if rows.ndim != 2 or rows.shape[0] != len(owned):
            raise MalformedInputError("shard rows must align with owned nodes")
        owned.flags.writeable = False
        rows.flags.writeable = False
        object.__setattr__(self, "owned_nodes", owned)
        object.__setattr__(self, "rows", rows)

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def local_indices(self, nodes: np.ndarray) -> np.ndarray:
        return _sorted_lookup(self.owned_nodes, nodes, KeyError, "shard")

    def lookup(self, nodes: np.ndarray) -> np.ndarray:
        """Feature rows of owned nodes; KeyError on any unowned id."""
        return self.rows[self.local_indices(np.asarray(nodes, dtype=np.int64))]


def build_feature_shard(features: FeatureMatrix, pmap: PartitionMap, machine: int) -> FeatureShard:
    if pmap.num_nodes != features.num_nodes:
        raise MalformedInputError("partition map size does not match feature matrix")
    owned = pmap.owned_nodes(machine)
    return FeatureShard(machine, owned, features.data[owned])


@dataclass(frozen=True)
class StorageReport:
    """Byte budget split between adjacency structure and feature payload."""

    topology_bytes: int
    feature_bytes: int
    topology_fraction: float


def storage_report(
    num_nodes: int,
    nnz: int,
    feat_dim: int,
    feat_bytes_per_elem: int = 4,
    index_width: int = 4,
) -> StorageReport:
    """Exact integer byte counts for one graph configuration.

    Topology is one row-pointer vector (num_nodes+1 entries) plus one source
    vector (nnz entries) at the given index width; features are dense
    num_nodes x feat_dim at the given element width.
    """
    if num_nodes < 1 or nnz < 0 or feat_dim < 0:
        raise ParameterError("sizes must be positive")
    if index_width not in (4, 8):
        raise ParameterError("index_width must be 4 or 8")
    topology = (num_nodes + 1 + nnz) * index_width
    features = num_nodes * feat_dim * feat_bytes_per_elem
    fraction = topology / (topology + features)
    return StorageReport(topology, features, fraction)
