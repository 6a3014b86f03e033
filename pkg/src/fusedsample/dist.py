"""Multi-worker minibatch runtime over synchronous collectives.

Two partitioning modes drive two sampling protocols:

* ``full``: topology and features are both sharded.  The top level samples
  locally (seed rows are owned); every lower level spends one all-to-all on
  sampling requests and one on responses, so L levels cost 2(L-1) rounds
  before features.
* ``hybrid``: the topology is replicated on every rank and only features
  are sharded, so sampling costs zero communication.

Feature gathering always costs exactly two rounds (request ids, response
rows).  Every communication round is a collective all of whose ranks
participate, which makes per-minibatch round counts exact, countable, and
identical on every rank.  Remote sampling uses the same per-destination
stream keys as local sampling, so mode, rank count, and placement cannot
change a single sampled edge.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, ParameterError, ProtocolError, TransportError
from .graphs import CscGraph, FeatureMatrix, LabelSet, ragged_arange
from .partition import (
    FeatureShard,
    GraphPartition,
    PartitionMap,
    build_feature_shard,
    build_graph_partition,
)
from .rng import SamplerRng
from .sampling import (
    FanoutPlan,
    MiniBatchSample,
    _choose_rows,
    _sample_levels,
    assemble_fused,
    assemble_two_step,
    seed_batches,
)
from .transport import InprocRendezvous

__all__ = [
    "RoundCounters",
    "WorkerCtx",
    "EpochMetrics",
    "make_worker_ctx",
    "all_to_all",
    "dist_sample_full",
    "dist_sample_hybrid",
    "gather_features",
    "run_epoch",
    "run_cluster",
]

MODES = ("full", "hybrid")


@dataclass
class RoundCounters:
    """Per-minibatch communication and phase-time instrumentation."""

    comm_rounds: int = 0
    bytes_sent: int = 0
    bytes_received: int = 0
    bytes_framing: int = 0
    phase_times: dict = field(default_factory=dict)

    def reset(self):
        self.comm_rounds = 0
        self.bytes_sent = 0
        self.bytes_received = 0
        self.bytes_framing = 0
        self.phase_times = {}


@dataclass
class WorkerCtx:
    """Everything one rank needs to run the minibatch pipeline."""

    rank: int
    world_size: int
    mode: str
    transport: object
    pmap: PartitionMap
    topology: object  # GraphPartition in full mode, CscGraph in hybrid mode
    features: FeatureShard
    labels_local: np.ndarray
    label_counts: np.ndarray
    rng: SamplerRng
    counters: RoundCounters = field(default_factory=RoundCounters)
    kernel: str = "fused"
    include_dst: bool = True
    _round_tag: int = 0


def make_worker_ctx(
    rank: int,
    transport,
    mode: str,
    graph: CscGraph,
    features: FeatureMatrix,
    pmap: PartitionMap,
    labels: LabelSet,
    rng: SamplerRng,
    kernel: str = "fused",
    include_dst: bool = True,
) -> WorkerCtx:
    """Build one rank's context from the shared global objects.

    Hybrid mode keeps the whole topology; full mode keeps only owned rows.
    Feature rows and labeled nodes are owned per the partition map either
    way.
    """
    if mode not in MODES:
        raise ParameterError(f"unknown mode {mode!r}")
    if pmap.num_machines != transport.world_size:
        raise ParameterError("partition map machine count != transport world size")
    topology = graph if mode == "hybrid" else build_graph_partition(graph, pmap, rank)
    shard = build_feature_shard(features, pmap, rank)
    owner_of_labels = pmap.assignment[labels.nodes]
    labels_local = labels.nodes[owner_of_labels == rank]
    label_counts = np.bincount(owner_of_labels, minlength=pmap.num_machines)
    return WorkerCtx(
        rank=rank,
        world_size=transport.world_size,
        mode=mode,
        transport=transport,
        pmap=pmap,
        topology=topology,
        features=shard,
        labels_local=labels_local,
        label_counts=label_counts,
        rng=rng,
        kernel=kernel,
        include_dst=include_dst,
    )


def all_to_all(ctx: WorkerCtx, payloads: list[bytes]) -> list[bytes]:
    """One counted communication round; self-addressed bytes skip the wire."""
    ctx._round_tag += 1
    out = ctx.transport.all_to_all(payloads, round_tag=ctx._round_tag)
    ctx.counters.comm_rounds += 1
    ctx.counters.bytes_sent += sum(len(p) for j, p in enumerate(payloads) if j != ctx.rank)
    ctx.counters.bytes_received += sum(len(p) for j, p in enumerate(out) if j != ctx.rank)
    ctx.counters.bytes_framing += 2 * (ctx.world_size - 1) * ctx.transport.frame_overhead
    return out


def _ids_to_bytes(ids: np.ndarray) -> bytes:
    return ids.astype("<u8").tobytes()


def _ids_from_bytes(buf: bytes) -> np.ndarray:
    return np.frombuffer(buf, dtype="<u8").astype(np.int64)


def _assemble(ctx: WorkerCtx, seeds, counts, flat):
    if ctx.kernel in ("two-step", "two_step"):
        return assemble_two_step(seeds, counts, flat, ctx.include_dst)
    return assemble_fused(seeds, counts, flat, ctx.include_dst, ctx.pmap.num_nodes)


def _owned_choose(ctx: WorkerCtx, nodes: np.ndarray, k: int, level: int):
    """Sample owned destinations from the local partition rows."""
    part: GraphPartition = ctx.topology
    rows = part.rows_of(nodes)
    return _choose_rows(part.local_csc, rows, k, ctx.rng, level, key_nodes=nodes)


def _frontier_exchange(ctx: WorkerCtx, frontier: np.ndarray, k: int, level: int):
    """Sample a mixed-ownership frontier with one request and one response
    round; returns (counts, flat_sources) in frontier order."""
    owner = ctx.pmap.assignment[frontier] if len(frontier) else np.empty(0, dtype=np.int64)
    requests = []
    positions = []
    for m in range(ctx.world_size):
        pos = np.flatnonzero(owner == m)
        positions.append(pos)
        if m == ctx.rank:
            requests.append(b"")
            continue
        pairs = np.empty(2 * len(pos), dtype=np.int64)
        pairs[0::2] = frontier[pos]
        pairs[1::2] = k
        requests.append(_ids_to_bytes(pairs))
    incoming = all_to_all(ctx, requests)

    replies = []
    for m in range(ctx.world_size):
        if m == ctx.rank:
            replies.append(b"")
            continue
        pairs = _ids_from_bytes(incoming[m])
        if len(pairs) % 2:
            raise ProtocolError(f"odd sampling request payload from rank {m}")
        req_nodes = pairs[0::2]
        req_fanouts = pairs[1::2]
        if len(req_nodes) and np.any(ctx.pmap.assignment[req_nodes] != ctx.rank):
            raise ProtocolError(f"rank {m} requested nodes this rank does not own")
        if len(np.unique(req_fanouts)) > 1:
            raise ProtocolError("mixed fanouts within one sampling request")
        fanout = int(req_fanouts[0]) if len(req_fanouts) else k
        r_counts, r_flat = _owned_choose(ctx, req_nodes, fanout, level)
        payload = np.concatenate([[len(req_nodes)], r_counts, r_flat]).astype(np.int64)
        replies.append(_ids_to_bytes(payload))
    responses = all_to_all(ctx, replies)

    counts = np.zeros(len(frontier), dtype=np.int64)
    flats: list[np.ndarray | None] = [None] * ctx.world_size
    for m in range(ctx.world_size):
        pos = positions[m]
        if m == ctx.rank:
            c, f = _owned_choose(ctx, frontier[pos], k, level)
        else:
            payload = _ids_from_bytes(responses[m])
            if len(payload) < 1 or payload[0] != len(pos):
                raise ProtocolError(f"rank {m} answered the wrong number of nodes")
            c = payload[1 : 1 + len(pos)]
            f = payload[1 + len(pos) :]
            if len(f) != int(c.sum()):
                raise ProtocolError(f"rank {m} response length mismatch")
        counts[pos] = c
        flats[m] = f
    flat = np.empty(int(counts.sum()), dtype=np.int64)
    offsets = np.cumsum(counts, dtype=np.int64) - counts
    for m in range(ctx.world_size):
        pos = positions[m]
        c = counts[pos]
        if len(pos):
            dst_idx = np.repeat(offsets[pos], c) + ragged_arange(c)
            flat[dst_idx] = flats[m]
    return counts, flat


def dist_sample_full(ctx: WorkerCtx, batch, plan: FanoutPlan) -> MiniBatchSample:
    """Sharded-topology sampling: local top level, then per-level
    request/response rounds.  Executes its full collective schedule even for
    empty batches so rank schedules never diverge."""
    if ctx.mode != "full":
        raise ContractViolationError("context is not in full mode")
    seeds = np.ascontiguousarray(batch, dtype=np.int64)
    if len(seeds) and np.any(ctx.pmap.assignment[seeds] != ctx.rank):
        raise ContractViolationError("full-mode batch must be owned by this rank")
    L = plan.num_levels
    blocks = []
    for li, k in enumerate(plan.fanouts):
        level = L - li
        if li == 0:
            counts, flat = _owned_choose(ctx, seeds, k, level)
        else:
            counts, flat = _frontier_exchange(ctx, seeds, k, level)
        block, seeds = _assemble(ctx, seeds, counts, flat)
        blocks.append(block)
    return MiniBatchSample(tuple(blocks), seeds, ctx.include_dst)


def dist_sample_hybrid(ctx: WorkerCtx, batch, plan: FanoutPlan) -> MiniBatchSample:
    """Replicated-topology sampling: a purely local minibatch, zero rounds."""
    if ctx.mode != "hybrid":
        raise ContractViolationError("context is not in hybrid mode")
    seeds = np.ascontiguousarray(batch, dtype=np.int64)
    return _sample_levels(ctx.topology, seeds, plan, ctx.rng, ctx.kernel, ctx.include_dst)


def dist_sample(ctx: WorkerCtx, batch, plan: FanoutPlan) -> MiniBatchSample:
    if ctx.mode == "hybrid":
        return dist_sample_hybrid(ctx, batch, plan)
    return dist_sample_full(ctx, batch, plan)


def gather_features(ctx: WorkerCtx, input_nodes) -> np.ndarray:
    """Fetch feature rows for ``input_nodes`` in exactly two rounds.

    Locally owned rows never touch the wire but the two collectives always
    execute.  The result aligns row i with input_nodes[i].
    """
    nodes = np.ascontiguousarray(input_nodes, dtype=np.int64)
    if len(np.unique(nodes)) != len(nodes):
        raise ContractViolationError("input nodes must be unique")
    owner = ctx.pmap.assignment[nodes] if len(nodes) else np.empty(0, dtype=np.int64)
    positions = []
    requests = []
    for m in range(ctx.world_size):
        pos = np.flatnonzero(owner == m)
        positions.append(pos)
        requests.append(b"" if m == ctx.rank else _ids_to_bytes(nodes[pos]))
    incoming = all_to_all(ctx, requests)

    dim = ctx.features.dim
    replies = []
    for m in range(ctx.world_size):
        if m == ctx.rank:
            replies.append(b"")
            continue
        req = _ids_from_bytes(incoming[m])
        try:
            rows = ctx.features.lookup(req)
        except KeyError as exc:
            raise ProtocolError(f"rank {m} requested unowned feature rows") from exc
        replies.append(rows.astype("<f4").tobytes())
    responses = all_to_all(ctx, replies)

    out = np.empty((len(nodes), dim), dtype=np.float32)
    for m in range(ctx.world_size):
        pos = positions[m]
        if m == ctx.rank:
            if len(pos):
                out[pos] = ctx.features.lookup(nodes[pos])
            continue
        raw = responses[m]
        if len(raw) != len(pos) * dim * 4:
            raise ProtocolError(f"rank {m} returned a malformed feature payload")
        if len(pos):
            out[pos] = np.frombuffer(raw, dtype="<f4").reshape(len(pos), dim)
    return out


@dataclass
class EpochMetrics:
    """Per-rank epoch summary: phase times, rounds, and byte totals."""

    rank: int
    mode: str
    num_batches: int = 0
    rounds_per_minibatch: list[int] = field(default_factory=list)
    bytes_sent: int = 0
    bytes_received: int = 0
    bytes_framing: int = 0
    time_sample: float = 0.0
    time_gather: float = 0.0
    time_compute: float = 0.0
    epoch_time: float = 0.0

    @property
    def comm_rounds_total(self) -> int:
        return sum(self.rounds_per_minibatch)

    def as_dict(self) -> dict:
        return {
            "rank": self.rank,
            "mode": self.mode,
            "num_batches": self.num_batches,
            "rounds_per_minibatch": self.rounds_per_minibatch,
            "comm_rounds_total": self.comm_rounds_total,
            "bytes_sent": self.bytes_sent,
            "bytes_received": self.bytes_received,
            "bytes_framing": self.bytes_framing,
            "time_sample": self.time_sample,
            "time_gather": self.time_gather,
            "time_compute": self.time_compute,
            "epoch_time": self.epoch_time,
        }


def run_epoch(ctx: WorkerCtx, plan: FanoutPlan, batch_size: int, epoch: int = 0) -> EpochMetrics:
    """One full epoch: sample, gather, and propagate every local minibatch.

    Ranks with fewer local batches keep joining the collectives with empty
    seed sets until the globally largest rank is done, so the schedule of
    collective calls is identical everywhere.
    """
    from .verify import mean_propagate

    if batch_size < 1:
        raise ParameterError("batch_size must be >= 1")
    local = (
        seed_batches(ctx.labels_local, batch_size, ctx.rng, epoch)
        if len(ctx.labels_local)
        else []
    )
    max_batches = max(math.ceil(int(c) / batch_size) for c in ctx.label_counts)
    metrics = EpochMetrics(rank=ctx.rank, mode=ctx.mode)
    empty = np.empty(0, dtype=np.int64)
    epoch_start = time.perf_counter()
    for b in range(max_batches):
        ctx.counters.reset()
        batch = local[b] if b < len(local) else empty
        t0 = time.perf_counter()
        sample = dist_sample(ctx, batch, plan)
        t1 = time.perf_counter()
        rows = gather_features(ctx, sample.input_nodes)
        t2 = time.perf_counter()
        mean_propagate(sample, rows)
        t3 = time.perf_counter()
        ctx.counters.phase_times = {
            "sample": t1 - t0,
            "gather": t2 - t1,
            "compute": t3 - t2,
        }
        metrics.num_batches += 1
        metrics.rounds_per_minibatch.append(ctx.counters.comm_rounds)
        metrics.bytes_sent += ctx.counters.bytes_sent
        metrics.bytes_received += ctx.counters.bytes_received
        metrics.bytes_framing += ctx.counters.bytes_framing
        metrics.time_sample += t1 - t0
        metrics.time_gather += t2 - t1
        metrics.time_compute += t3 - t2
    metrics.epoch_time = time.perf_counter() - epoch_start
    return metrics


def run_cluster(world_size: int, worker_fn, timeout: float = 120.0) -> list:
    """Run ``worker_fn(rank, transport)`` on P threads over an in-process
    rendezvous and return the per-rank results.

    A worker exception aborts the rendezvous so peers blocked in a
    collective fail fast; the root-cause exception is re-raised (transport
    errors caused by the abort only surface if nothing better exists).
    """
    rendezvous = InprocRendezvous(world_size, timeout=timeout)
    endpoints = rendezvous.endpoints()
    results = [None] * world_size
    failures: list[BaseException] = []
    lock = threading.Lock()

    def runner(rank: int):
        try:
            results[rank] = worker_fn(rank, endpoints[rank])
        except BaseException as exc:  # noqa: BLE001 - reported to the caller
            with lock:
                failures.append(exc)
            rendezvous.abort()

    threads = [threading.Thread(target=runner, args=(r,), daemon=True) for r in range(world_size)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if failures:
        root = next((e for e in failures if not isinstance(e, TransportError)), failures[0])
        raise root
    return results
