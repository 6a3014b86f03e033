"""Per-level neighborhood sampling and minibatch construction.

Two kernels produce each bipartite sampling level:

* :func:`fused_sample_level` samples straight into compressed form: the row
  pointer vector is built during the sampling pass, and a single compaction
  pass assigns local source ids by first occurrence.  No intermediate
  coordinate-format buffers are materialized.
* :func:`two_step_sample_level` is the conventional baseline: step 1 emits a
  global-id coordinate edge list, step 2 re-derives per-destination counts,
  regroups the edges, compacts node ids, and converts to compressed form.

Both kernels draw from streams keyed by (global seed, level, destination),
so their outputs are bit-identical; each therefore serves as the other's
oracle.  A third, deliberately naive per-node reference implementation backs
the property tests.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, ParameterError
from .graphs import CscGraph, LabelSet, in_neighbors, ragged_arange
from .rng import _GOLDEN, _MASK, SamplerRng, Stream, bounded_array, mix64_array

__all__ = [
    "FanoutPlan",
    "MfgBlock",
    "MiniBatchSample",
    "choose",
    "sample_edges",
    "fused_sample_level",
    "two_step_sample_level",
    "reference_sample_level",
    "sample_minibatch",
    "seed_batches",
    "blocks_equal",
    "samples_equal",
    "SampleScratch",
    "coo_alloc_count",
    "reset_alloc_stats",
]

KERNELS = ("fused", "two-step")


@dataclass(frozen=True)
class FanoutPlan:
    """Per-level fanouts ordered top-down: (N_L, ..., N_1)."""

    fanouts: tuple[int, ...]

    def __post_init__(self):
        fanouts = tuple(int(f) for f in self.fanouts)
        if len(fanouts) < 1:
            raise ParameterError("fanout plan needs at least one level")
        if any(f < 1 for f in fanouts):
            raise ParameterError("every fanout must be >= 1")
        object.__setattr__(self, "fanouts", fanouts)

    @property
    def num_levels(self) -> int:
        return len(self.fanouts)

    @classmethod
    def parse(cls, text: str) -> "FanoutPlan":
        try:
            return cls(tuple(int(x) for x in text.split(",")))
        except ValueError as exc:
            raise ParameterError(f"bad fanout list {text!r}") from exc


@dataclass(frozen=True, eq=False)
class MfgBlock:
    """One bipartite sampling level over local indices.

    Row i of ``csc`` belongs to destination ``dst_globals[i]``; stored
    indices point into ``src_globals``.  ``src_globals`` is duplicate-free
    and ordered by first occurrence in the concatenated sample list (seeded
    with the destinations themselves when the level was sampled with
    include_dst).
    """

    dst_globals: np.ndarray
    src_globals: np.ndarray
    csc: CscGraph

    def __post_init__(self):
        dst = np.ascontiguousarray(self.dst_globals, dtype=np.int64)
        src = np.ascontiguousarray(self.src_globals, dtype=np.int64)
        dst.flags.writeable = False
        src.flags.writeable = False
        object.__setattr__(self, "dst_globals", dst)
        object.__setattr__(self, "src_globals", src)
        if self.csc.num_rows != len(dst):
            raise ContractViolationError("block row count != number of destinations")
        if self.csc.num_cols != len(src):
            raise ContractViolationError("block column universe != number of sources")

    @property
    def num_edges(self) -> int:
        return self.csc.nnz

    def edges_global(self) -> np.ndarray:
        """All edges as an (nnz, 2) array of (src_global, dst_global)."""
        dst = np.repeat(self.dst_globals, np.diff(self.csc.indptr))
        src = self.src_globals[self.csc.indices]
        return np.stack([src, dst], axis=1)


@dataclass(frozen=True, eq=False)
class MiniBatchSample:
    """The L-level sample of one seed batch, blocks ordered top level down.

    ``input_nodes`` are the deepest sources, i.e. the nodes whose input
    features the first GNN layer consumes.
    """

    blocks: tuple[MfgBlock, ...]
    input_nodes: np.ndarray
    include_dst: bool

    @property
    def num_levels(self) -> int:
        return len(self.blocks)

    @property
    def batch(self) -> np.ndarray:
        return self.blocks[0].dst_globals

    def total_edges(self) -> int:
        return sum(b.num_edges for b in self.blocks)


class _AllocStats:
    """Counts intermediate coordinate-format buffers materialized while
    sampling; the fused path must keep this at zero."""

    def __init__(self):
        self._lock = threading.Lock()
        self.coo_buffers = 0

    def count_coo(self, n: int):
        with self._lock:
            self.coo_buffers += n

    def reset(self):
        with self._lock:
            self.coo_buffers = 0


_ALLOC = _AllocStats()


def coo_alloc_count() -> int:
    return _ALLOC.coo_buffers


def reset_alloc_stats():
    _ALLOC.reset()


def choose(neighbors: np.ndarray, k: int, stream: Stream, policy: str = "uniform") -> np.ndarray:
    """Select at most ``k`` of ``neighbors``.

    Degree <= k returns the whole slice in storage order and consumes no
    draws.  Otherwise Floyd's subset-sampling walk picks k distinct
    positions uniformly without replacement, returned in selection order,
    using exactly k draws and no O(degree) scratch.  The "first_k" policy
    takes the first stored neighbors instead, for hand-traceable fixtures.
    """
    d = len(neighbors)
    take = min(k, d)
    if policy == "first_k":
        return np.array(neighbors[:take], dtype=np.int64)
    if d <= k:
        return np.array(neighbors, dtype=np.int64)
    chosen: list[int] = []
    for t in range(k):
        # Draw within the first d-k+t+1 positions; a collision takes the
        # prefix boundary itself, which no earlier step can have taken.
        j = stream.next_below(d - k + t + 1)
        if j in chosen:
            j = d - k + t
        chosen.append(j)
    return np.asarray(neighbors, dtype=np.int64)[chosen]


def sample_edges(g: CscGraph, v: int, k: int, rng: SamplerRng, level: int) -> np.ndarray:
    """Sample up to ``k`` incoming edges of ``v`` as an (m, 2) (src, dst) array."""
    picked = choose(in_neighbors(g, v), k, rng.stream(level, v), rng.choose)
    out = np.empty((len(picked), 2), dtype=np.int64)
    out[:, 0] = picked
    out[:, 1] = v
    return out


def _check_seeds(seeds) -> np.ndarray:
    seeds = np.ascontiguousarray(seeds, dtype=np.int64)
    if len(np.unique(seeds)) != len(seeds):
        raise ContractViolationError("seed nodes must be unique")
    return seeds


def _choose_rows(
    g: CscGraph,
    rows: np.ndarray,
    k: int,
    rng: SamplerRng,
    level: int,
    key_nodes: np.ndarray | None = None,
):
    """Batched neighbor choice for a set of destination rows.

    Returns (counts, flat_sources): counts[i] = min(k, in-degree(rows[i]))
    and flat_sources holds each row's chosen sources concatenated in row
    order.  Bit-identical to calling :func:`choose` per row with the
    per-destination stream keys.

    ``key_nodes`` carries the global destination ids used for stream keying
    when ``rows`` indexes a partition slice rather than the whole graph.
    """
    if key_nodes is None:
        key_nodes = rows
    if len(rows) and (rows.min() < 0 or rows.max() >= g.num_rows):
        raise ContractViolationError("destination row out of range")
    starts = g.indptr[rows]
    deg = g.indptr[rows + 1] - starts
    counts = np.minimum(deg, k)
    offsets = np.concatenate([[0], np.cumsum(counts, dtype=np.int64)])
    flat = np.empty(offsets[-1], dtype=np.int64)
    if len(rows) == 0:
        return counts, flat

    if rng.choose == "first_k":
        copy_rows = np.arange(len(rows), dtype=np.int64)
    else:
        copy_rows = np.flatnonzero(deg <= k)
    if len(copy_rows):
        ccounts = counts[copy_rows]
        ragged = ragged_arange(ccounts)
        dst_idx = np.repeat(offsets[copy_rows], ccounts) + ragged
        src_idx = np.repeat(starts[copy_rows], ccounts) + ragged
        flat[dst_idx] = g.indices[src_idx]

    if rng.choose != "first_k":
        big = np.flatnonzero(deg > k)
        if len(big):
            d = deg[big]
            keys = rng.stream_keys(level, key_nodes[big])
            chosen = np.empty((len(big), k), dtype=np.int64)
            for t in range(k):
                draw = mix64_array(keys + np.uint64((t + 1) * _GOLDEN & _MASK))
                j = bounded_array(draw, (d - k + t + 1).astype(np.uint64)).astype(np.int64)
                if t:
                    collide = (chosen[:, :t] == j[:, None]).any(axis=1)
                    j = np.where(collide, d - k + t, j)
                chosen[:, t] = j
            picked = g.indices[starts[big][:, None] + chosen]
            out_idx = offsets[big][:, None] + np.arange(k, dtype=np.int64)
            flat[out_idx.ravel()] = picked.ravel()
    return counts, flat


def _compact_first_scatter(values: np.ndarray, head: np.ndarray | None, num_nodes: int):
    """First-occurrence id compaction through a dense node -> position map.

    Writing positions in reverse order leaves each id's *first* position in
    the map (advanced assignment keeps the last write).  The map needs no
    clearing between calls because only just-written entries are ever read,
    so the O(|V|) refill the naive dense map would pay simply disappears.

    Optionally pre-seeds the map with ``head`` so those ids take local ids
    0..len(head)-1.  Returns (uniques_in_first_occurrence_order, codes)
    where codes covers ``values`` only.
    """
    pool = values if head is None else np.concatenate([head, values])
    skip = 0 if head is None else len(head)
    n = len(pool)
    if n == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    first_pos = np.empty(num_nodes, dtype=np.int64)
    first_pos[pool[::-1]] = np.arange(n - 1, -1, -1, dtype=np.int64)
    is_first = first_pos[pool] == np.arange(n, dtype=np.int64)
    uniques = pool[is_first]
    local_id = np.empty(num_nodes, dtype=np.int64)
    local_id[uniques] = np.arange(len(uniques), dtype=np.int64)
    return uniques, local_id[pool[skip:]]


def _compact_first_unique(values: np.ndarray, head: np.ndarray | None):
    """First-occurrence id compaction via sorted unique + index ranking,
    the conventional relabeling idiom.  Same contract as
    :func:`_compact_first_scatter`; deliberately a distinct implementation
    so the two kernels cross-check each other's compaction.
    """
    pool = values if head is None else np.concatenate([head, values])
    if len(pool) == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    uniq, first = np.unique(pool, return_index=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[order] = np.arange(len(uniq), dtype=np.int64)
    codes = rank[np.searchsorted(uniq, values)]
    return uniq[order], codes


def _build_block(seeds, indptr, codes, src_globals) -> MfgBlock:
    csc = CscGraph(len(seeds), indptr, codes, num_cols=len(src_globals))
    return MfgBlock(dst_globals=seeds, src_globals=src_globals, csc=csc)


def assemble_fused(seeds, counts, flat, include_dst: bool, num_nodes: int):
    """Fused assembly: row pointers from the sampling pass, one dense-map
    compaction pass, never a coordinate buffer."""
    indptr = np.zeros(len(seeds) + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    head = seeds if include_dst else None
    src_globals, codes = _compact_first_scatter(flat, head, num_nodes)
    block = _build_block(seeds, indptr, codes, src_globals)
    return block, src_globals


def fused_sample_level(
    g: CscGraph,
    seeds,
    k: int,
    rng: SamplerRng,
    level: int,
    include_dst: bool = True,
):
    """Sample one level directly into a compacted bipartite block.

    Returns (block, next_seeds); next_seeds is the block's source id list.
    """
    seeds = _check_seeds(seeds)
    counts, flat = _choose_rows(g, seeds, k, rng, level)
    return assemble_fused(seeds, counts, flat, include_dst, g.num_cols)


def assemble_two_step(seeds, counts, flat, include_dst: bool):
    """Baseline assembly: materialize the global-id COO, then compact and
    convert, re-deriving the per-row counts from the edge list."""
    coo_dst = np.repeat(seeds, counts)
    coo_src = flat.copy()
    _ALLOC.count_coo(2)
    return _two_step_convert(seeds, coo_dst, coo_src, include_dst)


def _two_step_convert(seeds, coo_dst, coo_src, include_dst: bool):
    seed_order = np.argsort(seeds, kind="stable")
    dst_local = seed_order[np.searchsorted(seeds[seed_order], coo_dst)]
    counts = np.bincount(dst_local, minlength=len(seeds)).astype(np.int64)
    indptr = np.zeros(len(seeds) + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    regroup = np.argsort(dst_local, kind="stable")
    src_grouped = coo_src[regroup]
    head = seeds if include_dst else None
    src_globals, codes = _compact_first_unique(src_grouped, head)
    block = _build_block(seeds, indptr, codes, src_globals)
    return block, src_globals


def two_step_sample_level(
    g: CscGraph,
    seeds,
    k: int,
    rng: SamplerRng,
    level: int,
    include_dst: bool = True,
):
    """Conventional two-step level sampler (step 1 COO, step 2 compact+convert).

    Consumes the same keyed draw streams as the fused kernel, so the output
    block is bit-identical; only the construction pipeline differs.
    """
    seeds = _check_seeds(seeds)
    counts, flat = _choose_rows(g, seeds, k, rng, level)
    return assemble_two_step(seeds, counts, flat, include_dst)


class SampleScratch:
    """Reusable compaction scratch for the per-node reference kernel.

    Holds a dense node -> local-id map whose entries are invalidated by a
    generation stamp, so clearing between minibatches is O(1) instead of a
    full refill of the map.
    """

    def __init__(self, num_nodes: int):
        self.local_id = np.full(num_nodes, -1, dtype=np.int64)
        self.stamp = np.zeros(num_nodes, dtype=np.int64)
        self.generation = 0

    def begin(self):
        self.generation += 1

    def get(self, v: int) -> int:
        if self.stamp[v] == self.generation:
            return int(self.local_id[v])
        return -1

    def put(self, v: int, idx: int):
        self.local_id[v] = idx
        self.stamp[v] = self.generation


def reference_sample_level(
    g: CscGraph,
    seeds,
    k: int,
    rng: SamplerRng,
    level: int,
    include_dst: bool = True,
    scratch: SampleScratch | None = None,
):
    """Literal per-node sampler: one sampling loop building the row pointers,
    one compaction loop claiming local ids in first-occurrence order.

    Slow but transparent; the vectorized kernels must match it bit for bit.
    """
    seeds = _check_seeds(seeds)
    if scratch is None:
        scratch = SampleScratch(g.num_nodes)
    scratch.begin()
    indptr = np.zeros(len(seeds) + 1, dtype=np.int64)
    flat: list[int] = []
    for i, v in enumerate(seeds):
        picked = choose(in_neighbors(g, int(v)), k, rng.stream(level, int(v)), rng.choose)
        flat.extend(int(x) for x in picked)
        indptr[i + 1] = indptr[i] + len(picked)

    src_globals: list[int] = []
    idx = 0
    if include_dst:
        for v in seeds:
            scratch.put(int(v), idx)
            src_globals.append(int(v))
            idx += 1
    codes = np.empty(len(flat), dtype=np.int64)
    for i, v in enumerate(flat):
        m = scratch.get(v)
        if m == -1:
            scratch.put(v, idx)
            src_globals.append(v)
            m = idx
            idx += 1
        codes[i] = m
    src = np.array(src_globals, dtype=np.int64)
    return _build_block(seeds, indptr, codes, src), src


_LEVEL_FNS = {
    "fused": fused_sample_level,
    "two-step": two_step_sample_level,
    "two_step": two_step_sample_level,
    "reference": reference_sample_level,
}


def _sample_levels(
    g: CscGraph,
    batch: np.ndarray,
    plan: FanoutPlan,
    rng: SamplerRng,
    kernel: str,
    include_dst: bool,
) -> MiniBatchSample:
    """Minibatch recursion without the non-empty check (the distributed
    runtime feeds empty straggler batches through here)."""
    if kernel not in _LEVEL_FNS:
        raise ParameterError(f"unknown kernel {kernel!r}")
    fn = _LEVEL_FNS[kernel]
    L = plan.num_levels
    blocks = []
    seeds = batch
    for li, k in enumerate(plan.fanouts):
        block, seeds = fn(g, seeds, k, rng, L - li, include_dst)
        blocks.append(block)
    return MiniBatchSample(tuple(blocks), seeds, include_dst)


def sample_minibatch(
    g: CscGraph,
    batch,
    plan: FanoutPlan,
    rng: SamplerRng,
    kernel: str = "fused",
    include_dst: bool = True,
) -> MiniBatchSample:
    """Recursively sample an L-level minibatch for the given seed batch.

    Level l's sampled sources become level l-1's destinations; the blocks
    come out ordered top level first.
    """
    batch = _check_seeds(batch)
    if len(batch) == 0:
        raise ContractViolationError("batch must be non-empty")
    return _sample_levels(g, batch, plan, rng, kernel, include_dst)


def seed_batches(labels, batch_size: int, rng: SamplerRng, epoch: int = 0) -> list[np.ndarray]:
    """Chunk a fresh permutation of the labeled nodes into seed batches.

    The final batch may be short; every labeled node appears exactly once.
    """
    nodes = labels.nodes if isinstance(labels, LabelSet) else np.ascontiguousarray(labels, dtype=np.int64)
    if len(nodes) == 0:
        raise ParameterError("label set is empty")
    if batch_size < 1:
        raise ParameterError("batch_size must be >= 1")
    shuffled = nodes[rng.permutation(len(nodes), epoch)]
    return [shuffled[i : i + batch_size] for i in range(0, len(shuffled), batch_size)]


def blocks_equal(a: MfgBlock, b: MfgBlock) -> bool:
    return (
        np.array_equal(a.dst_globals, b.dst_globals)
        and np.array_equal(a.src_globals, b.src_globals)
        and np.array_equal(a.csc.indptr, b.csc.indptr)
        and np.array_equal(a.csc.indices, b.csc.indices)
        and a.csc.num_cols == b.csc.num_cols
    )


def samples_equal(a: MiniBatchSample, b: MiniBatchSample) -> bool:
    return (
        a.num_levels == b.num_levels
        and a.include_dst == b.include_dst
        and np.array_equal(a.input_nodes, b.input_nodes)
        and all(blocks_equal(x, y) for x, y in zip(a.blocks, b.blocks))
    )
