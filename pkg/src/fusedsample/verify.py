"""Independent oracles for the sampling pipeline.

The compute stand-in is a parameter-free mean aggregation over the sampled
block stack.  It accumulates in float64 over the stored edge order and
rounds each layer to float32, so equal blocks give bit-equal outputs; that
turns "the distributed pipeline changes nothing" into an exact equality
check instead of a tolerance argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, ParameterError
from .graphs import CscGraph, LabelSet, build_csc, generate_erdos_renyi, generate_features
from .partition import partition_hash
from .rng import SamplerRng
from .sampling import (
    FanoutPlan,
    MiniBatchSample,
    sample_minibatch,
    samples_equal,
)

__all__ = [
    "PropagationResult",
    "mean_propagate",
    "KernelEquivalenceReport",
    "check_kernel_equivalence",
    "DistEquivalenceReport",
    "check_dist_equivalence",
]


@dataclass(frozen=True, eq=False)
class PropagationResult:
    """Per-seed output vectors aligned to the top-level destinations."""

    nodes: np.ndarray
    values: np.ndarray


def mean_propagate(sample: MiniBatchSample, input_rows: np.ndarray) -> PropagationResult:
    """Mean-aggregate features level by level from the deepest block up.

    ``input_rows`` must align with ``sample.input_nodes``.  Each destination
    becomes the mean of its sampled sources (plus its own previous-layer
    vector when the sample was taken with include_dst); a destination with
    no sampled edges and no self term becomes the zero vector.
    """
    rows = np.asarray(input_rows, dtype=np.float32)
    if rows.ndim != 2 or rows.shape[0] != len(sample.input_nodes):
        raise ContractViolationError("input rows must align with sample.input_nodes")
    h = rows.astype(np.float64)
    dim = rows.shape[1]
    for block in reversed(sample.blocks):
        n_dst = block.csc.num_rows
        counts = np.diff(block.csc.indptr)
        sums = np.zeros((n_dst, dim), dtype=np.float64)
        if block.csc.nnz:
            gathered = h[block.csc.indices]
            np.add.at(sums, np.repeat(np.arange(n_dst), counts), gathered)
        if sample.include_dst:
            sums += h[:n_dst]
            out = sums / (counts + 1)[:, None]
        else:
            denom = np.maximum(counts, 1)[:, None]
            out = np.where((counts > 0)[:, None], sums / denom, 0.0)
        h = out.astype(np.float32).astype(np.float64)
    return PropagationResult(sample.batch, h.astype(np.float32))


@dataclass
class KernelEquivalenceReport:
    """Outcome of the fused vs two-step cross-check."""

    trials: int
    failures: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        state = "OK" if self.passed else "FAIL"
        return f"kernel equivalence: {self.trials} trials, {len(self.failures)} failures [{state}]"


def check_kernel_equivalence(
    trials: int,
    max_nodes: int = 200,
    max_fanout: int = 16,
    max_levels: int = 3,
    seed: int = 0,
) -> KernelEquivalenceReport:
    """Drive both kernels over random graphs, batches, and fanout plans and
    demand bit-identical minibatches.  Failures carry their repro seeds."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    report = KernelEquivalenceReport(trials=trials)
    master = np.random.default_rng(seed)
    for t in range(trials):
        inst = int(master.integers(0, 2**31))
        r = np.random.default_rng(inst)
        n = int(r.integers(1, max_nodes + 1))
        nnz = int(r.integers(0, n * n // 2 + 1))
        g = build_csc(generate_erdos_renyi(n, nnz, inst))
        batch = np.sort(r.choice(n, size=int(r.integers(1, n + 1)), replace=False))
        levels = int(r.integers(1, max_levels + 1))
        plan = FanoutPlan(tuple(int(x) for x in r.integers(1, max_fanout + 1, size=levels)))
        include_dst = bool(r.integers(0, 2))
        srng = SamplerRng(inst)
        fused = sample_minibatch(g, batch, plan, srng, "fused", include_dst)
        two = sample_minibatch(g, batch, plan, srng, "two-step", include_dst)
        if not samples_equal(fused, two):
            report.failures.append(
                {
                    "trial": t,
                    "instance_seed": inst,
                    "num_nodes": n,
                    "nnz": nnz,
                    "fanouts": plan.fanouts,
                    "include_dst": include_dst,
                }
            )
    return report


@dataclass
class DistEquivalenceReport:
    """Outcome of the distributed vs single-process cross-check."""

    world_size: int
    mode: str
    seeds_checked: int
    blocks_equal: bool
    outputs_equal: bool
    max_abs_diff: float

    @property
    def passed(self) -> bool:
        return self.blocks_equal and self.outputs_equal

    def summary(self) -> str:
        state = "OK" if self.passed else "FAIL"
        return (
            f"dist equivalence: P={self.world_size} mode={self.mode} "
            f"seeds={self.seeds_checked} blocks_equal={self.blocks_equal} "
            f"outputs_equal={self.outputs_equal} max_abs_diff={self.max_abs_diff:.3g} [{state}]"
        )


def check_dist_equivalence(
    world_size: int,
    mode: str,
    graph: CscGraph,
    labels: LabelSet,
    plan: FanoutPlan,
    seed: int,
    feature_dim: int = 8,
    kernel: str = "fused",
    include_dst: bool = True,
) -> DistEquivalenceReport:
    """Sample every labeled seed as its own minibatch on a P-rank in-process
    cluster and on a single process, and compare blocks and propagation
    outputs bit for bit.

    Seed-to-rank assignment follows the partition map, which also fixes it
    across repeated runs.
    """
    from .dist import dist_sample, gather_features, make_worker_ctx, run_cluster

    features = generate_features(graph.num_nodes, feature_dim, seed)
    pmap = partition_hash(graph.num_nodes, world_size)
    rng = SamplerRng(seed)

    single: dict[int, tuple] = {}
    for v in labels.nodes:
        s = sample_minibatch(graph, np.array([v]), plan, rng, kernel, include_dst)
        out = mean_propagate(s, features.rows(s.input_nodes))
        single[int(v)] = (s, out.values)

    def worker(rank, transport):
        ctx = make_worker_ctx(
            rank, transport, mode, graph, features, pmap, labels, rng, kernel, include_dst
        )
        got = {}
        owned = ctx.labels_local
        max_local = int(ctx.label_counts.max())
        for i in range(max_local):
            batch = owned[i : i + 1] if i < len(owned) else np.empty(0, dtype=np.int64)
            s = dist_sample(ctx, batch, plan)
            rows = gather_features(ctx, s.input_nodes)
            out = mean_propagate(s, rows)
            if len(batch):
                got[int(batch[0])] = (s, out.values)
        return got

    per_rank = run_cluster(world_size, worker)
    merged: dict[int, tuple] = {}
    for d in per_rank:
        merged.update(d)

    blocks_ok = True
    outputs_ok = True
    max_diff = 0.0
    for v, (s_ref, out_ref) in single.items():
        if v not in merged:
            blocks_ok = False
            outputs_ok = False
            continue
        s_got, out_got = merged[v]
        if not samples_equal(s_ref, s_got):
            blocks_ok = False
        if not np.array_equal(out_ref, out_got):
            outputs_ok = False
        if out_ref.shape == out_got.shape and out_ref.size:
            max_diff = max(max_diff, float(np.abs(out_ref - out_got).max()))
    return DistEquivalenceReport(
        world_size=world_size,
        mode=mode,
        seeds_checked=len(single),
        blocks_equal=blocks_ok,
        outputs_equal=outputs_ok,
        max_abs_diff=max_diff,
    )
