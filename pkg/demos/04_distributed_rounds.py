"""The communication-round story: sharded vs replicated topology.

With the topology sharded ("full" mode), every sampling level below the top
one costs one request round and one response round, so an L-level minibatch
spends 2(L-1) rounds sampling plus 2 gathering features: 2L total.  With
the topology replicated ("hybrid" mode), sampling is communication-free and
only the 2 feature-gather rounds remain.

Everything below runs P worker threads inside this process over a
barrier-synchronized all-to-all; the counters come from the workers
themselves.  Mode and placement do not change a single sampled edge.
"""

import numpy as np

from fusedsample import SamplerRng, build_csc, generate_features, generate_labels, generate_rmat
from fusedsample import sample_minibatch, samples_equal
from fusedsample.dist import dist_sample, gather_features, make_worker_ctx, run_cluster, run_epoch
from fusedsample.partition import partition_hash
from fusedsample.sampling import FanoutPlan
from fusedsample.verify import mean_propagate

P = 4
L = 3
g = build_csc(generate_rmat(10, 8, seed=7))
feats = generate_features(g.num_nodes, 16, seed=8)
labels = generate_labels(g.num_nodes, 128, seed=9)
pmap = partition_hash(g.num_nodes, P)
plan = FanoutPlan((5, 5, 5))
print(f"graph: {g.num_nodes} nodes, {g.nnz} edges; P={P}, L={L}")

for mode in ("full", "hybrid"):

    def epoch(rank, transport, mode=mode):
        ctx = make_worker_ctx(rank, transport, mode, g, feats, pmap, labels, SamplerRng(1))
        return run_epoch(ctx, plan, batch_size=16)

    metrics = run_cluster(P, epoch)
    rounds = sorted({r for m in metrics for r in m.rounds_per_minibatch})
    payload = sum(m.bytes_sent for m in metrics)
    print(
        f"{mode:>6} mode: rounds per minibatch = {rounds}, "
        f"{metrics[0].num_batches} minibatches, total payload {payload} bytes"
    )

# Cross-mode agreement, seed by seed: whichever rank owns a seed, and
# whichever mode it runs, the sampled blocks and the aggregated features
# match the single-process pipeline exactly.
seed_node = int(labels.nodes[0])
reference = sample_minibatch(g, np.array([seed_node]), plan, SamplerRng(1))
ref_out = mean_propagate(reference, feats.rows(reference.input_nodes))


def one_seed(rank, transport):
    ctx = make_worker_ctx(rank, transport, "full", g, feats, pmap, labels, SamplerRng(1))
    if pmap.assignment[seed_node] != rank:
        batch = np.empty(0, dtype=np.int64)
    else:
        batch = np.array([seed_node])
    sample = dist_sample(ctx, batch, plan)
    rows = gather_features(ctx, sample.input_nodes)
    return sample, mean_propagate(sample, rows) if len(batch) else None


for sample, out in run_cluster(P, one_seed):
    if out is not None:
        assert samples_equal(sample, reference)
        assert np.array_equal(out.values, ref_out.values)
        print(f"seed {seed_node}: distributed pipeline output == single-process output, bit-exact")
