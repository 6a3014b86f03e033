"""Operator command line.

Subcommands: generate, features, partition, report, sample-bench,
dist-bench, verify.  Exit codes: 0 success, 1 verification failure,
2 usage/parameter error, 3 I/O or transport error.

Fanout lists are top-down: ``--fanouts 15,10,5`` samples 15 neighbors at
the top level and 5 at the deepest (note this is the reverse of the
bottom-up convention some dataloaders use).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bench as fbench
from . import dist as fdist
from . import io as fio
from . import partition as fpart
from . import verify as fverify
from .errors import (
    ContractViolationError,
    FormatError,
    MalformedInputError,
    ParameterError,
    ProtocolError,
    TransportError,
)
from .graphs import (
    FeatureMatrix,
    LabelSet,
    build_csc,
    generate_erdos_renyi,
    generate_features,
    generate_labels,
    generate_rmat,
)
from .rng import SamplerRng
from .sampling import FanoutPlan
from .transport import TcpTransport

USAGE_ERROR = 2
IO_ERROR = 3


def _onoff(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _prob_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}") from exc
    if len(values) != 4:
        raise argparse.ArgumentTypeError("expected exactly four quadrant probabilities")
    return values


def cmd_generate(args) -> int:
    if args.rmat:
        coo = generate_rmat(args.scale, args.edge_factor, args.probs, args.seed)
    else:
        if args.nodes is None or args.edges is None:
            raise ParameterError("--erdos-renyi needs --nodes and --edges")
        coo = generate_erdos_renyi(args.nodes, args.edges, args.seed)
    g = build_csc(coo, dedup=args.dedup)
    fio.write_graph(args.out, g)
    print(f"wrote graph: {g.num_nodes} nodes, {g.nnz} edges -> {args.out}")
    if args.features_out:
        feats = generate_features(g.num_nodes, args.features_dim, args.seed + 1)
        fio.write_features(args.features_out, feats)
        print(f"wrote features: dim {feats.dim} -> {args.features_out}")
    if args.labels_out:
        labels = generate_labels(g.num_nodes, args.labels_count, args.seed + 2)
        fio.write_labels(args.labels_out, labels)
        print(f"wrote labels: {len(labels)} nodes -> {args.labels_out}")
    return 0


def cmd_features(args) -> int:
    if args.graph:
        num_nodes, _ = fio.read_graph_header(args.graph)
    elif args.nodes is not None:
        num_nodes = args.nodes
    else:
        raise ParameterError("need --graph or --nodes")
    feats = generate_features(num_nodes, args.dim, args.seed)
    fio.write_features(args.out, feats)
    print(f"wrote features: {num_nodes} x {args.dim} -> {args.out}")
    return 0


def _load_labels(path, num_nodes) -> LabelSet:
    return fio.read_labels(path, num_nodes=num_nodes)


def cmd_partition(args) -> int:
    g = fio.read_graph(args.graph)
    labels = _load_labels(args.labels, g.num_nodes) if args.labels else None
    if args.method == "hash":
        pmap = fpart.partition_hash(g.num_nodes, args.workers)
    elif args.method == "greedy":
        if labels is None:
            raise ParameterError("greedy partitioning needs --labels")
        pmap = fpart.partition_greedy(g, args.workers, labels, args.slack)
    else:  # import
        if not args.import_map:
            raise ParameterError("--method import needs --import-map")
        if args.import_map.endswith(".txt"):
            pmap = fio.read_partition_map_text(
                args.import_map, num_machines=args.workers, expected_num_nodes=g.num_nodes
            )
        else:
            pmap = fio.read_partition_map(args.import_map, expected_num_nodes=g.num_nodes)
    if args.out:
        if args.out.endswith(".txt"):
            fio.write_partition_map_text(args.out, pmap)
        else:
            fio.write_partition_map(args.out, pmap)
        print(f"wrote partition map -> {args.out}")
    cut = fpart.edge_cut(g, pmap)
    counts = pmap.node_counts()
    print(f"edge cut: {cut} of {g.nnz} edges ({cut / max(g.nnz, 1):.2%})")
    print(f"nodes per machine: {counts.tolist()}")
    if labels is not None:
        lcounts = np.bincount(pmap.assignment[labels.nodes], minlength=pmap.num_machines)
        print(f"labeled nodes per machine: {lcounts.tolist()}")
    if args.shards_dir:
        import os

        feats = fio.read_features(args.features) if args.features else None
        os.makedirs(args.shards_dir, exist_ok=True)
        for m in range(pmap.num_machines):
            part = fpart.build_graph_partition(g, pmap, m)
            owned_path = os.path.join(args.shards_dir, f"machine{m}.owned.txt")
            fio.write_labels(owned_path, LabelSet(part.owned_nodes))
            if feats is not None:
                shard = fpart.build_feature_shard(feats, pmap, m)
                fio.write_features(
                    os.path.join(args.shards_dir, f"machine{m}.features.fsft"),
                    FeatureMatrix(shard.rows),
                )
        print(f"wrote per-machine shards -> {args.shards_dir}")
    return 0


def cmd_report(args) -> int:
    if args.graph:
        num_nodes, nnz = fio.read_graph_header(args.graph)
    elif args.nodes is not None and args.edges is not None:
        num_nodes, nnz = args.nodes, args.edges
    else:
        raise ParameterError("need --graph or both --nodes and --edges")
    report = fpart.storage_report(num_nodes, nnz, args.dim, args.bytes_per_elem, args.index_width)
    print(f"nodes: {num_nodes}  edges: {nnz}  feature dim: {args.dim}")
    print(f"topology bytes: {report.topology_bytes} ({report.topology_bytes / 1e9:.3f} GB)")
    print(f"feature bytes:  {report.feature_bytes} ({report.feature_bytes / 1e9:.3f} GB)")
    print(f"topology fraction: {report.topology_fraction:.4f}")
    return 0


def cmd_sample_bench(args) -> int:
    g = fio.read_graph(args.graph)
    if args.labels:
        labels = _load_labels(args.labels, g.num_nodes)
    else:
        labels = LabelSet(np.arange(g.num_nodes), num_nodes=g.num_nodes)
    kernels = ("fused", "two-step") if args.kernel == "both" else (args.kernel,)
    cfg = fbench.BenchConfig(
        plan=FanoutPlan(args.fanouts),
        batch_sizes=args.batch_sizes,
        kernels=kernels,
        repetitions=args.reps,
        warmup=args.warmup,
        seed=args.seed,
        include_dst=args.include_dst,
    )
    features = generate_features(g.num_nodes, args.dim, args.seed) if args.dim else None
    records = fbench.run_sample_bench(g, labels, cfg, features)
    header = f"{'batch':>7} {'kernel':>9} {'sample_s':>10} {'total_s':>10} {'speedup':>8} {'edges':>10} {'coo_allocs':>10}"
    print(header)
    for r in records:
        print(
            f"{r.batch_size:>7} {r.kernel:>9} {r.sample_median_s:>10.4f} "
            f"{r.total_median_s:>10.4f} {r.speedup:>8.2f} {r.sampled_edges:>10} {r.coo_allocs:>10}"
        )
    if args.out:
        if args.format == "json":
            fbench.write_metrics_json(args.out, records)
        else:
            fbench.write_metrics_csv(args.out, records)
        print(f"wrote metrics -> {args.out}")
    return 0


def _print_epoch_metrics(metrics: list[dict]):
    for m in metrics:
        rounds = set(m["rounds_per_minibatch"])
        per_mb = rounds.pop() if len(rounds) == 1 else m["rounds_per_minibatch"]
        print(
            f"rank {m['rank']}: batches={m['num_batches']} rounds/minibatch={per_mb} "
            f"bytes_sent={m['bytes_sent']} bytes_received={m['bytes_received']} "
            f"sample={m['time_sample']:.3f}s gather={m['time_gather']:.3f}s "
            f"compute={m['time_compute']:.3f}s epoch={m['epoch_time']:.3f}s"
        )
    total_rounds = sum(m["comm_rounds_total"] for m in metrics)
    total_sent = sum(m["bytes_sent"] for m in metrics)
    epoch = max(m["epoch_time"] for m in metrics)
    print(f"aggregate: epoch_time={epoch:.3f}s total_rounds={total_rounds} total_payload_bytes={total_sent}")


def cmd_dist_bench(args) -> int:
    g = fio.read_graph(args.graph)
    feats = fio.read_features(args.features)
    labels = _load_labels(args.labels, g.num_nodes)
    if args.pmap:
        pmap = fio.read_partition_map(args.pmap, expected_num_nodes=g.num_nodes)
        if pmap.num_machines != args.workers:
            raise ParameterError("partition map machine count != --workers")
    else:
        pmap = fpart.partition_hash(g.num_nodes, args.workers)
    plan = FanoutPlan(args.fanouts)
    rng = SamplerRng(args.seed)

    def epoch_on(rank, transport):
        ctx = fdist.make_worker_ctx(
            rank, transport, args.mode, g, feats, pmap, labels, rng, args.kernel, args.include_dst
        )
        return fdist.run_epoch(ctx, plan, args.batch_size)

    if args.transport == "inproc":
        results = fdist.run_cluster(args.workers, epoch_on)
        _print_epoch_metrics([m.as_dict() for m in results])
        return 0

    if args.rank is None or not args.peers:
        raise ParameterError("tcp transport needs --rank and --peers")
    peers = []
    for item in args.peers.split(","):
        host, _, port = item.partition(":")
        if not port:
            raise ParameterError(f"peer {item!r} is not host:port")
        peers.append((host, int(port)))
    if len(peers) != args.workers:
        raise ParameterError("--peers must list one address per worker")
    transport = TcpTransport(args.rank, peers)
    try:
        metrics = epoch_on(args.rank, transport)
        # One extra collective (outside any minibatch) ships every rank's
        # metrics to everyone; rank 0 prints the aggregate view.
        payload = json.dumps(metrics.as_dict()).encode()
        gathered = transport.all_to_all([payload] * args.workers, round_tag=1_000_000)
        if args.rank == 0:
            _print_epoch_metrics([json.loads(buf.decode()) for buf in gathered])
        else:
            print(f"rank {args.rank}: epoch done, {metrics.num_batches} batches")
    finally:
        transport.close()
    return 0


def cmd_verify(args) -> int:
    import dataclasses

    if args.suite == "kernel":
        report = fverify.check_kernel_equivalence(args.trials, seed=args.seed)
    else:
        coo = generate_rmat(args.scale, args.edge_factor, seed=args.seed)
        g = build_csc(coo)
        labels = generate_labels(g.num_nodes, args.labels_count, args.seed + 1)
        plan = FanoutPlan(args.fanouts)
        report = fverify.check_dist_equivalence(
            args.workers, args.mode, g, labels, plan, args.seed, kernel=args.kernel,
            include_dst=args.include_dst,
        )
    print(report.summary())
    if args.out:
        summary = dataclasses.asdict(report)
        summary["passed"] = report.passed
        with open(args.out, "w", encoding="ascii") as f:
            json.dump(summary, f, indent=2, default=str)
            f.write("\n")
        print(f"wrote summary -> {args.out}")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fusedsample",
        description="graph sampling kernels, partitioning, and distributed minibatch benchmarks",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="emit a synthetic graph (plus optional features/labels)")
    kind = g.add_mutually_exclusive_group(required=True)
    kind.add_argument("--rmat", action="store_true", help="recursive-quadrant power-law generator")
    kind.add_argument("--erdos-renyi", action="store_true", help="uniform distinct-edge generator")
    g.add_argument("--scale", type=int, default=10, help="log2 of the node count (rmat)")
    g.add_argument("--edge-factor", type=int, default=16, help="edges per node (rmat)")
    g.add_argument("--probs", type=_prob_list, default=(0.57, 0.19, 0.19, 0.05),
                   help="rmat quadrant probabilities a,b,c,d")
    g.add_argument("--nodes", type=int, help="node count (erdos-renyi)")
    g.add_argument("--edges", type=int, help="edge count (erdos-renyi)")
    g.add_argument("--dedup", action="store_true", help="collapse duplicate edges")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--features-dim", type=int, default=32)
    g.add_argument("--features-out")
    g.add_argument("--labels-count", type=int, default=0)
    g.add_argument("--labels-out")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("features", help="emit a feature matrix for a graph")
    f.add_argument("--graph")
    f.add_argument("--nodes", type=int)
    f.add_argument("--dim", type=int, required=True)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_features)

    t = sub.add_parser("partition", help="compute or import a partition map")
    t.add_argument("--graph", required=True)
    t.add_argument("--workers", type=int, required=True)
    t.add_argument("--method", choices=("hash", "greedy", "import"), default="hash")
    t.add_argument("--labels")
    t.add_argument("--slack", type=float, default=0.05)
    t.add_argument("--import-map")
    t.add_argument("--out")
    t.add_argument("--features")
    t.add_argument("--shards-dir")
    t.set_defaults(func=cmd_partition)

    r = sub.add_parser("report", help="storage breakdown: topology vs features")
    r.add_argument("--graph")
    r.add_argument("--nodes", type=int)
    r.add_argument("--edges", type=int)
    r.add_argument("--dim", type=int, required=True)
    r.add_argument("--bytes-per-elem", type=int, default=4)
    r.add_argument("--index-width", type=int, default=4, choices=(4, 8))
    r.set_defaults(func=cmd_report)

    s = sub.add_parser("sample-bench", help="time fused vs two-step sampling")
    s.add_argument("--graph", required=True)
    s.add_argument("--labels")
    s.add_argument("--fanouts", type=_int_list, required=True, help="top-down, e.g. 15,10,5")
    s.add_argument("--batch-sizes", type=_int_list, default=(1024,),
                   help="e.g. 1024,2048,...,10240")
    s.add_argument("--kernel", choices=("both", "fused", "two-step"), default="both")
    s.add_argument("--reps", type=int, default=5)
    s.add_argument("--warmup", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--include-dst", type=_onoff, default=True)
    s.add_argument("--dim", type=int, default=0, help="if set, time propagation too")
    s.add_argument("--out")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=cmd_sample_bench)

    d = sub.add_parser("dist-bench", help="distributed epoch benchmark")
    d.add_argument("--graph", required=True)
    d.add_argument("--features", required=True)
    d.add_argument("--labels", required=True)
    d.add_argument("--workers", type=int, required=True)
    d.add_argument("--mode", choices=("full", "hybrid"), required=True)
    d.add_argument("--fanouts", type=_int_list, required=True)
    d.add_argument("--batch-size", type=int, default=1000)
    d.add_argument("--kernel", choices=("fused", "two-step"), default="fused")
    d.add_argument("--include-dst", type=_onoff, default=True)
    d.add_argument("--transport", choices=("inproc", "tcp"), default="inproc")
    d.add_argument("--rank", type=int)
    d.add_argument("--peers", help="comma-separated host:port, one per rank")
    d.add_argument("--pmap")
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_dist_bench)

    v = sub.add_parser("verify", help="run an equivalence suite (exit 1 on failure)")
    vsub = v.add_subparsers(dest="suite", required=True)
    vk = vsub.add_parser("kernel", help="fused vs two-step bit equality")
    vk.add_argument("--trials", type=int, default=200)
    vk.add_argument("--seed", type=int, default=0)
    vk.add_argument("--out", help="write a JSON summary here")
    vk.set_defaults(func=cmd_verify)
    vd = vsub.add_parser("dist", help="distributed vs single-process bit equality")
    vd.add_argument("--workers", type=int, default=4)
    vd.add_argument("--mode", choices=("full", "hybrid"), default="hybrid")
    vd.add_argument("--scale", type=int, default=9)
    vd.add_argument("--edge-factor", type=int, default=8)
    vd.add_argument("--labels-count", type=int, default=48)
    vd.add_argument("--fanouts", type=_int_list, default=(5, 5, 5))
    vd.add_argument("--kernel", choices=("fused", "two-step"), default="fused")
    vd.add_argument("--include-dst", type=_onoff, default=True)
    vd.add_argument("--seed", type=int, default=0)
    vd.add_argument("--out", help="write a JSON summary here")
    vd.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (ParameterError, MalformedInputError, ContractViolationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (FormatError, OSError, TransportError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_ERROR


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
