"""Graph-sampling engine and distributed minibatch runtime for GNN dataloading.

The package provides destination-indexed sparse graph storage, a fused
sampling kernel that emits compacted bipartite blocks in one pass, a
conventional two-step baseline, edge-cut and hybrid (replicated-topology)
partitioning, a collective-only multi-worker runtime with round counting,
and propagation oracles that make pipeline equivalence bit-checkable.
"""

from .errors import (
    BadMagicError,
    ContractViolationError,
    FormatError,
    MalformedInputError,
    ParameterError,
    ProtocolError,
    SizeMismatchError,
    TransportError,
    TruncatedError,
    UnsupportedVersionError,
)
from .graphs import (
    CooGraph,
    CscGraph,
    FeatureMatrix,
    LabelSet,
    build_csc,
    csc_to_coo,
    generate_erdos_renyi,
    generate_features,
    generate_labels,
    generate_rmat,
    in_neighbors,
)
from .rng import SamplerRng
from .sampling import (
    FanoutPlan,
    MfgBlock,
    MiniBatchSample,
    blocks_equal,
    choose,
    coo_alloc_count,
    fused_sample_level,
    reference_sample_level,
    reset_alloc_stats,
    sample_edges,
    sample_minibatch,
    samples_equal,
    seed_batches,
    two_step_sample_level,
)

__version__ = "0.1.0"
