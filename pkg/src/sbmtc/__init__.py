"""Network decomposition into a degree-corrected SBM substrate plus triadic
closure layers: MCMC inference, model selection by description length,
posterior-predictive checks, synthetic benchmarks, and edge prediction."""

__version__ = "0.1.0"

from .graphs import (
    ClusteringInfo,
    GraphError,
    MultiGraph,
    ParseError,
    Partition,
    SimpleGraph,
    clustering_info,
    common_neighbors,
    global_clustering,
    parse_edge_list,
    serialize_edge_list,
)
from .sbm import (
    ConstraintError,
    PPSpec,
    dcsbm_log_marginal,
    microcanonical_decompose,
    partition_log_prior,
    pp_block_matrix,
    sample_microcanonical,
)
from .tables import (
    log_restricted_partitions,
    partition_count,
    restricted_partitions_exact,
)
from .state import (
    DecompositionState,
    joint_log_probability,
    layer_log_marginal,
    open_triad_count,
    validate_state,
)
from .sampler import (
    ChainCollectors,
    ChainConfig,
    PosteriorSample,
    merge_collectors,
    run_chain,
)
from .generators import (
    apply_triadic_closure,
    sample_geometric_degree_graph,
    sample_pp_graph,
)
from .analysis import (
    PosteriorSummary,
    auc_seminal,
    description_length,
    effective_groups,
    max_overlap,
    posterior_odds,
    posterior_predictive_clustering,
    predictive_zscore,
    seminal_clustering,
)
from .prediction import (
    HoldoutSpec,
    MeasurementData,
    make_holdout,
    measurement_log_likelihood,
    precision_recall,
    run_reconstruction_chain,
)
