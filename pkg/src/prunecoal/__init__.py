"""Node-cut chains on heavy-tailed critical trees and the matching
multiple-merger coalescent, with exact small-n oracles and a seeded Monte
Carlo harness."""

from .coalescent import (
    beta_chain,
    beta_chain_stats,
    lambda_b,
    lambda_bk,
    merge_ratio,
)
from .offspring import (
    AlphaParam,
    gf_g_theta,
    h_theta,
    leaf_count_pmf,
    mean_root_excess,
    offspring_pmf,
    offspring_pmf_pruned,
    tree_log_prob_given_leaves,
)
from .oracle import (
    DistTable,
    ResourceLimitError,
    enumerate_trees,
    exact_beta_chain_law,
    exact_post_first_event_tree_law,
    exact_prune_chain_law,
    tv_distance,
)
from .pruning import (
    ChainStats,
    ChainTrace,
    prune_chain,
    prune_chain_by_marks,
    prune_chain_stats,
    sample_mark,
)
from .sampler import (
    OVERFLOW,
    make_rng,
    sample_gw,
    sample_gw_with_n_leaves,
    sample_kesten_truncated,
    sample_limit_B,
    sample_many_gw_with_n_leaves,
    sample_pruned_gw,
    sample_pruned_kesten,
    spawn_rng,
)
from .specfun import QuadratureSpec, b_pmf, phi_alpha, phi_subordinator, z_moment
from .trees import Partition, Tree, graft, partition_key, truncate

__version__ = "0.1.0"
