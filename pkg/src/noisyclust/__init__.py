"""Cluster recovery from noisy pairwise queries via majority votes over
almost edge-disjoint BFS paths."""

from .analysis import (
    chain_closed_form,
    chain_power_oracle,
    expected_majority_mean,
    kl_divergence,
    parity_prob_oracle,
    path_agree_prob,
    plurality_gap,
    read_k_tail,
)
from .decision import Clustering, PairVerdict, clustering_error, decide_pair, path_difference, path_sign, recover_clusters
from .graph import QueryGraph, SamplingPlan, check_min_degree, query_budget, sample_query_graph
from .harness import ExperimentConfig, run_experiment, run_sweep, verify_oracles
from .oracle import Labeling, NoiseSpec, NoisyOracle, make_labeling, query
from .paths import BfsTree, PathFamily, PathParams, build_path_family, count_bad_edges, grow_tree

__version__ = "0.1.0"
