"""dagsparse: DAG networks that learn their own wiring.

A fully connected staged DAG network is trained with an L1-of-tanh edge
penalty, thresholded and excised into a sparse architecture, analyzed
with path/communicability/embedding statistics, and retrained from
scratch.  Everything runs on numpy/scipy; no GPU or framework required.
"""

from .dag import (INIT_RAW_WEIGHT, DagSpec, EdgeParams, build_full_dag,
                  from_dot, init_edge_params, is_connected, sparsity_loss,
                  to_dot, topo_order)
from .network import NetConfig, NetworkParams, build_network, fit_channels, \
    forward, param_count, predict
from .training import TrainConfig, TrainLog, TrainState, retrain, train
from .pruning import (DEFAULT_TAU, DEFAULT_TAU_GRID, PrunedGraph,
                      excise_dead_paths, per_stage_sparsity, prune, sparsity,
                      sweep, threshold_edges)
from .graphstats import (GraphFeatures, edge_connectivity, graph_elongation,
                         kamada_kawai_embed, ln_communicability, mean_degree,
                         path_stats, pca_elongation, q1d)
from .data import Dataset, embed_colorize, gen_shapes, linear_probe_accuracy, \
    tear_up
from .similarity import FeatureTable, build_feature_table, similarity_matrix
from .persistence import (load_checkpoint, load_dataset, load_tensor,
                          save_checkpoint, save_dataset, save_tensor)
from .experiment import Campaign, compute_features, run_campaign

__version__ = "0.1.0"

__all__ = [
    "INIT_RAW_WEIGHT", "DagSpec", "EdgeParams", "build_full_dag", "from_dot",
    "init_edge_params", "is_connected", "sparsity_loss", "to_dot",
    "topo_order",
    "NetConfig", "NetworkParams", "build_network", "fit_channels", "forward",
    "param_count", "predict",
    "TrainConfig", "TrainLog", "TrainState", "retrain", "train",
    "DEFAULT_TAU", "DEFAULT_TAU_GRID", "PrunedGraph", "excise_dead_paths",
    "per_stage_sparsity", "prune", "sparsity", "sweep", "threshold_edges",
    "GraphFeatures", "edge_connectivity", "graph_elongation",
    "kamada_kawai_embed", "ln_communicability", "mean_degree", "path_stats",
    "pca_elongation", "q1d",
    "Dataset", "embed_colorize", "gen_shapes", "linear_probe_accuracy",
    "tear_up",
    "FeatureTable", "build_feature_table", "similarity_matrix",
    "load_checkpoint", "load_dataset", "load_tensor", "save_checkpoint",
    "save_dataset", "save_tensor",
    "Campaign", "compute_features", "run_campaign",
]
