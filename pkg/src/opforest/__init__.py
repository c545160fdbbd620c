"""Optimum-path forest classifiers: supervised, clustering, and the
fuzzy-membership-weighted variant, plus a benchmark harness."""

from .clustering import (ClusterModel, DensityMap, KnnGraph, assignments_csv,
                         build_knn_graph, cluster, compute_density,
                         find_best_k, normalized_cut)
from .datasets import (Dataset, Sample, SplitSpec, generate_synthetic,
                       load_csv, load_opf_binary, minmax_scale, save_csv,
                       save_opf_binary, stratified_split)
from .errors import ConfigError, DataError, DegenerateDataError, OpfError
from .evaluation import (DEFAULT_K_GRID, DEFAULT_SIGMA_GRID, ExperimentReport,
                         GridSearchReport, Metrics, WilcoxonResult,
                         compute_metrics, grid_search, run_cv_experiment,
                         wilcoxon_signed_rank)
from .fuzzy import (FuzzyModel, MembershipMap, MembershipParams,
                    classify_fuzzy, classify_fuzzy_batch, compute_membership,
                    load_fuzzy_model, save_fuzzy_model, train_fuzzy)
from .graph import (CostQueue, Mst, PrototypeSet, compute_mst, distance,
                    find_prototypes, pairwise_distances)
from .supervised import (SupervisedModel, classify_batch, classify_one,
                         load_model, save_model, train)

__version__ = "0.1.0"

__all__ = [
    "ClusterModel", "DensityMap", "KnnGraph", "assignments_csv",
    "build_knn_graph", "cluster", "compute_density", "find_best_k",
    "normalized_cut",
    "Dataset", "Sample", "SplitSpec", "generate_synthetic", "load_csv",
    "load_opf_binary", "minmax_scale", "save_csv", "save_opf_binary",
    "stratified_split",
    "ConfigError", "DataError", "DegenerateDataError", "OpfError",
    "DEFAULT_K_GRID", "DEFAULT_SIGMA_GRID", "ExperimentReport",
    "GridSearchReport", "Metrics", "WilcoxonResult", "compute_metrics",
    "grid_search", "run_cv_experiment", "wilcoxon_signed_rank",
    "FuzzyModel", "MembershipMap", "MembershipParams", "classify_fuzzy",
    "classify_fuzzy_batch", "compute_membership", "load_fuzzy_model",
    "save_fuzzy_model", "train_fuzzy",
    "CostQueue", "Mst", "PrototypeSet", "compute_mst", "distance",
    "find_prototypes", "pairwise_distances",
    "SupervisedModel", "classify_batch", "classify_one", "load_model",
    "save_model", "train",
    "__version__",
]
