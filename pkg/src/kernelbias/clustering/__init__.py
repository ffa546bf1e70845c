"""Clustering energies, optimizers and exhaustive oracles."""
from .energies import (ClusterStats, EnergyReport, aa_energy, cluster_stats, dominant_set_energy,
                       kmeans_energy, nc_energy, weighted_aa_energy)
from .gini import (GiniModeReport, Histogram, breiman_optimal_split, continuous_gini_energy,
                   discrete_gini_energy, exhaustive_gini_split, gini_impurity, gini_mode_verifier,
                   gini_objective, ratio_inequality, superlevel_partitions)
from .lloyd import INIT_METHODS, ClusterResult, basic_kmeans, kernel_kmeans, multistart, normalized_cut
from .search import brute_force_partition, dominant_subset, stirling2

__all__ = [
    "ClusterStats", "EnergyReport", "aa_energy", "cluster_stats", "dominant_set_energy",
    "kmeans_energy", "nc_energy", "weighted_aa_energy",
    "GiniModeReport", "Histogram", "breiman_optimal_split", "continuous_gini_energy",
    "discrete_gini_energy", "exhaustive_gini_split", "gini_impurity", "gini_mode_verifier",
    "gini_objective", "ratio_inequality", "superlevel_partitions",
    "INIT_METHODS", "ClusterResult", "basic_kmeans", "kernel_kmeans", "multistart", "normalized_cut",
    "brute_force_partition", "dominant_subset", "stirling2",
]
