"""Kernel clustering with density-bias diagnostics and density-equalizing fixes."""
from . import analysis, clustering, dataset, density, embedding, kernels
from .dataset import DataSet, Partition, WeightVector
from .errors import KernelBiasError

__version__ = "0.1.0"

__all__ = ["analysis", "clustering", "dataset", "density", "embedding", "kernels",
           "DataSet", "Partition", "WeightVector", "KernelBiasError"]
