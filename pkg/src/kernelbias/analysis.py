"""Evaluation metrics and density-bias diagnostics."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import spearmanr
from sklearn.metrics import normalized_mutual_info_score

from .dataset import DataSet, Partition, as_points
from .density import DensityField
from .errors import ArgumentError, DimensionError
from .kernels import as_matrix

__all__ = [
    "nmi",
    "BiasReport",
    "SparseIsolationReport",
    "mode_isolation_report",
    "sparse_isolation_report",
    "coefficient_of_variation",
    "spearman",
]


def _labels(x) -> np.ndarray:
    if isinstance(x, Partition):
        return x.assignment
    return np.asarray(x)


def nmi(a, b) -> float:
    """Normalized mutual information with arithmetic-mean normalization.

    Two trivial (single-cluster) partitions score 1; a trivial partition
    against a nontrivial one scores 0.
    """
    a, b = _labels(a), _labels(b)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError("partitions must have equal length")
    if a.size == 0:
        raise ArgumentError("partitions are empty")
    return float(normalized_mutual_info_score(a, b, average_method="arithmetic"))


def coefficient_of_variation(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    m = x.mean()
    return float(x.std() / m) if m != 0 else float("nan")


def spearman(a, b) -> float:
    return float(spearmanr(a, b).statistic)


@dataclass(frozen=True)
class BiasReport:
    """Summary of mode isolation for a clustering.

    ``minority_fraction`` is the size of the smaller cluster of the examined
    pair over the size of the pair (for K = 2: smaller cluster over n).
    """

    mode_point_index: int
    mode_cluster: int
    minority_fraction: float
    mode_in_minority: bool
    degree_cv: float
    nmi: Optional[float] = None

    def to_dict(self) -> dict:
        # NaN is not valid JSON; undefined values become None
        return {k: (None if isinstance(v, float) and np.isnan(v) else v)
                for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def mode_isolation_report(S, rho, A=None, truth=None) -> BiasReport:
    """Locate the density mode and report whether it sits in a small cluster.

    For K > 2 every cluster pair containing the mode's cluster is examined
    and the most isolating pair is reported.
    """
    lab = _labels(S)
    r = rho.clamped() if isinstance(rho, DensityField) else np.asarray(rho, dtype=np.float64)
    if r.shape != lab.shape:
        raise DimensionError("density and partition lengths differ")
    K = S.K if isinstance(S, Partition) else int(lab.max()) + 1
    sizes = np.bincount(lab, minlength=K)
    mode = int(np.argmax(r))
    km = int(lab[mode])
    others = [j for j in range(K) if j != km and sizes[j] > 0]
    if others:
        fr = [sizes[km] / (sizes[km] + sizes[j]) for j in others]
        j = others[int(np.argmin(fr))]
        in_minority = bool(sizes[km] < sizes[j])
        minority = min(sizes[km], sizes[j]) / (sizes[km] + sizes[j])
    else:
        in_minority, minority = False, 1.0
    cv = coefficient_of_variation(as_matrix(A).sum(axis=1)) if A is not None else float("nan")
    score = nmi(truth, lab) if truth is not None else None
    return BiasReport(mode, km, float(minority), in_minority, cv, score)


@dataclass(frozen=True)
class SparseIsolationReport:
    isolated: bool
    minority_indices: tuple
    outlier_indices: tuple
    nmi: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def sparse_isolation_report(S, data=None, outlier_indices: Sequence[int] = (), truth=None) -> SparseIsolationReport:
    """True when the smaller of two clusters lies within the outlier set."""
    lab = _labels(S)
    if data is not None and as_points(data).shape[0] != lab.size:
        raise DimensionError("partition and data sizes differ")
    if truth is None and isinstance(data, DataSet) and data.labels is not None:
        truth = data.labels
    sizes = np.bincount(lab, minlength=2)
    if sizes.size != 2:
        raise ArgumentError("sparse isolation is defined for K = 2")
    minority = int(np.argmin(sizes))
    members = tuple(int(i) for i in np.flatnonzero(lab == minority))
    out = tuple(sorted(int(i) for i in outlier_indices))
    isolated = len(members) > 0 and set(members) <= set(out)
    score = nmi(truth, lab) if truth is not None else None
    return SparseIsolationReport(isolated, members, out, score)
