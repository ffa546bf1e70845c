"""Pairwise clustering energies: AA, weighted AA, NC, K-means and dominant set."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..dataset import Partition, WeightVector, as_points
from ..errors import ArgumentError, DimensionError, EnergyError
from ..kernels import as_matrix

__all__ = [
    "EnergyReport",
    "ClusterStats",
    "labels_of",
    "cluster_stats",
    "aa_energy",
    "weighted_aa_energy",
    "nc_energy",
    "kmeans_energy",
    "dominant_set_energy",
]


@dataclass(frozen=True)
class EnergyReport:
    """Energy value with per-cluster terms; ``value == sum(terms)``."""

    criterion: str
    value: float
    terms: tuple = ()

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "value": self.value, "terms": list(self.terms)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class ClusterStats:
    """Sufficient statistics of a weighted partition.

    W[k] = sum_{p in k} w_p, C[p, k] = sum_{q in k} w_q A_pq and
    I[k] = sum_{p in k} w_p C[p, k].
    """

    W: np.ndarray
    C: np.ndarray
    I: np.ndarray


def labels_of(S, n: Optional[int] = None):
    """Return (labels, K) for a Partition or integer array."""
    part = S if isinstance(S, Partition) else Partition(S)
    if n is not None and part.n != n:
        raise DimensionError(f"partition has {part.n} entries, expected {n}")
    return part.assignment, part.K


def _weights(w, n):
    if w is None:
        return np.ones(n)
    w = np.asarray(w.w if isinstance(w, WeightVector) else w, dtype=np.float64)
    if w.shape != (n,):
        raise DimensionError("one weight per point is required")
    if np.any(w < 0):
        raise ArgumentError("weights must be nonnegative")
    return w


def cluster_stats(A, labels, w=None, K: Optional[int] = None) -> ClusterStats:
    M = as_matrix(A)
    n = M.shape[0]
    labels = np.asarray(labels)
    K = int(labels.max()) + 1 if K is None else int(K)
    w = _weights(w, n)
    Z = np.zeros((n, K))
    Z[np.arange(n), labels] = w
    C = M @ Z
    return ClusterStats(Z.sum(axis=0), C, (Z * C).sum(axis=0))


def weighted_aa_energy(A, w, S) -> EnergyReport:
    """-sum_k sum_{pq in S_k} w_p w_q A_pq / sum_{p in S_k} w_p."""
    M = as_matrix(A)
    lab, K = labels_of(S, M.shape[0])
    st = cluster_stats(M, lab, w, K)
    if np.any(st.W <= 0):
        raise EnergyError(f"cluster(s) {np.flatnonzero(st.W <= 0).tolist()} have zero weight")
    terms = -st.I / st.W
    return EnergyReport("weighted_aa" if w is not None else "aa", float(terms.sum()), tuple(terms.tolist()))


def aa_energy(A, S) -> EnergyReport:
    """Average association -sum_k sum_{pq in S_k} A_pq / |S_k| (diagonal included)."""
    M = as_matrix(A)
    lab, K = labels_of(S, M.shape[0])
    if np.any(np.bincount(lab, minlength=K) == 0):
        raise EnergyError("average association is undefined for empty clusters")
    return weighted_aa_energy(M, None, Partition(lab, K))


def nc_energy(A, S) -> EnergyReport:
    """Normalized cut -sum_k sum_{pq in S_k} A_pq / sum_{p in S_k} d_p."""
    M = as_matrix(A)
    lab, K = labels_of(S, M.shape[0])
    d = M.sum(axis=1)
    st = cluster_stats(M, lab, None, K)
    vol = np.bincount(lab, weights=d, minlength=K)
    if np.any(vol <= 0):
        raise EnergyError(f"cluster(s) {np.flatnonzero(vol <= 0).tolist()} have nonpositive degree")
    terms = -st.I / vol
    return EnergyReport("nc", float(terms.sum()), tuple(terms.tolist()))


def kmeans_energy(data, S, w=None) -> EnergyReport:
    """Sum of (weighted) squared distances to cluster means."""
    X = as_points(data)
    lab, K = labels_of(S, X.shape[0])
    w = _weights(w, X.shape[0])
    terms = np.zeros(K)
    for k in range(K):
        m = lab == k
        if not m.any():
            continue
        wk = w[m]
        if wk.sum() <= 0:
            raise EnergyError(f"cluster {k} has zero weight")
        mu = (wk[:, None] * X[m]).sum(0) / wk.sum()
        terms[k] = float((wk * ((X[m] - mu) ** 2).sum(1)).sum())
    return EnergyReport("kmeans", float(terms.sum()), tuple(terms.tolist()))


def dominant_set_energy(A, subset) -> EnergyReport:
    """-sum_{pq in S1} A_pq / |S1| for a subset given as indices or a boolean mask."""
    M = as_matrix(A)
    sub = np.asarray(subset)
    if sub.dtype == bool:
        if sub.shape != (M.shape[0],):
            raise DimensionError("mask length must equal n")
        idx = np.flatnonzero(sub)
    else:
        idx = np.unique(sub.astype(np.int64))
    if idx.size == 0:
        raise EnergyError("dominant-set energy is undefined for the empty set")
    val = -float(M[np.ix_(idx, idx)].sum()) / idx.size
    return EnergyReport("dominant_set", val, (val,))
