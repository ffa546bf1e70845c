"""Exhaustive oracles for small instances and dominant-set search."""
from __future__ import annotations

from math import comb, factorial
from typing import Optional

import numpy as np

from ..dataset import Partition, as_points
from ..errors import ArgumentError, SizeError
from ..kernels import as_matrix
from .energies import (EnergyReport, _weights, aa_energy, dominant_set_energy, kmeans_energy,
                       nc_energy, weighted_aa_energy)

__all__ = ["stirling2", "brute_force_partition", "dominant_subset", "CRITERIA"]

CRITERIA = ("aa", "weighted_aa", "nc", "kmeans")
_CHUNK = 1 << 15


def stirling2(n: int, K: int) -> int:
    """Number of partitions of n labelled points into exactly K nonempty blocks."""
    return sum((-1) ** j * comb(K, j) * (K - j) ** n for j in range(K + 1)) // factorial(K)


def _bipartition_masks(n, start, stop):
    # lexicographic order of (a_1..a_{n-1}) with a_0 = 0 fixed
    m = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((m[:, None] >> shifts) & 1).astype(np.float64)


def _bipartition_energies(criterion, Z, M, X, w):
    Y = 1.0 - Z
    if criterion == "kmeans":
        sq = (X ** 2).sum(1)
        out = np.zeros(Z.shape[0])
        for B in (Z, Y):
            cnt = B.sum(1)
            s = B @ X
            with np.errstate(invalid="ignore", divide="ignore"):
                out += B @ sq - np.where(cnt > 0, (s ** 2).sum(1) / cnt, 0.0)
        return out
    if criterion == "nc":
        d = M.sum(1)
        num = [((B @ M) * B).sum(1) for B in (Z, Y)]
        den = [B @ d for B in (Z, Y)]
    else:
        ww = w if criterion == "weighted_aa" else np.ones(M.shape[0])
        Bw = [B * ww for B in (Z, Y)]
        num = [((B @ M) * B).sum(1) for B in Bw]
        den = [B.sum(1) for B in Bw]
    return -(num[0] / den[0] + num[1] / den[1])


def _rgs(n, K):
    # restricted growth strings with exactly K blocks, lexicographic order
    a = [0] * n

    def rec(i, m):
        if i == n:
            if m == K:
                yield tuple(a)
            return
        if K - m > n - i:
            return
        for v in range(min(m + 1, K)):
            a[i] = v
            yield from rec(i + 1, max(m, v + 1))

    yield from rec(1, 1)


def brute_force_partition(criterion: str, A=None, K: int = 2, w=None, data=None,
                          max_partitions: int = 10 ** 7):
    """Exact global minimizer of a clustering energy by enumeration.

    Enumerates all partitions into exactly K nonempty clusters (restricted
    growth strings, so cluster labels are canonical). Ties go to the
    lexicographically smallest labelling.

    Parameters
    ----------
    criterion : {'aa', 'weighted_aa', 'nc', 'kmeans'}
    A : KernelMatrix or array_like, optional
        Required for pairwise criteria.
    K : int
    w : array_like, optional
        Weights for 'weighted_aa'.
    data : DataSet or array_like, optional
        Required for 'kmeans'.

    Returns
    -------
    partition : Partition
    energy : EnergyReport
    """
    if criterion not in CRITERIA:
        raise ArgumentError(f"unknown criterion {criterion!r}")
    if criterion == "kmeans":
        if data is None:
            raise ArgumentError("'kmeans' needs data")
        X = as_points(data)
        n = X.shape[0]
        M = None
    else:
        if A is None:
            raise ArgumentError(f"{criterion!r} needs an affinity matrix")
        M = as_matrix(A)
        n = M.shape[0]
        X = None
    if criterion == "weighted_aa":
        w = _weights(w, n)
    if int(K) != K or not 1 <= K <= n:
        raise ArgumentError("K must satisfy 1 <= K <= n")
    total = stirling2(n, K)
    if total > max_partitions:
        raise SizeError(f"{total} partitions exceed the limit {max_partitions}")

    def report(lab):
        part = Partition(np.asarray(lab), K)
        if criterion == "aa":
            return part, aa_energy(M, part)
        if criterion == "weighted_aa":
            return part, weighted_aa_energy(M, w, part)
        if criterion == "nc":
            return part, nc_energy(M, part)
        return part, kmeans_energy(X, part)

    if K == 1:
        return report(np.zeros(n, dtype=np.int64))
    if K == 2:
        best_e, best_m = np.inf, None
        stop = 1 << (n - 1)
        for start in range(1, stop, _CHUNK):
            Z = _bipartition_masks(n, start, min(start + _CHUNK, stop))
            e = _bipartition_energies(criterion, Z, M, X, w)
            i = int(np.argmin(e))
            if e[i] < best_e:
                best_e, best_m = e[i], Z[i]
        return report(best_m.astype(np.int64))
    best_e, best_lab = np.inf, None
    for lab in _rgs(n, K):
        e = report(lab)[1].value
        if e < best_e:
            best_e, best_lab = e, lab
    return report(best_lab)


def _subset_masks(n, start, stop):
    m = np.arange(start, stop, dtype=np.int64)
    return ((m[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.float64)


def dominant_subset(A, mode: str = "brute", seed=0, start=None, rtol: float = 1e-12):
    """Subset S1 minimizing -sum_{pq in S1} A_pq / |S1| (maximal average affinity).

    Parameters
    ----------
    mode : {'brute', 'local_search'}
        'brute' enumerates all nonempty subsets (n <= 20). Energies within
        ``rtol`` of the minimum count as ties; ties go to the smallest
        subset, then to the lexicographically smallest index list.
        'local_search' starts from ``start`` (or a random subset drawn with
        ``seed``) and applies the best single add/remove move until no move
        lowers the energy.

    Returns
    -------
    subset : ndarray of int
        Sorted indices.
    energy : EnergyReport
    """
    M = as_matrix(A)
    n = M.shape[0]
    if n < 2:
        raise ArgumentError("dominant_subset needs n >= 2")
    if mode == "brute":
        if n > 20:
            raise SizeError("brute-force dominant set is limited to n <= 20")
        stop = 1 << n
        E, Zs = [], []
        for s in range(1, stop, _CHUNK):
            Z = _subset_masks(n, s, min(s + _CHUNK, stop))
            E.append(-((Z @ M) * Z).sum(1) / Z.sum(1))
            Zs.append(Z.astype(bool))
        E = np.concatenate(E)
        Zb = np.concatenate(Zs)
        emin = E.min()
        cand = np.flatnonzero(E <= emin + rtol * max(1.0, abs(emin)))
        sizes = Zb[cand].sum(1)
        cand = cand[sizes == sizes.min()]
        keys = [tuple(np.flatnonzero(Zb[c])) for c in cand]
        sub = np.array(min(keys), dtype=np.int64)
        return sub, dominant_set_energy(M, sub)
    if mode != "local_search":
        raise ArgumentError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    if start is None:
        mask = rng.random(n) < 0.5
        if not mask.any():
            mask[rng.integers(n)] = True
    else:
        mask = np.zeros(n, dtype=bool)
        mask[np.asarray(start, dtype=np.int64)] = True
    diag = np.diag(M)
    while True:
        size = mask.sum()
        tot = M[np.ix_(mask, mask)].sum()
        cur = -tot / size
        row = M[:, mask].sum(1)
        # flipping p in/out changes the total by +-(2 row_p - ... ) terms
        add = -(tot + 2 * row + diag) / (size + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            rem = -(tot - 2 * row + diag) / (size - 1) if size > 1 else np.full(n, np.inf)
        cand = np.where(mask, rem, add)
        p = int(np.argmin(cand))
        if cand[p] >= cur - 1e-15 * max(1.0, abs(cur)):
            break
        mask[p] = not mask[p]
    sub = np.flatnonzero(mask)
    return sub, dominant_set_energy(M, sub)
