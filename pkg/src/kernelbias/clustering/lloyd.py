"""Lloyd-style optimizers: weighted kernel K-means, normalized cut, K-means."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.linalg import eigh
from scipy.spatial.distance import cdist

from ..dataset import Partition, WeightVector, as_points
from ..errors import ArgumentError
from ..kernels import as_matrix, node_degrees
from .energies import EnergyReport, _weights, kmeans_energy, nc_energy, weighted_aa_energy

__all__ = [
    "ClusterResult",
    "kernel_kmeans",
    "normalized_cut",
    "basic_kmeans",
    "multistart",
    "INIT_METHODS",
]

INIT_METHODS = ("random", "kmeans++", "kmeans++-input", "spectral")


@dataclass(frozen=True)
class ClusterResult:
    """Output of a single optimizer run.

    ``trace`` holds the energy after initialization and after every
    iteration that changed the labels; ``n_iter`` counts all assignment
    sweeps, including the final one that found no change. ``reseeds`` counts empty-cluster repairs. ``shift`` is the
    diagonal shift used to make the kernel p.s.d. (0 when none).
    """

    partition: Partition
    energy: EnergyReport
    trace: tuple
    n_iter: int
    converged: bool
    reseeds: int = 0
    shift: float = 0.0
    init: str = ""
    restart: int = 0
    restart_energies: tuple = field(default=())

    @property
    def labels(self) -> np.ndarray:
        return self.partition.assignment


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _kernel_dist_to_seeds(M, seeds):
    diag = np.diag(M)
    return diag[:, None] + diag[seeds][None, :] - 2.0 * M[:, seeds]


def _init_kmeanspp_kernel(M, K, w, rng):
    # D^2 sampling with the feature-space distance implied by the kernel
    n = M.shape[0]
    seeds = [int(rng.integers(n))]
    for _ in range(1, K):
        d = np.maximum(_kernel_dist_to_seeds(M, seeds).min(axis=1), 0.0) * w
        if d.sum() <= 0:
            seeds.append(int(rng.choice(np.setdiff1d(np.arange(n), seeds))))
        else:
            seeds.append(int(rng.choice(n, p=d / d.sum())))
    return np.argmin(_kernel_dist_to_seeds(M, seeds), axis=1)


def _init_kmeanspp_input(X, K, rng):
    n = X.shape[0]
    seeds = [int(rng.integers(n))]
    for _ in range(1, K):
        d = cdist(X, X[seeds], "sqeuclidean").min(axis=1)
        if d.sum() <= 0:
            seeds.append(int(rng.choice(np.setdiff1d(np.arange(n), seeds))))
        else:
            seeds.append(int(rng.choice(n, p=d / d.sum())))
    return np.argmin(cdist(X, X[seeds], "sqeuclidean"), axis=1)


def _init_spectral(M, K, rng):
    # k-means on row-normalized leading eigenvectors of D^-1/2 A D^-1/2
    n = M.shape[0]
    d = M.sum(axis=1)
    if np.any(d <= 0):
        d = np.abs(M).sum(axis=1) + 1e-300
    S = M / np.sqrt(np.outer(d, d))
    _, V = eigh((S + S.T) / 2, subset_by_index=[n - K, n - 1])
    V = V / np.maximum(np.linalg.norm(V, axis=1, keepdims=True), 1e-300)
    _, lab = kmeans2(V, K, minit="++", seed=rng)
    return lab


def _initial_labels(init, M, K, w, rng, data):
    n = M.shape[0]
    if isinstance(init, Partition):
        lab = init.assignment
    elif isinstance(init, str):
        if init == "random":
            return rng.integers(K, size=n)
        if init == "kmeans++":
            return _init_kmeanspp_kernel(M, K, w, rng)
        if init == "kmeans++-input":
            if data is None:
                raise ArgumentError("'kmeans++-input' initialization needs the data points")
            return _init_kmeanspp_input(as_points(data), K, rng)
        if init == "spectral":
            return _init_spectral(M, K, rng)
        raise ArgumentError(f"unknown init {init!r}")
    else:
        lab = np.asarray(init)
    lab = np.asarray(lab, dtype=np.int64)
    if lab.shape != (n,) or lab.min() < 0 or lab.max() >= K:
        raise ArgumentError("initial labels must have length n and values in [0, K)")
    return lab.copy()


def _distances(M, diag, lab, w, K):
    # ||phi_p - m_k||^2 = A_pp - 2 c_pk / W_k + I_k / W_k^2
    n = M.shape[0]
    Z = np.zeros((n, K))
    Z[np.arange(n), lab] = w
    W = Z.sum(axis=0)
    C = M @ Z
    I = (Z * C).sum(axis=0)
    D = np.full((n, K), np.inf)
    ok = W > 0
    D[:, ok] = diag[:, None] - 2.0 * C[:, ok] / W[ok] + I[ok] / W[ok] ** 2
    return D


def _repair_empty(D, lab, w, K):
    # move the point farthest from its own centroid into each empty cluster
    reseeds = 0
    n = lab.size
    while True:
        W = np.bincount(lab, weights=w, minlength=K)
        empty = np.flatnonzero(W <= 0)
        if empty.size == 0:
            return lab, reseeds
        own = D[np.arange(n), lab].copy()
        own[w <= 0] = -np.inf
        counts = np.bincount(lab, minlength=K)
        own[counts[lab] <= 1] = -np.inf
        p = int(np.argmax(own))
        if not np.isfinite(own[p]):
            return lab, reseeds
        lab[p] = empty[0]
        D[p] = np.inf
        D[p, empty[0]] = 0.0
        reseeds += 1


def kernel_kmeans(A, K: int, w=None, init="random", seed=0, max_iter: int = 100,
                  tol: float = 1e-9, data=None) -> ClusterResult:
    """Weighted kernel K-means by Lloyd iterations on the pairwise form.

    Minimizes the weighted average association
    -sum_k sum_{pq in S_k} w_p w_q A_pq / W_k. Each iteration assigns every
    point to the cluster with the smallest implicit feature-space distance
    A_pp - 2 c_pk / W_k + I_k / W_k^2, keeping the current cluster on ties.
    For p.s.d. A the energy never increases.

    Parameters
    ----------
    A : KernelMatrix or array_like, shape (n, n)
    K : int
    w : WeightVector or array_like, optional
        Positive point weights (all ones by default).
    init : {'random', 'kmeans++', 'kmeans++-input', 'spectral'} or labels
        'kmeans++' samples seeds with the kernel-induced distance,
        'kmeans++-input' in the input space (needs ``data``), 'spectral'
        clusters the leading eigenvectors of the degree-normalized matrix.
    seed : int or numpy Generator
    max_iter : int
    tol : float
        Stop when the relative energy decrease falls below ``tol``.
    data : DataSet or array_like, optional
    """
    M = as_matrix(A)
    n = M.shape[0]
    if int(K) != K or K < 1:
        raise ArgumentError("K must be a positive integer")
    if K > n:
        raise ArgumentError(f"K={K} exceeds the number of points n={n}")
    w = _weights(w, n)
    if np.any(w <= 0):
        raise ArgumentError("kernel K-means needs strictly positive weights")
    rng = _rng(seed)
    name = init if isinstance(init, str) else "labels"
    lab = _initial_labels(init, M, K, w, rng, data)
    diag = np.diag(M).copy()
    D = _distances(M, diag, lab, w, K)
    lab, reseeds = _repair_empty(D, lab, w, K)
    energy = weighted_aa_energy(M, w, Partition(lab, K)).value
    trace = [energy]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        D = _distances(M, diag, lab, w, K)
        cur = D[np.arange(n), lab]
        best = D.argmin(axis=1)
        keep = D[np.arange(n), best] >= cur
        new = np.where(keep, lab, best)
        new, r = _repair_empty(D, new, w, K)
        reseeds += r
        if np.array_equal(new, lab):
            converged = True
            break
        lab = new
        e = weighted_aa_energy(M, w, Partition(lab, K)).value
        trace.append(e)
        if abs(energy - e) <= tol * max(abs(energy), 1e-300):
            energy = e
            converged = True
            break
        energy = e
    part = Partition(lab, K)
    rep = weighted_aa_energy(M, w, part)
    if np.all(w == 1):
        rep = EnergyReport("aa", rep.value, rep.terms)
    return ClusterResult(part, rep, tuple(trace), it, converged, reseeds, 0.0, name)


def _nc_shift(Ahat, d, tol=1e-10):
    # smallest delta with Ahat + delta diag(1/d) p.s.d.; congruent to D^1/2 Ahat D^1/2 + delta I
    s = np.sqrt(d)
    lam = float(np.linalg.eigvalsh(s[:, None] * Ahat * s[None, :])[0])
    return max(0.0, -lam) if lam < -tol else 0.0


def normalized_cut(A, K: int, init="random", seed=0, max_iter: int = 100, tol: float = 1e-9,
                   data=None, psd_shift: Union[bool, str] = "auto") -> ClusterResult:
    """Normalized cut by weighted kernel K-means on A_pq / (d_p d_q) with w = d.

    When the normalized matrix is indefinite and ``psd_shift`` is 'auto' (or
    True), a diagonal term delta / d_p is added. This changes the weighted
    AA energy by the constant -delta K and restores monotone descent. The
    reported energy is always the NC energy of ``A``.
    """
    M = as_matrix(A)
    d = node_degrees(M)
    if np.any(d <= 0):
        raise ArgumentError("normalized cut needs strictly positive degrees")
    Ahat = M / np.outer(d, d)
    shift = 0.0
    if psd_shift:
        shift = _nc_shift(Ahat, d)
        if shift > 0:
            Ahat = Ahat + np.diag(shift / d)
    res = kernel_kmeans(Ahat, K, d, init, seed, max_iter, tol, data)
    # trace in NC units: weighted AA on the shifted matrix plus delta K
    trace = tuple(e + shift * K for e in res.trace)
    return ClusterResult(res.partition, nc_energy(M, res.partition), trace, res.n_iter,
                         res.converged, res.reseeds, shift, res.init)


def basic_kmeans(data, K: int, init="kmeans++", seed=0, max_iter: int = 100, tol: float = 1e-9):
    """Standard Lloyd K-means on raw features.

    Returns a ClusterResult whose energy is the within-cluster sum of
    squares; empty clusters are re-seeded with the point farthest from its
    centroid.
    """
    X = as_points(data)
    n = X.shape[0]
    if int(K) != K or K < 1 or K > n:
        raise ArgumentError("K must satisfy 1 <= K <= n")
    rng = _rng(seed)
    if isinstance(init, str):
        if init == "kmeans++":
            lab = _init_kmeanspp_input(X, K, rng)
        elif init == "random":
            lab = rng.integers(K, size=n)
        else:
            raise ArgumentError(f"unknown init {init!r}")
        name = init
    else:
        lab = np.asarray(init.assignment if isinstance(init, Partition) else init, dtype=np.int64).copy()
        name = "labels"
    w = np.ones(n)

    def centroids(lab):
        C = np.zeros((K, X.shape[1]))
        cnt = np.bincount(lab, minlength=K)
        np.add.at(C, lab, X)
        ok = cnt > 0
        C[ok] /= cnt[ok, None]
        return C, ok

    def dist(lab):
        C, ok = centroids(lab)
        D = np.full((n, K), np.inf)
        D[:, ok] = cdist(X, C[ok], "sqeuclidean")
        return D

    lab, reseeds = _repair_empty(dist(lab), lab, w, K)
    energy = kmeans_energy(X, Partition(lab, K)).value
    trace = [energy]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        D = dist(lab)
        cur = D[np.arange(n), lab]
        best = D.argmin(axis=1)
        new = np.where(D[np.arange(n), best] >= cur, lab, best)
        new, r = _repair_empty(D, new, w, K)
        reseeds += r
        if np.array_equal(new, lab):
            converged = True
            break
        lab = new
        e = kmeans_energy(X, Partition(lab, K)).value
        trace.append(e)
        if abs(energy - e) <= tol * max(abs(energy), 1e-300):
            energy = e
            converged = True
            break
        energy = e
    part = Partition(lab, K)
    return ClusterResult(part, kmeans_energy(X, part), tuple(trace), it, converged, reseeds, 0.0, name)


def multistart(A, K: int, w=None, restarts: int = 10, seed=0,
               inits: Sequence[str] = ("kmeans++", "random", "kmeans++-input", "spectral"),
               criterion: str = "aa", data=None, max_iter: int = 100, tol: float = 1e-9) -> ClusterResult:
    """Best of several Lloyd runs, cycling through initialization methods.

    Restart r uses ``inits[r % len(inits)]`` and an independent generator
    spawned from ``seed``, so results do not depend on execution order.
    Ties in energy go to the lowest restart index. 'kmeans++-input' is
    skipped when ``data`` is not given.

    criterion : {'aa', 'nc'}
        'aa' runs :func:`kernel_kmeans` (weighted when ``w`` is given),
        'nc' runs :func:`normalized_cut`.
    """
    if restarts < 1:
        raise ArgumentError("restarts must be >= 1")
    inits = [i for i in inits if not (i == "kmeans++-input" and data is None)]
    if not inits:
        raise ArgumentError("no usable initialization method")
    for i in inits:
        if i not in INIT_METHODS:
            raise ArgumentError(f"unknown init {i!r}")
    children = np.random.SeedSequence(seed).spawn(restarts)
    best = None
    energies = []
    for r in range(restarts):
        rng = np.random.default_rng(children[r])
        init = inits[r % len(inits)]
        if criterion == "aa":
            res = kernel_kmeans(A, K, w, init, rng, max_iter, tol, data)
        elif criterion == "nc":
            res = normalized_cut(A, K, init, rng, max_iter, tol, data)
        else:
            raise ArgumentError(f"unknown criterion {criterion!r}")
        energies.append(res.energy.value)
        if best is None or res.energy.value < best.energy.value:
            best = res
            best_r = r
    return ClusterResult(best.partition, best.energy, best.trace, best.n_iter, best.converged,
                         best.reseeds, best.shift, best.init, best_r, tuple(energies))
