"""Affinity matrices: fixed, adaptive, Zelnik-Manor/Perona and KNN kernels."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .dataset import as_points
from .density import BandwidthField, knn_radius
from .errors import ArgumentError, DimensionError, FormatError

__all__ = [
    "KernelMatrix",
    "PSDReport",
    "as_matrix",
    "precomputed_kernel",
    "gaussian_kernel_matrix",
    "adaptive_gaussian_kernel_matrix",
    "zmp_kernel_matrix",
    "knn_kernel_matrix",
    "knn_adjacency_sparse",
    "node_degrees",
    "normalize_affinity",
    "check_psd",
    "save_matrix",
    "load_matrix",
]


@dataclass(frozen=True)
class KernelMatrix:
    """An n x n affinity matrix together with the spec that produced it.

    Behaves like an ndarray in numpy calls through ``__array__``.
    """

    A: np.ndarray
    spec: dict = field(default_factory=lambda: {"family": "precomputed"})
    symmetric: bool = True
    psd_certificate: Optional[float] = None

    def __post_init__(self):
        A = np.array(self.A, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError("affinity matrix must be square")
        if not np.all(np.isfinite(A)):
            raise ArgumentError("affinity matrix must be finite")
        if self.symmetric and not np.array_equal(A, A.T):
            asym = np.abs(A - A.T).max()
            if asym > 1e-12 * max(1.0, np.abs(A).max()):
                raise ArgumentError(f"matrix flagged symmetric but max asymmetry is {asym:g}")
            A = (A + A.T) / 2
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def shape(self):
        return self.A.shape

    def __array__(self, dtype=None, copy=None):
        return self.A if dtype is None else self.A.astype(dtype)

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class PSDReport:
    min_eigenvalue: float
    psd: bool
    tol: float


def as_matrix(A) -> np.ndarray:
    """Dense float64 array behind a KernelMatrix or array-like."""
    if isinstance(A, KernelMatrix):
        return A.A
    M = np.asarray(A, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError("affinity matrix must be square")
    return M


def precomputed_kernel(A, symmetric: bool = True) -> KernelMatrix:
    return KernelMatrix(np.asarray(A, dtype=np.float64), {"family": "precomputed"}, symmetric)


def gaussian_kernel_matrix(data, sigma: float, normalized: bool = False) -> KernelMatrix:
    """Fixed-bandwidth Gaussian kernel A_pq = exp(-|f_p - f_q|^2 / (2 sigma^2)).

    With ``normalized=True`` entries are multiplied by (2 pi sigma^2)^(-N/2)
    so each row is a Parzen window that integrates to one.
    """
    if not sigma > 0:
        raise ArgumentError("sigma must be positive")
    X = as_points(data)
    D2 = cdist(X, X, "sqeuclidean")
    A = np.exp(-D2 / (2.0 * sigma ** 2))
    spec = {"family": "gaussian_fixed", "sigma": float(sigma)}
    if normalized:
        A *= (2 * np.pi * sigma ** 2) ** (-X.shape[1] / 2)
        spec["normalized"] = True
    return KernelMatrix(A, spec, True)


def _row_mahalanobis(X, bw: BandwidthField) -> np.ndarray:
    # M[p, q] = (f_p - f_q)^T Sigma_p^{-1} (f_p - f_q)
    if len(bw) != X.shape[0]:
        raise DimensionError("one bandwidth per point is required")
    if bw.is_scalar:
        return cdist(X, X, "sqeuclidean") / bw.values[:, None] ** 2
    Sigma = bw.matrices(X.shape[1])
    if np.any(np.linalg.det(Sigma) <= 0):
        raise ArgumentError("singular bandwidth matrix")
    Sinv = np.linalg.inv(Sigma)
    M = np.empty((X.shape[0], X.shape[0]))
    for p in range(X.shape[0]):
        d = X - X[p]
        M[p] = np.einsum("ij,jk,ik->i", d, Sinv[p], d)
    return M


def adaptive_gaussian_kernel_matrix(data, bw: BandwidthField) -> KernelMatrix:
    """Adaptive non-normalized Gaussian kernel, symmetrized by averaging.

    The raw kernel kappa_pq = exp(-(f_p-f_q)^T Sigma_p^{-1} (f_p-f_q) / 2)
    depends on the row's bandwidth; the returned matrix is (kappa + kappa^T)/2.
    """
    X = as_points(data)
    kappa = np.exp(-0.5 * _row_mahalanobis(X, bw))
    A = (kappa + kappa.T) / 2
    spec = {"family": "gaussian_adaptive", "bandwidth": "per-point",
            "median_sigma": float(np.median(bw.values)) if bw.is_scalar else None}
    return KernelMatrix(A, spec, True)


def zmp_kernel_matrix(data, sigma=None, K: int = 7) -> KernelMatrix:
    """Zelnik-Manor/Perona kernel exp(-|f_p - f_q|^2 / (2 sigma_p sigma_q)).

    ``sigma`` defaults to the K-th neighbour distance R_p^K.
    """
    X = as_points(data)
    if sigma is None:
        s = knn_radius(X, K)
        if np.any(s <= 0):
            raise ArgumentError("duplicate points give zero local scale; pass sigma explicitly")
    else:
        s = sigma.values if isinstance(sigma, BandwidthField) else np.asarray(sigma, dtype=np.float64)
        if s.ndim != 1:
            raise ArgumentError("Zelnik-Manor/Perona kernel needs scalar bandwidths")
        if s.shape[0] != X.shape[0]:
            raise DimensionError("one bandwidth per point is required")
        if np.any(s <= 0):
            raise ArgumentError("bandwidths must be positive")
    A = np.exp(-cdist(X, X, "sqeuclidean") / (2.0 * np.outer(s, s)))
    return KernelMatrix(A, {"family": "zmp"}, True)


def _knn_indices(X, K):
    n = X.shape[0]
    if int(K) != K or not 1 <= K < n:
        raise ArgumentError(f"K must satisfy 1 <= K < n (K={K}, n={n})")
    D = cdist(X, X)
    np.fill_diagonal(D, np.inf)
    return np.argsort(D, axis=1, kind="stable")[:, : int(K)]


def knn_kernel_matrix(data, K: int, symmetrize: bool = True, self_affinity: float = 1.0) -> KernelMatrix:
    """KNN kernel u_pq = [f_q among the K nearest neighbours of f_p].

    Self is excluded and ties are resolved by point index. With
    ``symmetrize`` the result is (u + u^T)/2 with diagonal ``self_affinity``;
    otherwise the raw asymmetric u is returned.

    Symmetrized degrees are K/2 + (in-degree)/2 + self_affinity, so their
    mean is K + self_affinity and their minimum is K/2 + self_affinity.
    Degrees are therefore only roughly uniform; on typical data about 80%
    fall in [K, 2K].
    """
    X = as_points(data)
    idx = _knn_indices(X, K)
    n = X.shape[0]
    U = np.zeros((n, n))
    U[np.arange(n)[:, None], idx] = 1.0
    if not symmetrize:
        return KernelMatrix(U, {"family": "knn", "K": int(K), "symmetrize": False}, False)
    A = (U + U.T) / 2
    np.fill_diagonal(A, self_affinity)
    spec = {"family": "knn", "K": int(K), "symmetrize": True, "self_affinity": float(self_affinity)}
    return KernelMatrix(A, spec, True)


def knn_adjacency_sparse(data, K: int, self_affinity: float = 1.0) -> sparse.csr_matrix:
    """Sparse symmetrized KNN kernel for large n (same entries as the dense one).

    Ties at the K-th distance may be resolved differently from the dense
    version.
    """
    X = as_points(data)
    n = X.shape[0]
    if int(K) != K or not 1 <= K < n:
        raise ArgumentError(f"K must satisfy 1 <= K < n (K={K}, n={n})")
    _, nb = cKDTree(X).query(X, k=int(K) + 1)
    rows, cols = [], []
    for p in range(n):
        cand = [q for q in nb[p] if q != p][: int(K)]
        rows.extend([p] * len(cand))
        cols.extend(cand)
    U = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    A = ((U + U.T) / 2).tolil()
    A.setdiag(self_affinity)
    return A.tocsr()


def node_degrees(A) -> np.ndarray:
    """Row sums d_p = sum_q A_pq, diagonal included."""
    return as_matrix(A).sum(axis=1)


def normalize_affinity(A) -> KernelMatrix:
    """Degree-normalized affinities A_pq / (d_p d_q)."""
    M = as_matrix(A)
    d = M.sum(axis=1)
    if np.any(d <= 0):
        raise ArgumentError("normalization needs strictly positive degrees")
    base = A.spec if isinstance(A, KernelMatrix) else {"family": "precomputed"}
    spec = {"family": "normalized", "base": base, "degrees": d.tolist()}
    sym = A.symmetric if isinstance(A, KernelMatrix) else bool(np.array_equal(M, M.T))
    return KernelMatrix(M / np.outer(d, d), spec, sym)


def check_psd(A, tol: float = 1e-10) -> PSDReport:
    """Smallest eigenvalue of a symmetric matrix and whether it is >= -tol."""
    M = as_matrix(A)
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ArgumentError("check_psd needs a symmetric matrix")
    lam = float(np.linalg.eigvalsh((M + M.T) / 2)[0])
    return PSDReport(lam, lam >= -tol, float(tol))


def save_matrix(A, path, spec: Optional[dict] = None) -> None:
    """Write a row-major float64 binary file plus a ``.json`` sidecar."""
    M = np.ascontiguousarray(as_matrix(A), dtype="<f8")
    path = Path(path)
    M.tofile(path)
    if spec is None:
        spec = A.spec if isinstance(A, KernelMatrix) else {"family": "precomputed"}
    meta = {"n": int(M.shape[0]), "dtype": "float64", "order": "row-major",
            "symmetric": bool(np.array_equal(M, M.T)), "spec": spec}
    Path(str(path) + ".json").write_text(json.dumps(meta))


def load_matrix(path) -> KernelMatrix:
    """Read a matrix written by :func:`save_matrix`."""
    path = Path(path)
    side = Path(str(path) + ".json")
    if not path.exists() or not side.exists():
        raise FormatError(f"{path}: matrix file or sidecar missing")
    try:
        meta = json.loads(side.read_text())
        n = int(meta["n"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
        raise FormatError(f"{side}: malformed sidecar") from None
    raw = np.fromfile(path, dtype="<f8")
    if raw.size != n * n:
        raise FormatError(f"{path}: expected {n * n} values, found {raw.size}")
    return KernelMatrix(raw.reshape(n, n), meta.get("spec", {}), bool(meta.get("symmetric", True)))
