"""Euclidean embedding of distance matrices and density-transform diagnostics."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import as_points
from .density import BandwidthField
from .errors import ArgumentError, DimensionError, DomainError
from .kernels import KernelMatrix, _row_mahalanobis, as_matrix

__all__ = [
    "DistanceMatrix",
    "EmbeddingResult",
    "CurveResult",
    "centered_gram",
    "additive_constant",
    "euclidean_embedding",
    "mds_project",
    "geodesic_proxy_distances",
    "density_inversion_distances",
    "density_transform",
    "density_transform_curves",
]

_KINDS = ("euclidean_input", "geodesic_proxy", "nc_modified", "precomputed")


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric dissimilarities stored as squared values with a zero diagonal.

    Negative squared entries are allowed only for ``kind='nc_modified'``.
    """

    squared: np.ndarray
    kind: str = "precomputed"

    def __post_init__(self):
        S = np.array(self.squared, dtype=np.float64)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise DimensionError("distance matrix must be square")
        if self.kind not in _KINDS:
            raise ArgumentError(f"unknown distance kind {self.kind!r}")
        if not np.all(np.isfinite(S)):
            raise ArgumentError("distances must be finite")
        scale = max(1.0, np.abs(S).max())
        if np.abs(S - S.T).max() > 1e-12 * scale:
            raise ArgumentError("distance matrix must be symmetric")
        if np.any(np.diag(S) != 0):
            raise ArgumentError("distance matrix must have a zero diagonal")
        if self.kind != "nc_modified" and S.min() < 0:
            raise ArgumentError("squared distances must be nonnegative")
        S = (S + S.T) / 2
        S.setflags(write=False)
        object.__setattr__(self, "squared", S)

    @classmethod
    def from_distances(cls, D, kind: str = "precomputed") -> "DistanceMatrix":
        D = np.asarray(D, dtype=np.float64)
        if np.any(D < 0):
            raise ArgumentError("distances must be nonnegative")
        return cls(D ** 2, kind)

    @classmethod
    def from_points(cls, data) -> "DistanceMatrix":
        X = as_points(data)
        S = cdist(X, X, "sqeuclidean")
        np.fill_diagonal(S, 0.0)
        return cls(S, "euclidean_input")

    @property
    def D(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.squared, 0.0))

    @property
    def n(self) -> int:
        return self.squared.shape[0]


@dataclass(frozen=True)
class EmbeddingResult:
    """Coordinates whose squared distances realize D^2 + h^2 off the diagonal."""

    coords: np.ndarray
    h: float
    dim: int
    max_residual: float


def _as_sq(D) -> np.ndarray:
    if isinstance(D, DistanceMatrix):
        return D.squared
    return DistanceMatrix.from_distances(D).squared


def centered_gram(sq, h: float = 0.0) -> np.ndarray:
    """B(h) = -1/2 J (D o D + h^2 (1 - I)) J with J the centering projector."""
    n = sq.shape[0]
    S = sq + h * h * (1.0 - np.eye(n))
    # J S J via row/column means, cheaper than forming J
    B = S - S.mean(0)[None, :] - S.mean(1)[:, None] + S.mean()
    B = -0.5 * B
    return (B + B.T) / 2


def _min_eig(sq, h):
    return float(np.linalg.eigvalsh(centered_gram(sq, h))[0])


def additive_constant(D, tol: float = 1e-9, max_iter: int = 200) -> float:
    """Smallest h >= 0 making D^2 + h^2 [p != q] Euclidean.

    "Euclidean" means the centered Gram matrix has smallest eigenvalue at
    least ``-tol``. The bracket starts at sqrt(2 |lambda_min(B(0))|) and the
    answer is refined by bisection until the bracket is narrower than
    ``tol * 1e-3``.
    """
    return _additive_constant_sq(_as_sq(D), tol, max_iter)


def _additive_constant_sq(sq, tol=1e-9, max_iter=200):
    lam0 = _min_eig(sq, 0.0)
    if lam0 >= -tol:
        return 0.0
    lo, hi = 0.0, np.sqrt(2.0 * -lam0)
    while _min_eig(sq, hi) < -tol:
        hi *= 2.0
    for _ in range(max_iter):
        if hi - lo <= tol * 1e-3:
            break
        mid = 0.5 * (lo + hi)
        if _min_eig(sq, mid) >= -tol:
            hi = mid
        else:
            lo = mid
    return float(hi)


def _residual(coords, sq, h):
    n = sq.shape[0]
    target = sq + h * h * (1.0 - np.eye(n))
    got = cdist(coords, coords, "sqeuclidean") if coords.shape[1] else np.zeros((n, n))
    scale = max(np.abs(target).max(), 1e-300)
    return float(np.abs(got - target).max() / scale)


def euclidean_embedding(D, tol: float = 1e-9) -> EmbeddingResult:
    """Explicit coordinates f'_p with |f'_p - f'_q|^2 = D_pq^2 + h^2 [p != q].

    Eigenvalues of the centered Gram matrix below ``tol * lambda_max`` are
    dropped; the remaining eigenpairs give the coordinates, so the dimension
    is at most n - 1.
    """
    sq = _as_sq(D)
    n = sq.shape[0]
    h = _additive_constant_sq(sq, tol)
    B = centered_gram(sq, h)
    lam, V = np.linalg.eigh(B)
    lam, V = lam[::-1], V[:, ::-1]
    top = max(lam[0], 0.0)
    keep = lam > tol * top if top > 0 else np.zeros(n, dtype=bool)
    keep[n - 1:] = False
    coords = V[:, keep] * np.sqrt(lam[keep])
    coords = _fix_signs(coords)
    return EmbeddingResult(coords, float(h), int(keep.sum()), _residual(coords, sq, h))


def _fix_signs(Y):
    # largest-magnitude coordinate of every axis is positive
    if Y.size == 0:
        return Y
    idx = np.argmax(np.abs(Y), axis=0)
    s = np.sign(Y[idx, np.arange(Y.shape[1])])
    s[s == 0] = 1.0
    return Y * s


def mds_project(source, dim: int):
    """Classical MDS: top ``dim`` eigenpairs of the centered Gram matrix.

    ``source`` is a DistanceMatrix, an array of distances or an
    EmbeddingResult. Axes beyond the number of positive eigenvalues are
    zero-padded.

    Returns
    -------
    coords : ndarray, shape (n, dim)
    padded : bool
        True when zero columns were added.
    """
    if int(dim) != dim or dim < 1:
        raise ArgumentError("dim must be a positive integer")
    if isinstance(source, EmbeddingResult):
        Y = source.coords
        sq = cdist(Y, Y, "sqeuclidean") if Y.shape[1] else np.zeros((Y.shape[0],) * 2)
    else:
        sq = _as_sq(source)
    B = centered_gram(sq)
    lam, V = np.linalg.eigh(B)
    lam, V = lam[::-1], V[:, ::-1]
    top = max(lam[0], 0.0)
    npos = int((lam > 1e-12 * top).sum()) if top > 0 else 0
    k = min(int(dim), npos)
    Y = _fix_signs(V[:, :k] * np.sqrt(lam[:k]))
    padded = k < dim
    if padded:
        Y = np.hstack([Y, np.zeros((Y.shape[0], dim - k))])
    return Y, padded


def geodesic_proxy_distances(data, bw: BandwidthField) -> DistanceMatrix:
    """Symmetrized Mahalanobis distances using each endpoint's bandwidth.

    d_pq^2 = ((f_p-f_q)^T Sigma_p^-1 (f_p-f_q) + (f_p-f_q)^T Sigma_q^-1 (f_p-f_q)) / 2,
    so exp(-d_pq^2 / 2) is the geometric mean of the two raw adaptive
    Gaussian kernel values kappa_pq and kappa_qp.
    """
    X = as_points(data)
    M = _row_mahalanobis(X, bw)
    S = (M + M.T) / 2
    np.fill_diagonal(S, 0.0)
    return DistanceMatrix(S, "geodesic_proxy")


def density_inversion_distances(data, A, sigma: float) -> DistanceMatrix:
    """Modified distances d^2 + 2 sigma^2 log(d_p d_q) implied by NC normalization.

    ``A`` must be the Gaussian kernel of ``data`` with bandwidth ``sigma``.
    Off the diagonal exp(-dhat^2 / (2 sigma^2)) = A_pq / (d_p d_q). Negative
    entries (possible when d_p d_q < 1) are kept and trigger a warning.
    """
    if not sigma > 0:
        raise ArgumentError("sigma must be positive")
    X = as_points(data)
    M = as_matrix(A)
    if M.shape[0] != X.shape[0]:
        raise DimensionError("kernel and data sizes differ")
    d = M.sum(axis=1)
    if np.any(d <= 0):
        raise ArgumentError("degrees must be positive")
    S = cdist(X, X, "sqeuclidean") + 2.0 * sigma ** 2 * np.log(np.outer(d, d))
    np.fill_diagonal(S, 0.0)
    if S.min() < 0:
        warnings.warn("some modified squared distances are negative (degree product < 1)",
                      RuntimeWarning, stacklevel=2)
    return DistanceMatrix(S, "nc_modified")


def density_transform(x, kind: str, sigma: float = 0.5, h: float = 0.0, N: int = 1,
                      Nbar: float = 20.0, eps: float = 1.0) -> np.ndarray:
    """Implicit density maps of degree normalization, with d_p modeled as rho_p.

    kind 'eq58': x eps^N / (eps^2 + h^2 + 4 sigma^2 log x)^(Nbar/2)
    kind 'eq59': the same times x (point weights w = d).
    """
    x = np.asarray(x, dtype=np.float64)
    if kind not in ("eq58", "eq59"):
        raise ArgumentError(f"unknown transform {kind!r}")
    if np.any(x <= 0):
        raise DomainError("density values must be positive")
    base = eps ** 2 + h ** 2 + 4.0 * sigma ** 2 * np.log(x)
    if np.any(base <= 0):
        raise DomainError("eps^2 + h^2 + 4 sigma^2 log x must be positive on the grid")
    logt = np.log(x) + N * np.log(eps) - 0.5 * Nbar * np.log(base)
    if kind == "eq59":
        logt += np.log(x)
    return np.exp(logt)


@dataclass(frozen=True)
class CurveResult:
    kind: str
    x: np.ndarray
    tau: np.ndarray
    interior_minima: tuple
    x_star: float
    x_star_exact: float


def density_transform_curves(kind: str, x_grid, sigma: float = 0.5, h: float = 0.0, N: int = 1,
                             Nbar: float = 20.0, eps: float = 1.0) -> CurveResult:
    """Sample a density transform and locate its interior minima.

    The defaults give x / (1 + log x)^10 for 'eq58' and x^2 / (1 + log x)^10
    for 'eq59'. ``x_star`` is the grid minimizer when it is interior (nan
    otherwise); ``x_star_exact`` is the stationary point
    log x* = (k Nbar sigma^2 - c) / (4 sigma^2) with c = eps^2 + h^2 and
    k = 2 (eq58) or 1 (eq59).
    """
    x = np.asarray(x_grid, dtype=np.float64)
    tau = density_transform(x, kind, sigma, h, N, Nbar, eps)
    lt = np.log(tau)
    inner = np.flatnonzero((lt[1:-1] < lt[:-2]) & (lt[1:-1] <= lt[2:])) + 1
    minima = tuple(float(x[i]) for i in inner)
    i = int(np.argmin(lt))
    x_star = float(x[i]) if 0 < i < x.size - 1 else float("nan")
    c = eps ** 2 + h ** 2
    k = 2.0 if kind == "eq58" else 1.0
    exact = float(np.exp((k * Nbar * sigma ** 2 - c) / (4.0 * sigma ** 2)))
    return CurveResult(kind, x, tau, minima, x_star, exact)
