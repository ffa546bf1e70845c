"""Density estimates, bandwidth rules and the adaptive-bandwidth density law."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import DataSet, Partition, WeightVector, as_points
from .errors import ArgumentError, DegenerateDimensionError, DimensionError

__all__ = [
    "DensityField",
    "BandwidthField",
    "DensityTransform",
    "scott_bandwidth",
    "scott_scalar",
    "parzen_density",
    "knn_radius",
    "knn_density",
    "adaptive_bandwidth",
    "equalization_weights",
]


@dataclass(frozen=True)
class DensityField:
    """Per-point density values.

    Attributes
    ----------
    rho : ndarray
        Nonnegative densities (``inf`` allowed for duplicated points).
    estimator : str
        ``'parzen'`` or ``'knn'``.
    param : float
        Bandwidth (Parzen, scalar summary) or K (KNN).
    normalization : str
        ``'probability'`` when rho is a proper density, ``'physical'`` when
        constant factors were dropped.
    infinite : tuple of int
        Indices with infinite density.
    """

    rho: np.ndarray
    estimator: str = "parzen"
    param: float = float("nan")
    normalization: str = "probability"

    def __post_init__(self):
        rho = np.array(self.rho, dtype=np.float64)
        if rho.ndim != 1:
            raise DimensionError("density must be 1-D")
        if np.any(np.isnan(rho)) or np.any(rho < 0):
            raise ArgumentError("densities must be nonnegative")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def infinite(self) -> tuple:
        return tuple(int(i) for i in np.flatnonzero(np.isinf(self.rho)))

    def clamped(self) -> np.ndarray:
        """Densities with ``inf`` replaced by the largest finite value."""
        rho = self.rho.copy()
        bad = np.isinf(rho)
        if bad.any():
            finite = rho[~bad]
            if finite.size == 0:
                raise ArgumentError("all densities are infinite")
            rho[bad] = finite.max()
        return rho

    def __len__(self):
        return self.rho.size

    def __array__(self, dtype=None, copy=None):
        return self.rho if dtype is None else self.rho.astype(dtype)

    def to_json(self) -> str:
        return json.dumps({
            "estimator": self.estimator,
            "param": self.param,
            "normalization": self.normalization,
            "rho": [float(v) if np.isfinite(v) else "inf" for v in self.rho],
        })


@dataclass(frozen=True)
class BandwidthField:
    """Per-point bandwidths: scalars sigma_p or SPD matrices Sigma_p.

    ``values`` has shape (n,) for isotropic bandwidths or (n, N, N) for
    full matrices. A global bandwidth is represented by identical entries.
    For the scalar case Sigma_p = sigma_p^2 I.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim == 1:
            if v.size == 0 or not np.all(np.isfinite(v)) or np.any(v <= 0):
                raise ArgumentError("bandwidths must be finite and positive")
        elif v.ndim == 3 and v.shape[1] == v.shape[2]:
            if not np.allclose(v, np.swapaxes(v, 1, 2), rtol=0, atol=1e-12 * max(1.0, np.abs(v).max())):
                raise ArgumentError("bandwidth matrices must be symmetric")
            v = (v + np.swapaxes(v, 1, 2)) / 2
            if np.linalg.eigvalsh(v).min() <= 0:
                raise ArgumentError("bandwidth matrices must be positive definite")
        else:
            raise DimensionError("bandwidths must have shape (n,) or (n, N, N)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, sigma: float, n: int) -> "BandwidthField":
        return cls(np.full(n, float(sigma)))

    @property
    def is_scalar(self) -> bool:
        return self.values.ndim == 1

    @property
    def is_global(self) -> bool:
        return bool(np.all(self.values == self.values[0]))

    def __len__(self):
        return self.values.shape[0]

    def matrices(self, dim: int) -> np.ndarray:
        """Return Sigma_p as an (n, dim, dim) array."""
        if self.is_scalar:
            return self.values[:, None, None] ** 2 * np.eye(dim)
        if self.values.shape[1] != dim:
            raise DimensionError("bandwidth matrices do not match data dimension")
        return self.values

    def to_json(self) -> str:
        return json.dumps({"values": self.values.tolist()})


_TRANSFORMS = ("identity", "constant", "log")


@dataclass(frozen=True)
class DensityTransform:
    """Target density transformation tau used by the density law.

    kind is ``'identity'`` (tau(r) = r), ``'constant'`` (tau = 1) or
    ``'log'`` (tau(r) = log(1 + alpha r) / alpha).
    """

    kind: str = "constant"
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in _TRANSFORMS:
            raise ArgumentError(f"unknown transform {self.kind!r}")
        if self.kind == "log" and not self.alpha > 0:
            raise ArgumentError("log transform needs alpha > 0")

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=np.float64)
        if self.kind == "identity":
            return rho.copy()
        if self.kind == "constant":
            return np.ones_like(rho)
        return np.log1p(self.alpha * rho) / self.alpha


def scott_bandwidth(data) -> BandwidthField:
    """Scott's rule: diagonal Sigma with sqrt(Sigma_ii) = r_i n^(-1/(N+4)).

    ``r_i`` is the sample standard deviation (ddof=1) of feature i.
    """
    X = as_points(data)
    n, dim = X.shape
    if n < 2:
        raise ArgumentError("Scott's rule needs at least 2 points")
    r = X.std(axis=0, ddof=1)
    if not np.all(np.isfinite(r)):
        raise ArgumentError("feature variance is not finite")
    if np.any(r == 0):
        raise DegenerateDimensionError(
            f"zero variance in dimension(s) {np.flatnonzero(r == 0).tolist()}")
    s = r * n ** (-1.0 / (dim + 4))
    S = np.diag(s ** 2)
    return BandwidthField(np.repeat(S[None], n, axis=0))


def scott_scalar(data) -> float:
    """Isotropic summary of Scott's rule: geometric mean of the per-axis widths.

    This preserves the kernel volume |Sigma|^(1/2).
    """
    S = scott_bandwidth(data).values[0]
    return float(np.exp(np.mean(np.log(np.sqrt(np.diag(S))))))


def _inverse_and_logdet(bw: BandwidthField, dim: int):
    M = bw.matrices(dim)
    sign, logdet = np.linalg.slogdet(M)
    if np.any(sign <= 0):
        raise ArgumentError("singular bandwidth matrix")
    return np.linalg.inv(M), logdet


def parzen_density(data, bandwidth: Union[BandwidthField, float], cluster=None, query=None) -> DensityField:
    """Gaussian kernel density estimate P(x|S) = mean_{q in S} k(x, f_q).

    Parameters
    ----------
    data : DataSet or array_like
    bandwidth : BandwidthField or float
        Only the first entry of a BandwidthField is used (global bandwidth).
    cluster : tuple (Partition, int), optional
        Restrict the sum to points of one cluster. Defaults to all points.
    query : array_like, optional
        Evaluation points; defaults to the data points themselves.
    """
    X = as_points(data)
    n, dim = X.shape
    if np.isscalar(bandwidth):
        if not bandwidth > 0:
            raise ArgumentError("bandwidth must be positive")
        bandwidth = BandwidthField.constant(float(bandwidth), n)
    if cluster is not None:
        part, k = cluster
        lab = part.assignment if isinstance(part, Partition) else np.asarray(part)
        if lab.shape != (n,):
            raise DimensionError("partition length does not match data")
        S = X[lab == k]
        if S.shape[0] == 0:
            raise ArgumentError(f"cluster {k} is empty")
    else:
        S = X
    Q = X if query is None else np.asarray(query, dtype=np.float64).reshape(-1, dim)
    Sinv, logdet = _inverse_and_logdet(
        BandwidthField(bandwidth.matrices(dim)[:1]), dim)
    Sinv, logdet = Sinv[0], logdet[0]
    m2 = cdist(Q, S, "mahalanobis", VI=Sinv) ** 2
    norm = np.exp(-0.5 * logdet - 0.5 * dim * np.log(2 * np.pi))
    rho = norm * np.exp(-0.5 * m2).mean(axis=1)
    summary = float(np.exp(logdet / (2 * dim)))
    return DensityField(rho, "parzen", summary, "probability")


def knn_radius(data, K: int) -> np.ndarray:
    """Distance from each point to its K-th nearest neighbour (self excluded).

    Ties are resolved by stable point index, which does not change the
    K-th distance itself.
    """
    X = as_points(data)
    n = X.shape[0]
    if int(K) != K or not 1 <= K < n:
        raise ArgumentError(f"K must satisfy 1 <= K < n (K={K}, n={n})")
    D = cdist(X, X)
    np.fill_diagonal(D, np.inf)
    # column n-1 holds self (inf); the K-th neighbour is column K-1
    return np.sort(D, axis=1, kind="stable")[:, int(K) - 1]


def knn_density(data, K: int) -> DensityField:
    """KNN density rho_p = K / (n R_p^N) with the unit-ball volume dropped."""
    X = as_points(data)
    n, dim = X.shape
    R = knn_radius(X, K)
    with np.errstate(divide="ignore"):
        rho = K / (n * R ** dim)
    return DensityField(rho, "knn", float(K), "physical")


def adaptive_bandwidth(rho, tau: Optional[DensityTransform] = None, N: int = 1,
                       reference: Optional[float] = None, data=None) -> BandwidthField:
    """Density-law bandwidths sigma_p = c (tau(rho_p)/rho_p)^(1/N).

    The free scale c makes the median sigma_p equal ``reference``. When
    ``reference`` is omitted it defaults to :func:`scott_scalar` of ``data``.

    Parameters
    ----------
    rho : DensityField or array_like
        Infinite entries are clamped to the largest finite value.
    tau : DensityTransform
        Defaults to the constant transform (density equalization).
    N : int
        Data dimension.
    reference : float, optional
    data : DataSet, optional
        Used only to compute the default reference.
    """
    tau = DensityTransform("constant") if tau is None else tau
    field = rho if isinstance(rho, DensityField) else DensityField(rho)
    r = field.clamped()
    if np.any(r <= 0):
        raise ArgumentError("adaptive bandwidth needs strictly positive densities")
    if reference is None:
        if data is None:
            raise ArgumentError("give either a reference bandwidth or the data")
        reference = scott_scalar(data)
    if not reference > 0:
        raise ArgumentError("reference bandwidth must be positive")
    # log domain keeps tiny densities in high dimension representable
    log_shape = (np.log(tau(r)) - np.log(r)) / N
    shape = np.exp(log_shape - np.median(log_shape))
    return BandwidthField(reference * shape / np.median(shape))


def equalization_weights(rho) -> WeightVector:
    """Weights w_p proportional to 1/rho_p, normalized to mean 1."""
    field = rho if isinstance(rho, DensityField) else DensityField(rho)
    r = field.clamped()
    if np.any(r <= 0):
        raise ArgumentError("equalization weights need strictly positive densities")
    inv = 1.0 / r
    return WeightVector(inv / inv.mean())
