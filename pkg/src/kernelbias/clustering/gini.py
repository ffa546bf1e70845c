"""Discrete and continuous Gini criteria and checks of the mode-isolation bias."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..dataset import Partition, as_points
from ..density import BandwidthField, parzen_density
from ..errors import ArgumentError, DimensionError, EnergyError, SizeError
from .energies import EnergyReport, labels_of

__all__ = [
    "Histogram",
    "gini_impurity",
    "discrete_gini_energy",
    "breiman_optimal_split",
    "exhaustive_gini_split",
    "continuous_gini_energy",
    "gini_objective",
    "superlevel_partitions",
    "GiniModeReport",
    "gini_mode_verifier",
    "ratio_inequality",
]


@dataclass(frozen=True)
class Histogram:
    """Probabilities over a finite label set (sum 1 within 1e-12)."""

    P: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=np.float64)
        if P.ndim != 1 or P.size == 0:
            raise DimensionError("histogram must be a nonempty 1-D array")
        if np.any(P < 0) or not np.all(np.isfinite(P)):
            raise ArgumentError("probabilities must be finite and nonnegative")
        if abs(P.sum() - 1.0) > 1e-12:
            raise ArgumentError(f"probabilities sum to {P.sum()!r}, not 1")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @classmethod
    def from_counts(cls, counts) -> "Histogram":
        c = np.asarray(counts, dtype=np.float64)
        return cls(c / c.sum())

    def __len__(self):
        return self.P.size


def _probs(P):
    return P.P if isinstance(P, Histogram) else Histogram(P).P


def gini_impurity(P) -> float:
    """G = 1 - sum_l P(l)^2 for a (possibly unnormalized) histogram."""
    p = np.asarray(P.P if isinstance(P, Histogram) else P, dtype=np.float64)
    s = p.sum()
    if s <= 0:
        raise EnergyError("impurity of an empty histogram is undefined")
    q = p / s
    return float(1.0 - (q ** 2).sum())


def discrete_gini_energy(assignment, P) -> EnergyReport:
    """Gini criterion sum_k |S_k| G(S_k) for a split of the bins.

    ``assignment[l]`` is the cluster of bin l; |S_k| is the probability mass
    of cluster k and G uses the conditional distribution within it.
    """
    p = _probs(P)
    lab, K = labels_of(assignment, p.size)
    mass = np.bincount(lab, weights=p, minlength=K)
    if np.any(mass <= 0):
        raise EnergyError(f"cluster(s) {np.flatnonzero(mass <= 0).tolist()} have zero mass")
    sq = np.bincount(lab, weights=p ** 2, minlength=K)
    terms = mass - sq / mass  # = mass * (1 - sum (p/mass)^2)
    return EnergyReport("gini_discrete", float(terms.sum()), tuple(terms.tolist()))


def breiman_optimal_split(P):
    """Closed-form optimal binary split {mode} | {rest}.

    Returns
    -------
    assignment : ndarray
        1 for the mode bin, 0 elsewhere.
    energy : EnergyReport
    tie : bool
        True when the mode is not unique (the lowest index is used).
    """
    p = _probs(P)
    if p.size < 2:
        raise ArgumentError("a split needs at least two bins")
    mode = int(np.argmax(p))
    tie = int((p == p[mode]).sum()) > 1
    lab = np.zeros(p.size, dtype=np.int64)
    lab[mode] = 1
    return lab, discrete_gini_energy(lab, p), tie


def exhaustive_gini_split(P, max_bins: int = 24):
    """Minimum Gini criterion over all 2-partitions of the bins.

    Ties go to the first split in lexicographic order (bin 0 fixed to
    cluster 0). Bins with zero mass may land in either cluster.

    Returns
    -------
    assignment : ndarray
    energy : EnergyReport
    """
    p = _probs(P)
    L = p.size
    if L < 2:
        raise ArgumentError("a split needs at least two bins")
    if L > max_bins:
        raise SizeError(f"{L} bins exceed the exhaustive limit {max_bins}")
    m = np.arange(1, 1 << (L - 1), dtype=np.int64)
    Z = ((m[:, None] >> np.arange(L - 1, -1, -1)) & 1).astype(np.float64)
    best = np.full(Z.shape[0], np.inf)
    m1, m0 = Z @ p, (1 - Z) @ p
    s1, s0 = Z @ p ** 2, (1 - Z) @ p ** 2
    ok = (m1 > 0) & (m0 > 0)
    best[ok] = (m1 - s1 / np.where(ok, m1, 1))[ok] + (m0 - s0 / np.where(ok, m0, 1))[ok]
    i = int(np.argmin(best))
    lab = Z[i].astype(np.int64)
    return lab, discrete_gini_energy(lab, p)


def continuous_gini_energy(data, S, bandwidth) -> EnergyReport:
    """Parzen energy -sum_k sum_{p in S_k} P(f_p | S_k).

    Each cluster's density is a Gaussian Parzen estimate over its own
    points; this equals average association with the normalized Gaussian
    kernel.
    """
    X = as_points(data)
    lab, K = labels_of(S, X.shape[0])
    if np.any(np.bincount(lab, minlength=K) == 0):
        raise EnergyError("continuous Gini energy is undefined for empty clusters")
    if np.isscalar(bandwidth):
        bandwidth = BandwidthField.constant(float(bandwidth), X.shape[0])
    terms = []
    for k in range(K):
        m = lab == k
        dens = parzen_density(X, bandwidth, cluster=(lab, k), query=X[m])
        terms.append(-float(dens.rho.sum()))
    return EnergyReport("gini_continuous", float(sum(terms)), tuple(terms))


def gini_objective(rho, dx, indicator) -> float:
    """L(s) = E[I rho]/E[I] + E[(1-I) rho]/(1 - E[I]) with E under rho.

    ``rho`` is sampled on a grid with cell sizes ``dx`` and ``indicator`` is
    the membership of each cell in the region s.
    """
    rho = np.asarray(rho, dtype=np.float64)
    dx = np.broadcast_to(np.asarray(dx, dtype=np.float64), rho.shape)
    I = np.asarray(indicator, dtype=np.float64)
    mass = rho * dx
    EI = mass @ I
    Erho_in = (mass * rho) @ I
    Erho_out = (mass * rho) @ (1.0 - I)
    total = mass.sum()
    if not (0 < EI < total):
        raise EnergyError("region must have probability strictly between 0 and 1")
    return float(Erho_in / EI + Erho_out / (total - EI))


def superlevel_partitions(rho, eps: Sequence[float]):
    """Indicators of s_eps = {x : rho(x) >= sup rho - eps}."""
    rho = np.asarray(rho, dtype=np.float64)
    top = rho.max()
    return [rho >= top - e for e in eps]


@dataclass(frozen=True)
class GiniModeReport:
    eps: tuple
    values: tuple
    max_value: float
    bound: float
    expected_rho: float
    sup_rho: float
    violations: int
    constant: bool

    @property
    def gap(self) -> float:
        """Relative distance of the best superlevel split from the bound."""
        return (self.bound - self.max_value) / self.bound


def gini_mode_verifier(x, rho, eps: Optional[Sequence[float]] = None, partitions=(),
                       slack: float = 1e-9) -> GiniModeReport:
    """Evaluate L on superlevel sets (and optional extra regions) against the bound.

    The bound is E rho + sup rho with E rho = integral of rho^2. ``rho`` is
    renormalized by its Riemann sum. ``violations`` counts regions (from both
    families) with L above the bound by more than ``slack``.
    """
    x = np.asarray(x, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    if x.shape != rho.shape or x.ndim != 1 or x.size < 3:
        raise DimensionError("x and rho must be matching 1-D grids")
    if np.any(rho < 0) or not np.any(rho > 0):
        raise ArgumentError("density must be nonnegative with positive mass")
    dx = np.gradient(x)
    rho = rho / (rho * dx).sum()
    Erho = float((rho ** 2 * dx).sum())
    sup = float(rho.max())
    bound = Erho + sup
    constant = bool(np.ptp(rho) <= 1e-12 * sup)
    if eps is None:
        span = sup - rho.min()
        eps = span * np.logspace(-6, 0, 61)[:-1]
    vals = []
    used_eps = []
    for e, I in zip(eps, superlevel_partitions(rho, eps)):
        if I.all() or not I.any():
            continue
        vals.append(gini_objective(rho, dx, I))
        used_eps.append(float(e))
    extra = [gini_objective(rho, dx, I) for I in partitions]
    viol = int(sum(v > bound + slack for v in vals + extra))
    mx = max(vals) if vals else float("nan")
    return GiniModeReport(tuple(used_eps), tuple(vals), mx, bound, Erho, sup, viol, constant)


def ratio_inequality(a, b, c, d) -> bool:
    """Check a/b <= (a+c)/(b+d) <= c/d for positive a, b, c, d with a/b <= c/d."""
    a, b, c, d = (np.asarray(v, dtype=np.float64) for v in (a, b, c, d))
    if np.any(a <= 0) or np.any(b <= 0) or np.any(c <= 0) or np.any(d <= 0):
        raise ArgumentError("all numbers must be positive")
    # cross-multiplied to avoid rounding in the quotients
    lo = a * (b + d) <= (a + c) * b * (1 + 1e-15)
    hi = (a + c) * d <= c * (b + d) * (1 + 1e-15)
    return bool(np.all(lo & hi))
