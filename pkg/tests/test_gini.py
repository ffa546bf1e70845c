import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import spearmanr

from kernelbias.clustering import (Histogram, aa_energy, breiman_optimal_split,
                                   continuous_gini_energy, discrete_gini_energy,
                                   exhaustive_gini_split, gini_impurity, gini_mode_verifier,
                                   gini_objective, ratio_inequality, superlevel_partitions)
from kernelbias.errors import ArgumentError, EnergyError, SizeError
from kernelbias.kernels import gaussian_kernel_matrix

from conftest import random_partition


def test_discrete_example():
    rep = discrete_gini_energy([1, 0, 0], [0.5, 0.3, 0.2])
    assert rep.value == pytest.approx(0.24, abs=1e-15)
    assert rep.terms[1] == 0.0


def test_single_bin_cluster_is_pure():
    rep = discrete_gini_energy([0, 1, 2], [0.2, 0.3, 0.5])
    assert rep.value == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("m", [2, 5, 10])
def test_uniform_impurity(m):
    assert gini_impurity(np.full(m, 1 / m)) == pytest.approx(1 - 1 / m, rel=1e-14)
    assert discrete_gini_energy(np.zeros(m, int), np.full(m, 1 / m)).value == pytest.approx(1 - 1 / m)


def test_breiman_examples():
    lab, rep, tie = breiman_optimal_split([0.5, 0.3, 0.2])
    assert lab.tolist() == [1, 0, 0] and rep.value == pytest.approx(0.24) and not tie
    lab, rep, tie = breiman_optimal_split([0.9, 0.1])
    assert lab.tolist() == [1, 0] and rep.value == pytest.approx(0.0, abs=1e-15)
    assert breiman_optimal_split([0.4, 0.4, 0.2])[2]


def test_breiman_matches_exhaustive_three_bins():
    P = [0.5, 0.3, 0.2]
    vals = [discrete_gini_energy(a, P).value for a in ([0, 1, 1], [0, 1, 0], [0, 0, 1])]
    assert min(vals) == pytest.approx(breiman_optimal_split(P)[1].value)


def test_breiman_random_histograms():
    r = np.random.default_rng(0)
    for _ in range(50):
        L = int(r.integers(3, 13))
        P = r.dirichlet(np.ones(L))
        assert exhaustive_gini_split(P)[1].value == pytest.approx(
            breiman_optimal_split(P)[1].value, abs=1e-14)


def test_exhaustive_against_itertools():
    r = np.random.default_rng(1)
    P = r.dirichlet(np.ones(6))
    best = min(discrete_gini_energy(np.array((0,) + a), P).value
               for a in itertools.product((0, 1), repeat=5) if any(a))
    assert exhaustive_gini_split(P)[1].value == pytest.approx(best, abs=1e-15)


def test_exhaustive_limits():
    with pytest.raises(SizeError):
        exhaustive_gini_split(np.full(30, 1 / 30))
    with pytest.raises(ArgumentError):
        exhaustive_gini_split([1.0])


def test_histogram_validation():
    with pytest.raises(ArgumentError):
        Histogram([0.5, 0.6])
    with pytest.raises(ArgumentError):
        Histogram([1.5, -0.5])
    assert Histogram.from_counts([1, 3]).P.tolist() == [0.25, 0.75]


def test_zero_mass_cluster():
    with pytest.raises(EnergyError):
        discrete_gini_energy([0, 1], [1.0, 0.0])


def test_continuous_coincident_points():
    rep = continuous_gini_energy([[0.0], [0.0]], [0, 0], 1.0)
    assert rep.value == pytest.approx(-2 / np.sqrt(2 * np.pi), rel=1e-14)


def test_continuous_equals_aa_on_normalized_kernel(rng):
    X = rng.normal(size=(20, 2))
    A = gaussian_kernel_matrix(X, 0.6, normalized=True)
    for _ in range(10):
        lab = random_partition(rng, 20, 3)
        a = continuous_gini_energy(X, lab, 0.6).value
        assert a == pytest.approx(aa_energy(A, lab).value, rel=1e-10)


def test_continuous_ranks_like_aa_on_bimodal():
    r = np.random.default_rng(3)
    X = np.concatenate([r.normal(-2, 0.5, 150), r.normal(2, 0.5, 150)])[:, None]
    sigma = 0.2
    A = gaussian_kernel_matrix(X, sigma)
    labs = [random_partition(r, 300, 2) for _ in range(50)]
    g = [continuous_gini_energy(X, lab, sigma).value for lab in labs]
    a = [aa_energy(A, lab).value for lab in labs]
    assert spearmanr(g, a).statistic >= 0.99


def test_triangular_density_near_bound():
    x = np.linspace(0, 1, 10 ** 4)
    rep = gini_mode_verifier(x, 2 * x)
    assert rep.violations == 0
    assert rep.gap <= 0.02


def test_constant_density_gives_twice_expectation():
    x = np.linspace(0, 1, 1000)
    rho = np.ones_like(x)
    r = np.random.default_rng(0)
    for _ in range(20):
        I = r.random(x.size) < 0.3
        dx = np.gradient(x)
        L = gini_objective(rho / (rho * dx).sum(), dx, I)
        assert L == pytest.approx(2 * (rho ** 2 * dx).sum() / (rho * dx).sum() ** 2, rel=1e-12)
    assert gini_mode_verifier(x, rho).constant


def test_gini_objective_rejects_trivial_region():
    with pytest.raises(EnergyError):
        gini_objective(np.ones(5), 0.25, np.ones(5))


def test_superlevel_sets_nested():
    rho = np.array([0.1, 0.5, 0.9, 0.4])
    a, b = superlevel_partitions(rho, [0.1, 0.6])
    assert a.tolist() == [False, False, True, False]
    assert np.all(b >= a)


def test_verifier_counts_violating_extra_partitions():
    x = np.linspace(0, 1, 200)
    rep = gini_mode_verifier(x, 1 + x, slack=-1e9)
    assert rep.violations == len(rep.values)


def test_ratio_inequality_random():
    r = np.random.default_rng(0)
    a, b, c, d = r.uniform(0.01, 10, (4, 500))
    swap = a / b > c / d
    a[swap], c[swap] = c[swap], a[swap]
    b[swap], d[swap] = d[swap], b[swap]
    assert ratio_inequality(a, b, c, d)


def test_ratio_inequality_needs_positive():
    with pytest.raises(ArgumentError):
        ratio_inequality(0, 1, 1, 1)


@given(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=10))
def test_breiman_closed_form_is_optimal(ws):
    P = np.array(ws) / np.sum(ws)
    assert breiman_optimal_split(P)[1].value <= exhaustive_gini_split(P)[1].value + 1e-14


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8), st.integers(0, 2 ** 31 - 1))
def test_discrete_gini_relabel_symmetric(ws, seed):
    P = np.array(ws) / np.sum(ws)
    r = np.random.default_rng(seed)
    lab = random_partition(r, P.size, 2)
    assert discrete_gini_energy(lab, P).value == pytest.approx(discrete_gini_energy(1 - lab, P).value)
