import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial.distance import cdist

from kernelbias.dataset import DataSet, generate_two_moons
from kernelbias.density import BandwidthField, adaptive_bandwidth, knn_density, knn_radius
from kernelbias.analysis import coefficient_of_variation
from kernelbias.embedding import (DistanceMatrix, additive_constant, centered_gram,
                                  density_inversion_distances, density_transform,
                                  density_transform_curves, euclidean_embedding,
                                  geodesic_proxy_distances, mds_project)
from kernelbias.errors import ArgumentError, DomainError
from kernelbias.kernels import gaussian_kernel_matrix


def _star():
    D = np.full((4, 4), 2.0)
    D[0, 1:] = D[1:, 0] = 1.0
    np.fill_diagonal(D, 0.0)
    return D


def _h_oracle(D):
    # B(h) = B(0) + h^2/2 J and B(0) 1 = 0, so h^2 = -2 lambda_min(B(0))
    n = D.shape[0]
    J = np.eye(n) - 1.0 / n
    lam = np.linalg.eigvalsh(-0.5 * J @ (D ** 2) @ J)[0]
    return np.sqrt(max(0.0, -2 * lam))


def test_line_needs_no_constant():
    D = cdist([[0.0], [1.0], [2.0]], [[0.0], [1.0], [2.0]])
    assert additive_constant(D) == 0.0


def test_star_needs_positive_constant():
    h = additive_constant(_star())
    assert h > 0
    # h is the smallest value with lambda_min >= -tol, so it sits about tol/h below the root
    assert h == pytest.approx(_h_oracle(_star()), abs=1e-8)
    # frozen value from the eigenvalue oracle
    assert h ** 2 == pytest.approx(0.5, abs=1e-8)


def test_star_h_is_minimal():
    tol = 1e-9
    D = DistanceMatrix.from_distances(_star())
    h = additive_constant(D, tol)
    assert np.linalg.eigvalsh(centered_gram(D.squared, h))[0] >= -tol
    assert np.linalg.eigvalsh(centered_gram(D.squared, max(0.0, h - 10 * tol)))[0] < -tol


def test_equilateral_triangle():
    D = np.ones((3, 3)) - np.eye(3)
    E = euclidean_embedding(D)
    assert E.h == 0.0 and E.dim == 2
    got = cdist(E.coords, E.coords)
    np.testing.assert_allclose(got[~np.eye(3, dtype=bool)], 1.0, atol=1e-9)


def test_two_points():
    E = euclidean_embedding(np.array([[0.0, 5.0], [5.0, 0.0]]))
    assert E.h == 0.0 and E.dim == 1
    assert abs(E.coords[0, 0] - E.coords[1, 0]) == pytest.approx(5.0)


def test_star_embedding_realizes_shifted_distances():
    E = euclidean_embedding(_star())
    target = _star() ** 2 + E.h ** 2 * (1 - np.eye(4))
    np.testing.assert_allclose(cdist(E.coords, E.coords, "sqeuclidean"), target, atol=1e-8)
    assert E.max_residual <= 1e-6


def test_embedding_sign_convention(rng):
    E = euclidean_embedding(DistanceMatrix.from_points(rng.normal(size=(6, 2))))
    idx = np.argmax(np.abs(E.coords), axis=0)
    assert np.all(E.coords[idx, np.arange(E.dim)] > 0)


def test_distance_matrix_validation():
    with pytest.raises(ArgumentError):
        DistanceMatrix(np.array([[0.0, -1.0], [-1.0, 0.0]]))
    with pytest.raises(ArgumentError):
        DistanceMatrix(np.array([[1.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ArgumentError):
        DistanceMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]))
    DistanceMatrix(np.array([[0.0, -1.0], [-1.0, 0.0]]), "nc_modified")


def test_geodesic_reduces_to_scaled_euclidean(rng):
    X = rng.normal(size=(8, 2))
    G = geodesic_proxy_distances(X, BandwidthField.constant(0.5, 8))
    np.testing.assert_allclose(G.D, cdist(X, X) / 0.5, rtol=1e-12)


def test_geodesic_pair_example():
    G = geodesic_proxy_distances([[0.0], [2.0]], BandwidthField([1.0, 2.0]))
    assert G.squared[0, 1] == pytest.approx(2.5, rel=1e-15)


def test_geodesic_kernel_link():
    X = np.array([[0.0], [2.0], [3.0]])
    bw = BandwidthField([1.0, 2.0, 0.5])
    G = geodesic_proxy_distances(X, bw)
    k = lambda p, q: np.exp(-0.5 * (X[p, 0] - X[q, 0]) ** 2 / bw.values[p] ** 2)
    assert np.exp(-G.squared[0, 2] / 2) == pytest.approx(np.sqrt(k(0, 2) * k(2, 0)), rel=1e-14)


def test_geodesic_embedding_equalizes_density():
    d, _ = generate_two_moons(150, 0.05, "graded", 10, seed=0)
    bw = adaptive_bandwidth(knn_density(d, 10), None, 2, data=d)
    E = euclidean_embedding(geodesic_proxy_distances(d, bw))
    assert E.max_residual <= 1e-6
    cv0 = coefficient_of_variation(knn_radius(d, 10))
    cv1 = coefficient_of_variation(knn_radius(E.coords, 10))
    assert cv1 <= 0.5 * cv0


def test_inversion_unit_degrees_is_identity():
    X = np.array([[0.0], [100.0], [250.0]])
    A = gaussian_kernel_matrix(X, 1.0)
    D = density_inversion_distances(X, A, 1.0)
    np.testing.assert_allclose(D.squared, cdist(X, X, "sqeuclidean"), rtol=1e-12)


def test_inversion_all_ones_pair():
    X = np.array([[0.0], [0.0]])
    D = density_inversion_distances(X, np.ones((2, 2)), 0.7)
    assert D.squared[0, 1] == pytest.approx(2 * 0.49 * np.log(4), rel=1e-14)
    assert D.kind == "nc_modified"


def test_inversion_kernel_identity(rng):
    X = rng.normal(size=(10, 2))
    for s in (0.3, 1.0):
        A = gaussian_kernel_matrix(X, s).A
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            D = density_inversion_distances(X, A, s)
        d = A.sum(1)
        off = ~np.eye(10, dtype=bool)
        np.testing.assert_allclose(np.exp(-D.squared / (2 * s ** 2))[off],
                                   (A / np.outer(d, d))[off], rtol=1e-12)


def test_inversion_warns_on_negative_entries():
    X = np.array([[0.0], [1.0]])
    with pytest.warns(RuntimeWarning):
        density_inversion_distances(X, 0.1 * np.ones((2, 2)), 1.0)


def test_transform_closed_forms():
    x = np.array([1.0, 10.0, 1000.0])
    np.testing.assert_allclose(density_transform(x, "eq58"), x / (1 + np.log(x)) ** 10, rtol=1e-13)
    np.testing.assert_allclose(density_transform(x, "eq59"), x ** 2 / (1 + np.log(x)) ** 10, rtol=1e-13)


def test_transform_domain():
    with pytest.raises(DomainError):
        density_transform(np.array([0.0]), "eq58")
    with pytest.raises(DomainError):
        density_transform(np.array([0.01]), "eq58", sigma=1.0)
    with pytest.raises(ArgumentError):
        density_transform(np.array([1.0]), "bogus")


def test_eq58_interior_minimum():
    x = np.logspace(0, 6, 6001)
    c = density_transform_curves("eq58", x)
    assert len(c.interior_minima) == 1
    assert 1 < c.x_star < 1e6


def test_curve_minima_scale():
    # unweighted minimum near 10^4, weighted one below 10^2
    x = np.logspace(0, 6, 60001)
    a = density_transform_curves("eq58", x)
    b = density_transform_curves("eq59", x)
    assert a.x_star == pytest.approx(np.exp(9), rel=1e-3)
    assert b.x_star == pytest.approx(np.exp(4), rel=1e-3)
    assert a.x_star_exact == pytest.approx(np.exp(9), rel=1e-12)
    assert 25 < b.x_star < 75


@pytest.mark.parametrize("kind,nbars", [("eq58", (4, 8, 16)), ("eq59", (8, 16, 32))])
def test_x_star_grows_with_embedding_dimension(kind, nbars):
    x = np.logspace(0, 12, 24001)
    xs = [density_transform_curves(kind, x, Nbar=nb).x_star for nb in nbars]
    assert all(np.isfinite(xs))
    assert xs[0] < xs[1] < xs[2]


def test_mds_triangle():
    D = np.ones((3, 3)) - np.eye(3)
    Y, padded = mds_project(D, 2)
    assert not padded
    np.testing.assert_allclose(cdist(Y, Y), D, atol=1e-9)


def test_mds_square_projection_loses_distance():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    Y, _ = mds_project(DistanceMatrix.from_points(X), 1)
    assert np.abs(cdist(Y, Y) - cdist(X, X)).max() > 0


def test_mds_pads_and_accepts_embedding_result():
    E = euclidean_embedding(np.array([[0.0, 5.0], [5.0, 0.0]]))
    Y, padded = mds_project(E, 3)
    assert padded and Y.shape == (2, 3)
    with pytest.raises(ArgumentError):
        mds_project(E, 0)


@given(st.integers(3, 20), st.integers(1, 3), st.integers(0, 2 ** 31 - 1))
def test_euclidean_input_embeds_exactly(n, dim, seed):
    X = np.random.default_rng(seed).normal(size=(n, dim))
    E = euclidean_embedding(DistanceMatrix.from_points(X))
    assert E.h <= 1e-6
    assert E.max_residual <= 1e-8
    assert E.dim <= min(dim, n - 1)


@given(st.integers(3, 15), st.integers(0, 2 ** 31 - 1))
def test_additive_constant_matches_oracle(n, seed):
    r = np.random.default_rng(seed)
    D = r.uniform(0.5, 2.0, (n, n))
    D = (D + D.T) / 2
    np.fill_diagonal(D, 0.0)
    h = additive_constant(D)
    assert h == pytest.approx(_h_oracle(D), abs=1e-7)
    E = euclidean_embedding(D)
    assert E.max_residual <= 1e-6


@given(st.integers(3, 15), st.integers(0, 2 ** 31 - 1))
def test_embedding_rigid_motion_invariant(n, seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(n, 2))
    th = r.uniform(0, 2 * np.pi)
    Q = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    a = euclidean_embedding(DistanceMatrix.from_points(X)).coords
    b = euclidean_embedding(DistanceMatrix.from_points(X @ Q.T + 3.0)).coords
    np.testing.assert_allclose(cdist(a, a), cdist(b, b), atol=1e-8)
