"""Tests for block matrices, weighted vectors and the truncated constants."""
import math

import numpy as np
import pytest

from src.blocks.constants import (apply_constant, product_constant, product_plus_constant,
                                  weight_ratio_chain_holds)
from src.blocks.matrix import (BlockMatrix, Flavor, apply, block_mul, hermitian_block,
                               is_normal_form, norm_s_beta, norm_s_beta_plus, normal_form_from_hermitian,
                               outer, pair_factor, project_normal_form, symplectic_unit, to_complex,
                               to_real, xi_eta)
from src.blocks.vector import WeightedVector
from src.errors import FlavorMismatchError, InvalidParameterError
from src.spectrum.models import ClusterSet, ModeId


@pytest.fixture
def clusters():
    """Weights 1, 2, 3 with one, two and one modes."""
    return ClusterSet.from_sizes([1, 2, 1])


@pytest.fixture
def dense(clusters):
    rng = np.random.default_rng(7)
    return rng.standard_normal((clusters.n_vars, clusters.n_vars))


def test_symplectic_unit_squares_to_minus_identity():
    J = symplectic_unit(3)
    np.testing.assert_allclose(J @ J, -np.eye(6))
    assert J[1, 0] == 1.0 and J[0, 1] == -1.0


def test_block_shapes_are_checked(clusters):
    with pytest.raises(InvalidParameterError):
        BlockMatrix(clusters, {(0, 1): np.zeros((2, 2))})


def test_dense_round_trip_and_sparsity(clusters, dense):
    M = BlockMatrix.from_dense(clusters, dense)
    assert len(M.blocks) == 9
    np.testing.assert_allclose(M.to_dense(), dense)
    D = BlockMatrix.diagonal(clusters, [1.0, 2.0, 3.0, 4.0])
    assert sorted(D.blocks) == [(0, 0), (1, 1), (2, 2)]
    assert D.bandwidth() == 0


def test_weighted_norm_of_diagonal(clusters):
    D = BlockMatrix.diagonal(clusters, [1.0, 2.0, 3.0, 1.0], s=2.0, beta=0.5)
    report = norm_s_beta(D)
    assert report.value == pytest.approx(6.0)
    assert report.witness == (1, 1)


def test_pair_factor():
    assert pair_factor(2, 2, 2.0, 0.5) == pytest.approx(2.0)
    assert pair_factor(1, 2, 2.0, 0.5) == pytest.approx(4 * math.sqrt(2))
    assert pair_factor(1, 2, 2.0, 0.5, plus=True) == pytest.approx(8 * math.sqrt(2))


def test_plus_norm_dominates(clusters, dense):
    M = BlockMatrix.from_dense(clusters, dense)
    assert norm_s_beta_plus(M).value >= norm_s_beta(M).value


def test_product_matches_dense(clusters, dense):
    A = BlockMatrix.from_dense(clusters, dense)
    B = BlockMatrix.from_dense(clusters, dense.T)
    np.testing.assert_allclose(block_mul(A, B).to_dense(), dense @ dense.T, atol=1e-12)


def test_apply_matches_dense(clusters, dense):
    A = BlockMatrix.from_dense(clusters, dense, beta=0.5)
    z = WeightedVector(clusters, np.arange(clusters.n_vars, dtype=float), s=1.0)
    out = apply(A, z)
    np.testing.assert_allclose(out.entries, dense @ z.entries)
    assert out.s == pytest.approx(1.5)


def test_flavors_do_not_mix(clusters):
    real = BlockMatrix.zeros(clusters)
    scalar = BlockMatrix.zeros(clusters, Flavor.SCALAR)
    with pytest.raises(FlavorMismatchError):
        real + scalar


def test_complex_frame_is_invertible(clusters, dense):
    M = BlockMatrix.from_dense(clusters, dense)
    back = to_real(to_complex(M))
    assert back.flavor is Flavor.REAL
    np.testing.assert_allclose(back.to_dense(), dense, atol=1e-12)


def test_normal_form_projection(clusters, dense):
    sym = BlockMatrix.from_dense(clusters, dense + dense.T)
    P = project_normal_form(sym)
    assert all(i == j for i, j in P.blocks)
    assert is_normal_form(P, tol=1e-12)
    np.testing.assert_allclose(project_normal_form(P).to_dense(), P.to_dense())
    D = BlockMatrix.diagonal(clusters, [1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(hermitian_block(D, 1), np.diag([2.0, 3.0]))


def test_bandwidth_of_far_coupling(clusters):
    dense = np.zeros((clusters.n_vars, clusters.n_vars))
    dense[0, 7] = dense[7, 0] = 1.0
    M = BlockMatrix.from_dense(clusters, dense)
    assert M.bandwidth() == 2
    assert set(M.coupling_graph().edges) == {(0, 2), (2, 0)}


def test_weighted_vector_norm(clusters):
    z = WeightedVector.basis(clusters, ModeId(3, 1), component=1, s=1.0)
    assert z.norm() == pytest.approx(3.0)
    assert z.norm(0.0) == pytest.approx(1.0)
    with pytest.raises(InvalidParameterError):
        WeightedVector(clusters, np.zeros(3))


def test_truncated_constants():
    assert all(weight_ratio_chain_holds(j, k, l)
               for j in range(1, 51) for k in range(1, 51) for l in range(1, 51))
    weights = [1.0, 2.0, 3.0]
    assert product_constant(weights, 0.5) > 1.0
    assert apply_constant(weights, 0.5) > 0.0


@pytest.fixture
def wide():
    """Weights 1 to 8."""
    return ClusterSet.from_sizes([1, 2, 1, 2, 1, 1, 2, 1])


def _random(clusters, rng, s=2.0, beta=0.5):
    dense = rng.standard_normal((clusters.n_vars, clusters.n_vars))
    return BlockMatrix.from_dense(clusters, dense, s=s, beta=beta)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_product_bounds_with_truncated_constants(wide, seed):
    rng = np.random.default_rng(seed)
    A, B = _random(wide, rng), _random(wide, rng)
    w = wide.cluster_weights
    AB = block_mul(A, B)
    bound = product_constant(w, 0.5) * norm_s_beta(A).value * norm_s_beta_plus(B).value
    assert norm_s_beta(AB).value <= bound * (1 + 1e-12)
    bound_plus = product_plus_constant(w, 0.5) * norm_s_beta_plus(A).value * norm_s_beta_plus(B).value
    assert norm_s_beta_plus(AB).value <= bound_plus * (1 + 1e-12)


def test_plus_constant_dominates_its_diagonal_terms(wide):
    w = wide.cluster_weights
    # a = b leaves sum_c w_c^{-2 beta} / (1 + |w_a - w_c|)^2
    diagonal = max(float(np.sum(w ** -1.0 / (1.0 + np.abs(wa - w)) ** 2)) for wa in w)
    assert product_plus_constant(w, 0.5) >= diagonal
    assert product_plus_constant([1.0], 0.5) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_apply_bound_with_truncated_constant(wide, seed):
    rng = np.random.default_rng(seed)
    A = _random(wide, rng)
    z = WeightedVector(wide, rng.standard_normal(wide.n_vars), s=2.0)
    out = apply(A, z)
    bound = apply_constant(wide.cluster_weights, 0.5) * norm_s_beta_plus(A).value * z.norm()
    assert out.norm() <= bound * (1 + 1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_outer_product_bound(wide, seed):
    rng = np.random.default_rng(seed)
    X = WeightedVector(wide, rng.standard_normal(wide.n_vars), s=2.5)
    Y = WeightedVector(wide, rng.standard_normal(wide.n_vars), s=2.5)
    X, Y = X * (1.0 / X.norm()), Y * (1.0 / Y.norm())
    A = outer(X, Y, s=2.0, beta=0.5)
    np.testing.assert_allclose(A.to_dense(), np.outer(X.entries, Y.entries))
    assert norm_s_beta(A).value <= 1.0 + 1e-12


def test_outer_of_basis_and_zero(wide):
    e = WeightedVector.basis(wide, ModeId(2, 1), s=0.0)
    A = outer(e, e, s=0.0, beta=0.0)
    assert list(A.blocks) == [(1, 1)]
    assert norm_s_beta(A).value == pytest.approx(1.0)
    assert not outer(WeightedVector.zeros(wide), e).blocks


def test_normal_form_has_hermitian_complex_image(wide):
    rng = np.random.default_rng(5)
    Q = {}
    for i, c in enumerate(wide.clusters):
        M = rng.standard_normal((c.size, c.size)) + 1j * rng.standard_normal((c.size, c.size))
        Q[i] = M + M.conj().T
    A = normal_form_from_hermitian(wide, Q)
    assert is_normal_form(A, tol=1e-12)
    image = xi_eta(to_complex(A))
    assert image.flavor is Flavor.SCALAR
    assert all(i == j for i, j in image.blocks)
    assert image.is_hermitian(tol=1e-12)
    for i, q in Q.items():
        np.testing.assert_allclose(image.block(i, i), q, atol=1e-12)
        np.testing.assert_allclose(hermitian_block(A, i), q, atol=1e-12)
    np.testing.assert_allclose(xi_eta(A).to_dense(), image.to_dense())


def test_identity_entry_maps_to_scalar_one(clusters):
    image = xi_eta(BlockMatrix.identity(clusters))
    np.testing.assert_allclose(image.to_dense(), np.eye(clusters.n_modes), atol=1e-15)
    with pytest.raises(FlavorMismatchError):
        xi_eta(image)
