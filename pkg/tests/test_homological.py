"""Tests for the homological equation solver and the divisor estimate."""
import numpy as np
import pytest

from src.blocks.matrix import BlockMatrix, Flavor, is_normal_form
from src.errors import FlavorMismatchError, InvalidParameterError
from src.hamiltonian.jet import JetHamiltonian
from src.hamiltonian.norms import NormParams, jet_norm
from src.hamiltonian.space import PhaseSpace
from src.homological.delort import delort_bound_check, regime_of, threshold_k2
from src.homological.frame import cluster_frame, hermitian_eigh
from src.homological.normal_form import NormalFormHam
from src.homological.solver import solution_family_norms, solve_full
from src.spectrum.models import ClusterSet


@pytest.fixture
def clusters():
    return ClusterSet.from_sizes([1, 2])


@pytest.fixture
def space(clusters):
    return PhaseSpace(1, clusters, K=2, D_r=1, D_zeta=2)


@pytest.fixture
def h(clusters):
    return NormalFormHam([np.sqrt(2.0) - 1.0], BlockMatrix.diagonal(clusters, [1.3, 2.1, 2.45]))


@pytest.fixture
def f(space):
    rng = np.random.default_rng(5)
    F, n, V = space.box.size, space.n, space.V

    def draw(*shape):
        return 1e-3 * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return JetHamiltonian(space, draw(F), draw(F, n), draw(F, V), draw(F, V, V)).symmetrized()


def test_cluster_frame_is_unitary():
    V = cluster_frame(3)
    np.testing.assert_allclose(V @ V.conj().T, np.eye(6), atol=1e-15)


def test_hermitian_eigh_fixes_phases():
    Q = np.array([[2.0, 1j], [-1j, 2.0]])
    D, P = hermitian_eigh(Q)
    np.testing.assert_allclose(D, [1.0, 3.0])
    np.testing.assert_allclose(P @ np.diag(D) @ P.conj().T, Q, atol=1e-14)
    for c in range(2):
        top = P[int(np.argmax(np.abs(P[:, c]))), c]
        assert abs(top.imag) < 1e-15 and top.real > 0


def test_normal_form_must_be_block_diagonal(clusters):
    dense = np.diag(np.repeat([1.3, 2.1, 2.45], 2))
    dense[0, 2] = dense[2, 0] = 0.1
    with pytest.raises(InvalidParameterError):
        NormalFormHam([0.4], BlockMatrix.from_dense(clusters, dense))


def test_solution_satisfies_the_equation(f, h):
    solution = solve_full(f, h, kappa=1e-3, N=2, sigma_prime=0.3, params=NormParams(0.5, 1.0))
    assert not solution.excluded
    assert solution.residual['relative'] < 1e-10
    assert solution.R.max_abs() == 0.0
    z = f.space.box.zero_index
    assert solution.c == pytest.approx(f.theta[z].real)
    np.testing.assert_allclose(solution.chi, f.r[z].real)
    assert is_normal_form(solution.B, tol=1e-12)
    assert solution.S.reality_defect() < 1e-15
    assert solution.norms['S'] > 0


def test_tail_beyond_cutoff_is_kept(f, h):
    solution = solve_full(f, h, kappa=1e-3, N=1)
    assert solution.residual['relative'] < 1e-10
    l1 = f.space.box.l1
    assert np.all(solution.R.theta[l1 <= 1] == 0)
    np.testing.assert_allclose(solution.R.theta[l1 > 1], f.theta[l1 > 1])


def test_small_divisors_mark_exclusion(f, h):
    solution = solve_full(f, h, kappa=1.0, N=2)
    assert solution.excluded
    assert solution.to_dict()['divisors']['k']['below'] > 0


def test_cutoff_outside_box(f, h):
    with pytest.raises(InvalidParameterError):
        solve_full(f, h, kappa=1e-3, N=3)


def test_closeness_of_shifted_normal_form(h):
    moved = h.shifted(chi=[1e-3])
    report = moved.closeness(h, 1e-2)
    assert report['omega_shift'] == pytest.approx(1e-3)
    assert report['omega_ok'] and report['A_ok']
    assert report['A_shift'] == 0.0


def test_divisor_estimate_in_finite_regime():
    clusters = ClusterSet.from_sizes([1, 1, 1])
    A = BlockMatrix.from_dense(clusters, np.ones((3, 3)), Flavor.SCALAR)
    mu = [1.1, 2.2, 3.3]
    report = delort_bound_check(A, (0,), [0.5], mu, mu, kappa=0.1, N=1, eps=-1)
    assert report.holds
    assert report.hypotheses['divisor']['holds']
    assert report.B.blocks[(0, 1)][0, 0] == pytest.approx(-1j / 3.3)
    assert report.regimes[3]['blocks'] == 9
    assert regime_of(1, 20, report.k1, report.k2) == 1


def test_divisor_estimate_needs_scalar_flavor(clusters):
    with pytest.raises(FlavorMismatchError):
        delort_bound_check(BlockMatrix.zeros(clusters), (0,), [0.5], [1.0] * 3, [1.0] * 3,
                           kappa=0.1, N=1)


def test_remainder_decays_with_the_cutoff(clusters, h):
    space = PhaseSpace(1, clusters, K=30, D_r=1, D_zeta=2)
    profile = np.exp(-0.5 * space.box.l1)
    V = space.V
    M = np.arange(V * V, dtype=float).reshape(V, V) / V ** 2
    f = JetHamiltonian(space, profile.astype(complex), 0.3 * profile[:, None].astype(complex),
                       np.outer(profile, np.linspace(0.1, 0.6, V)).astype(complex),
                       profile[:, None, None] * (M + M.T))
    params, sigma_prime = NormParams(0.5, 1.0), 0.2
    gap = params.sigma - sigma_prime
    Ns = [4, 6, 8, 10, 12]
    R = []
    for N in Ns:
        norms = solve_full(f, h, kappa=1e-6, N=N, sigma_prime=sigma_prime, params=params).norms
        assert norms['R'] <= norms['R_bound'] * (1 + 1e-12)
        assert norms['R'] <= np.exp(-gap * (N + 1)) * norms['f'] * (1 + 1e-12)
        R.append(norms['R'])
    slope = np.polyfit(Ns, np.log(R), 1)[0]
    assert slope < -gap / 2
    assert slope == pytest.approx(-gap, rel=0.1)


@pytest.fixture
def far_clusters():
    """Weights 1, 2, 41, 42, one mode each."""
    return ClusterSet.from_sizes([1, 1, 1, 1], weights=[1, 2, 41, 42])


def _lam(clusters):
    w = clusters.mode_weights.astype(float)
    return np.sqrt(w * (w + 1))


def test_second_threshold_scales_with_kappa():
    assert threshold_k2(8.0, 1.0, 0.1, 1.0) == pytest.approx(20 * 8.0)
    clusters = ClusterSet.from_sizes([1, 1])
    report = delort_bound_check(BlockMatrix.zeros(clusters, Flavor.SCALAR), (0,), [0.5],
                                [1.5, 2.5], [1.5, 2.5], kappa=0.1, N=1)
    assert report.k2 >= 20 * report.k1 * (1 - 1e-12)
    assert report.holds and not report.B.blocks


def test_far_pair_is_bounded_by_eight(far_clusters):
    lam = _lam(far_clusters)
    dense = np.zeros((4, 4), dtype=complex)
    dense[0, 2] = 1.0
    A = BlockMatrix.from_dense(far_clusters, dense, Flavor.SCALAR)
    report = delort_bound_check(A, (0,), [0.5], lam, lam, kappa=0.4, N=2)
    assert report.k1 == pytest.approx(8.0)
    assert all(h['holds'] for h in report.hypotheses.values())
    assert report.regimes[1]['blocks'] == 1
    assert report.regimes[1]['B_norm'] <= 8 * report.regimes[1]['A_norm']
    assert report.B.blocks[(0, 2)][0, 0] == pytest.approx(1j / (lam[0] - lam[2]))


def test_close_large_pair_is_bounded_by_two_over_kappa(far_clusters):
    lam = _lam(far_clusters)
    dense = np.zeros((4, 4), dtype=complex)
    dense[2, 3] = dense[3, 2] = 1.0
    A = BlockMatrix.from_dense(far_clusters, dense, Flavor.SCALAR)
    report = delort_bound_check(A, (0,), [0.5], lam, lam, kappa=0.4, N=2)
    assert report.k2 == pytest.approx(40.0)
    assert regime_of(41, 42, report.k1, report.k2) == 2
    assert all(h['holds'] for h in report.hypotheses.values())
    assert report.regimes[2]['blocks'] == 2
    assert report.regimes[2]['B_norm'] <= 2 / 0.4 * report.regimes[2]['A_norm']
    assert report.holds


def test_three_regimes_on_seeded_instances(far_clusters):
    lam = _lam(far_clusters)
    allowed = np.minimum(1.0 / far_clusters.mode_weights, 0.125)
    checked = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        A = BlockMatrix.from_dense(far_clusters, rng.standard_normal((4, 4))
                                   + 1j * rng.standard_normal((4, 4)), Flavor.SCALAR)
        mu = lam + 0.5 * allowed * rng.uniform(-1.0, 1.0, 4)
        k = (int(rng.integers(-2, 3)),)
        eps = int(rng.choice([-1, 1]))
        report = delort_bound_check(A, k, [0.5], mu, lam, kappa=0.4, N=2, eps=eps)
        assert report.hypotheses['mu_close']['holds']
        assert [report.regimes[r]['blocks'] for r in (1, 2, 3)] == [8, 4, 4]
        if report.hypotheses['divisor']['holds']:
            assert report.holds
            checked += 1
    assert checked >= 30


def test_family_norms_see_the_parameter_dependence(clusters, f):
    A = BlockMatrix.diagonal(clusters, [1.3, 2.1, 2.45])

    def build(rho):
        return NormalFormHam([np.sqrt(2.0) - 1.0 + 0.1 * rho[0]], A), f

    params = NormParams(0.5, 1.0)
    rho = np.array([1.5])
    family = solution_family_norms(build, [rho], kappa=1e-3, N=2, params=params)
    S = solve_full(f, build(rho)[0], kappa=1e-3, N=2, diagnostics=False).S
    assert family['S'].parts['c0'] == pytest.approx(jet_norm(S, params, 'beta+').value)
    assert family['S'].parts['c1'] > 0
    assert family['R'].value == 0.0
