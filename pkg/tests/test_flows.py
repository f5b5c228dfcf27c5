"""Tests for jet flows and Lie series."""
import numpy as np
import pytest

from src.errors import FlowSmallnessError
from src.flows.jet_flow import (cumulative_simpson, flow_jacobian, flow_point, increment_bounds,
                                pullback_grid, sample_points, symplectic_form)
from src.flows.lie import LieReport, pullback_lie
from src.hamiltonian.jet import JetHamiltonian
from src.hamiltonian.series import FTSeries
from src.hamiltonian.space import PhaseSpace
from src.spectrum.models import ClusterSet


def random_jet(space, rng, scale=3e-4):
    F, n, V = space.box.size, space.n, space.V
    return JetHamiltonian(space, scale * rng.standard_normal(F), scale * rng.standard_normal((F, n)),
                          scale * rng.standard_normal((F, V)),
                          scale * rng.standard_normal((F, V, V))).symmetrized()


@pytest.fixture
def space():
    return PhaseSpace(1, ClusterSet.from_sizes([1]), K=2, D_r=1, D_zeta=2)


@pytest.fixture
def rotation(space):
    """S = omega (p^2 + q^2) / 2 with a small omega."""
    S = JetHamiltonian.zeros(space)
    S.zetazeta[space.box.zero_index] = 0.01 * np.eye(2)
    return S


def test_cumulative_simpson_is_exact_for_quadratics():
    t = np.linspace(0.0, 2.0, 9)
    integral = cumulative_simpson(t ** 2, 2.0)
    np.testing.assert_allclose(integral, t ** 3 / 3.0, atol=1e-14)


def test_action_generator_moves_angles(space):
    S = JetHamiltonian.zeros(space)
    S.r[space.box.zero_index, 0] = 0.01
    theta, r, zeta = flow_point(S, [0.3], [0.2], [0.1, 0.0])
    assert theta[0] == pytest.approx(0.31)
    assert r[0] == pytest.approx(0.2)
    np.testing.assert_allclose(zeta, [0.1, 0.0])


def test_linear_generator_translates_zeta(space):
    S = JetHamiltonian.zeros(space)
    S.zeta[space.box.zero_index, 0] = 0.02
    _, _, zeta = flow_point(S, [0.0])
    np.testing.assert_allclose(zeta, [0.0, 0.02], atol=1e-15)


def test_angle_generator_kicks_actions(space):
    S = JetHamiltonian.zeros(space)
    S.theta[space.box.index((1,))] = 0.005
    S.theta[space.box.index((-1,))] = 0.005
    theta, r, _ = flow_point(S, [0.7])
    assert theta[0] == pytest.approx(0.7)
    assert r[0] == pytest.approx(0.01 * np.sin(0.7), rel=1e-10)


def test_quadratic_generator_rotates(space, rotation):
    _, _, zeta = flow_point(rotation, [0.0], zeta0=[1.0, 0.0])
    np.testing.assert_allclose(zeta, [np.cos(0.01), np.sin(0.01)], atol=1e-10)


def test_lie_series_agrees_with_flow(space, rotation):
    h = JetHamiltonian.zeros(space)
    h.zeta[space.box.zero_index, 0] = 1.0
    report = LieReport()
    pulled = pullback_lie(h, rotation, report=report)
    point = ([0.0], [0.0], [0.4, -0.3])
    expected = pullback_grid(h, rotation, [point])[0]
    assert pulled.evaluate(*point) == pytest.approx(expected, abs=1e-10)
    assert expected == pytest.approx(0.4 * np.cos(0.01) + 0.3 * np.sin(0.01), abs=1e-10)
    assert report.orders >= 2
    assert report.tail < 1e-12


def test_flow_is_symplectic(space):
    S = random_jet(space, np.random.default_rng(11))
    jac, defect = flow_jacobian(S, [0.4], [0.05], [0.02, -0.01])
    assert jac.shape == (4, 4)
    assert defect < 1e-8
    assert symplectic_form(1, 2)[0, 1] == 1.0


def test_random_flows_are_symplectic(space):
    rng = np.random.default_rng(29)
    worst = 0.0
    for theta, r, zeta in sample_points(space, 50, rng):
        _, defect = flow_jacobian(random_jet(space, rng), theta, r, zeta)
        worst = max(worst, defect)
    assert worst < 1e-8


def test_jacobian_columns_match_differences(space):
    S = random_jet(space, np.random.default_rng(17))
    theta, r, zeta = np.array([1.3]), np.array([0.04]), np.array([0.05, -0.02])
    jac, _ = flow_jacobian(S, theta, r, zeta)
    h = 1e-4
    for col, (dr, dz) in enumerate([([h], [0, 0]), ([0], [h, 0]), ([0], [0, h])], start=1):
        plus = flow_point(S, theta, r + np.array(dr), zeta + np.array(dz), check=False)
        minus = flow_point(S, theta, r - np.array(dr), zeta - np.array(dz), check=False)
        np.testing.assert_allclose(jac[:, col], (np.concatenate(plus) - np.concatenate(minus)) / (2 * h),
                                   atol=1e-10)


def test_flow_conserves_its_generator(space):
    rng = np.random.default_rng(31)
    for theta, r, zeta in sample_points(space, 5, rng):
        S = random_jet(space, rng)
        image = flow_point(S, theta, r, zeta)
        assert S.evaluate(*image) == pytest.approx(S.evaluate(theta, r, zeta), abs=1e-11)


def test_half_flows_compose(space):
    rng = np.random.default_rng(37)
    S = random_jet(space, rng)
    theta, r, zeta = sample_points(space, 1, rng)[0]
    half = flow_point(S, *flow_point(S, theta, r, zeta, t=0.5), t=0.5)
    full = flow_point(S, theta, r, zeta)
    for a, b in zip(half, full):
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_lie_series_matches_flow_on_quartic_caps():
    space = PhaseSpace(1, ClusterSet.from_sizes([1, 1]), K=2, D_r=1, D_zeta=4)
    zero = space.box.zero_index
    rng = np.random.default_rng(23)
    S = JetHamiltonian.zeros(space)
    S.r[zero, 0] = 0.01
    S.zeta[zero] = 1e-3 * rng.standard_normal(4)
    M = 1e-3 * rng.standard_normal((4, 4))
    S.zetazeta[zero] = M + M.T
    h = (FTSeries.monomial(space, 0.5, k=(1,), zeta={0: 3})
         + FTSeries.monomial(space, 0.5, k=(-1,), zeta={0: 3})
         + FTSeries.monomial(space, 1.0, alpha={0: 1}, zeta={3: 1})
         + FTSeries.monomial(space, 1.0, zeta={1: 2, 2: 2}))
    points = sample_points(space, 5, rng)
    report = LieReport()
    pulled = pullback_lie(h, S, report=report)
    assert max(space.zeta_degree(mono) for mono in pulled.terms) == 4
    lie = [pulled.value(*p) for p in points]
    np.testing.assert_allclose(lie, pullback_grid(h, S, points), rtol=1e-10, atol=1e-14)
    assert report.tail < 1e-14


def test_large_generator_is_rejected(space):
    S = JetHamiltonian.zeros(space)
    S.r[space.box.zero_index, 0] = 1.0
    with pytest.raises(FlowSmallnessError):
        flow_point(S, [0.0])


def test_increments_within_bounds(space):
    S = JetHamiltonian.zeros(space)
    S.theta[space.box.index((1,))] = 0.001
    S.theta[space.box.index((-1,))] = 0.001
    bounds = increment_bounds(S, [0.5], [0.0], [0.0, 0.0])
    assert bounds['theta'] <= bounds['theta_bound']
    assert bounds['r'] <= bounds['r_bound']
    assert bounds['zeta'] == 0.0
