"""Tests for the sphere quadrature, the nonlinearity and the Klein-Gordon problem."""
import math
from pathlib import Path

import numpy as np
import pytest

from src.blocks.matrix import BlockMatrix, Flavor
from src.config import NORM_CONFIG
from src.errors import ConfigError, FitError, InvalidParameterError, QuadratureError, ScheduleGateError
from src.hamiltonian.jet import extract_jet
from src.hamiltonian.norms import NormParams
from src.kam.engine import initial_state, iterate
from src.kam.schedule import make_schedule
from src.kleingordon.nonlinearity import Nonlinearity
from src.kleingordon.problem import (SphereField, _zeta_moments, build_problem, gradient_regularity,
                                     gradient_vector, hessian_blocks, verify_decay)
from src.kleingordon.quadrature import SphereQuadrature, harmonic_row, real_spherical_harmonics
from src.runner.config import load_config
from src.spectrum.clusters import build_kg_clusters, kg_spectrum
from src.spectrum.models import AdmissibleSet, ClusterSet, ModeId

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def admissible():
    return AdmissibleSet.from_triples([(1, 1, 1.5)])


def sphere_for(nonlinearity, admissible, W_max):
    clusters = build_kg_clusters(2, W_max, admissible)
    spectrum = kg_spectrum(2, 1.0, 0.1, admissible)
    return SphereField.build(nonlinearity, admissible, clusters, spectrum, np.array([1.5]))


@pytest.fixture
def problem_settings(admissible):
    """Quartic G on one admissible mode with every cos^4 harmonic inside the box."""
    return {'d': 2, 'm': 1.0, 'delta': 0.1, 'eps': 1e-5, 'admissible': [(1, 1, 1.5)], 'W_max': 2,
            'caps': {'K_max': 4, 'D_r': 1, 'D_zeta': 2}, 'nonlinearity': Nonlinearity.power(4),
            'samples_per_axis': 2, 'gate': 'report'}


def test_quadrature_weights_and_exactness():
    quad = SphereQuadrature.build(8)
    assert quad.weights.sum() == pytest.approx(4 * math.pi)
    assert np.all(quad.weights > 0)
    assert quad.orthonormality_defect(4) < 1e-12
    with pytest.raises(QuadratureError):
        quad.harmonics(5)


def test_low_degree_harmonics():
    colat = np.array([0.3, 1.2])
    Y = real_spherical_harmonics(1, colat, np.array([0.5, 2.0]))
    np.testing.assert_allclose(Y[0], 1 / math.sqrt(4 * math.pi))
    np.testing.assert_allclose(Y[harmonic_row(ModeId(1, 2))], math.sqrt(3 / (4 * math.pi)) * np.cos(colat))
    with pytest.raises(InvalidParameterError):
        harmonic_row(ModeId(1, 4))


def test_nonlinearity_derivatives():
    nl = Nonlinearity.power(3, 2.0)
    quad = SphereQuadrature.build(2)
    values = nl.field_values(quad, quad.harmonics(1))
    u = np.full(quad.size, 0.5)
    np.testing.assert_allclose(nl.derivative(0, values, u), 2.0 * 0.5 ** 3 / 3)
    np.testing.assert_allclose(nl.derivative(1, values, u), 2.0 * 0.25)
    np.testing.assert_allclose(nl.derivative(2, values, u), 2.0 * 2 * 0.5)
    np.testing.assert_allclose(nl.derivative(4, values, u), 0.0)
    assert nl.vanishing_order == 3


def test_parse_nonlinearity():
    nl = Nonlinearity.parse({'3': 'const:1.0, 1:2:0.5'})
    assert nl.max_power == 3 and nl.field_degree == 1
    quad = SphereQuadrature.build(2)
    g = nl.field_values(quad, quad.harmonics(1))[3]
    np.testing.assert_allclose(g, 1.0 + 0.5 * math.sqrt(3 / (4 * math.pi)) * np.cos(quad.colatitude))
    for bad in ({'x': 'const:1'}, {'1': 'const:1'}, {'3': 'bad'}):
        with pytest.raises(ConfigError):
            Nonlinearity.parse(bad)


def test_gradient_matches_finite_differences(admissible):
    nl = Nonlinearity.power(4)
    sphere = sphere_for(nl, admissible, 2)
    rng = np.random.default_rng(3)
    theta, r = np.array([0.7]), np.array([0.1])
    zeta = 0.1 * rng.standard_normal(sphere.clusters.n_vars)

    def energy(z):
        u = sphere.u_hat(theta, r, z)
        return sphere.quad.integrate(nl.derivative(0, sphere.g_values, u))

    grad = gradient_vector(sphere, theta, r, zeta)
    h = 1e-5
    for a in range(len(zeta)):
        step = np.zeros_like(zeta)
        step[a] = h
        fd = (energy(zeta + step) - energy(zeta - step)) / (2 * h)
        assert grad[a] == pytest.approx(fd, abs=1e-8)
    assert np.all(grad[1::2] == 0)


def test_cubic_hessian_is_banded(admissible):
    sphere = sphere_for(Nonlinearity.power(3), admissible, 4)
    M = hessian_blocks(sphere, [0.2], s=2.0)
    assert M.is_symmetric(1e-14)
    report = verify_decay(M, 2.0)
    assert report['band'] == 1
    assert report['banded'] and report['holds']
    assert report['exponent'] == float('inf')


def test_decay_fit_recovers_exponent():
    clusters = ClusterSet.from_sizes([1, 1, 1, 1])
    w = clusters.cluster_weights
    dense = np.zeros((8, 8))
    for i in range(4):
        for j in range(4):
            low = min(w[i], w[j])
            value = (w[i] * w[j]) ** -0.5 * ((low + abs(w[i] ** 2 - w[j] ** 2)) / low) ** -2.0
            dense[2 * i:2 * i + 2, 2 * j:2 * j + 2] = value * np.eye(2)
    report = verify_decay(BlockMatrix.from_dense(clusters, dense, Flavor.REAL), 2.0)
    assert report['exponent'] == pytest.approx(2.0)
    assert report['holds'] and not report['banded']


def test_decay_fit_needs_points():
    clusters = ClusterSet.from_sizes([1, 1, 1])
    dense = np.eye(6)
    dense[0, 4] = dense[4, 0] = 0.1
    with pytest.raises(FitError):
        verify_decay(BlockMatrix.from_dense(clusters, dense, Flavor.REAL), 2.0)


def test_gradient_regularity_stabilizes(admissible):
    report = gradient_regularity(Nonlinearity.power(3), admissible, [2, 3], [0.4], 2.0)
    assert [row['W_max'] for row in report['rows']] == [2, 3]
    assert report['rows'][0]['norm'] > 0
    assert report['max_relative_change'] < 1e-10
    assert report['stable']


def test_assembled_series_matches_quadrature(problem_settings):
    problem = build_problem(problem_settings)
    theta = np.array([0.7])
    u = problem.sphere.u_hat(theta)
    expected = problem.sphere.quad.integrate(u ** 4 / 4)
    zeta = np.zeros(problem.space.V)
    assert problem.f.value(theta, np.zeros(1), zeta) == pytest.approx(expected, rel=1e-10)
    scaled = problem.perturbation(problem.grid.samples[0]).value(theta, np.zeros(1), zeta)
    assert scaled == pytest.approx(1e-5 * expected, rel=1e-10)
    assert problem.f.reality_defect() < 1e-15


def test_problem_parameters(problem_settings):
    problem = build_problem(problem_settings)
    assert problem.delta0 == pytest.approx((0.1 / (2 * math.sqrt(5))) ** 3)
    assert not problem.gate['holds']
    h = problem.normal_form([1.2])
    np.testing.assert_allclose(h.omega, [math.sqrt(2 + 1 + 0.12)])
    assert problem.space.D_zeta == 4 and problem.space.D_w == 4
    kam = problem.kam_problem()
    assert kam.delta0 == problem.delta0
    assert len(kam.grid) == 2


def test_default_caps_keep_the_quartic_remainder(problem_settings):
    settings = {key: value for key, value in problem_settings.items() if key != 'caps'}
    problem = build_problem(settings)
    space = problem.space
    assert (space.D_zeta, space.D_w) == (4, 4)
    _, rest = extract_jet(problem.f)
    assert len(rest.terms) > 0
    assert {space.zeta_degree(mono) for mono in rest.terms} >= {3, 4}
    rng = np.random.default_rng(3)
    zeta = np.zeros(space.V)
    zeta[0::2] = 0.05 * rng.standard_normal(space.V // 2)
    theta = np.array([0.4])
    u = problem.sphere.u_hat(theta, None, zeta)
    expected = problem.sphere.quad.integrate(u ** 4 / 4)
    assert problem.f.value(theta, np.zeros(1), zeta) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize('override, error', [
    ({'d': 3}, InvalidParameterError),
    ({'nonlinearity': Nonlinearity.power(2)}, InvalidParameterError),
    ({'eps': 1.0}, InvalidParameterError),
    ({'gate': 'enforce'}, ScheduleGateError),
])
def test_invalid_problems(problem_settings, override, error):
    with pytest.raises(error):
        build_problem({**problem_settings, **override})


def test_zeta_moments_match_direct_sums():
    rng = np.random.default_rng(5)
    weight = rng.standard_normal((3, 2)) @ rng.standard_normal((2, 40))
    phi = rng.standard_normal((4, 40))
    for degree in range(5):
        combos, vals = _zeta_moments(weight, phi, degree)
        assert len(combos) == math.comb(4 + degree - 1, degree)
        for row, column in zip(combos, vals.T):
            row = [int(a) for a in row]
            assert row == sorted(row)
            scale = math.prod(math.factorial(row.count(a)) for a in set(row))
            direct = (weight * np.prod(phi[row], axis=0)).sum(axis=-1) / scale
            np.testing.assert_allclose(column, direct, rtol=1e-10, atol=1e-12)


def test_zeta_moments_drop_vanishing_products():
    x = np.linspace(-1.0, 1.0, 41)
    weight = np.ones((2, 41))
    combos, vals = _zeta_moments(weight, np.array([x, x ** 2]), 3)
    assert combos.tolist() == [[0, 0, 1], [1, 1, 1]]
    np.testing.assert_allclose(vals[:, 0], (x ** 4).sum() / 2)
    np.testing.assert_allclose(vals[:, 1], (x ** 6).sum() / 6)


def test_shipped_toy_builds_and_enters_the_iteration():
    config = load_config(str(CONFIGS / 'kg_toy.ini'))
    problem = build_problem(config.problem_settings())
    space = problem.space
    assert problem.admissible.n == 2 and problem.clusters.W_max == 8
    assert space.V == 2 * 78
    assert (space.D_zeta, space.D_w) == (4, 3)
    _, rest = extract_jet(problem.f)
    assert max(space.zeta_degree(mono) for mono in rest.terms) == 3

    rng = np.random.default_rng(11)
    zeta = np.zeros(space.V)
    zeta[0::2] = 0.02 * rng.standard_normal(space.V // 2)
    theta = np.array([0.3, 1.1])
    u = problem.sphere.u_hat(theta, None, zeta)
    d = u - problem.sphere.u_hat(theta)
    # the weighted cap removes exactly the zeta^4 part at r = 0
    expected = problem.sphere.quad.integrate((u ** 4 - d ** 4) / 4)
    assert problem.f.value(theta, np.zeros(2), zeta) == pytest.approx(expected, rel=1e-9)

    state = initial_state(problem.kam_problem(), NormParams(1.0, 1.0))
    assert len(state.samples) == 1
    assert 0 < state.f_norm < 1
    schedule = make_schedule(state.f_norm, 1.0, 1.0, NORM_CONFIG['beta'], problem.clusters.d_star,
                             problem.delta0, 2, gate='report', kappa0=1e-3, n_max=4)
    assert schedule.N[0] == 4 and not schedule.gate['holds']


def test_small_toy_one_step_contracts():
    config = load_config(str(CONFIGS / 'kg_small.ini'))
    problem = build_problem(config.problem_settings())
    assert problem.space.D_w == 4
    kam = problem.kam_problem()
    eps0 = initial_state(kam, NormParams(1.0, 1.0)).f_norm
    schedule = make_schedule(eps0, 1.0, 1.0, NORM_CONFIG['beta'], problem.clusters.d_star,
                             problem.delta0, 0, gate='report', kappa0=1e-3, n_max=4)
    state, report = iterate(kam, schedule, 1, smallness='report', check_points=2, strict=False)
    row = report.steps[0]
    assert row['eps_previous'] == pytest.approx(eps0)
    assert row['status'] in ('accepted', 'accepted_above_target')
    assert row['eps_measured'] < 0.5 * eps0
    assert report.limits['omega_ok'] and report.limits['stability']
    _, rest = extract_jet(state.alive[0].f)
    assert len(rest.terms) > 0
