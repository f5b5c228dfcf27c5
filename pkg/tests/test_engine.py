"""Tests for the KAM step and iteration."""
import numpy as np
import pytest

from src.blocks.matrix import BlockMatrix
from src.errors import AllExcludedError, InvalidParameterError, SmallnessError
from src.hamiltonian.jet import JetHamiltonian
from src.hamiltonian.space import PhaseSpace
from src.homological.normal_form import NormalFormHam
from src.homological.solver import solve_full
from src.kam.engine import KamProblem, _status, iterate, replay_transform, transformed_perturbation
from src.kam.schedule import make_schedule
from src.spectrum.models import ClusterSet, RhoGrid


@pytest.fixture
def clusters():
    return ClusterSet.from_sizes([1, 1])


@pytest.fixture
def space(clusters):
    return PhaseSpace(1, clusters, K=2, D_r=1, D_zeta=2)


@pytest.fixture
def schedule():
    return make_schedule(1e-4, j_max=1, gate='report', kappa0=1e-3, n_max=2)


@pytest.fixture
def make_problem(space, clusters):
    """Problem with omega = 0.6 + 0.1 rho on two samples and a fixed perturbation."""
    def build(perturbation):
        def normal_form(rho):
            return NormalFormHam([0.6 + 0.1 * rho[0]], BlockMatrix.diagonal(clusters, [1.3, 2.45]),
                                 rho=rho)
        return KamProblem(space, normal_form, lambda rho: perturbation,
                          RhoGrid.uniform([1.0], [2.0], 2), name='toy')
    return build


def cosine(space, amplitude):
    f = JetHamiltonian.zeros(space)
    f.theta[space.box.index([1])] = 0.5 * amplitude
    f.theta[space.box.index([-1])] = 0.5 * amplitude
    return f


def test_zero_perturbation_completes(make_problem, space, schedule):
    state, report = iterate(make_problem(JetHamiltonian.zeros(space)), schedule, 2, check_points=2)
    assert report.status == 'completed'
    assert [row['step'] for row in report.steps] == [0, 1]
    assert report.norm_series() == [0.0, 0.0]
    assert report.limits['omega_shift'] == 0.0
    assert report.limits['stability']
    assert all(row['status'] == 'accepted' for row in report.steps)
    for sample in state.alive:
        theta, r, _ = replay_transform(state, sample.index,
                                       (np.array([0.3]), np.array([0.1]), np.zeros(2)))
        np.testing.assert_allclose(theta, [0.3])
        np.testing.assert_allclose(r, [0.1])


def test_angle_perturbation_is_removed(make_problem, space, schedule):
    state, report = iterate(make_problem(cosine(space, 1e-4)), schedule, 1, check_points=3)
    row = report.steps[0]
    assert row['eps_measured'] < 1e-15
    assert row['status'] == 'accepted'
    assert row['S_norm'] > 0
    assert report.checks[0]['consistency']['deviation'] < 1e-8
    assert report.limits['omega_shift'] == 0.0
    sample = state.alive[0]
    theta, r, zeta = replay_transform(state, sample.index,
                                      (np.array([0.4]), np.array([0.2]), np.zeros(2)))
    np.testing.assert_allclose(theta, [0.4])
    assert abs(r[0] - 0.2) > 0


def test_action_perturbation_shifts_frequency(make_problem, space, schedule):
    f = JetHamiltonian.zeros(space)
    f.r[space.box.zero_index, 0] = 1e-5
    state, report = iterate(make_problem(f), schedule, 1, check_points=0)
    assert report.steps[0]['eps_measured'] == 0.0
    assert report.limits['omega_shift'] == pytest.approx(1e-5)
    assert report.limits['omega_ok']
    for sample in state.alive:
        np.testing.assert_allclose(sample.h.omega, 0.6 + 0.1 * sample.rho + 1e-5)


def test_large_generator_policies(make_problem, space, schedule):
    problem = make_problem(cosine(space, 0.1))
    with pytest.raises(SmallnessError):
        iterate(problem, schedule, 1, smallness='abort', check_points=0)
    with pytest.raises(AllExcludedError):
        iterate(problem, schedule, 1, smallness='exclude', check_points=0)
    with pytest.raises(InvalidParameterError):
        iterate(problem, schedule, 1, smallness='ignore', check_points=0)


def test_step_count_is_bounded_by_schedule(make_problem, space, schedule):
    problem = make_problem(JetHamiltonian.zeros(space))
    with pytest.raises(InvalidParameterError):
        iterate(problem, schedule, 3)
    _, report = iterate(problem, schedule, 0)
    assert report.steps == [] and report.status == 'completed'


def test_tail_only_perturbation_is_kept(space, clusters):
    f = JetHamiltonian.zeros(space)
    f.theta[space.box.index([2])] = f.theta[space.box.index([-2])] = 1e-4
    h = NormalFormHam([0.725], BlockMatrix.diagonal(clusters, [1.3, 2.45]))
    solution = solve_full(f, h, 1e-3, 1)
    f_plus, tail = transformed_perturbation(f, solution)
    assert (f_plus - f).max_abs() == 0.0
    assert tail == 0.0


@pytest.mark.parametrize('measured, expected', [
    (1e-6, 'accepted'),
    (4e-5, 'accepted_above_target'),
    (7e-5, 'stalled'),
    (2e-4, 'failed'),
])
def test_step_status(measured, expected):
    status, ratio = _status(measured, 1e-5, 1e-4)
    assert status == expected
    assert ratio == pytest.approx(measured / 1e-4)
