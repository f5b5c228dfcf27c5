"""
Шаг и итерация KAM

Every retained parameter sample carries its own (h_k, f_k). One step solves
the homological equation, moves h by hhat and replaces f by

    f+ = R + (f - f^T) o Phi + int_0^1 {(1-t)(hhat + R) + t f^T, S} o Phi^t dt,

Phi^t being the flow of -S. The t-integral uses Gauss-Legendre nodes and
every integrand is pulled back by a Lie series.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import roots_legendre

from src.blocks.matrix import norm_s_beta, symplectic_unit
from src.config import SCHEDULE_CONFIG, SOLVER_CONFIG, SPECTRUM_CONFIG
from src.errors import (AcceptanceError, AllExcludedError, FlowSmallnessError,
                        InvalidParameterError, SmallnessError)
from src.flows.jet_flow import flow_point, pullback_grid, sample_points
from src.flows.lie import LieReport, lie_bracket, pullback_lie
from src.hamiltonian.jet import JetHamiltonian, extract_jet
from src.hamiltonian.norms import NormParams, jet_norm
from src.hamiltonian.series import FTSeries
from src.hamiltonian.space import PhaseSpace
from src.homological.normal_form import NormalFormHam
from src.homological.solver import HomologicalSolution, solve_full
from src.kam.schedule import KamSchedule
from src.spectrum.models import RhoGrid

logger = logging.getLogger(__name__)

Hamiltonian = Union[FTSeries, JetHamiltonian]


def _add(a: Hamiltonian, b: Hamiltonian) -> Hamiltonian:
    if isinstance(a, JetHamiltonian) and isinstance(b, JetHamiltonian):
        return a + b
    if isinstance(a, JetHamiltonian):
        a = a.to_series()
    if isinstance(b, JetHamiltonian):
        b = b.to_series()
    return a + b


def _value(f: Hamiltonian, theta, r, zeta) -> float:
    if isinstance(f, JetHamiltonian):
        return f.evaluate(theta, r, zeta)
    return f.value(theta, r, zeta)


@dataclass
class KamProblem:
    """Normal-form family, perturbation family and the parameter grid."""
    space: PhaseSpace
    normal_form: Callable[[np.ndarray], NormalFormHam]
    perturbation: Callable[[np.ndarray], Hamiltonian]
    grid: RhoGrid
    delta0: float = 0.0
    name: str = 'problem'


@dataclass
class SampleState:
    index: int
    rho: np.ndarray
    h: NormalFormHam
    f: Hamiltonian
    h0: NormalFormHam
    norm: float = 0.0
    alive: bool = True
    generators: List[JetHamiltonian] = field(default_factory=list)


@dataclass
class KamState:
    k: int
    samples: List[SampleState]
    grid: RhoGrid
    transform_log: List[dict] = field(default_factory=list)
    rows: List[dict] = field(default_factory=list)

    @property
    def alive(self) -> List[SampleState]:
        return [s for s in self.samples if s.alive]

    @property
    def f_norm(self) -> float:
        return max((s.norm for s in self.alive), default=0.0)


@dataclass
class KamReport:
    steps: List[dict]
    limits: dict
    status: str
    schedule: dict
    checks: List[dict] = field(default_factory=list)

    def norm_series(self) -> List[float]:
        return [row['eps_measured'] for row in self.steps]

    def to_dict(self) -> dict:
        return {'status': self.status, 'steps': self.steps, 'limits': self.limits,
                'schedule': self.schedule, 'checks': self.checks}


def initial_state(problem: KamProblem, params: NormParams) -> KamState:
    samples = []
    for i in problem.grid.retained_indices():
        rho = problem.grid.samples[i]
        h = problem.normal_form(rho)
        f = problem.perturbation(rho)
        samples.append(SampleState(int(i), rho, h, f, h, jet_norm(f, params).value))
    if not samples:
        raise AllExcludedError("no retained parameter samples")
    return KamState(0, samples, problem.grid)


def three_term_bound(f_norm: float, gap: float, N: int, kappa: float, mu: float, mu_next: float,
                     n: int, d_star: float, beta: float, M: float = 1.0) -> float:
    """M (e^{-gap N/2}/gap^n + (mu'/mu)^3 + N^{1+d*/gamma}/(kappa^{2+d*/2beta} mu^2 gap^{n+1}) [f]) [f]."""
    gamma = SPECTRUM_CONFIG['gamma']
    shape = (np.exp(-0.5 * gap * N) / gap ** n + (mu_next / mu) ** 3
             + N ** (1 + d_star / gamma) / (kappa ** (2 + d_star / (2 * beta)) * mu ** 2 * gap ** (n + 1))
             * f_norm)
    return float(M * shape * f_norm)


def transformed_perturbation(f: Hamiltonian, solution: HomologicalSolution,
                             nodes: int = None) -> Tuple[Hamiltonian, float]:
    """f+ and the summed Lie tail estimates of its pullbacks."""
    nodes = SOLVER_CONFIG['gauss_nodes'] if nodes is None else nodes
    S = solution.S
    space = S.space
    if isinstance(f, FTSeries):
        f_T, rest = extract_jet(f)
    else:
        f_T, rest = f, None
    tail = 0.0
    total: Hamiltonian = solution.R
    if rest is not None and not rest.is_zero():
        report = LieReport()
        total = _add(total, pullback_lie(rest, S.scaled(-1.0), report=report))
        tail += report.tail
    if S.is_zero():
        return total, tail
    base = solution.hhat(space) + solution.R
    x, w = roots_legendre(nodes)
    for t, weight in zip(0.5 * (x + 1.0), 0.5 * w):
        integrand = -lie_bracket(S, base * (1.0 - t) + f_T * t)
        report = LieReport()
        total = _add(total, pullback_lie(integrand, S.scaled(-t), report=report) * weight)
        tail += weight * report.tail
    return total, tail


def _advance(sample: SampleState, step: dict, policy: str, beta: float) -> Tuple[SampleState, dict]:
    params = NormParams(step['sigma'], step['mu'], beta=beta)
    params_next = NormParams(step['sigma_next'], step['mu_next'], beta=beta)
    solution = solve_full(sample.f, sample.h, step['kappa'], step['N'], step['sigma_next'], params)
    info = {'index': sample.index, 'min_divisor': solution.ledger.min_value(),
            'residual': solution.residual.get('relative', 0.0), 'S_norm': solution.norms['S'],
            'excluded': False, 'small': True, 'lie_tail': 0.0}
    if solution.excluded:
        info['excluded'] = True
        return replace(sample, alive=False), info
    limit = step['mu'] ** 2 * (step['sigma'] - step['sigma_next']) / 16.0
    if solution.norms['S'] > limit:
        info['small'] = False
        message = (f"sample {sample.index}: [S] = {solution.norms['S']:.3e} "
                   f"exceeds mu^2 (sigma - sigma')/16 = {limit:.3e}")
        if policy == 'abort':
            raise SmallnessError(message)
        logger.warning(message)
        if policy == 'exclude':
            info['excluded'] = True
            return replace(sample, alive=False), info
    f_plus, info['lie_tail'] = transformed_perturbation(sample.f, solution)
    h_plus = sample.h.shifted(solution.c, solution.chi, solution.B)
    measured = jet_norm(f_plus, params_next).value
    advanced = replace(sample, h=h_plus, f=f_plus, norm=measured,
                       generators=sample.generators + [solution.S])
    info['measured'] = measured
    return advanced, info


def _status(measured: float, target: float, previous: float) -> Tuple[str, float]:
    ratio = measured / previous if previous > 0 else 0.0
    if measured <= target:
        return 'accepted', ratio
    if ratio <= SCHEDULE_CONFIG['accept_ratio']:
        return 'accepted_above_target', ratio
    if ratio >= 1.0:
        return 'failed', ratio
    return 'stalled', ratio


def kam_step(state: KamState, schedule: KamSchedule, j: int, smallness: Optional[str] = None,
             threads: int = 1) -> KamState:
    """
    Один шаг KAM на всех сохраненных образцах rho.

    Excluded samples leave the mask for good. The returned state carries
    a report row with the measured [f+] (max over samples) and its status.
    """
    policy = SCHEDULE_CONFIG['smallness'] if smallness is None else smallness
    if policy not in ('abort', 'exclude', 'report'):
        raise InvalidParameterError(f"unknown smallness policy {policy!r}")
    step = schedule.step(j)
    alive = state.alive
    if not alive:
        raise AllExcludedError("no retained parameter samples")

    def one(sample):
        return _advance(sample, step, policy, schedule.beta)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, alive))
    else:
        outcomes = [one(s) for s in alive]

    by_index = {s.index: s for s in state.samples}
    keep = state.grid.mask.copy()
    infos = []
    for sample, info in outcomes:
        by_index[sample.index] = sample
        infos.append(info)
        if not sample.alive:
            keep[sample.index] = False
    samples = [by_index[s.index] for s in state.samples]
    grid = state.grid.restricted(keep)
    if not grid.mask.any():
        raise AllExcludedError(f"step {j}: every parameter sample excluded")

    survivors = [i for i in infos if not i['excluded']]
    measured = max(i['measured'] for i in survivors)
    previous = state.f_norm
    status, ratio = _status(measured, step['eps_next'], previous)
    finite = [i['min_divisor'] for i in infos if np.isfinite(i['min_divisor'])]
    row = {
        'step': j,
        'eps_target': step['eps_next'],
        'eps_measured': measured,
        'eps_previous': previous,
        'kappa': step['kappa'],
        'N': step['N'],
        'sigma': step['sigma'],
        'mu': step['mu'],
        'excluded_fraction': 1.0 - grid.retained_fraction,
        'min_divisor': min(finite) if finite else None,
        'S_norm': max(i['S_norm'] for i in survivors),
        'residual': max(i['residual'] for i in survivors),
        'lie_tail': max(i['lie_tail'] for i in survivors),
        'smallness_ok': all(i['small'] for i in infos),
        'ratio': ratio,
        'contraction': measured / previous ** 1.25 if previous > 0 else 0.0,
        'status': status,
    }
    if status == 'accepted':
        logger.info("step %d accepted: [f] = %.3e <= %.3e", j, measured, step['eps_next'])
    else:
        logger.warning("step %d %s: [f] = %.3e, target %.3e, ratio %.3f",
                       j, status, measured, step['eps_next'], ratio)
    log = {'step': j, 'S_norm': row['S_norm'], 'samples': [i['index'] for i in survivors]}
    return KamState(state.k + 1, samples, grid, state.transform_log + [log], state.rows + [row])


def step_consistency(before: SampleState, after: SampleState, S: JetHamiltonian,
                     points: Sequence) -> dict:
    """max |(h+ + f+)(x) - (h + f)(Phi(x))| with Phi the time-one flow of -S."""
    space = S.space
    old = _add(before.h.to_jet(space), before.f)
    new = _add(after.h.to_jet(space), after.f)
    pulled = pullback_grid(old, S.scaled(-1.0), points)
    direct = np.array([_value(new, *p) for p in points])
    deviation = float(np.max(np.abs(direct - pulled), initial=0.0))
    scale = float(np.max(np.abs(direct), initial=0.0))
    return {'deviation': deviation, 'relative': deviation / scale if scale > 0 else deviation}


def transform_increment(S: JetHamiltonian, points: Sequence, eps0: float, eps_prev: float) -> dict:
    """max |Phi(x) - x| over the points against eps^{4/5} eps_{k-1}^{1/4}."""
    worst = 0.0
    minus = S.scaled(-1.0)
    for theta, r, zeta in points:
        image = flow_point(minus, theta, r, zeta, 1.0, check=False)
        diffs = [np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0)
                 for a, b in zip(image, (theta, r, zeta))]
        worst = max(worst, float(max(diffs)))
    bound = eps0 ** 0.8 * eps_prev ** 0.25
    return {'increment': worst, 'bound': bound, 'holds': worst <= bound}


def limit_objects(state: KamState, eps0: float) -> dict:
    """
    omega' and A on every retained sample with their shifts from step 0.

    Stability: the blocks of J A must have purely imaginary spectra.
    """
    rows = []
    for sample in state.alive:
        h, h0 = sample.h, sample.h0
        omega_shift = float(np.max(np.abs(h.omega - h0.omega), initial=0.0))
        A_shift = norm_s_beta(h.A - h0.A).value
        real_part = 0.0
        for i, cluster in enumerate(h.clusters.clusters):
            block = np.real(h.A.block(i, i))
            spectrum = np.linalg.eigvals(symplectic_unit(cluster.size) @ block)
            scale = max(1.0, float(np.max(np.abs(spectrum), initial=0.0)))
            real_part = max(real_part, float(np.max(np.abs(spectrum.real), initial=0.0)) / scale)
        rows.append({'index': sample.index, 'rho': [float(x) for x in sample.rho],
                     'omega': [float(x) for x in h.omega], 'omega_shift': omega_shift,
                     'A_shift': A_shift, 'max_real_part': real_part})
    return {
        'samples': rows,
        'omega_shift': max((r['omega_shift'] for r in rows), default=0.0),
        'A_shift': max((r['A_shift'] for r in rows), default=0.0),
        'omega_ok': all(r['omega_shift'] <= eps0 for r in rows),
        'A_ok': all(r['A_shift'] <= eps0 for r in rows),
        'stability': all(r['max_real_part'] <= 1e-9 for r in rows),
        'retained_fraction': state.grid.retained_fraction,
    }


def _checks(before: KamState, after: KamState, eps0: float, eps_prev: float,
            rng: np.random.Generator, count: int) -> dict:
    sample_after = after.alive[0] if after.alive else None
    if sample_after is None or count <= 0:
        return {}
    sample_before = next(s for s in before.samples if s.index == sample_after.index)
    S = sample_after.generators[-1]
    points = sample_points(S.space, count, rng)
    try:
        return {'step': after.k - 1, 'sample': sample_after.index,
                'consistency': step_consistency(sample_before, sample_after, S, points),
                'increment': transform_increment(S, points, eps0, eps_prev)}
    except FlowSmallnessError as exc:
        logger.warning("flow checks skipped at step %d: %s", after.k - 1, exc)
        return {'step': after.k - 1, 'skipped': str(exc)}


def iterate(problem: KamProblem, schedule: KamSchedule, k_steps: int,
            smallness: Optional[str] = None, threads: int = 1, seed: int = 0,
            check_points: Optional[int] = None, strict: bool = True) -> Tuple[KamState, KamReport]:
    """
    Итерация KAM.

    Stops after k_steps or once [f_k] drops below the floor. The step
    constant M is measured on step 0 from the three-term bound and the
    schedule is rebuilt with it. A step that does not contract raises
    AcceptanceError when strict; a stalled step ends the run.
    """
    if k_steps < 0:
        raise InvalidParameterError("k_steps must be non-negative")
    if k_steps > schedule.j_max + 1:
        raise InvalidParameterError(f"schedule covers {schedule.j_max + 1} steps, asked {k_steps}")
    check_points = SCHEDULE_CONFIG['check_points'] if check_points is None else check_points
    rng = np.random.default_rng(seed)
    eps0 = schedule.eps[0]
    params = NormParams(schedule.sigma[0], schedule.mu[0], beta=schedule.beta)
    state = initial_state(problem, params)
    checks = []
    status = 'completed'
    n, d_star = problem.space.n, problem.space.clusters.d_star
    for j in range(k_steps):
        if 0 < state.f_norm < SCHEDULE_CONFIG['floor']:
            status = 'converged'
            break
        step = schedule.step(j)
        previous = state.f_norm
        after = kam_step(state, schedule, j, smallness, threads)
        row = after.rows[-1]
        gap = step['sigma'] - step['sigma_next']
        if j == 0:
            unit = three_term_bound(previous, gap, step['N'], step['kappa'], step['mu'],
                                    step['mu_next'], n, d_star, schedule.beta)
            if unit > 0 and row['eps_measured'] > 0:
                schedule = schedule.with_M(row['eps_measured'] / unit)
                row['M_measured'] = row['eps_measured'] / unit
        row['bound'] = three_term_bound(previous, gap, step['N'], step['kappa'], step['mu'],
                                        step['mu_next'], n, d_star, schedule.beta, schedule.M_const)
        row['bound_ok'] = row['eps_measured'] <= row['bound'] * (1 + 1e-12)
        checks.append(_checks(state, after, eps0, schedule.eps[j], rng, check_points))
        state = after
        if row['status'] == 'failed' and strict:
            raise AcceptanceError(
                f"step {j} did not contract: [f] {row['eps_measured']:.3e} vs {previous:.3e}")
        if row['status'] == 'stalled':
            status = 'stalled'
            break
    report = KamReport(steps=state.rows, limits=limit_objects(state, eps0), status=status,
                       schedule=schedule.to_dict(), checks=[c for c in checks if c])
    return state, report


def replay_transform(state: KamState, index: int, point, upto: Optional[int] = None):
    """Apply the logged generators of one sample in order: Phi_1 o ... o Phi_k at a point."""
    sample = next(s for s in state.samples if s.index == index)
    generators = sample.generators[:upto]
    theta, r, zeta = point
    # Phi_1 acts last on the point
    for S in reversed(generators):
        theta, r, zeta = flow_point(S.scaled(-1.0), theta, r, zeta, 1.0, check=False)
    return theta, r, zeta
