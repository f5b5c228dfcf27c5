"""
Конвейеры запуска

One function per mode. Each takes a RunConfig, an artifact and the stage
log, writes its reports and series, and returns a status dict whose
'accepted' flag decides the exit code.
"""
import logging

import numpy as np

from src.blocks.matrix import dump_rows
from src.config import KG_CONFIG, NORM_CONFIG, SCHEDULE_CONFIG, SOLVER_CONFIG, SPECTRUM_CONFIG
from src.hamiltonian.norms import NormParams, jet_norm
from src.homological.solver import solution_family_norms, solve_full
from src.kam.engine import iterate
from src.kam.schedule import make_schedule
from src.kleingordon.problem import (RHO_BOX, SphereField, build_problem, gradient_regularity,
                                     hessian_blocks, verify_decay)
from src.kleingordon.nonlinearity import Nonlinearity
from src.runner.config import RunConfig
from src.runner.persist import RunArtifact, StageLog
from src.spectrum.clusters import (build_kg_clusters, check_asymptotics, check_cluster_separation,
                                   kg_spectrum, spectrum_rows)
from src.spectrum.divisors import exclusion_report, exclusion_scan, fit_exclusion_scaling
from src.spectrum.models import AdmissibleSet, RhoGrid

logger = logging.getLogger(__name__)


def _light_problem(config: RunConfig):
    """Admissible set, clusters and spectrum without assembling f."""
    p = config.problem
    d = p.get('d', SPECTRUM_CONFIG['d'])
    admissible = AdmissibleSet.from_triples(p.get('admissible', KG_CONFIG['admissible']))
    clusters = build_kg_clusters(d, p.get('W_max', SPECTRUM_CONFIG['W_max']), admissible)
    spectrum = kg_spectrum(d, p.get('m', SPECTRUM_CONFIG['mass']), p.get('delta', SPECTRUM_CONFIG['delta']),
                           admissible, SPECTRUM_CONFIG['c0'], SPECTRUM_CONFIG['gamma'])
    return admissible, clusters, spectrum


def run_spectrum(config: RunConfig, artifact: RunArtifact, stages: StageLog) -> dict:
    stages.begin('spectrum')
    admissible, clusters, spectrum = _light_problem(config)
    rows = spectrum_rows(clusters, spectrum)
    artifact.table('spectrum', ['j', 'ell', 'w', 'lambda', 'cluster_size'],
                   ([r['j'], r['ell'], r['w'], r['lambda'], r['cluster_size']] for r in rows))
    kappa = config.solver.get('kappa', SOLVER_CONFIG['kappa'])
    report = {
        'modes': len(rows),
        'clusters': len(clusters),
        'growth': clusters.growth_report(),
        'asymptotics': check_asymptotics(clusters, spectrum),
        'separation': check_cluster_separation(clusters, spectrum, kappa),
        'delta0': spectrum.delta0,
    }
    artifact.report('spectrum', report)
    stages.end('spectrum', {'modes': len(rows)})
    return {'accepted': bool(report['growth']['holds'])}


def run_scan(config: RunConfig, artifact: RunArtifact, stages: StageLog) -> dict:
    stages.begin('scan')
    admissible, clusters, spectrum = _light_problem(config)
    per_axis = config.problem.get('samples_per_axis', SPECTRUM_CONFIG['samples_per_axis'])
    grid = RhoGrid.uniform([RHO_BOX[0]] * admissible.n, [RHO_BOX[1]] * admissible.n, per_axis)
    N = config.scan.get('N', SOLVER_CONFIG['N'])
    kappas = config.scan.get('kappas') or [config.solver.get('kappa', SOLVER_CONFIG['kappa'])]

    def omega(rho):
        return spectrum.frequencies(admissible.modes, rho)

    reports, fractions = [], []
    for kappa in kappas:
        scanned = exclusion_scan(grid, omega, spectrum, clusters, kappa, N, config.threads,
                                 delta0=spectrum.delta0)
        reports.append(exclusion_report(scanned, kappa, N))
        fractions.append(1.0 - scanned.retained_fraction)
    slope = fit_exclusion_scaling(kappas, fractions)
    artifact.table('exclusion', ['kappa', 'N', 'retained_fraction', 'excluded_fraction'],
                   ([r['kappa'], N, r['retained_fraction'], f] for r, f in zip(reports, fractions)))
    artifact.report('exclusion', {'scans': reports, 'slope': slope, 'expected_slope': 1.0 / 3.0,
                                  'samples': len(grid), 'delta0': spectrum.delta0})
    stages.end('scan', {'kappas': len(kappas)})
    return {'accepted': True, 'slope': slope}


def run_homological(config: RunConfig, artifact: RunArtifact, stages: StageLog) -> dict:
    stages.begin('problem')
    problem = build_problem(config.problem_settings())
    stages.end('problem', {'monomials': len(problem.f.terms)})
    stages.begin('homological')
    rho = problem.grid.samples[problem.grid.retained_indices()[0]]
    kappa = config.solver.get('kappa', SOLVER_CONFIG['kappa'])
    N = min(config.solver.get('N', SOLVER_CONFIG['N']), problem.space.K)
    sigma_prime = config.solver.get('sigma_prime', SOLVER_CONFIG['sigma_prime'])
    params = NormParams(NORM_CONFIG['sigma'], NORM_CONFIG['mu'])
    solution = solve_full(problem.perturbation(rho), problem.normal_form(rho), kappa, N,
                          sigma_prime, params)
    family = solution_family_norms(lambda r: (problem.normal_form(r), problem.perturbation(r)),
                                   [rho], kappa, N, params)
    report = solution.to_dict()
    report['rho'] = rho
    report['family_norms'] = {name: norm.to_dict() for name, norm in family.items()}
    artifact.report('homological', report)
    rows = dict(solution.norms)
    rows.update({f'{name}_family': norm.value for name, norm in family.items()})
    artifact.table('homological_norms', ['quantity', 'value'], sorted(rows.items()))
    stages.end('homological', {'excluded': solution.excluded})
    return {'accepted': not solution.excluded, 'residual': solution.residual.get('relative')}


def run_kam(config: RunConfig, artifact: RunArtifact, stages: StageLog) -> dict:
    stages.begin('problem')
    problem = build_problem(config.problem_settings())
    stages.end('problem', {'monomials': len(problem.f.terms)})
    stages.begin('kam')
    sched = config.schedule
    sigma0 = sched.get('sigma0', SCHEDULE_CONFIG['sigma0'])
    mu0 = sched.get('mu0', SCHEDULE_CONFIG['mu0'])
    params = NormParams(sigma0, mu0)
    rhos = problem.grid.samples[problem.grid.retained_indices()]
    eps0 = max(jet_norm(problem.perturbation(rho), params).value for rho in rhos)
    if not 0 < eps0 < 1:
        # f = 0 leaves the schedule to the nominal size
        eps0 = problem.eps if 0 < problem.eps < 1 else KG_CONFIG['eps']
    schedule = make_schedule(eps0, sigma0, mu0, NORM_CONFIG['beta'], problem.clusters.d_star,
                             problem.delta0, max(config.steps - 1, 0), gate=sched.get('gate'),
                             kappa0=sched.get('kappa0'), n_max=sched.get('n_max', problem.space.K),
                             M=sched.get('M'))
    _, report = iterate(problem.kam_problem(), schedule, config.steps,
                        smallness=sched.get('smallness'), threads=config.threads,
                        seed=config.seed)
    payload = report.to_dict()
    payload['eps0'] = eps0
    artifact.report('kam', payload)
    artifact.table('kam_steps',
                   ['step', 'eps_target', 'eps_measured', 'kappa', 'N', 'sigma', 'mu',
                    'excluded_fraction', 'S_norm', 'residual', 'status'],
                   ([r['step'], r['eps_target'], r['eps_measured'], r['kappa'], r['N'], r['sigma'],
                     r['mu'], r['excluded_fraction'], r['S_norm'], r['residual'], r['status']]
                    for r in report.steps))
    limits = report.limits
    artifact.table('kam_limits', ['index', 'omega_shift', 'A_shift', 'max_real_part'],
                   ([r['index'], r['omega_shift'], r['A_shift'], r['max_real_part']]
                    for r in limits['samples']))
    stages.end('kam', {'steps': len(report.steps), 'status': report.status})
    accepted = (report.status in ('completed', 'converged') and limits['omega_ok']
                and limits['A_ok'] and limits['stability'])
    return {'accepted': bool(accepted), 'status': report.status}


def run_decay(config: RunConfig, artifact: RunArtifact, stages: StageLog) -> dict:
    stages.begin('decay')
    admissible, clusters, spectrum = _light_problem(config)
    nonlinearity = Nonlinearity.parse(config.nonlinearity)
    s = config.decay.get('s', NORM_CONFIG['s'])
    theta = config.decay.get('theta') or [0.0] * admissible.n
    rho_ref = np.full(admissible.n, 0.5 * sum(RHO_BOX))
    sphere = SphereField.build(nonlinearity, admissible, clusters, spectrum, rho_ref)
    M = hessian_blocks(sphere, theta, s=s)
    report = {'decay': verify_decay(M, s)}
    W_values = config.decay.get('W_values')
    if W_values:
        report['gradient'] = gradient_regularity(nonlinearity, admissible, W_values, theta, s,
                                                 config.problem.get('d', SPECTRUM_CONFIG['d']),
                                                 config.problem.get('m', SPECTRUM_CONFIG['mass']))
    header, rows = dump_rows(M)
    report['blocks'] = header
    artifact.report('decay', report)
    artifact.table('hessian_blocks', ['w_a', 'idx_a', 'w_b', 'idx_b'] +
                   [f"{part}{i}" for i in range(4) for part in ('re', 'im')], rows)
    stages.end('decay', {'points': report['decay']['points']})
    accepted = report['decay']['holds'] and report.get('gradient', {}).get('stable', True)
    return {'accepted': bool(accepted)}


PIPELINES = {
    'spectrum': run_spectrum,
    'scan': run_scan,
    'homological': run_homological,
    'kam': run_kam,
    'decay': run_decay,
}
