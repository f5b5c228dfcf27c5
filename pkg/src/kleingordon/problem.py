"""
Задача Клейна-Гордона на S^2

    H = <omega0(rho), r> + sum_a lambda_a xi_a eta_a + eps f,
    f(theta, r, zeta) = int_{S^2} G(x, u(theta, r, zeta)(x)) dx,
    u = sum_{i in A} sqrt(2 (I_i + r_i)) cos(theta_i) lambda_i^{-1/2} Psi_i
        + sum_{a in L} p_a lambda_a^{-1/2} Psi_a.

In real coordinates xi_a + eta_a = sqrt(2) p_a, so only the p variables
enter u.
"""
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement, product
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import svd
from scipy.special import binom
from scipy.stats import linregress

from src.blocks.matrix import BlockMatrix, Flavor, norm_s_beta
from src.config import KG_CONFIG, NORM_CONFIG, SCHEDULE_CONFIG, SERIES_CONFIG, SPECTRUM_CONFIG
from src.errors import FitError, InvalidParameterError
from src.hamiltonian.series import FTSeries
from src.hamiltonian.space import PhaseSpace, TruncationReport
from src.homological.normal_form import NormalFormHam
from src.kam.engine import KamProblem
from src.kam.schedule import check_gate
from src.kleingordon.nonlinearity import Nonlinearity
from src.kleingordon.quadrature import SphereQuadrature, harmonic_row
from src.spectrum.clusters import build_kg_clusters, kg_frequency, kg_spectrum
from src.spectrum.models import AdmissibleSet, ClusterSet, RhoGrid, SpectrumModel

logger = logging.getLogger(__name__)

RHO_BOX = (1.0, 2.0)


@dataclass
class SphereField:
    """Nonlinearity, modes and quadrature tables needed to evaluate u and G."""
    nonlinearity: Nonlinearity
    admissible: AdmissibleSet
    clusters: ClusterSet
    quad: SphereQuadrature
    lam_internal: np.ndarray
    lam_external: np.ndarray
    psi_internal: np.ndarray = field(repr=False, default=None)
    phi_external: np.ndarray = field(repr=False, default=None)
    g_values: Dict[int, np.ndarray] = field(repr=False, default_factory=dict)

    @classmethod
    def build(cls, nonlinearity: Nonlinearity, admissible: AdmissibleSet, clusters: ClusterSet,
              spectrum: SpectrumModel, rho: Optional[np.ndarray] = None,
              quad: Optional[SphereQuadrature] = None) -> "SphereField":
        """
        Tables at parameter rho. A missing quadrature is built with the
        exactness P W + deg g (+ KG_CONFIG['quad_extra_degree']).
        """
        W = max(clusters.W_max, admissible.max_weight)
        P = max(nonlinearity.max_power, 2)
        required = P * W + nonlinearity.field_degree
        if quad is None:
            quad = SphereQuadrature.build(required + KG_CONFIG['quad_extra_degree'])
        quad.require(required)
        j_max = max(W, nonlinearity.field_degree)
        table = quad.harmonics(j_max)
        lam_int = spectrum.frequencies(admissible.modes, rho)
        lam_ext = spectrum.frequencies(clusters.modes, rho)
        psi_int = np.array([table[harmonic_row(a)] for a in admissible.modes]) / np.sqrt(lam_int)[:, None]
        phi_ext = np.array([table[harmonic_row(a)] for a in clusters.modes]) / np.sqrt(lam_ext)[:, None]
        return cls(nonlinearity, admissible, clusters, quad, lam_int, lam_ext, psi_int, phi_ext,
                   nonlinearity.field_values(quad, table))

    @property
    def n(self) -> int:
        return self.admissible.n

    @property
    def actions(self) -> np.ndarray:
        return np.array(self.admissible.actions, dtype=float)

    def u_hat(self, theta, r=None, zeta=None) -> np.ndarray:
        """u at the quadrature nodes for one phase-space point."""
        theta = np.asarray(theta, dtype=float)
        r = np.zeros(self.n) if r is None else np.asarray(r, dtype=float)
        amplitude = np.sqrt(2.0 * (self.actions + r)) * np.cos(theta)
        u = amplitude @ self.psi_internal
        if zeta is not None:
            p = np.asarray(zeta, dtype=float)[0::2]
            u = u + p @ self.phi_external
        return u


def _partitions(total: int, smallest: int = 1) -> Iterator[Dict[int, int]]:
    """Partitions of total as {part: multiplicity}."""
    if total == 0:
        yield {}
        return
    for part in range(smallest, total + 1):
        for rest in _partitions(total - part, part):
            out = dict(rest)
            out[part] = out.get(part, 0) + 1
            yield out


def _r_decompositions(alpha: Sequence[int], actions: np.ndarray) -> List[Tuple[np.ndarray, float]]:
    """
    r^alpha terms of prod_i (sqrt(2(I_i + r_i)) - sqrt(2 I_i))^{k_i} / k_i!
    grouped by k: pairs (k, scalar).
    """
    per_axis = []
    for i, a in enumerate(alpha):
        options = []
        for parts in _partitions(a):
            count = sum(parts.values())
            scalar = 1.0
            for m, n_m in parts.items():
                c = math.sqrt(2.0 * actions[i]) * binom(0.5, m) * actions[i] ** (-m)
                scalar *= c ** n_m / math.factorial(n_m)
            options.append((count, scalar))
        per_axis.append(options)
    grouped: Dict[Tuple[int, ...], float] = {}
    for combo in product(*per_axis):
        key = tuple(c for c, _ in combo)
        grouped[key] = grouped.get(key, 0.0) + float(np.prod([s for _, s in combo]))
    return [(np.array(k, dtype=int), s) for k, s in grouped.items()]


def _sorted_combinations(count: int, degree: int) -> np.ndarray:
    """Rows a_1 <= ... <= a_degree over range(count)."""
    rows = list(combinations_with_replacement(range(count), degree))
    return np.array(rows, dtype=int).reshape(len(rows), degree)


def _products(phi: np.ndarray, combos: np.ndarray) -> np.ndarray:
    out = np.ones((len(combos), phi.shape[1]))
    for col in range(combos.shape[1]):
        out = out * phi[combos[:, col]]
    return out


def _inverse_factorials(combos: np.ndarray) -> np.ndarray:
    """1 / prod_v e_v! for sorted rows."""
    fact = np.ones(len(combos))
    run = np.ones(len(combos))
    for col in range(1, combos.shape[1]):
        run = np.where(combos[:, col] == combos[:, col - 1], run + 1, 1)
        fact = fact * run
    return 1.0 / fact


def _zeta_moments(weight: np.ndarray, phi: np.ndarray, degree: int,
                  tol: float = 1e-13) -> Tuple[np.ndarray, np.ndarray]:
    """
    Моменты int weight prod_v phi_v^{e_v} / e_v! по всем |e| = degree.

    weight(theta, x) is split by SVD into a few x-profiles; each profile is
    paired against the products over two half-degree index sets with one
    matrix product, so the cost follows the rank in theta and not the grid.
    Moments below tol times the largest one are dropped. Returns the sorted
    index rows and their values on the theta grid.
    """
    U, s, Vt = svd(weight, full_matrices=False)
    if not s.size or s[0] == 0:
        return np.zeros((0, degree), dtype=int), np.zeros((weight.shape[0], 0))
    rank = int(np.count_nonzero(s > 1e-15 * s[0]))
    U, Vt = U[:, :rank] * s[:rank], Vt[:rank]
    half = degree // 2
    left = _sorted_combinations(len(phi), half)
    right = _sorted_combinations(len(phi), degree - half)
    L, R = _products(phi, left), _products(phi, right)
    if half:
        li, ri = np.nonzero(left[:, -1][:, None] <= right[:, 0][None, :])
    else:
        li, ri = np.zeros(len(right), dtype=int), np.arange(len(right))
    combos = np.concatenate([left[li], right[ri]], axis=1)
    moments = np.stack([((L * v) @ R.T)[li, ri] for v in Vt]) * _inverse_factorials(combos)
    size = np.abs(moments).max(axis=0, initial=0.0)
    keep = size > tol * size.max(initial=0.0)
    if not keep.any():
        return combos[:0], np.zeros((weight.shape[0], 0))
    return combos[keep], U @ moments[:, keep]


def assemble_perturbation(sphere: SphereField, space: PhaseSpace) -> FTSeries:
    """
    Ряд f до ограничений пространства.

    u splits into u0(theta, x) and the increment d = d_r + d_zeta; every
    coefficient is int G^{(q)}(x, u0) times the matching product of
    increments, evaluated on a theta grid fine enough for the trigonometric
    degree max p and brought to Fourier form by FFT.
    """
    if space.n != sphere.n or space.clusters.modes != sphere.clusters.modes:
        raise InvalidParameterError("phase space does not match the field's modes")
    nl = sphere.nonlinearity
    if nl.is_zero:
        return FTSeries.zero(space)
    box = space.box
    P_theta = max(2 * nl.max_power + 1, 2 * box.K + 1)
    thetas = box.grid(P_theta)
    base = np.cos(thetas)[:, :, None] * sphere.psi_internal[None, :, :]
    u0 = np.tensordot(np.sqrt(2.0 * sphere.actions), base, axes=(0, 1))
    weights = sphere.quad.weights
    n = space.n

    values: Dict[tuple, np.ndarray] = {}
    for r_deg in range(0, space.D_r + 1):
        budget = min(space.D_zeta, space.D_w - 2 * r_deg)
        if budget < 0:
            break
        for alpha in product(range(r_deg + 1), repeat=n):
            if sum(alpha) != r_deg:
                continue
            stem = space.monomial(dict(enumerate(alpha)))
            for k, scalar in _r_decompositions(alpha, sphere.actions):
                factor = weights * scalar
                for i, k_i in enumerate(k):
                    if k_i:
                        factor = factor * base[:, i, :] ** k_i
                for dz in range(budget + 1):
                    q = int(k.sum()) + dz
                    if q > nl.max_power:
                        continue
                    weight = nl.derivative(q, sphere.g_values, u0) * factor
                    combos, vals = _zeta_moments(weight, sphere.phi_external, dz)
                    for combo, column in zip(combos, vals.T):
                        exps = list(stem)
                        for a in combo:
                            exps[n + 2 * a] += 1
                        mono = tuple(exps)
                        values[mono] = values[mono] + column if mono in values else column

    truncation = TruncationReport()
    if not values:
        return FTSeries(space, {}, truncation)
    monos = list(values)
    grid = np.stack([values[mono] for mono in monos], axis=-1)
    coeffs, dropped = box.from_grid(grid, P_theta)
    truncation.add(fourier=dropped)
    coeffs = np.where(np.abs(coeffs) > 1e-14 * np.abs(grid).max(), coeffs, 0).T.copy()
    terms = dict(zip(monos, coeffs))
    series = FTSeries(space, terms, truncation).symmetrized()
    logger.info("assembled f: %d monomials, dropped Fourier mass %.3e", len(series.terms),
                truncation.fourier_mass)
    return series


def gradient_vector(sphere: SphereField, theta, r=None, zeta=None) -> np.ndarray:
    """df/dzeta: df/dp_a = int G'(x, u) Psi_a / sqrt(lambda_a), df/dq_a = 0."""
    u = sphere.u_hat(theta, r, zeta)
    g1 = sphere.nonlinearity.derivative(1, sphere.g_values, u)
    grad = np.zeros(sphere.clusters.n_vars)
    grad[0::2] = sphere.phi_external @ (g1 * sphere.quad.weights)
    return grad


def hessian_blocks(sphere: SphereField, theta, r=None, zeta=None, s: float = None,
                   beta: float = 0.5) -> BlockMatrix:
    """
    Гессиан f по zeta в точке.

    M_a^b = int G''(x, u) Psi_a Psi_b / sqrt(lambda_a lambda_b) on the (p_a, p_b)
    entry; q rows and columns vanish.
    """
    u = sphere.u_hat(theta, r, zeta)
    g2 = sphere.nonlinearity.derivative(2, sphere.g_values, u)
    phi = sphere.phi_external
    M = (phi * (g2 * sphere.quad.weights)) @ phi.T
    M = 0.5 * (M + M.T)
    dense = np.zeros((sphere.clusters.n_vars,) * 2)
    dense[0::2, 0::2] = M
    params = {'beta': beta}
    if s is not None:
        params['s'] = s
    return BlockMatrix.from_dense(sphere.clusters, dense, Flavor.REAL, **params)


def verify_decay(M: BlockMatrix, s: float, beta: float = 0.5, tol: float = 1e-13) -> dict:
    """
    Подгонка убывания внедиагональных блоков.

    Fits log(||M_ab|| (w_a w_b)^beta) against log((w + |w_a^2 - w_b^2|)/w),
    w = min(w_a, w_b). When the nonzero off-diagonal blocks sit inside a
    band |w_a - w_b| <= L narrower than the truncation, the decay is faster
    than any power and the exponent is reported as infinite.
    """
    clusters = M.clusters
    weights = clusters.cluster_weights
    norms = M.block_norms()
    scale = max(norms.values(), default=0.0)
    required = s / 2.0 + 0.25
    kept = {key: value for key, value in norms.items() if value > tol * scale}
    xs, ys = [], []
    for (i, j), value in kept.items():
        if i == j:
            continue
        wa, wb = weights[i], weights[j]
        w = min(wa, wb)
        xs.append(math.log((w + abs(wa ** 2 - wb ** 2)) / w))
        ys.append(math.log(value) + beta * math.log(wa * wb))
    widest = float(weights.max() - weights.min())
    band = M.like({key: M.blocks[key] for key in kept}).bandwidth()
    report = {'s': s, 'required_exponent': required, 'points': len(xs), 'band': band,
              'norm': norm_s_beta(M.with_params(s=s, beta=beta)).value}
    if not xs:
        report.update(exponent=float('inf'), holds=True, banded=True, diagonal=True)
        return report
    if band < widest:
        report.update(exponent=float('inf'), holds=True, banded=True, diagonal=False)
        return report
    if len(xs) < 3 or len(set(xs)) < 2:
        raise FitError(f"only {len(xs)} nonzero off-diagonal blocks, need 3")
    fit = linregress(xs, ys)
    exponent = -float(fit.slope)
    report.update(exponent=exponent, intercept=float(fit.intercept), rvalue=float(fit.rvalue),
                  holds=exponent >= 0.9 * required, banded=False, diagonal=False)
    return report


def gradient_regularity(nonlinearity: Nonlinearity, admissible: AdmissibleSet, W_values: Sequence[int],
                        theta, s: float, d: int = 2, m: float = None) -> dict:
    """||grad_zeta f||_{s+1/2} at zeta = 0, r = 0 for growing truncations."""
    m = SPECTRUM_CONFIG['mass'] if m is None else m
    spectrum = kg_spectrum(d, m, 0.0, admissible)
    rows = []
    for W in W_values:
        clusters = build_kg_clusters(d, W, admissible)
        sphere = SphereField.build(nonlinearity, admissible, clusters, spectrum)
        grad = gradient_vector(sphere, theta)
        w = clusters.var_weights
        rows.append({'W_max': int(W), 'norm': float(np.linalg.norm(w ** (s + 0.5) * grad))})
    changes = [abs(b['norm'] - a['norm']) / a['norm'] if a['norm'] > 0 else abs(b['norm'])
               for a, b in zip(rows, rows[1:])]
    return {'s': s, 'rows': rows, 'max_relative_change': max(changes, default=0.0),
            'stable': all(c < 0.05 for c in changes)}


@dataclass
class KGProblem:
    d: int
    m: float
    delta: float
    eps: float
    admissible: AdmissibleSet
    clusters: ClusterSet
    spectrum: SpectrumModel
    space: PhaseSpace
    nonlinearity: Nonlinearity
    sphere: SphereField
    f: FTSeries
    delta0: float
    grid: RhoGrid
    rho_ref: np.ndarray
    gate: dict = field(default_factory=dict)

    def omega0(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return np.array([kg_frequency(a.j, self.d, self.m, self.delta * rho[i])
                         for i, a in enumerate(self.admissible.modes)])

    def normal_form(self, rho) -> NormalFormHam:
        lam = self.spectrum.frequencies(self.clusters.modes, rho)
        A = BlockMatrix.diagonal(self.clusters, lam)
        return NormalFormHam(self.omega0(rho), A, rho=np.asarray(rho, dtype=float))

    def perturbation(self, rho=None) -> FTSeries:
        """eps f, assembled once at the reference parameter."""
        return self.f * self.eps

    def kam_problem(self) -> KamProblem:
        return KamProblem(self.space, self.normal_form, self.perturbation, self.grid,
                          self.delta0, name='klein-gordon-S2')


def build_problem(config: dict) -> KGProblem:
    """
    Сборка задачи из словаря настроек.

    Keys: d, m, delta, eps, admissible [(j, ell, I)], W_max, caps {K_max, D_r,
    D_zeta, D_w}, nonlinearity (Nonlinearity), samples_per_axis, gate.
    """
    d = int(config.get('d', SPECTRUM_CONFIG['d']))
    if d != 2:
        raise InvalidParameterError(f"the sphere quadrature supports d = 2 only, got {d}")
    m = float(config.get('m', SPECTRUM_CONFIG['mass']))
    delta = float(config.get('delta', SPECTRUM_CONFIG['delta']))
    eps = float(config.get('eps', KG_CONFIG['eps']))
    if not 0 <= eps < 1:
        raise InvalidParameterError(f"eps must lie in [0, 1), got {eps}")
    admissible = AdmissibleSet.from_triples(config.get('admissible', KG_CONFIG['admissible']))
    if not admissible.modes:
        raise InvalidParameterError("empty admissible set")
    for a in admissible.modes:
        if not 1 <= a.ell <= 2 * a.j + 1:
            raise InvalidParameterError(f"admissible mode {a} does not exist on S^2")
    nonlinearity = config.get('nonlinearity') or Nonlinearity()
    if not nonlinearity.is_zero and nonlinearity.vanishing_order < 3:
        raise InvalidParameterError("G must vanish at least to order 3 at u = 0")
    W_max = int(config.get('W_max', SPECTRUM_CONFIG['W_max']))
    caps = dict(config.get('caps') or {})
    K = int(caps.get('K_max', SERIES_CONFIG['K_max']))
    D_r = int(caps.get('D_r', SERIES_CONFIG['D_r']))
    # the zeta cap holds every power of G; the weighted cap follows the raised value
    D_zeta = max(int(caps.get('D_zeta', SERIES_CONFIG['D_zeta'])), nonlinearity.max_power)
    D_w = int(caps.get('D_w', D_zeta))

    clusters = build_kg_clusters(d, W_max, admissible)
    spectrum = kg_spectrum(d, m, delta, admissible, SPECTRUM_CONFIG['c0'], SPECTRUM_CONFIG['gamma'])
    space = PhaseSpace(admissible.n, clusters, K=K, D_r=D_r, D_zeta=D_zeta, D_w=D_w)
    rho_ref = np.full(admissible.n, 0.5 * sum(RHO_BOX))
    sphere = SphereField.build(nonlinearity, admissible, clusters, spectrum, rho_ref)
    f = assemble_perturbation(sphere, space)
    delta0 = spectrum.delta0
    gate_info = {}
    if eps > 0:
        gate_info = check_gate(eps, NORM_CONFIG['beta'], clusters.d_star, delta0,
                               config.get('gate', SCHEDULE_CONFIG['gate']))
    per_axis = int(config.get('samples_per_axis', SPECTRUM_CONFIG['samples_per_axis']))
    grid = RhoGrid.uniform([RHO_BOX[0]] * admissible.n, [RHO_BOX[1]] * admissible.n, per_axis)
    logger.info("Klein-Gordon problem: n=%d, %r, eps=%g, delta0=%.3e",
                admissible.n, clusters, eps, delta0)
    return KGProblem(d, m, delta, eps, admissible, clusters, spectrum, space, nonlinearity, sphere,
                     f, delta0, grid, rho_ref, gate_info)

