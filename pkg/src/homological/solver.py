"""
Гомологическое уравнение

Solves {h, S} + f^T = hhat + R for a normal form h and a jet f^T:
Fourier division for the angle and action parts, Hermitian diagonalization
in the cluster frame for the zeta and zeta-zeta parts. Divisors below their
kappa threshold are recorded in the ledger, not raised.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from src.blocks.matrix import BlockMatrix, Flavor, project_normal_form
from src.config import SOLVER_CONFIG, SPECTRUM_CONFIG
from src.errors import InvalidParameterError
from src.hamiltonian.jet import PARTS, JetHamiltonian, extract_jet, jet_bracket
from src.hamiltonian.norms import JetNorm, NormParams, family_norm, jet_norm
from src.hamiltonian.series import FTSeries
from src.hamiltonian.space import FourierBox, PhaseSpace
from src.homological.frame import cluster_frame
from src.homological.normal_form import NormalFormHam
from src.spectrum.divisors import DivisorFamily, DivisorLedger

logger = logging.getLogger(__name__)


def _safe_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """num / den, zero where den vanishes."""
    num, den = np.broadcast_arrays(num, den)
    out = np.zeros(num.shape, dtype=complex)
    np.divide(num, den, out=out, where=den != 0)
    return out


def _reality(a: np.ndarray, box: FourierBox) -> np.ndarray:
    return 0.5 * (a + np.conj(a[box.neg_index()]))


def _check_cutoff(box: FourierBox, N: int, kappa: float):
    if N < 0 or N > box.K:
        raise InvalidParameterError(f"cutoff N={N} must lie in [0, K_max={box.K}]")
    if kappa <= 0:
        raise InvalidParameterError(f"kappa must be positive, got {kappa}")


def _k_of(box: FourierBox, index: int) -> Tuple[int, ...]:
    return tuple(int(x) for x in box.kvecs[index])


def solve_angle_action(f_theta: np.ndarray, f_r: np.ndarray, omega: np.ndarray, kappa: float,
                       N: int, box: FourierBox, ledger: Optional[DivisorLedger] = None):
    """
    <omega, grad S> + f = mean + tail for the angle part and each action component.

    Returns (S_theta, S_r, R_theta, R_r, c, chi).
    """
    _check_cutoff(box, N, kappa)
    ledger = ledger if ledger is not None else DivisorLedger()
    kw = box.frequencies(omega)
    idx = np.nonzero((box.l1 <= N) & (box.l1 > 0))[0]
    ledger.observe(DivisorFamily.K, kw[idx], kappa, lambda j: (_k_of(box, idx[j]), None, None))
    factor = np.zeros(box.size, dtype=complex)
    factor[idx] = _safe_divide(1j, kw[idx])
    tail = box.l1 > N
    z = box.zero_index
    return (f_theta * factor, f_r * factor[:, None], np.where(tail, f_theta, 0),
            np.where(tail[:, None], f_r, 0), float(f_theta[z].real), f_r[z].real.copy())


def solve_zeta(f_zeta: np.ndarray, h: NormalFormHam, kappa: float, N: int, box: FourierBox,
               ledger: Optional[DivisorLedger] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    (i <k, omega> - A J) S(k) = -f(k) for |k|_1 <= N, cluster by cluster.

    In the frame V the xi part divides by i(<k,omega> - conj Q) and the eta
    part by i(<k,omega> + Q); thresholds kappa w_a.
    """
    _check_cutoff(box, N, kappa)
    ledger = ledger if ledger is not None else DivisorLedger()
    kw = box.frequencies(h.omega)
    idx = np.nonzero(box.l1 <= N)[0]
    c = kw[idx]
    S = np.zeros(f_zeta.shape, dtype=complex)
    for i, cluster in enumerate(h.clusters.clusters):
        sl, d, w = cluster.var_slice, cluster.size, cluster.weight
        F = f_zeta[idx][:, sl]
        if not np.any(F):
            continue
        D, P = h.eigensystem(i)
        V = cluster_frame(d)
        g = -F @ V.conj()
        den_xi = 1j * (c[:, None] - D[None, :])
        den_eta = 1j * (c[:, None] + D[None, :])

        def label(j, d=d, w=w):
            return _k_of(box, idx[j // d]), int(w), None
        ledger.observe(DivisorFamily.K_LAMBDA, np.abs(den_xi), kappa * w, label)
        ledger.observe(DivisorFamily.K_LAMBDA, np.abs(den_eta), kappa * w, label)

        y_xi = _safe_divide(g[:, :d] @ P, den_xi) @ P.conj().T
        y_eta = _safe_divide(g[:, d:] @ P.conj(), den_eta) @ P.T
        S[idx, sl] = np.concatenate([y_xi, y_eta], axis=1) @ V.T
    R = np.where((box.l1 > N)[:, None], f_zeta, 0)
    return _reality(S, box), R


def normal_form_part(f_zetazeta_mean: np.ndarray, clusters) -> BlockMatrix:
    """B: the span{I, J} projection of the diagonal cluster blocks of the mean."""
    return project_normal_form(BlockMatrix.from_dense(clusters, np.real(f_zetazeta_mean),
                                                      Flavor.REAL))


def solve_zetazeta(f_zetazeta: np.ndarray, h: NormalFormHam, kappa: float, N: int,
                   box: FourierBox, ledger: Optional[DivisorLedger] = None):
    """
    i <k, omega> S - A J S + S J A = -f(k) + B delta_{k0} for |k|_1 <= N.

    Per cluster pair the frame S' = V_a^T S V_b splits into xi-xi, xi-eta,
    eta-xi and eta-eta blocks, each diagonal in the eigenbases of Q_a, Q_b.
    The xi-eta blocks at k = 0, a = b are the normal form B and are not
    divided. Returns (S, R, B).
    """
    _check_cutoff(box, N, kappa)
    ledger = ledger if ledger is not None else DivisorLedger()
    clusters = h.clusters
    z = box.zero_index
    B = normal_form_part(f_zetazeta[z], clusters)
    B_dense = B.to_dense()
    kw = box.frequencies(h.omega)
    idx = np.nonzero(box.l1 <= N)[0]
    c = kw[idx][:, None, None]
    zero_row = int(np.nonzero(idx == z)[0][0])
    rows = np.arange(len(idx))
    S = np.zeros(f_zetazeta.shape, dtype=complex)

    for a, ca in enumerate(clusters.clusters):
        Da, Pa = h.eigensystem(a)
        Va, sa, da = cluster_frame(ca.size), ca.var_slice, ca.size
        for b, cb in enumerate(clusters.clusters):
            sb, db = cb.var_slice, cb.size
            G = -f_zetazeta[idx][:, sa, sb]
            if a == b:
                G[zero_row] += B_dense[sa, sb]
            if not np.any(G):
                continue
            Db, Pb = h.eigensystem(b)
            Vb = cluster_frame(db)
            Gp = Va.T[None] @ G @ Vb[None]
            d_sum = 1j * (c + Da[None, :, None] + Db[None, None, :])
            d_xe = 1j * (c + Da[None, :, None] - Db[None, None, :])
            d_ex = 1j * (c - Da[None, :, None] + Db[None, None, :])
            d_neg = 1j * (c - Da[None, :, None] - Db[None, None, :])
            kept = rows
            if a == b:
                d_xe[zero_row] = 0.0
                d_ex[zero_row] = 0.0
                kept = rows[rows != zero_row]

            def label_for(which, wa=ca.weight, wb=cb.weight, size=da * db):
                return lambda j: (_k_of(box, idx[which[j // size]]), int(wa), int(wb))
            sum_thr = kappa * (ca.weight + cb.weight)
            diff_thr = kappa * (1 + abs(ca.weight - cb.weight))
            ledger.observe(DivisorFamily.K_SUM, np.abs(d_sum), sum_thr, label_for(rows))
            ledger.observe(DivisorFamily.K_SUM, np.abs(d_neg), sum_thr, label_for(rows))
            ledger.observe(DivisorFamily.K_DIFF, np.abs(d_xe[kept]), diff_thr, label_for(kept))
            ledger.observe(DivisorFamily.K_DIFF, np.abs(d_ex[kept]), diff_thr, label_for(kept))

            X_xx = Pa @ _safe_divide(Pa.conj().T @ Gp[:, :da, :db] @ Pb.conj(), d_sum) @ Pb.T
            X_xe = Pa @ _safe_divide(Pa.conj().T @ Gp[:, :da, db:] @ Pb, d_xe) @ Pb.conj().T
            X_ex = Pa.conj() @ _safe_divide(Pa.T @ Gp[:, da:, :db] @ Pb.conj(), d_ex) @ Pb.T
            X_ee = Pa.conj() @ _safe_divide(Pa.T @ Gp[:, da:, db:] @ Pb, d_neg) @ Pb.conj().T
            Sp = np.concatenate([np.concatenate([X_xx, X_xe], axis=2),
                                 np.concatenate([X_ex, X_ee], axis=2)], axis=1)
            block = Va.conj()[None] @ Sp @ Vb.conj().T[None]
            S[idx[:, None, None], np.arange(sa.start, sa.stop)[None, :, None],
              np.arange(sb.start, sb.stop)[None, None, :]] = block

    S = _reality(S, box)
    S = 0.5 * (S + np.swapaxes(S, 1, 2))
    R = np.where((box.l1 > N)[:, None, None], f_zetazeta, 0)
    return S, R, B


@dataclass
class HomologicalSolution:
    """
    Решение гомологического уравнения.

    hhat = c + <chi, r> + 1/2 <zeta, B zeta>.
    """
    S: JetHamiltonian
    R: JetHamiltonian
    c: float
    chi: np.ndarray
    B: BlockMatrix
    ledger: DivisorLedger
    kappa: float
    N: int
    residual: Dict[str, float] = field(default_factory=dict)
    norms: Dict[str, float] = field(default_factory=dict)

    @property
    def excluded(self) -> bool:
        return self.ledger.excluded

    def hhat(self, space: PhaseSpace) -> JetHamiltonian:
        jet = JetHamiltonian.zeros(space)
        z = space.box.zero_index
        jet.theta[z] = self.c
        jet.r[z] = self.chi
        jet.zetazeta[z] = self.B.to_dense()
        return jet

    def to_dict(self) -> dict:
        return {
            'kappa': self.kappa,
            'N': self.N,
            'c': self.c,
            'chi': [float(x) for x in self.chi],
            'excluded': self.excluded,
            'min_divisor': self.ledger.min_value() if np.isfinite(self.ledger.min_value()) else None,
            'divisors': self.ledger.to_dict(),
            'residual': dict(self.residual),
            'norms': dict(self.norms),
        }


def residual(h: NormalFormHam, f_jet: JetHamiltonian, solution: HomologicalSolution) -> Dict[str, float]:
    """Per-part max |{h,S} + f^T - hhat - R|, absolute and relative to max |f^T|."""
    space = solution.S.space
    lhs = jet_bracket(h.to_jet(space), solution.S) + f_jet - solution.hhat(space) - solution.R
    out = {name: float(np.max(np.abs(part), initial=0.0)) for name, part in zip(PARTS, lhs.parts())}
    out['max'] = max(out.values())
    scale = f_jet.max_abs()
    out['relative'] = out['max'] / scale if scale > 0 else out['max']
    return out


def solution_norms(f_jet: JetHamiltonian, solution: HomologicalSolution,
                   params: NormParams, sigma_prime: float) -> Dict[str, float]:
    """Measured [f], [S]^{beta+}, [R] and the bound shapes with unit constants."""
    if not 0 < sigma_prime < params.sigma:
        raise InvalidParameterError(f"need 0 < sigma' < sigma, got {sigma_prime}, {params.sigma}")
    narrow = params.shrunk(sigma=sigma_prime)
    gap = params.sigma - sigma_prime
    n, N, kappa = f_jet.space.n, solution.N, solution.kappa
    d_star = f_jet.space.clusters.d_star
    gamma = SPECTRUM_CONFIG['gamma']
    f_norm = jet_norm(f_jet, params).value
    return {
        'f': f_norm,
        'S': jet_norm(solution.S, narrow, 'beta+').value,
        'R': jet_norm(solution.R, narrow).value,
        'S_bound': N ** (1 + d_star / gamma) / (kappa ** (2 + d_star / (2 * params.beta)) * gap ** n)
        * f_norm,
        'R_bound': float(np.exp(-0.5 * gap * N)) * f_norm,
    }


def solve_full(f: Union[FTSeries, JetHamiltonian], h: NormalFormHam, kappa: float = None,
               N: int = None, sigma_prime: float = None, params: Optional[NormParams] = None,
               diagnostics: bool = True) -> HomologicalSolution:
    """Jet extraction, the four sub-solves, residual identity and norm report."""
    kappa = SOLVER_CONFIG['kappa'] if kappa is None else kappa
    N = SOLVER_CONFIG['N'] if N is None else N
    sigma_prime = SOLVER_CONFIG['sigma_prime'] if sigma_prime is None else sigma_prime
    jet = extract_jet(f)[0] if isinstance(f, FTSeries) else f
    space = jet.space
    if space.n != h.n or space.clusters.modes != h.clusters.modes:
        raise InvalidParameterError("jet and normal form use different truncations")
    box = space.box
    ledger = DivisorLedger()
    S_t, S_r, R_t, R_r, c, chi = solve_angle_action(jet.theta, jet.r, h.omega, kappa, N, box, ledger)
    S_z, R_z = solve_zeta(jet.zeta, h, kappa, N, box, ledger)
    S_zz, R_zz, B = solve_zetazeta(jet.zetazeta, h, kappa, N, box, ledger)
    S = JetHamiltonian(space, _reality(S_t, box), _reality(S_r, box), S_z, S_zz)
    R = JetHamiltonian(space, R_t, R_r, R_z, R_zz)
    solution = HomologicalSolution(S, R, c, chi, B, ledger, kappa, N)
    if ledger.excluded:
        logger.warning("divisors below threshold (kappa=%g, N=%d): %s", kappa, N,
                       {fam.value: e.below for fam, e in ledger.entries.items() if e.below})
    if diagnostics:
        solution.residual = residual(h, jet, solution)
        solution.norms = solution_norms(jet, solution, params or NormParams.default(), sigma_prime)
        if solution.residual['relative'] > SOLVER_CONFIG['residual_tol'] and not ledger.excluded:
            logger.warning("homological residual %.3e above tolerance",
                           solution.residual['relative'])
    return solution


def solution_family_norms(build: Callable[[np.ndarray],
                                         Tuple[NormalFormHam, Union[FTSeries, JetHamiltonian]]],
                          rhos: Sequence[np.ndarray], kappa: float, N: int,
                          params: Optional[NormParams] = None) -> Dict[str, JetNorm]:
    """rho-derivative parts of [S] and [R] by re-solving at shifted parameters."""
    params = params or NormParams.default()
    cache: Dict[tuple, HomologicalSolution] = {}

    def solved(rho):
        key = tuple(np.asarray(rho, dtype=float).tolist())
        if key not in cache:
            h, f = build(rho)
            cache[key] = solve_full(f, h, kappa, N, diagnostics=False)
        return cache[key]
    return {
        'S': family_norm(lambda rho: solved(rho).S, rhos, params, 'beta+'),
        'R': family_norm(lambda rho: solved(rho).R, rhos, params),
    }
