"""
Оценка деления на вторые мельниковские знаменатели

B_jl = i A_jl / (<k, omega> + eps mu_j - mu_l), with the block pairs split
into a far-ratio regime, a perturbative regime and a finite regime, each
checked against its own bound.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from src.blocks.matrix import BlockMatrix, Flavor, norm_s_beta, norm_s_beta_plus
from src.errors import FlavorMismatchError, InvalidParameterError

logger = logging.getLogger(__name__)


@dataclass
class DelortReport:
    k1: float
    k2: float
    B: BlockMatrix
    regimes: Dict[int, dict] = field(default_factory=dict)
    hypotheses: Dict[str, dict] = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return all(r['holds'] for r in self.regimes.values())

    def to_dict(self) -> dict:
        return {'k1': self.k1, 'k2': self.k2, 'holds': self.holds,
                'regimes': {str(k): v for k, v in self.regimes.items()},
                'hypotheses': self.hypotheses}


def threshold_k1(n: int, N: int, omega: Sequence[float], c0: float, gamma: float) -> float:
    """max(C_1, 8) with C_1 = (4 n N max omega / c0)^{1/gamma}."""
    c1 = (4.0 * n * N * float(np.max(np.abs(omega))) / c0) ** (1.0 / gamma)
    return max(c1, 8.0)


def threshold_k2(k1: float, C_mu: float, kappa: float, delta: float) -> float:
    return k1 * (2.0 * C_mu / kappa) ** (1.0 / delta)


def regime_of(w_a: float, w_b: float, k1: float, k2: float) -> int:
    hi, lo = max(w_a, w_b), min(w_a, w_b)
    if hi > k1 * lo:
        return 1
    if hi > k2:
        return 2
    return 3


def delort_bound_check(A: BlockMatrix, k: Sequence[int], omega: Sequence[float],
                       mu: Sequence[float], lam: Sequence[float], kappa: float, N: int,
                       eps: int = 1, C_mu: float = 1.0, delta: float = 1.0, c0: float = 0.5,
                       gamma: float = 1.0, k1: Optional[float] = None,
                       k2: Optional[float] = None) -> DelortReport:
    """
    Solve for B and check |B^r|_{s,beta+} against 8, 2/kappa and (C_b k2)^{d*/2}/kappa
    times |A^r|_{s,beta} on each regime r.

    mu and lam are per mode in cluster order. Hypothesis violations are
    reported, not raised.
    """
    if A.flavor is not Flavor.SCALAR:
        raise FlavorMismatchError("the divisor check works on the scalar flavor")
    if eps not in (1, -1) or kappa <= 0:
        raise InvalidParameterError("need eps = +-1 and kappa > 0")
    clusters = A.clusters
    omega = np.asarray(omega, dtype=float)
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    kw = float(np.dot(np.asarray(k, dtype=float), omega))
    k1_min = threshold_k1(len(omega), N, omega, c0, gamma)
    k1 = k1_min if k1 is None else k1
    k2_min = threshold_k2(k1, C_mu, kappa, delta)
    k2 = k2_min if k2 is None else k2

    w_modes = clusters.mode_weights
    gap = np.abs(mu - lam)
    allowed = np.minimum(C_mu * w_modes ** (-delta), c0 / 4.0)
    hypotheses = {
        'k1': {'value': k1, 'required': k1_min, 'holds': k1 >= k1_min},
        'k2': {'value': k2, 'required': k2_min, 'holds': k2 >= k2_min},
        'mu_close': {'worst': float(np.max(gap / allowed, initial=0.0)),
                     'holds': bool(np.all(gap <= allowed))},
    }

    w = clusters.cluster_weights
    blocks = {}
    worst = np.inf
    per_regime: Dict[int, Dict] = {1: {}, 2: {}, 3: {}}
    B_regime: Dict[int, Dict] = {1: {}, 2: {}, 3: {}}
    for (i, j), Aij in sorted(A.blocks.items()):
        if not np.any(Aij):
            continue
        mi, mj = clusters.clusters[i].mode_slice, clusters.clusters[j].mode_slice
        den = kw + eps * mu[mi][:, None] - mu[mj][None, :]
        ratio = np.abs(den) / (kappa * (1.0 + abs(w[i] - w[j])))
        worst = min(worst, float(ratio[Aij != 0].min()))
        Bij = np.zeros(Aij.shape, dtype=complex)
        np.divide(1j * Aij, den, out=Bij, where=den != 0)
        blocks[(i, j)] = Bij
        r = regime_of(w[i], w[j], k1, k2)
        per_regime[r][(i, j)] = Aij
        B_regime[r][(i, j)] = Bij
    hypotheses['divisor'] = {'worst_ratio': None if np.isinf(worst) else worst,
                             'holds': bool(worst >= 1.0)}

    B = BlockMatrix(clusters, blocks, Flavor.SCALAR, A.s, A.beta)
    factors = {1: 8.0, 2: 2.0 / kappa,
               3: (clusters.C_b * k2) ** (clusters.d_star / 2.0) / kappa}
    regimes = {}
    for r in (1, 2, 3):
        a_norm = norm_s_beta(A.like(per_regime[r])).value
        b_norm = norm_s_beta_plus(B.like(B_regime[r])).value
        bound = factors[r] * a_norm
        regimes[r] = {'blocks': len(per_regime[r]), 'A_norm': a_norm, 'B_norm': b_norm,
                      'factor': factors[r], 'bound': bound,
                      'holds': b_norm <= bound * (1 + 1e-12) + 1e-300}
    report = DelortReport(k1, k2, B, regimes, hypotheses)
    if not report.holds:
        logger.warning("divisor bound violated: %s", {r: v['holds'] for r, v in regimes.items()})
    return report
