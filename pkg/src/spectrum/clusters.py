"""
Спектр Клейна-Гордона на сфере

Frequencies, eigenspace dimensions, cluster construction and the
asymptotic/separation checks for the Klein-Gordon spectrum on S^d.
"""
import logging
from math import comb, sqrt
from typing import List, Optional

import numpy as np

from src.errors import InvalidParameterError
from src.spectrum.models import AdmissibleSet, ClusterSet, ModeId, SpectrumModel

logger = logging.getLogger(__name__)


def kg_frequency(j: int, d: int, m: float, delta_rho: float = 0.0) -> float:
    """sqrt(j(j+d-1) + m + delta_rho)."""
    if m <= 0:
        raise InvalidParameterError(f"mass must be positive, got {m}")
    if j < 0 or delta_rho < 0:
        raise InvalidParameterError("degree and frequency shift must be nonnegative")
    return sqrt(j * (j + d - 1) + m + delta_rho)


def harmonic_dimension(j: int, d: int) -> int:
    """Dimension of the degree-j spherical harmonics on S^d."""
    if j < 0 or d < 1:
        raise InvalidParameterError(f"invalid degree/dimension ({j}, {d})")
    lower = comb(j + d - 2, d) if j + d - 2 >= 0 else 0
    return comb(j + d, d) - lower


def build_kg_clusters(d: int, W_max: int, A: AdmissibleSet) -> ClusterSet:
    """
    Кластеры по степени j = 1..W_max без мод из A.

    The degree-0 mode has weight 0 and therefore never enters the external
    set; it may only live in the admissible set.
    """
    if W_max < 1:
        raise InvalidParameterError(f"W_max must be >= 1, got {W_max}")
    weight_map = {}
    for j in range(1, W_max + 1):
        for ell in range(1, harmonic_dimension(j, d) + 1):
            mode = ModeId(j, ell)
            if mode not in A:
                weight_map[mode] = j
    d_star = max(d - 1, 0)
    clusters = ClusterSet(weight_map, W_max=W_max, d_star=d_star)
    logger.debug("built %r", clusters)
    return clusters


def kg_spectrum(d: int, m: float, delta: float, A: AdmissibleSet,
                c0: float = 0.5, gamma: float = 1.0) -> SpectrumModel:
    """lambda_a(rho): shifted by delta*rho_i on the i-th admissible mode, unshifted elsewhere."""
    if delta < 0:
        raise InvalidParameterError("delta must be nonnegative")

    def frequency(mode: ModeId, rho: Optional[np.ndarray] = None) -> float:
        i = A.index(mode)
        if i is None or rho is None:
            return kg_frequency(mode.j, d, m, 0.0)
        return kg_frequency(mode.j, d, m, delta * float(rho[i]))

    delta0 = delta0_kg(delta, d, m, A) if A.modes and A.max_weight > 0 else 0.0
    return SpectrumModel(frequency=frequency, gamma=gamma, c0=c0, delta0=delta0)


def delta0_kg(delta: float, d: int, m: float, A: AdmissibleSet) -> float:
    """(delta / (2 sqrt(2+d+m) max w))^3."""
    if delta < 0:
        raise InvalidParameterError("delta must be nonnegative")
    if not A.modes:
        raise InvalidParameterError("empty admissible set")
    w = A.max_weight
    if w <= 0:
        raise InvalidParameterError("admissible set needs a mode of positive degree")
    return (delta / (2.0 * sqrt(2.0 + d + m) * w)) ** 3


def check_asymptotics(clusters: ClusterSet, spectrum: SpectrumModel,
                        rho: Optional[np.ndarray] = None) -> dict:
    """c0 w^gamma <= lambda <= w^gamma / c0 and |lambda_a - lambda_b| >= c0 |w_a - w_b|."""
    lam = spectrum.frequencies(clusters.modes, rho)
    w = clusters.mode_weights
    c0, gamma = spectrum.c0, spectrum.gamma
    lower = lam / (c0 * w ** gamma)
    upper = (w ** gamma / c0) / lam
    dl = np.abs(lam[:, None] - lam[None, :])
    dw = np.abs(w[:, None] - w[None, :])
    off = dw > 0
    gap = np.full_like(dl, np.inf)
    gap[off] = dl[off] / (c0 * dw[off])
    report = {
        'c0': c0,
        'gamma': gamma,
        'min_lower_ratio': float(lower.min()),
        'min_upper_ratio': float(upper.min()),
        'min_gap_ratio': float(gap.min()) if off.any() else None,
    }
    report['holds'] = bool(lower.min() >= 1.0 and upper.min() >= 1.0
                           and (not off.any() or gap.min() >= 1.0))
    return report


def check_cluster_separation(clusters: ClusterSet, spectrum: SpectrumModel, kappa: float,
                        rho: Optional[np.ndarray] = None) -> dict:
    """k = 0 second-Melnikov bound between distinct clusters."""
    worst = np.inf
    witness = None
    for a in clusters.clusters:
        lam_a = spectrum.frequencies(a.modes, rho)
        for b in clusters.clusters:
            if b.weight == a.weight:
                continue
            lam_b = spectrum.frequencies(b.modes, rho)
            ratio = np.abs(lam_a[:, None] - lam_b[None, :]).min() / (
                kappa * (1 + abs(a.weight - b.weight)))
            if ratio < worst:
                worst, witness = float(ratio), (a.weight, b.weight)
    return {'kappa': kappa, 'min_ratio': worst if witness else None,
            'witness': witness, 'holds': witness is None or worst >= 1.0}


def spectrum_rows(clusters: ClusterSet, spectrum: SpectrumModel,
                  rho: Optional[np.ndarray] = None) -> List[dict]:
    """Rows (j, ell, w, lambda, cluster_size) in mode order."""
    rows = []
    for c in clusters.clusters:
        for mode in c.modes:
            rows.append({'j': mode.j, 'ell': mode.ell, 'w': c.weight,
                         'lambda': spectrum.lam(mode, rho), 'cluster_size': c.size})
    return rows
