"""
Комплексный базис кластера

Cluster frame V with zeta = V (xi_1..xi_d, eta_1..eta_d), and the
deterministic Hermitian eigen-decomposition used by the solver.
"""
from typing import Tuple

import numpy as np
from scipy.linalg import eigh


def cluster_frame(d: int) -> np.ndarray:
    """Unitary V, rows (p_1, q_1, ..., p_d, q_d), columns (xi..., eta...)."""
    V = np.zeros((2 * d, 2 * d), dtype=complex)
    r = 1.0 / np.sqrt(2.0)
    for i in range(d):
        V[2 * i, i] = r
        V[2 * i, d + i] = r
        V[2 * i + 1, i] = -1j * r
        V[2 * i + 1, d + i] = 1j * r
    return V


def hermitian_eigh(Q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Q = P diag(D) P^*, eigenvalues ascending.

    Each column of P is rotated so that its first largest-magnitude entry is
    real and positive.
    """
    Q = 0.5 * (Q + Q.conj().T)
    D, P = eigh(Q)
    P = P.astype(complex)
    for c in range(P.shape[1]):
        idx = int(np.argmax(np.abs(P[:, c])))
        phase = P[idx, c] / abs(P[idx, c])
        P[:, c] = P[:, c] * np.conj(phase)
    return D, P
