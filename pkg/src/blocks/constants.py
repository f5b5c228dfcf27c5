"""
Усеченные константы

Explicit finite sums standing in for the absolute constants of the block
product and matrix-vector inequalities.
"""
from typing import Sequence

import numpy as np

from src.blocks.matrix import spectral_norm


def weight_ratio_chain_holds(j: int, k: int, l: int) -> bool:
    """
    u(j, l) >= u(j, k) u(k, l) for u(x, y) = min(x, y) / (min(x, y) + |x^2 - y^2|).

    Integer arithmetic, no rounding.
    """
    def num_den(x, y):
        m = min(x, y)
        return m, m + abs(x * x - y * y)

    n_jl, d_jl = num_den(j, l)
    n_jk, d_jk = num_den(j, k)
    n_kl, d_kl = num_den(k, l)
    return n_jl * d_jk * d_kl >= n_jk * n_kl * d_jl


def product_constant(weights: Sequence[float], beta: float) -> float:
    """max_a sum_c 1 / (w_c^{2 beta} (1 + |w_a - w_c|))."""
    w = np.asarray(weights, dtype=float)
    terms = w[None, :] ** (-2.0 * beta) / (1.0 + np.abs(w[:, None] - w[None, :]))
    return float(terms.sum(axis=1).max())


def product_plus_constant(weights: Sequence[float], beta: float) -> float:
    """max_{a,b} sum_c w_c^{-2 beta} (1+|w_a-w_b|) / ((1+|w_a-w_c|)(1+|w_c-w_b|))."""
    w = np.asarray(weights, dtype=float)
    dac = 1.0 + np.abs(w[:, None] - w[None, :])
    best = 0.0
    for a in range(len(w)):
        total = ((1.0 + np.abs(w[a] - w))[:, None] * w[None, :] ** (-2.0 * beta)
                 / (dac[a][None, :] * dac.T)).sum(axis=1)
        best = max(best, float(total.max()))
    return best


def apply_constant(weights: Sequence[float], beta: float) -> float:
    """Operator norm of K_ac = w_c^{-beta} / (1 + |w_a - w_c|) on l2 over clusters."""
    w = np.asarray(weights, dtype=float)
    K = w[None, :] ** (-beta) / (1.0 + np.abs(w[:, None] - w[None, :]))
    return spectral_norm(K)
