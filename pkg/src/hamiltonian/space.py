"""
Фазовое пространство

Fourier box on the torus and the monomial caps of truncated series.
"""
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, Optional, Tuple

import numpy as np

from src.config import SERIES_CONFIG
from src.errors import InvalidParameterError, TruncationError
from src.spectrum.models import ClusterSet

Monomial = Tuple[int, ...]


class FourierBox:
    """
    Integer vectors k with |k_i| <= K in C order of the (2K+1)^n box.

    Coefficient arrays are Fourier-first: shape (F, ...) with F = (2K+1)^n.
    """

    def __init__(self, n: int, K: int):
        if n < 1 or K < 0:
            raise InvalidParameterError(f"invalid Fourier box n={n}, K={K}")
        self.n = n
        self.K = K
        self.shape = (2 * K + 1,) * n
        self.kvecs = np.array(list(product(range(-K, K + 1), repeat=n)), dtype=int)
        self.l1 = np.abs(self.kvecs).sum(axis=1)
        self.size = len(self.kvecs)
        self.zero_index = self.size // 2

    def neg_index(self) -> np.ndarray:
        """Index of -k for every k."""
        return self.size - 1 - np.arange(self.size)

    def index(self, k) -> int:
        k = np.asarray(k, dtype=int)
        if np.any(np.abs(k) > self.K):
            raise InvalidParameterError(f"k={tuple(k)} outside the Fourier box K={self.K}")
        return int(np.ravel_multi_index(tuple(k + self.K), self.shape))

    def weights(self, sigma: float) -> np.ndarray:
        return np.exp(sigma * self.l1)

    def frequencies(self, omega) -> np.ndarray:
        """<k, omega> for every k."""
        return self.kvecs @ np.asarray(omega, dtype=float)

    def derivative_factor(self, i: int) -> np.ndarray:
        return 1j * self.kvecs[:, i]

    def evaluate(self, coeffs: np.ndarray, thetas: np.ndarray) -> np.ndarray:
        """sum_k c_k e^{i k.theta} at points thetas of shape (M, n)."""
        phases = np.exp(1j * np.atleast_2d(thetas) @ self.kvecs.T)
        return np.tensordot(phases, coeffs, axes=(1, 0))

    def grid(self, P: int) -> np.ndarray:
        """Uniform angles 2 pi j / P, C order, shape (P^n, n)."""
        axis = 2 * np.pi * np.arange(P) / P
        return np.array(list(product(axis, repeat=self.n)))

    def to_grid(self, coeffs: np.ndarray, P: int) -> np.ndarray:
        """Values of the trigonometric polynomial on the P^n grid."""
        rest = coeffs.shape[1:]
        placed = np.zeros((P,) * self.n + rest, dtype=complex)
        idx = tuple((self.kvecs % P)[:, i] for i in range(self.n))
        placed[idx] = coeffs
        axes = tuple(range(self.n))
        values = np.fft.ifftn(placed, axes=axes) * P ** self.n
        return values.reshape((P ** self.n,) + rest)

    def from_grid(self, values: np.ndarray, P: int) -> Tuple[np.ndarray, float]:
        """Coefficients in this box from grid values, plus the l1 mass left outside."""
        rest = values.shape[1:]
        axes = tuple(range(self.n))
        full = np.fft.fftn(values.reshape((P,) * self.n + rest), axes=axes) / P ** self.n
        idx = tuple((self.kvecs % P)[:, i] for i in range(self.n))
        coeffs = full[idx]
        dropped = max(float(np.abs(full).sum() - np.abs(coeffs).sum()), 0.0)
        return coeffs, dropped

    def product_grid_size(self) -> int:
        """Grid size resolving products of two box polynomials without aliasing."""
        return 4 * self.K + 1


class PhaseSpace:
    """
    Переменные (theta, r, zeta) и ограничения степеней.

    Monomials are exponent tuples over the n action variables followed by
    the 2m real external variables (p_1, q_1, p_2, q_2, ...). Caps: Fourier
    box K, degree D_r in r, degree D_zeta in zeta, weighted degree
    2|alpha| + |e| <= D_w.
    """

    def __init__(self, n: int, clusters: ClusterSet, K: int = None, D_r: int = None,
                 D_zeta: int = None, D_w: Optional[int] = None):
        K = SERIES_CONFIG['K_max'] if K is None else K
        D_r = SERIES_CONFIG['D_r'] if D_r is None else D_r
        D_zeta = SERIES_CONFIG['D_zeta'] if D_zeta is None else D_zeta
        D_w = D_zeta if D_w is None else D_w
        if D_r < 1 or D_zeta < 2 or D_w < 2:
            raise InvalidParameterError("caps must hold the jet: D_r >= 1, D_zeta >= 2, D_w >= 2")
        if max(D_zeta, 2 * D_r, D_w) > SERIES_CONFIG['hard_degree_limit']:
            raise TruncationError(
                f"caps exceed the hard degree limit {SERIES_CONFIG['hard_degree_limit']}")
        self.n = n
        self.clusters = clusters
        self.box = FourierBox(n, K)
        self.K = K
        self.D_r = D_r
        self.D_zeta = D_zeta
        self.D_w = D_w
        self.V = clusters.n_vars
        self.n_vars = n + self.V

    def with_caps(self, **caps) -> "PhaseSpace":
        args = dict(K=self.K, D_r=self.D_r, D_zeta=self.D_zeta, D_w=self.D_w)
        args.update(caps)
        return PhaseSpace(self.n, self.clusters, **args)

    def monomial(self, alpha: Dict[int, int] = None, zeta: Dict[int, int] = None) -> Monomial:
        exps = [0] * self.n_vars
        for i, p in (alpha or {}).items():
            exps[i] = p
        for v, p in (zeta or {}).items():
            exps[self.n + v] = p
        return tuple(exps)

    @property
    def one(self) -> Monomial:
        return (0,) * self.n_vars

    def r_degree(self, mono: Monomial) -> int:
        return sum(mono[:self.n])

    def zeta_degree(self, mono: Monomial) -> int:
        return sum(mono[self.n:])

    def weighted_degree(self, mono: Monomial) -> int:
        return 2 * self.r_degree(mono) + self.zeta_degree(mono)

    def admits(self, mono: Monomial) -> bool:
        return (self.r_degree(mono) <= self.D_r and self.zeta_degree(mono) <= self.D_zeta
                and self.weighted_degree(mono) <= self.D_w)

    def is_jet_monomial(self, mono: Monomial) -> bool:
        r, z = self.r_degree(mono), self.zeta_degree(mono)
        return (r == 0 and z <= 2) or (r == 1 and z == 0)

    def compatible(self, other: "PhaseSpace") -> bool:
        return (self.n == other.n and self.K == other.K
                and self.clusters.modes == other.clusters.modes)

    def __repr__(self):
        return (f"PhaseSpace(n={self.n}, V={self.V}, K={self.K}, D_r={self.D_r}, "
                f"D_zeta={self.D_zeta}, D_w={self.D_w})")


@dataclass
class TruncationReport:
    """l1 mass dropped by Fourier-box and degree truncation."""
    fourier_mass: float = 0.0
    degree_mass: float = 0.0
    events: int = 0
    notes: list = field(default_factory=list)

    def __add__(self, other: "TruncationReport") -> "TruncationReport":
        if other is None:
            return self
        return TruncationReport(self.fourier_mass + other.fourier_mass,
                                self.degree_mass + other.degree_mass,
                                self.events + other.events, self.notes + other.notes)

    def add(self, fourier: float = 0.0, degree: float = 0.0):
        if fourier > 0 or degree > 0:
            self.fourier_mass += fourier
            self.degree_mass += degree
            self.events += 1

    @property
    def total(self) -> float:
        return self.fourier_mass + self.degree_mass

    def to_dict(self) -> dict:
        return {'fourier_mass': self.fourier_mass, 'degree_mass': self.degree_mass,
                'events': self.events}
