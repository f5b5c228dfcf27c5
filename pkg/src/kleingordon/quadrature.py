"""
Квадратура на сфере

Gauss-Legendre nodes in cos(colatitude) times the trapezoid rule in
longitude, and real spherical harmonics from normalized associated
Legendre recurrences.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from src.errors import InvalidParameterError, QuadratureError
from src.spectrum.models import ModeId

logger = logging.getLogger(__name__)


def harmonic_row(mode: ModeId) -> int:
    """Row of Psi_(j, ell) in the table: degrees ascending, ell = m + j + 1."""
    if not 1 <= mode.ell <= 2 * mode.j + 1:
        raise InvalidParameterError(f"no harmonic {mode} on S^2")
    return mode.j ** 2 + mode.ell - 1


def _normalized_legendre(j_max: int, x: np.ndarray) -> np.ndarray:
    """
    bar P_j^m(x), 0 <= m <= j <= j_max, shape (j_max+1, j_max+1, M).

    Normalized so that 2 pi int_{-1}^{1} (bar P_j^m)^2 dx = 1; no
    Condon-Shortley phase.
    """
    sin = np.sqrt(np.clip(1.0 - x ** 2, 0.0, None))
    P = np.zeros((j_max + 1, j_max + 1) + x.shape)
    P[0, 0] = 1.0 / math.sqrt(4.0 * math.pi)
    for m in range(1, j_max + 1):
        P[m, m] = math.sqrt((2 * m + 1) / (2.0 * m)) * sin * P[m - 1, m - 1]
    for m in range(0, j_max):
        P[m + 1, m] = math.sqrt(2 * m + 3) * x * P[m, m]
        a_prev = math.sqrt(2 * m + 3)
        for j in range(m + 2, j_max + 1):
            a = math.sqrt((4.0 * j * j - 1) / (j * j - m * m))
            P[j, m] = a * (x * P[j - 1, m] - P[j - 2, m] / a_prev)
            a_prev = a
    return P


def real_spherical_harmonics(j_max: int, colatitude, longitude) -> np.ndarray:
    """
    Вещественные сферические гармоники до степени j_max.

    Rows follow harmonic_row: for degree j the orders m = -j..j, cosine
    harmonics for m > 0 and sine harmonics for m < 0. Output shape is
    ((j_max+1)^2, M) for M points.
    """
    if j_max < 0:
        raise InvalidParameterError("j_max must be nonnegative")
    colatitude = np.atleast_1d(np.asarray(colatitude, dtype=float))
    longitude = np.atleast_1d(np.asarray(longitude, dtype=float))
    if colatitude.shape != longitude.shape:
        raise InvalidParameterError("colatitude and longitude must have one shape")
    P = _normalized_legendre(j_max, np.cos(colatitude))
    out = np.empty(((j_max + 1) ** 2,) + colatitude.shape)
    root2 = math.sqrt(2.0)
    for j in range(j_max + 1):
        base = j * j + j
        out[base] = P[j, 0]
        for m in range(1, j + 1):
            out[base + m] = root2 * P[j, m] * np.cos(m * longitude)
            out[base - m] = root2 * P[j, m] * np.sin(m * longitude)
    return out


@dataclass
class SphereQuadrature:
    """Nodes and positive weights summing to 4 pi, exact for polynomials up to degree."""
    colatitude: np.ndarray
    longitude: np.ndarray
    weights: np.ndarray
    degree: int

    @classmethod
    def build(cls, degree: int) -> "SphereQuadrature":
        if degree < 0:
            raise InvalidParameterError("quadrature degree must be nonnegative")
        n_theta = math.ceil((degree + 1) / 2)
        n_phi = degree + 1
        x, wx = roots_legendre(n_theta)
        phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
        colat = np.repeat(np.arccos(x), n_phi)
        lon = np.tile(phi, n_theta)
        weights = np.outer(wx, np.full(n_phi, 2.0 * math.pi / n_phi)).ravel()
        logger.debug("sphere quadrature degree %d: %d x %d nodes", degree, n_theta, n_phi)
        return cls(colat, lon, weights, degree)

    @property
    def size(self) -> int:
        return len(self.weights)

    def require(self, degree: int):
        if degree > self.degree:
            raise QuadratureError(
                f"integrand degree {degree} exceeds quadrature exactness {self.degree}")

    def harmonics(self, j_max: int) -> np.ndarray:
        self.require(2 * j_max)
        return real_spherical_harmonics(j_max, self.colatitude, self.longitude)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Sum over the node axis (last)."""
        return np.asarray(values) @ self.weights

    def orthonormality_defect(self, j_max: int) -> float:
        """max |int Psi_a Psi_b - delta_ab| over degrees <= j_max."""
        Y = self.harmonics(j_max)
        gram = (Y * self.weights) @ Y.T
        return float(np.max(np.abs(gram - np.eye(len(Y)))))
