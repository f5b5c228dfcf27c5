"""
Взвешенные векторы Y_s
"""
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from src.errors import InvalidParameterError
from src.spectrum.models import ClusterSet, ModeId


@dataclass
class WeightedVector:
    """
    zeta = (zeta_a)_a with zeta_a = (p_a, q_a), stored flat in mode order.

    ||zeta||_s^2 = sum_a |zeta_a|^2 w_a^{2s}.
    """
    clusters: ClusterSet
    entries: np.ndarray
    s: float = 0.0

    def __post_init__(self):
        self.entries = np.asarray(self.entries)
        if self.entries.shape != (self.clusters.n_vars,):
            raise InvalidParameterError(
                f"expected {self.clusters.n_vars} entries, got {self.entries.shape}")

    @classmethod
    def zeros(cls, clusters: ClusterSet, s: float = 0.0, dtype=float) -> "WeightedVector":
        return cls(clusters, np.zeros(clusters.n_vars, dtype=dtype), s)

    @classmethod
    def from_modes(cls, clusters: ClusterSet, values: Dict[ModeId, Tuple[complex, complex]],
                   s: float = 0.0) -> "WeightedVector":
        entries = np.zeros(clusters.n_vars, dtype=complex)
        for mode, (p, q) in values.items():
            i = clusters.index_of(mode)
            entries[2 * i], entries[2 * i + 1] = p, q
        if np.all(entries.imag == 0):
            entries = entries.real
        return cls(clusters, entries, s)

    @classmethod
    def basis(cls, clusters: ClusterSet, mode: ModeId, component: int = 0,
              s: float = 0.0) -> "WeightedVector":
        entries = np.zeros(clusters.n_vars)
        entries[2 * clusters.index_of(mode) + component] = 1.0
        return cls(clusters, entries, s)

    def norm(self, s: float = None) -> float:
        s = self.s if s is None else s
        return float(np.sqrt(np.sum(np.abs(self.entries) ** 2 * self.clusters.var_weights ** (2 * s))))

    def cluster_part(self, index: int) -> np.ndarray:
        return self.entries[self.clusters.clusters[index].var_slice]

    def cluster_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(self.cluster_part(i)) for i in range(len(self.clusters))])

    def is_real(self) -> bool:
        return not np.iscomplexobj(self.entries) or bool(np.all(self.entries.imag == 0))

    def __add__(self, other: "WeightedVector") -> "WeightedVector":
        return WeightedVector(self.clusters, self.entries + other.entries, min(self.s, other.s))

    def __sub__(self, other: "WeightedVector") -> "WeightedVector":
        return WeightedVector(self.clusters, self.entries - other.entries, min(self.s, other.s))

    def __mul__(self, c) -> "WeightedVector":
        return WeightedVector(self.clusters, self.entries * c, self.s)

    __rmul__ = __mul__
