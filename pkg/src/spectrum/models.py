"""
Модели спектра

Mode identifiers, energy clusters, frequency models, admissible sets and
parameter grids.
"""
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import InvalidParameterError


@dataclass(frozen=True, order=True)
class ModeId:
    """Harmonic degree j and order index ell (1 <= ell <= d_j)."""
    j: int
    ell: int

    def __post_init__(self):
        if self.j < 0 or self.ell < 1:
            raise InvalidParameterError(f"invalid mode ({self.j}, {self.ell})")

    def __str__(self):
        return f"{self.j}:{self.ell}"


@dataclass(frozen=True)
class Cluster:
    """One energy cluster [a]: consecutive modes sharing the weight w_a."""
    weight: int
    modes: Tuple[ModeId, ...]
    offset: int

    @property
    def size(self) -> int:
        return len(self.modes)

    @property
    def mode_slice(self) -> slice:
        return slice(self.offset, self.offset + self.size)

    @property
    def var_slice(self) -> slice:
        # (p, q) per mode
        return slice(2 * self.offset, 2 * (self.offset + self.size))


class ClusterSet:
    """
    Разбиение усеченного множества внешних мод на энергетические кластеры.

    Modes are ordered by weight, then by mode id, and every cluster is a
    contiguous range of that ordering. Real coordinates of mode i sit at
    positions 2i (p) and 2i+1 (q) of a phase-space vector.
    """

    def __init__(self, weight_map: Dict[ModeId, int], W_max: Optional[int] = None,
                 d_star: float = 1.0, C_b: Optional[float] = None):
        if not weight_map:
            raise InvalidParameterError("empty cluster set")
        for mode, w in weight_map.items():
            if w < 1:
                raise InvalidParameterError(
                    f"mode {mode} has weight {w}; external weights must be >= 1")
        ordered = sorted(weight_map, key=lambda a: (weight_map[a], a))
        clusters: List[Cluster] = []
        offset = 0
        for w in sorted(set(weight_map.values())):
            members = tuple(a for a in ordered if weight_map[a] == w)
            clusters.append(Cluster(weight=w, modes=members, offset=offset))
            offset += len(members)
        self.weight_map = dict(weight_map)
        self.modes: Tuple[ModeId, ...] = tuple(ordered)
        self.clusters: Tuple[Cluster, ...] = tuple(clusters)
        self.W_max = W_max if W_max is not None else max(weight_map.values())
        self.d_star = float(d_star)
        fitted = max(c.size / c.weight ** self.d_star for c in clusters)
        self.C_b = float(C_b) if C_b is not None else fitted
        if fitted > self.C_b * (1 + 1e-12):
            raise InvalidParameterError(
                f"cluster growth violated: card/w^d* = {fitted} > C_b = {self.C_b}")
        self._index = {a: i for i, a in enumerate(self.modes)}

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], weights: Optional[Sequence[int]] = None,
                   d_star: float = 1.0) -> "ClusterSet":
        """Synthetic clusters with given sizes (weights 1, 2, ... by default)."""
        weights = list(weights) if weights is not None else list(range(1, len(sizes) + 1))
        weight_map = {}
        for w, size in zip(weights, sizes):
            for ell in range(1, size + 1):
                weight_map[ModeId(w, ell)] = w
        return cls(weight_map, d_star=d_star)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def n_vars(self) -> int:
        return 2 * len(self.modes)

    @property
    def mode_weights(self) -> np.ndarray:
        return np.array([self.weight_map[a] for a in self.modes], dtype=float)

    @property
    def var_weights(self) -> np.ndarray:
        return np.repeat(self.mode_weights, 2)

    @property
    def cluster_weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.clusters], dtype=float)

    def index_of(self, mode: ModeId) -> int:
        return self._index[mode]

    def cluster_of(self, mode: ModeId) -> Cluster:
        w = self.weight_map[mode]
        return next(c for c in self.clusters if c.weight == w)

    def growth_report(self) -> dict:
        """card[a] <= C_b w_a^{d*} per cluster."""
        rows = [{'w': c.weight, 'card': c.size,
                 'bound': self.C_b * c.weight ** self.d_star} for c in self.clusters]
        return {
            'C_b': self.C_b,
            'd_star': self.d_star,
            'holds': all(r['card'] <= r['bound'] * (1 + 1e-12) for r in rows),
            'clusters': rows,
        }

    def __len__(self):
        return len(self.clusters)

    def __repr__(self):
        return f"ClusterSet(sizes={[c.size for c in self.clusters]}, W_max={self.W_max})"


@dataclass
class SpectrumModel:
    """Frequencies lambda_a(rho) with the asymptotic constants gamma, c0, delta0."""
    frequency: Callable[[ModeId, Optional[np.ndarray]], float]
    gamma: float = 1.0
    c0: float = 0.5
    delta0: float = 0.0

    def lam(self, mode: ModeId, rho: Optional[np.ndarray] = None) -> float:
        return float(self.frequency(mode, rho))

    def frequencies(self, modes: Sequence[ModeId], rho: Optional[np.ndarray] = None) -> np.ndarray:
        return np.array([self.frequency(a, rho) for a in modes], dtype=float)


@dataclass(frozen=True)
class AdmissibleSet:
    """Internal modes in action-angle form, one per harmonic degree."""
    modes: Tuple[ModeId, ...]
    actions: Tuple[float, ...]

    def __post_init__(self):
        if len(self.modes) != len(self.actions):
            raise InvalidParameterError("one action per admissible mode is required")
        degrees = [a.j for a in self.modes]
        if len(set(degrees)) != len(degrees):
            raise InvalidParameterError(f"admissible modes need distinct degrees, got {degrees}")
        for I in self.actions:
            if not 1.0 <= I <= 2.0:
                raise InvalidParameterError(f"action {I} outside [1, 2]")

    @classmethod
    def from_triples(cls, triples: Sequence[Tuple[int, int, float]]) -> "AdmissibleSet":
        return cls(tuple(ModeId(j, ell) for j, ell, _ in triples),
                   tuple(float(I) for _, _, I in triples))

    @property
    def n(self) -> int:
        return len(self.modes)

    @property
    def max_weight(self) -> int:
        if not self.modes:
            raise InvalidParameterError("empty admissible set")
        return max(a.j for a in self.modes)

    def index(self, mode: ModeId) -> Optional[int]:
        try:
            return self.modes.index(mode)
        except ValueError:
            return None

    def __contains__(self, mode):
        return mode in self.modes


@dataclass
class RhoGrid:
    """Sampled parameter box with a retained/excluded mask."""
    samples: np.ndarray
    lows: np.ndarray
    highs: np.ndarray
    mask: Optional[np.ndarray] = None
    ledger: Optional[object] = field(default=None, repr=False)

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        self.lows = np.asarray(self.lows, dtype=float)
        self.highs = np.asarray(self.highs, dtype=float)
        if self.mask is None:
            self.mask = np.ones(len(self.samples), dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool).copy()

    @classmethod
    def uniform(cls, lows: Sequence[float], highs: Sequence[float], per_axis: int) -> "RhoGrid":
        """Cell-centred uniform grid, per_axis samples along every axis."""
        if per_axis < 1:
            raise InvalidParameterError("samples_per_axis must be >= 1")
        axes = [lo + (hi - lo) * (np.arange(per_axis) + 0.5) / per_axis
                for lo, hi in zip(lows, highs)]
        samples = np.array(list(product(*axes)), dtype=float)
        return cls(samples=samples, lows=np.asarray(lows), highs=np.asarray(highs))

    @classmethod
    def single(cls, rho: Sequence[float], lows: Sequence[float], highs: Sequence[float]) -> "RhoGrid":
        return cls(samples=np.atleast_2d(np.asarray(rho, dtype=float)), lows=lows, highs=highs)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def box_volume(self) -> float:
        return float(np.prod(self.highs - self.lows))

    @property
    def retained_fraction(self) -> float:
        return float(self.mask.mean()) if len(self.mask) else 0.0

    @property
    def measure(self) -> float:
        return self.retained_fraction * self.box_volume

    def retained_indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def restricted(self, keep: np.ndarray, ledger=None) -> "RhoGrid":
        """New grid whose mask is the intersection with keep."""
        return RhoGrid(samples=self.samples, lows=self.lows, highs=self.highs,
                       mask=self.mask & np.asarray(keep, dtype=bool), ledger=ledger)

    def __len__(self):
        return len(self.samples)
