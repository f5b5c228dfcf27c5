"""
Малые знаменатели

The four divisor families, a ledger of their minima and the parameter-box
exclusion scan.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import linregress

from src.errors import InvalidParameterError
from src.spectrum.models import ClusterSet, ModeId, RhoGrid, SpectrumModel

logger = logging.getLogger(__name__)


class DivisorFamily(Enum):
    """<k,w>, <k,w>+l_a, <k,w>+l_a+l_b, <k,w>+l_a-l_b."""
    K = "k"
    K_LAMBDA = "k+lambda"
    K_SUM = "k+lambda+lambda"
    K_DIFF = "k+lambda-lambda"


def integer_vectors(n: int, N: int, include_zero: bool = False) -> np.ndarray:
    """All k in Z^n with |k|_1 <= N, in lexicographic order."""
    rows = [k for k in product(range(-N, N + 1), repeat=n)
            if sum(abs(x) for x in k) <= N and (include_zero or any(k))]
    return np.array(rows, dtype=int).reshape(-1, n)


def _as_frequency(x: Union[None, float, ModeId], spectrum: Optional[SpectrumModel], rho):
    if isinstance(x, ModeId):
        if spectrum is None:
            raise InvalidParameterError("a spectrum is needed to resolve mode frequencies")
        return spectrum.lam(x, rho)
    return x


def divisor(kind, k, omega, a=None, b=None, spectrum: Optional[SpectrumModel] = None,
            rho=None) -> float:
    """Value of the small divisor of the given family."""
    kind = DivisorFamily(kind)
    kw = float(np.dot(np.asarray(k, dtype=float), np.asarray(omega, dtype=float)))
    lam_a = _as_frequency(a, spectrum, rho)
    lam_b = _as_frequency(b, spectrum, rho)
    if kind is DivisorFamily.K:
        return kw
    if lam_a is None:
        raise InvalidParameterError(f"family {kind.value} needs the mode a")
    if kind is DivisorFamily.K_LAMBDA:
        return kw + lam_a
    if lam_b is None:
        raise InvalidParameterError(f"family {kind.value} needs the mode b")
    if kind is DivisorFamily.K_SUM:
        return kw + lam_a + lam_b
    return kw + lam_a - lam_b


@dataclass
class LedgerEntry:
    value: float = np.inf
    ratio: float = np.inf
    k: Optional[Tuple[int, ...]] = None
    a: Optional[int] = None
    b: Optional[int] = None
    below: int = 0

    def to_dict(self) -> dict:
        return {
            'value': None if np.isinf(self.value) else self.value,
            'ratio': None if np.isinf(self.ratio) else self.ratio,
            'k': list(self.k) if self.k is not None else None,
            'a': self.a,
            'b': self.b,
            'below': self.below,
        }


@dataclass
class DivisorLedger:
    """
    Журнал малых знаменателей.

    Per family: the minimal |divisor|, its attaining (k, [a], [b]) given by
    cluster weights, and how many divisors fell below their threshold.
    """
    entries: Dict[DivisorFamily, LedgerEntry] = field(
        default_factory=lambda: {f: LedgerEntry() for f in DivisorFamily})
    excluded_samples: list = field(default_factory=list)

    def observe(self, family: DivisorFamily, values: np.ndarray, thresholds: np.ndarray,
                label: Callable[[int], Tuple[Tuple[int, ...], Optional[int], Optional[int]]]):
        """Record |values| against thresholds; label(i) gives (k, a, b) of flat index i."""
        values = np.abs(np.asarray(values, dtype=float)).ravel()
        if values.size == 0:
            return 0
        thresholds = np.broadcast_to(np.asarray(thresholds, dtype=float),
                                     np.asarray(values).shape).ravel()
        with np.errstate(divide='ignore', invalid='ignore'):
            ratios = np.where(thresholds > 0, values / thresholds, np.inf)
        below = int(np.count_nonzero(ratios < 1.0))
        entry = self.entries[family]
        entry.below += below
        i = int(np.argmin(values))
        if values[i] < entry.value:
            entry.value = float(values[i])
            entry.k, entry.a, entry.b = label(i)
        entry.ratio = min(entry.ratio, float(ratios.min()))
        return below

    def merge(self, other: "DivisorLedger") -> "DivisorLedger":
        for family, theirs in other.entries.items():
            mine = self.entries[family]
            mine.below += theirs.below
            mine.ratio = min(mine.ratio, theirs.ratio)
            if theirs.value < mine.value:
                mine.value, mine.k, mine.a, mine.b = theirs.value, theirs.k, theirs.a, theirs.b
        self.excluded_samples.extend(other.excluded_samples)
        return self

    @property
    def excluded(self) -> bool:
        return any(e.below > 0 for e in self.entries.values())

    def min_value(self) -> float:
        return min(e.value for e in self.entries.values())

    def to_dict(self) -> dict:
        return {f.value: e.to_dict() for f, e in self.entries.items()}


def _unique_levels(clusters: ClusterSet, spectrum: SpectrumModel, rho) -> Tuple[np.ndarray, np.ndarray]:
    lam = spectrum.frequencies(clusters.modes, rho)
    levels = np.unique(np.column_stack([lam, clusters.mode_weights]), axis=0)
    return levels[:, 0], levels[:, 1]


def scan_sample(rho: np.ndarray, omega: np.ndarray, spectrum: SpectrumModel,
                clusters: ClusterSet, kappa: float, ks: np.ndarray,
                delta0: Optional[float] = None) -> DivisorLedger:
    """
    Divisor ledger of one parameter sample over the given k vectors.

    The second Melnikov family <k,w> + l_a - l_b is always held to
    kappa (1 + |w_a - w_b|). The other three families are held to delta0 times
    their scale 1, w_a, w_a + w_b when delta0 is given, and to kappa times the
    same scale otherwise, which is what the homological solver divides by.
    """
    ledger = DivisorLedger()
    first = kappa if delta0 is None else delta0
    lam, w = _unique_levels(clusters, spectrum, rho)
    kw = ks @ np.asarray(omega, dtype=float)
    key = lambda i: tuple(int(x) for x in ks[i])

    ledger.observe(DivisorFamily.K, kw, first, lambda i: (key(i), None, None))

    L = len(lam)
    ledger.observe(DivisorFamily.K_LAMBDA, kw[:, None] + lam[None, :],
                   first * w[None, :],
                   lambda i: (key(i // L), int(w[i % L]), None))

    iu, ju = np.triu_indices(L)
    ledger.observe(DivisorFamily.K_SUM, kw[:, None] + (lam[iu] + lam[ju])[None, :],
                   first * (w[iu] + w[ju])[None, :],
                   lambda i: (key(i // len(iu)), int(w[iu[i % len(iu)]]), int(w[ju[i % len(iu)]])))

    ia, ib = np.meshgrid(np.arange(L), np.arange(L), indexing='ij')
    ia, ib = ia.ravel(), ib.ravel()
    ledger.observe(DivisorFamily.K_DIFF, kw[:, None] + (lam[ia] - lam[ib])[None, :],
                   kappa * (1 + np.abs(w[ia] - w[ib]))[None, :],
                   lambda i: (key(i // len(ia)), int(w[ia[i % len(ia)]]), int(w[ib[i % len(ia)]])))
    return ledger


def exclusion_scan(grid: RhoGrid, omega: Callable[[np.ndarray], np.ndarray],
                   spectrum: SpectrumModel, clusters: ClusterSet, kappa: float, N: int,
                   threads: int = 1, delta0: Optional[float] = None) -> RhoGrid:
    """
    Исключение параметров с малыми знаменателями.

    A retained sample is excluded when some divisor with 0 < |k|_1 <= N falls
    below its threshold: kappa (1 + |w_a - w_b|) for the second Melnikov
    family and delta0 (kappa when delta0 is None) times 1, w_a, w_a + w_b for
    the others.
    Returns the restricted grid with the merged ledger attached.
    """
    if len(grid) == 0:
        raise InvalidParameterError("empty parameter grid")
    if kappa <= 0 or N < 1:
        raise InvalidParameterError(f"need kappa > 0 and N >= 1, got {kappa}, {N}")
    ks = integer_vectors(grid.dim if grid.dim else 1, N)
    indices = grid.retained_indices()

    def one(i):
        rho = grid.samples[i]
        return scan_sample(rho, omega(rho), spectrum, clusters, kappa, ks, delta0)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            ledgers = list(pool.map(one, indices))
    else:
        ledgers = [one(i) for i in indices]

    keep = np.ones(len(grid), dtype=bool)
    total = DivisorLedger()
    for i, ledger in zip(indices, ledgers):
        if ledger.excluded:
            keep[i] = False
            ledger.excluded_samples.append(int(i))
        total.merge(ledger)
    result = grid.restricted(keep, ledger=total)
    logger.info("exclusion scan kappa=%g N=%d: retained %.4f of %d samples",
                kappa, N, result.retained_fraction, len(grid))
    return result


def exclusion_report(grid: RhoGrid, kappa: float, N: int) -> dict:
    """JSON-ready {kappa, N, retained_fraction, min_divisors}."""
    ledger = grid.ledger if grid.ledger is not None else DivisorLedger()
    return {
        'kappa': kappa,
        'N': N,
        'retained_fraction': grid.retained_fraction,
        'estimated_measure': grid.measure,
        'min_divisors': ledger.to_dict(),
    }


def fit_exclusion_scaling(kappas: Sequence[float], fractions: Sequence[float]) -> Optional[float]:
    """Log-log slope of excluded fraction against kappa (None with fewer than two positive points)."""
    pairs = [(k, f) for k, f in zip(kappas, fractions) if f > 0]
    if len(pairs) < 2:
        return None
    x, y = np.log([p[0] for p in pairs]), np.log([p[1] for p in pairs])
    return float(linregress(x, y).slope)
