"""
Ряды Фурье-Тейлора

Truncated Fourier-Taylor series on T^n x R^n x R^{2m}: a dict mapping an
exponent tuple to its Fourier coefficient array over the phase-space box.
"""
import logging
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy.signal import convolve

from src.config import SERIES_CONFIG
from src.errors import InvalidParameterError
from src.hamiltonian.space import Monomial, PhaseSpace, TruncationReport

logger = logging.getLogger(__name__)


class FTSeries:
    """
    f(theta, r, zeta) = sum_{alpha, e} sum_k C[alpha, e](k) e^{i k.theta} r^alpha zeta^e

    Instances are not mutated after construction; arithmetic returns new series.
    """

    def __init__(self, space: PhaseSpace, terms: Dict[Monomial, np.ndarray] = None,
                 truncation: Optional[TruncationReport] = None):
        self.space = space
        self.terms: Dict[Monomial, np.ndarray] = {}
        for mono, coeffs in (terms or {}).items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != space.n_vars:
                raise InvalidParameterError(f"monomial {mono} has wrong length")
            coeffs = np.asarray(coeffs, dtype=complex)
            if coeffs.shape != (space.box.size,):
                raise InvalidParameterError(f"coefficient array shape {coeffs.shape}")
            if np.any(coeffs != 0):
                self.terms[mono] = coeffs
        self.truncation = truncation or TruncationReport()

    # Конструкторы

    @classmethod
    def zero(cls, space: PhaseSpace) -> "FTSeries":
        return cls(space)

    @classmethod
    def monomial(cls, space: PhaseSpace, coef: complex = 1.0, k=None,
                 alpha: Dict[int, int] = None, zeta: Dict[int, int] = None) -> "FTSeries":
        """coef e^{i k.theta} r^alpha zeta^e, zeta given as {variable index: power}."""
        coeffs = np.zeros(space.box.size, dtype=complex)
        k = (0,) * space.n if k is None else k
        coeffs[space.box.index(k)] = coef
        return cls(space, {space.monomial(alpha, zeta): coeffs})

    @classmethod
    def trigonometric(cls, space: PhaseSpace, fourier: Dict[tuple, complex],
                      alpha: Dict[int, int] = None, zeta: Dict[int, int] = None) -> "FTSeries":
        coeffs = np.zeros(space.box.size, dtype=complex)
        for k, c in fourier.items():
            coeffs[space.box.index(k)] += c
        return cls(space, {space.monomial(alpha, zeta): coeffs})

    def _check(self, other: "FTSeries"):
        if not self.space.compatible(other.space):
            raise InvalidParameterError("series live on different phase spaces")

    # Арифметика

    def __add__(self, other: "FTSeries") -> "FTSeries":
        self._check(other)
        terms = {m: c.copy() for m, c in self.terms.items()}
        for m, c in other.terms.items():
            terms[m] = terms[m] + c if m in terms else c.copy()
        return FTSeries(self.space, terms, self.truncation + other.truncation)

    def __neg__(self) -> "FTSeries":
        return FTSeries(self.space, {m: -c for m, c in self.terms.items()}, self.truncation)

    def __sub__(self, other: "FTSeries") -> "FTSeries":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, FTSeries):
            return self.product(other)
        return FTSeries(self.space, {m: c * other for m, c in self.terms.items()},
                        self.truncation)

    def __rmul__(self, other):
        return self.__mul__(other)

    def scaled(self, t: float) -> "FTSeries":
        return self * t

    def product(self, other: "FTSeries") -> "FTSeries":
        """Truncated product; mass dropped by the box or the caps goes to the report."""
        self._check(other)
        box, space = self.space.box, self.space
        report = TruncationReport()
        K = box.K
        center = tuple(slice(K, 3 * K + 1) for _ in range(box.n))
        acc: Dict[Monomial, np.ndarray] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = tuple(a + b for a, b in zip(m1, m2))
                if not space.admits(mono):
                    report.add(degree=float(np.abs(c1).sum() * np.abs(c2).sum()))
                    continue
                full = convolve(c1.reshape(box.shape), c2.reshape(box.shape), mode='full',
                                method=SERIES_CONFIG['convolve_method'])
                kept = full[center]
                report.add(fourier=max(float(np.abs(full).sum() - np.abs(kept).sum()), 0.0))
                acc[mono] = acc[mono] + kept.ravel() if mono in acc else kept.ravel()
        if report.events:
            logger.debug("product truncation: %s", report.to_dict())
        return FTSeries(space, acc, self.truncation + other.truncation + report)

    # Производные

    def d_theta(self, i: int) -> "FTSeries":
        factor = self.space.box.derivative_factor(i)
        return FTSeries(self.space, {m: c * factor for m, c in self.terms.items()})

    def _d_var(self, pos: int) -> "FTSeries":
        terms = {}
        for m, c in self.terms.items():
            if m[pos] == 0:
                continue
            lowered = m[:pos] + (m[pos] - 1,) + m[pos + 1:]
            terms[lowered] = c * m[pos]
        return FTSeries(self.space, terms)

    def d_r(self, i: int) -> "FTSeries":
        return self._d_var(i)

    def d_zeta(self, v: int) -> "FTSeries":
        return self._d_var(self.space.n + v)

    def depends_on(self, pos: int) -> bool:
        return any(m[pos] for m in self.terms)

    # Вычисление и проверки

    def evaluate(self, theta, r=None, zeta=None) -> complex:
        space = self.space
        theta = np.asarray(theta, dtype=float).reshape(1, space.n)
        r = np.zeros(space.n) if r is None else np.asarray(r, dtype=float)
        zeta = np.zeros(space.V) if zeta is None else np.asarray(zeta, dtype=float)
        point = np.concatenate([r, zeta])
        total = 0j
        for m, c in self.terms.items():
            total += complex(space.box.evaluate(c, theta)[0]) * float(np.prod(point ** np.array(m)))
        return total

    def value(self, theta, r=None, zeta=None) -> float:
        return float(np.real(self.evaluate(theta, r, zeta)))

    def reality_defect(self) -> float:
        neg = self.space.box.neg_index()
        return max((float(np.abs(c - np.conj(c[neg])).max()) for c in self.terms.values()),
                   default=0.0)

    def symmetrized(self) -> "FTSeries":
        """Closest real series: C(k) <- (C(k) + conj C(-k)) / 2."""
        neg = self.space.box.neg_index()
        return FTSeries(self.space, {m: 0.5 * (c + np.conj(c[neg])) for m, c in self.terms.items()},
                        self.truncation)

    def split_l1(self, N: int) -> Tuple["FTSeries", "FTSeries"]:
        """(part with |k|_1 <= N, tail)."""
        low = self.space.box.l1 <= N
        head = {m: np.where(low, c, 0) for m, c in self.terms.items()}
        tail = {m: np.where(low, 0, c) for m, c in self.terms.items()}
        return FTSeries(self.space, head), FTSeries(self.space, tail)

    def mean(self) -> "FTSeries":
        z = self.space.box.zero_index
        terms = {}
        for m, c in self.terms.items():
            only = np.zeros_like(c)
            only[z] = c[z]
            terms[m] = only
        return FTSeries(self.space, terms)

    def coefficient_mass(self) -> float:
        return float(sum(np.abs(c).sum() for c in self.terms.values()))

    def max_abs(self) -> float:
        return max((float(np.abs(c).max()) for c in self.terms.values()), default=0.0)

    def max_fourier_l1(self) -> int:
        l1 = self.space.box.l1
        return max((int(l1[c != 0].max()) for c in self.terms.values()), default=0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.max_abs() <= tol

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return f"FTSeries({len(self.terms)} monomials, {self.space!r})"

    # Сериализация

    def header(self) -> List[str]:
        space = self.space
        return ([f"k{i}" for i in range(space.n)] + [f"alpha{i}" for i in range(space.n)]
                + [f"e{v}" for v in range(space.V)] + ['re', 'im'])

    def rows(self, tol: float = 0.0) -> Iterable[list]:
        """One row per nonzero coefficient, monomials in sorted order."""
        kvecs = self.space.box.kvecs
        for m in sorted(self.terms):
            c = self.terms[m]
            for idx in np.nonzero(np.abs(c) > tol)[0]:
                yield list(kvecs[idx]) + list(m) + [float(c[idx].real), float(c[idx].imag)]

    @classmethod
    def from_rows(cls, space: PhaseSpace, rows: Iterable[list]) -> "FTSeries":
        terms: Dict[Monomial, np.ndarray] = {}
        n = space.n
        for row in rows:
            k = tuple(int(float(x)) for x in row[:n])
            mono = tuple(int(float(x)) for x in row[n:n + space.n_vars])
            re, im = float(row[-2]), float(row[-1])
            terms.setdefault(mono, np.zeros(space.box.size, dtype=complex))
            terms[mono][space.box.index(k)] += re + 1j * im
        return cls(space, terms)


def poisson(f: FTSeries, g: FTSeries) -> FTSeries:
    """
    {f, g} = grad_r f . grad_theta g - grad_theta f . grad_r g + <J grad_zeta f, grad_zeta g>

    with J = [[0, -1], [1, 0]] on each (p, q) pair, i.e.
    sum_i (d_p f d_q g - d_q f d_p g).
    """
    f._check(g)
    space = f.space
    result = FTSeries.zero(space)
    for i in range(space.n):
        if f.depends_on(i) and g.terms:
            result = result + f.d_r(i) * g.d_theta(i)
        if g.depends_on(i) and f.terms:
            result = result - f.d_theta(i) * g.d_r(i)
    for mode in range(space.V // 2):
        p, q = 2 * mode, 2 * mode + 1
        fp, fq = space.n + p, space.n + q
        if f.depends_on(fp) and g.depends_on(fq):
            result = result + f.d_zeta(p) * g.d_zeta(q)
        if f.depends_on(fq) and g.depends_on(fp):
            result = result - f.d_zeta(q) * g.d_zeta(p)
    return result
