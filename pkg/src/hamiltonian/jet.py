"""
Джеты гамильтонианов

Degree-two jets f^T = f_theta + <f_r, r> + <f_zeta, zeta> + 1/2 <zeta, f_zz zeta>
stored as dense Fourier-first arrays, with the closed bracket on jets.
"""
import logging
from typing import Dict, Optional, Tuple

import numpy as np

from src.blocks.matrix import BlockMatrix, Flavor
from src.errors import InvalidParameterError
from src.hamiltonian.series import FTSeries
from src.hamiltonian.space import PhaseSpace, TruncationReport

logger = logging.getLogger(__name__)

PARTS = ('theta', 'r', 'zeta', 'zetazeta')


def apply_j(x: np.ndarray) -> np.ndarray:
    """J x over the last axis, J = [[0, -1], [1, 0]] on each (p, q)."""
    out = np.empty_like(x)
    out[..., 0::2] = -x[..., 1::2]
    out[..., 1::2] = x[..., 0::2]
    return out


def right_j(M: np.ndarray) -> np.ndarray:
    """M J for a stack of square matrices."""
    out = np.empty_like(M)
    out[..., 0::2] = M[..., 1::2]
    out[..., 1::2] = -M[..., 0::2]
    return out


class JetHamiltonian:
    """
    Плотный джет: theta (F,), r (F, n), zeta (F, V), zetazeta (F, V, V).

    zetazeta(k) is symmetric; the quadratic part is 1/2 <zeta, M zeta>.
    """

    def __init__(self, space: PhaseSpace, theta=None, r=None, zeta=None, zetazeta=None,
                 truncation: Optional[TruncationReport] = None):
        F, n, V = space.box.size, space.n, space.V
        self.space = space
        self.theta = self._coerce(theta, (F,))
        self.r = self._coerce(r, (F, n))
        self.zeta = self._coerce(zeta, (F, V))
        self.zetazeta = self._coerce(zetazeta, (F, V, V))
        self.truncation = truncation or TruncationReport()

    @staticmethod
    def _coerce(value, shape):
        if value is None:
            return np.zeros(shape, dtype=complex)
        value = np.asarray(value, dtype=complex)
        if value.shape != shape:
            raise InvalidParameterError(f"jet part has shape {value.shape}, expected {shape}")
        return value

    @classmethod
    def zeros(cls, space: PhaseSpace) -> "JetHamiltonian":
        return cls(space)

    def parts(self) -> Tuple[np.ndarray, ...]:
        return self.theta, self.r, self.zeta, self.zetazeta

    def _map(self, fn, other: "JetHamiltonian" = None) -> "JetHamiltonian":
        if other is None:
            return JetHamiltonian(self.space, *(fn(a) for a in self.parts()),
                                  truncation=self.truncation)
        if not self.space.compatible(other.space):
            raise InvalidParameterError("jets live on different phase spaces")
        return JetHamiltonian(self.space, *(fn(a, b) for a, b in zip(self.parts(), other.parts())),
                              truncation=self.truncation + other.truncation)

    def __add__(self, other):
        return self._map(np.add, other)

    def __sub__(self, other):
        return self._map(np.subtract, other)

    def __neg__(self):
        return self._map(np.negative)

    def __mul__(self, c):
        return self._map(lambda a: a * c)

    __rmul__ = __mul__

    def scaled(self, t: float) -> "JetHamiltonian":
        return self * t

    def copy(self) -> "JetHamiltonian":
        return self._map(np.copy)

    def split_l1(self, N: int) -> Tuple["JetHamiltonian", "JetHamiltonian"]:
        """(modes with |k|_1 <= N, tail)."""
        low = self.space.box.l1 <= N

        def keep(mask):
            return lambda a: a * mask.reshape((-1,) + (1,) * (a.ndim - 1))
        return self._map(keep(low)), self._map(keep(~low))

    def mean(self) -> Tuple[complex, np.ndarray, np.ndarray, np.ndarray]:
        z = self.space.box.zero_index
        return self.theta[z], self.r[z], self.zeta[z], self.zetazeta[z]

    def symmetrized(self) -> "JetHamiltonian":
        """Reality C(k) = conj C(-k) and symmetric zetazeta(k)."""
        neg = self.space.box.neg_index()
        out = self._map(lambda a: 0.5 * (a + np.conj(a[neg])))
        out.zetazeta = 0.5 * (out.zetazeta + np.swapaxes(out.zetazeta, 1, 2))
        return out

    def reality_defect(self) -> float:
        neg = self.space.box.neg_index()
        return max(float(np.max(np.abs(a - np.conj(a[neg])), initial=0.0)) for a in self.parts())

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(a), initial=0.0)) for a in self.parts())

    def coefficient_mass(self) -> float:
        return float(sum(np.abs(a).sum() for a in self.parts()))

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.max_abs() <= tol

    def derivative(self, i: int) -> "JetHamiltonian":
        """d / d theta_i."""
        factor = self.space.box.derivative_factor(i)
        return self._map(lambda a: a * factor.reshape((-1,) + (1,) * (a.ndim - 1)))

    def at(self, thetas: np.ndarray, derivative: Optional[int] = None):
        """Real part values (theta, r, zeta, zetazeta) at angle points of shape (M, n)."""
        jet = self if derivative is None else self.derivative(derivative)
        box = self.space.box
        thetas = np.atleast_2d(thetas)
        return tuple(np.real(box.evaluate(a, thetas)) for a in jet.parts())

    def evaluate(self, theta, r=None, zeta=None) -> float:
        r = np.zeros(self.space.n) if r is None else np.asarray(r, dtype=float)
        zeta = np.zeros(self.space.V) if zeta is None else np.asarray(zeta, dtype=float)
        ft, fr, fz, fzz = (a[0] for a in self.at(np.asarray(theta, dtype=float)))
        return float(ft + fr @ r + fz @ zeta + 0.5 * zeta @ fzz @ zeta)

    def zetazeta_matrix(self, index: Optional[int] = None) -> BlockMatrix:
        """Block matrix of zetazeta(k); the mean when index is None."""
        index = self.space.box.zero_index if index is None else index
        M = self.zetazeta[index]
        if np.max(np.abs(M.imag), initial=0.0) == 0.0:
            M = M.real
        return BlockMatrix.from_dense(self.space.clusters, M, Flavor.REAL)

    def to_series(self) -> FTSeries:
        space = self.space
        terms = {space.one: self.theta}
        for i in range(space.n):
            terms[space.monomial(alpha={i: 1})] = self.r[:, i]
        for v in range(space.V):
            terms[space.monomial(zeta={v: 1})] = self.zeta[:, v]
            terms[space.monomial(zeta={v: 2})] = 0.5 * self.zetazeta[:, v, v]
            for u in range(v):
                terms[space.monomial(zeta={u: 1, v: 1})] = self.zetazeta[:, u, v]
        return FTSeries(space, terms, self.truncation)

    def __repr__(self):
        return f"JetHamiltonian({self.space!r}, max|C|={self.max_abs():.3e})"


def extract_jet(f: FTSeries) -> Tuple[JetHamiltonian, FTSeries]:
    """Split a series into its jet and the remainder f - f^T."""
    space = f.space
    jet = JetHamiltonian.zeros(space)
    rest: Dict[tuple, np.ndarray] = {}
    n = space.n
    for mono, c in f.terms.items():
        if not space.is_jet_monomial(mono):
            rest[mono] = c
            continue
        r_exp, z_exp = mono[:n], mono[n:]
        if not any(mono):
            jet.theta = jet.theta + c
        elif any(r_exp):
            jet.r[:, r_exp.index(1)] += c
        else:
            vars_ = [v for v, e in enumerate(z_exp) for _ in range(e)]
            if len(vars_) == 1:
                jet.zeta[:, vars_[0]] += c
            elif vars_[0] == vars_[1]:
                jet.zetazeta[:, vars_[0], vars_[0]] += 2.0 * c
            else:
                u, v = vars_
                jet.zetazeta[:, u, v] += c
                jet.zetazeta[:, v, u] += c
    jet.truncation = f.truncation
    return jet, FTSeries(space, rest)


def jet_bracket(f: JetHamiltonian, g: JetHamiltonian) -> JetHamiltonian:
    """
    {f, g} on jets, evaluated pseudo-spectrally on a grid fine enough for
    products of two box polynomials and truncated back to the box.

    Requires D_w = 2 for closure; the r-r and zeta-r cross terms vanish then.
    """
    space = f.space
    if not space.compatible(g.space):
        raise InvalidParameterError("jets live on different phase spaces")
    box = space.box
    P = box.product_grid_size()

    def grid(a):
        return box.to_grid(a, P).real

    def dgrid(a, i):
        factor = box.derivative_factor(i).reshape((-1,) + (1,) * (a.ndim - 1))
        return box.to_grid(a * factor, P).real

    fr, gr = grid(f.r), grid(g.r)
    fz, gz = grid(f.zeta), grid(g.zeta)
    F, G = grid(f.zetazeta), grid(g.zetazeta)
    jfz, jgz = apply_j(fz), apply_j(gz)

    theta = np.einsum('xv,xv->x', jfz, gz)
    r = np.zeros_like(fr)
    zeta = np.einsum('xuv,xv->xu', G, jfz) - np.einsum('xuv,xv->xu', F, jgz)
    zz = right_j(G) @ F - right_j(F) @ G
    for i in range(space.n):
        fi, gi = fr[:, i], gr[:, i]
        theta += fi * dgrid(g.theta, i) - gi * dgrid(f.theta, i)
        r += fi[:, None] * dgrid(g.r, i) - gi[:, None] * dgrid(f.r, i)
        zeta += fi[:, None] * dgrid(g.zeta, i) - gi[:, None] * dgrid(f.zeta, i)
        zz += fi[:, None, None] * dgrid(g.zetazeta, i) - gi[:, None, None] * dgrid(f.zetazeta, i)

    report = TruncationReport()
    out = []
    for values in (theta, r, zeta, zz):
        coeffs, dropped = box.from_grid(values, P)
        report.add(fourier=dropped)
        out.append(coeffs)
    out[3] = 0.5 * (out[3] + np.swapaxes(out[3], 1, 2))
    if report.events:
        logger.debug("jet bracket dropped l1 mass %.3e", report.fourier_mass)
    return JetHamiltonian(space, *out, truncation=report)


def jet_poisson(f: JetHamiltonian, g: JetHamiltonian) -> FTSeries:
    """{f, g} as a truncated series."""
    return jet_bracket(f, g).to_series()
