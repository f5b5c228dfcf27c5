"""
Блочные матрицы M_{s,beta}

Cluster-pair block storage, the |.|_{s,beta} and |.|_{s,beta+} norms,
products, normal-form projection and the symplectic complex frame.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

import networkx as nx
import numpy as np
from scipy.linalg import svdvals

from src.blocks.vector import WeightedVector
from src.config import NORM_CONFIG
from src.errors import FlavorMismatchError, InvalidParameterError
from src.spectrum.models import ClusterSet

logger = logging.getLogger(__name__)

# U_a: zeta_a = U (xi_a, eta_a)
U_MODE = np.array([[1.0, 1.0], [-1.0j, 1.0j]]) / np.sqrt(2.0)
J_MODE = np.array([[0.0, -1.0], [1.0, 0.0]])

Key = Tuple[int, int]


class Flavor(Enum):
    """Entry layout of a block matrix."""
    REAL = "real-2x2"          # 2x2 real entries, (p, q) per mode
    COMPLEX = "complex-2x2"    # 2x2 complex entries, (xi, eta) per mode
    SCALAR = "complex-scalar"  # one complex number per mode pair


@dataclass
class NormReport:
    value: float
    witness: Optional[Key] = None

    def __float__(self):
        return self.value


def symplectic_unit(n_modes: int) -> np.ndarray:
    """Block-diagonal J acting on (p_1, q_1, ..., p_m, q_m)."""
    return np.kron(np.eye(n_modes), J_MODE)


def frame_matrix(n_modes: int) -> np.ndarray:
    """Block-diagonal U, interleaved (xi_1, eta_1, ...) ordering."""
    return np.kron(np.eye(n_modes), U_MODE)


def spectral_norm(block: np.ndarray) -> float:
    """Largest singular value; power iteration above NORM_CONFIG['svd_max_dim']."""
    if block.size == 0:
        return 0.0
    if max(block.shape) <= NORM_CONFIG['svd_max_dim']:
        return float(svdvals(block)[0])
    gram = block.conj().T @ block
    v = gram[:, np.argmax(np.linalg.norm(gram, axis=0))]
    nv = np.linalg.norm(v)
    if nv == 0:
        return 0.0
    v = v / nv
    value = 0.0
    for _ in range(NORM_CONFIG['power_max_iter']):
        w = gram @ v
        new = float(np.linalg.norm(w))
        if new == 0:
            return 0.0
        v = w / new
        if abs(new - value) <= NORM_CONFIG['power_tol'] * new:
            value = new
            break
        value = new
    return float(np.sqrt(value))


def pair_factor(w_a: float, w_b: float, s: float, beta: float, plus: bool = False) -> float:
    """(w_a w_b)^beta ((w + |w_a^2 - w_b^2|)/w)^{s/2}, w = min, times (1+|w_a-w_b|) if plus."""
    w = min(w_a, w_b)
    factor = (w_a * w_b) ** beta * ((w + abs(w_a ** 2 - w_b ** 2)) / w) ** (s / 2.0)
    if plus:
        factor *= 1.0 + abs(w_a - w_b)
    return factor


class BlockMatrix:
    """
    Усеченная бесконечная матрица, хранимая по парам кластеров.

    Keys are (i, j) cluster indices of the ClusterSet; absent blocks are zero.
    Blocks are (2 d_i, 2 d_j) arrays for the 2x2 flavors and (d_i, d_j) for
    the scalar flavor.
    """

    def __init__(self, clusters: ClusterSet, blocks: Optional[Dict[Key, np.ndarray]] = None,
                 flavor: Flavor = Flavor.REAL, s: float = None, beta: float = None):
        self.clusters = clusters
        self.flavor = Flavor(flavor)
        self.s = NORM_CONFIG['s'] if s is None else s
        self.beta = NORM_CONFIG['beta'] if beta is None else beta
        self.blocks: Dict[Key, np.ndarray] = {}
        for key, block in (blocks or {}).items():
            block = np.asarray(block)
            if block.shape != self.block_shape(*key):
                raise InvalidParameterError(
                    f"block {key} has shape {block.shape}, expected {self.block_shape(*key)}")
            self.blocks[key] = block

    def block_shape(self, i: int, j: int) -> Tuple[int, int]:
        di, dj = self.clusters.clusters[i].size, self.clusters.clusters[j].size
        if self.flavor is Flavor.SCALAR:
            return di, dj
        return 2 * di, 2 * dj

    def _slices(self, i: int) -> slice:
        c = self.clusters.clusters[i]
        return c.mode_slice if self.flavor is Flavor.SCALAR else c.var_slice

    @property
    def dim(self) -> int:
        return self.clusters.n_modes if self.flavor is Flavor.SCALAR else self.clusters.n_vars

    @classmethod
    def zeros(cls, clusters: ClusterSet, flavor: Flavor = Flavor.REAL, **params) -> "BlockMatrix":
        return cls(clusters, {}, flavor, **params)

    @classmethod
    def identity(cls, clusters: ClusterSet, flavor: Flavor = Flavor.REAL,
                 only: Optional[Iterable[int]] = None, **params) -> "BlockMatrix":
        m = cls(clusters, {}, flavor, **params)
        for i in (range(len(clusters)) if only is None else only):
            m.blocks[(i, i)] = np.eye(m.block_shape(i, i)[0])
        return m

    @classmethod
    def from_dense(cls, clusters: ClusterSet, dense: np.ndarray, flavor: Flavor = Flavor.REAL,
                   tol: float = 0.0, **params) -> "BlockMatrix":
        m = cls(clusters, {}, flavor, **params)
        if dense.shape != (m.dim, m.dim):
            raise InvalidParameterError(f"dense matrix must be {m.dim}x{m.dim}")
        for i in range(len(clusters)):
            for j in range(len(clusters)):
                block = dense[m._slices(i), m._slices(j)]
                if np.max(np.abs(block), initial=0.0) > tol:
                    m.blocks[(i, j)] = np.array(block)
        return m

    @classmethod
    def diagonal(cls, clusters: ClusterSet, values: np.ndarray, **params) -> "BlockMatrix":
        """Real flavor, value_a * I_2 on every mode."""
        return cls.from_dense(clusters, np.diag(np.repeat(np.asarray(values, dtype=float), 2)),
                              Flavor.REAL, **params)

    def to_dense(self) -> np.ndarray:
        dtype = complex if any(np.iscomplexobj(b) for b in self.blocks.values()) else float
        dense = np.zeros((self.dim, self.dim), dtype=dtype)
        for (i, j), block in self.blocks.items():
            dense[self._slices(i), self._slices(j)] = block
        return dense

    def like(self, blocks: Dict[Key, np.ndarray], flavor: Flavor = None) -> "BlockMatrix":
        return BlockMatrix(self.clusters, blocks, flavor or self.flavor, self.s, self.beta)

    def with_params(self, s: float = None, beta: float = None) -> "BlockMatrix":
        return BlockMatrix(self.clusters, self.blocks, self.flavor,
                           self.s if s is None else s, self.beta if beta is None else beta)

    def copy(self) -> "BlockMatrix":
        return self.like({k: b.copy() for k, b in self.blocks.items()})

    def _combine(self, other: "BlockMatrix", sign: float) -> "BlockMatrix":
        _check_flavors(self, other)
        blocks = {k: b.copy() for k, b in self.blocks.items()}
        for k, b in other.blocks.items():
            blocks[k] = blocks[k] + sign * b if k in blocks else sign * b
        return self.like(blocks)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, c):
        return self.like({k: c * b for k, b in self.blocks.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def transpose(self) -> "BlockMatrix":
        return self.like({(j, i): b.T for (i, j), b in self.blocks.items()})

    def adjoint(self) -> "BlockMatrix":
        return self.like({(j, i): b.conj().T for (i, j), b in self.blocks.items()})

    def block(self, i: int, j: int) -> np.ndarray:
        if (i, j) in self.blocks:
            return self.blocks[(i, j)]
        return np.zeros(self.block_shape(i, j))

    def block_norms(self) -> Dict[Key, float]:
        return {k: spectral_norm(b) for k, b in self.blocks.items()}

    def max_abs_difference(self, other: "BlockMatrix") -> float:
        return float(np.max(np.abs(self.to_dense() - other.to_dense()), initial=0.0))

    def is_symmetric(self, tol: float = 0.0) -> bool:
        d = self.to_dense()
        return bool(np.max(np.abs(d - d.T), initial=0.0) <= tol)

    def is_hermitian(self, tol: float = 0.0) -> bool:
        d = self.to_dense()
        return bool(np.max(np.abs(d - d.conj().T), initial=0.0) <= tol)

    def coupling_graph(self) -> nx.DiGraph:
        """Cluster indices as nodes, an edge i -> j for every stored block (i, j)."""
        graph = nx.DiGraph()
        graph.add_nodes_from((i, {'weight': c.weight}) for i, c in enumerate(self.clusters.clusters))
        for (i, j), b in self.blocks.items():
            if np.any(b != 0):
                graph.add_edge(i, j)
        return graph

    def bandwidth(self) -> int:
        """max |w_a - w_b| over nonzero blocks (0 when block diagonal or empty)."""
        w = self.clusters.cluster_weights
        edges = self.coupling_graph().edges
        return int(max((abs(w[i] - w[j]) for i, j in edges), default=0))

    def __repr__(self):
        return (f"BlockMatrix({self.flavor.value}, blocks={len(self.blocks)}, "
                f"s={self.s}, beta={self.beta})")


def _check_flavors(A: BlockMatrix, B: BlockMatrix):
    if A.flavor is not B.flavor:
        raise FlavorMismatchError(f"{A.flavor.value} vs {B.flavor.value}")
    if A.clusters is not B.clusters and A.clusters.modes != B.clusters.modes:
        raise FlavorMismatchError("block matrices live on different truncations")


def _weighted_sup(M: BlockMatrix, plus: bool) -> NormReport:
    w = M.clusters.cluster_weights
    best = NormReport(0.0, None)
    for key in sorted(M.blocks):
        i, j = key
        value = spectral_norm(M.blocks[key])
        if value == 0.0:
            continue
        value *= pair_factor(w[i], w[j], M.s, M.beta, plus)
        if value > best.value:
            best = NormReport(float(value), key)
    return best


def norm_s_beta(M: BlockMatrix) -> NormReport:
    """sup over cluster pairs of (w_a w_b)^beta ||M_[a]^[b]|| ((w + |w_a^2 - w_b^2|)/w)^{s/2}."""
    return _weighted_sup(M, plus=False)


def norm_s_beta_plus(M: BlockMatrix) -> NormReport:
    """norm_s_beta with the extra factor (1 + |w_a - w_b|)."""
    return _weighted_sup(M, plus=True)


def block_mul(A: BlockMatrix, B: BlockMatrix) -> BlockMatrix:
    """(AB)_[a]^[b] = sum_c A_[a]^[c] B_[c]^[b], walking the coupling graphs."""
    _check_flavors(A, B)
    ga, gb = A.coupling_graph(), B.coupling_graph()
    blocks: Dict[Key, np.ndarray] = {}
    for i, c in sorted(ga.edges):
        for j in sorted(gb.successors(c)):
            term = A.blocks[(i, c)] @ B.blocks[(c, j)]
            blocks[(i, j)] = blocks[(i, j)] + term if (i, j) in blocks else term
    return BlockMatrix(A.clusters, blocks, A.flavor, A.s, A.beta)


def apply(A: BlockMatrix, z: WeightedVector) -> WeightedVector:
    """Blockwise A z; the result carries the exponent s + beta."""
    if A.flavor is Flavor.SCALAR:
        raise FlavorMismatchError("scalar-flavor matrices do not act on (p, q) vectors")
    out = np.zeros(A.clusters.n_vars, dtype=np.result_type(z.entries, *A.blocks.values(), float))
    for (i, j), block in A.blocks.items():
        out[A._slices(i)] += block @ z.entries[A._slices(j)]
    return WeightedVector(A.clusters, out, z.s + A.beta)


def outer(X: WeightedVector, Y: WeightedVector, s: float = None, beta: float = None) -> BlockMatrix:
    """Rank-one block matrix A_[a]^[b] = X_[a] (x) Y_[b]."""
    clusters = X.clusters
    blocks = {}
    for i, ci in enumerate(clusters.clusters):
        xi = X.entries[ci.var_slice]
        if not np.any(xi):
            continue
        for j, cj in enumerate(clusters.clusters):
            yj = Y.entries[cj.var_slice]
            if np.any(yj):
                blocks[(i, j)] = np.outer(xi, yj)
    return BlockMatrix(clusters, blocks, Flavor.REAL, s, beta)


def to_complex(A: BlockMatrix) -> BlockMatrix:
    """Entrywise tU E U: real (p, q) entries to (xi, eta) entries."""
    if A.flavor is not Flavor.REAL:
        raise FlavorMismatchError("to_complex expects the real flavor")
    blocks = {}
    for (i, j), block in A.blocks.items():
        Ui = frame_matrix(A.clusters.clusters[i].size)
        Uj = frame_matrix(A.clusters.clusters[j].size)
        blocks[(i, j)] = Ui.T @ block @ Uj
    return A.like(blocks, Flavor.COMPLEX)


def to_real(A: BlockMatrix, tol: float = 1e-12) -> BlockMatrix:
    """Inverse of to_complex; drops an imaginary part below tol (relative)."""
    if A.flavor is not Flavor.COMPLEX:
        raise FlavorMismatchError("to_real expects the complex 2x2 flavor")
    blocks = {}
    for (i, j), block in A.blocks.items():
        Ui = frame_matrix(A.clusters.clusters[i].size)
        Uj = frame_matrix(A.clusters.clusters[j].size)
        real = Ui.conj() @ block @ Uj.conj().T
        scale = max(1.0, float(np.max(np.abs(real), initial=0.0)))
        if np.max(np.abs(real.imag), initial=0.0) <= tol * scale:
            real = real.real
        blocks[(i, j)] = real
    return A.like(blocks, Flavor.REAL)


def xi_eta(A: BlockMatrix) -> BlockMatrix:
    """Scalar flavor holding the xi-eta entries Q of a complex 2x2 matrix."""
    if A.flavor is Flavor.REAL:
        A = to_complex(A)
    if A.flavor is not Flavor.COMPLEX:
        raise FlavorMismatchError("xi_eta expects a 2x2 flavor")
    return A.like({k: b[0::2, 1::2].copy() for k, b in A.blocks.items()}, Flavor.SCALAR)


def project_normal_form(A: BlockMatrix) -> BlockMatrix:
    """Keep diagonal cluster blocks, project each 2x2 entry onto span{I, J}."""
    if A.flavor is not Flavor.REAL:
        raise FlavorMismatchError("normal forms are defined on the real flavor")
    blocks = {}
    for (i, j), block in A.blocks.items():
        if i != j:
            continue
        d = block.shape[0] // 2
        E = np.real(block).reshape(d, 2, d, 2)
        alpha = 0.5 * (E[:, 0, :, 0] + E[:, 1, :, 1])
        beta = 0.5 * (E[:, 1, :, 0] - E[:, 0, :, 1])
        blocks[(i, i)] = _entries(alpha, beta)
    return A.like(blocks)


def _entries(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Real 2x2-entry block with entries alpha I + beta J."""
    d = alpha.shape[0]
    out = np.zeros((d, 2, d, 2))
    out[:, 0, :, 0] = alpha
    out[:, 1, :, 1] = alpha
    out[:, 0, :, 1] = -beta
    out[:, 1, :, 0] = beta
    return out.reshape(2 * d, 2 * d)


def hermitian_block(A: BlockMatrix, i: int) -> np.ndarray:
    """Q = alpha - i beta of the diagonal block i of a normal-form matrix."""
    block = A.block(i, i)
    d = block.shape[0] // 2
    E = np.real(block).reshape(d, 2, d, 2)
    alpha = 0.5 * (E[:, 0, :, 0] + E[:, 1, :, 1])
    beta = 0.5 * (E[:, 1, :, 0] - E[:, 0, :, 1])
    return alpha - 1j * beta


def normal_form_from_hermitian(clusters: ClusterSet, Q: Dict[int, np.ndarray], **params) -> BlockMatrix:
    """Real normal form whose diagonal blocks have the given Hermitian Q."""
    return BlockMatrix(clusters, {(i, i): _entries(q.real, -q.imag) for i, q in Q.items()},
                       Flavor.REAL, **params)


def is_normal_form(A: BlockMatrix, tol: float = 0.0) -> bool:
    """Real, symmetric, block diagonal and fixed by the span{I, J} projection."""
    if A.flavor is not Flavor.REAL:
        return False
    for (i, j), block in A.blocks.items():
        if i != j and np.max(np.abs(block), initial=0.0) > tol:
            return False
        if np.iscomplexobj(block) and np.max(np.abs(block.imag), initial=0.0) > tol:
            return False
    if not A.is_symmetric(tol):
        return False
    return A.max_abs_difference(project_normal_form(A)) <= tol


def dump_rows(M: BlockMatrix) -> Tuple[dict, List[list]]:
    """JSON header and CSV rows (w_a, idx_a, w_b, idx_b, entries...)."""
    header = {'s': M.s, 'beta': M.beta, 'flavor': M.flavor.value, 'W_max': M.clusters.W_max}
    rows = []
    step = 1 if M.flavor is Flavor.SCALAR else 2
    for (i, j) in sorted(M.blocks):
        block = M.blocks[(i, j)]
        wa, wb = M.clusters.clusters[i].weight, M.clusters.clusters[j].weight
        for ia in range(block.shape[0] // step):
            for ib in range(block.shape[1] // step):
                entry = block[ia * step:(ia + 1) * step, ib * step:(ib + 1) * step].ravel()
                values = []
                for v in entry:
                    values.extend([float(np.real(v)), float(np.imag(v))])
                rows.append([wa, ia, wb, ib] + values)
    return header, rows
