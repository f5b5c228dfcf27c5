"""
Нормальная форма

h = energy + <omega, r> + 1/2 <zeta, A zeta> at one parameter sample, and
the family rho -> h(rho).
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from src.blocks.matrix import BlockMatrix, hermitian_block, is_normal_form, norm_s_beta
from src.errors import InvalidParameterError
from src.hamiltonian.jet import JetHamiltonian
from src.hamiltonian.space import PhaseSpace
from src.homological.frame import hermitian_eigh


@dataclass
class NormalFormHam:
    omega: np.ndarray
    A: BlockMatrix
    energy: float = 0.0
    rho: Optional[np.ndarray] = None
    _eigen: Dict[int, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        scale = max(1.0, float(np.max(np.abs(self.A.to_dense()), initial=0.0)))
        if not is_normal_form(self.A, tol=1e-12 * scale):
            raise InvalidParameterError("A is not a real block-diagonal normal form")

    @property
    def clusters(self):
        return self.A.clusters

    @property
    def n(self) -> int:
        return len(self.omega)

    def eigensystem(self, i: int) -> Tuple[np.ndarray, np.ndarray]:
        """(D, P) of the Hermitian matrix Q of cluster i."""
        if i not in self._eigen:
            self._eigen[i] = hermitian_eigh(hermitian_block(self.A, i))
        return self._eigen[i]

    def evaluate(self, theta, r, zeta) -> float:
        zeta = np.asarray(zeta, dtype=float)
        return float(self.energy + self.omega @ np.asarray(r, dtype=float)
                     + 0.5 * zeta @ self.A.to_dense().real @ zeta)

    def to_jet(self, space: PhaseSpace) -> JetHamiltonian:
        jet = JetHamiltonian.zeros(space)
        z = space.box.zero_index
        jet.theta[z] = self.energy
        jet.r[z] = self.omega
        jet.zetazeta[z] = self.A.to_dense()
        return jet

    def shifted(self, c: float = 0.0, chi=None, B: Optional[BlockMatrix] = None) -> "NormalFormHam":
        """h + c + <chi, r> + 1/2 <zeta, B zeta>."""
        omega = self.omega + (0.0 if chi is None else np.asarray(chi, dtype=float))
        A = self.A if B is None else self.A + B
        return NormalFormHam(omega, A, self.energy + c, self.rho)

    def closeness(self, reference: "NormalFormHam", delta0: float) -> dict:
        """|omega - omega0| <= delta0 and |A - A0|_{s,beta} <= delta0/4 at this sample."""
        d_omega = float(np.max(np.abs(self.omega - reference.omega), initial=0.0))
        d_A = norm_s_beta(self.A - reference.A).value
        return {'omega_shift': d_omega, 'A_shift': d_A,
                'omega_ok': d_omega <= delta0, 'A_ok': d_A <= delta0 / 4.0}


@dataclass
class NormalFormFamily:
    """rho -> NormalFormHam through callables for omega and A."""
    omega: Callable[[np.ndarray], np.ndarray]
    A: Callable[[np.ndarray], BlockMatrix]

    def at(self, rho) -> NormalFormHam:
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        return NormalFormHam(self.omega(rho), self.A(rho), 0.0, rho)
