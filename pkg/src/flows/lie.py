"""
Ряды Ли

h o Phi^1_S = sum_k ad_S^k h / k!, ad_S F = {S, F}.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Union

from src.config import FLOW_CONFIG
from src.errors import LieDivergenceError
from src.hamiltonian.jet import JetHamiltonian, jet_bracket
from src.hamiltonian.series import FTSeries, poisson

logger = logging.getLogger(__name__)

Hamiltonian = Union[FTSeries, JetHamiltonian]


@dataclass
class LieReport:
    term_norms: List[float] = field(default_factory=list)
    ratio: float = 0.0
    tail: float = 0.0

    @property
    def orders(self) -> int:
        return len(self.term_norms)

    def to_dict(self) -> dict:
        return {'orders': self.orders, 'ratio': self.ratio, 'tail': self.tail,
                'term_norms': list(self.term_norms)}


def lie_bracket(S: JetHamiltonian, F: Hamiltonian) -> Hamiltonian:
    """{S, F}; jets stay jets when the weighted-degree cap closes them."""
    if isinstance(F, JetHamiltonian):
        if S.space.D_w <= 2:
            return jet_bracket(S, F)
        F = F.to_series()
    return poisson(S.to_series(), F)


def pullback_lie(h: Hamiltonian, S: JetHamiltonian, order_cap: Optional[int] = None,
                 report: Optional[LieReport] = None) -> Hamiltonian:
    """
    Truncated Lie series of h along S.

    Beyond order 3 each term must be at most FLOW_CONFIG['lie_ratio'] times
    the previous one, otherwise LieDivergenceError. The tail estimate is
    last / (1 - ratio).
    """
    order_cap = FLOW_CONFIG['lie_order_cap'] if order_cap is None else order_cap
    report = report if report is not None else LieReport()
    if isinstance(h, JetHamiltonian) and S.space.D_w > 2:
        h = h.to_series()
    scale = max(h.coefficient_mass(), 1.0)
    total, term = h, h
    previous = None
    for order in range(1, order_cap + 1):
        term = lie_bracket(S, term) * (1.0 / order)
        size = term.coefficient_mass()
        report.term_norms.append(size)
        total = total + term
        logger.debug("lie order %d: term mass %.3e", order, size)
        if size <= FLOW_CONFIG['lie_tol'] * scale:
            break
        if previous:
            report.ratio = size / previous
            if order > 3 and report.ratio > FLOW_CONFIG['lie_ratio']:
                raise LieDivergenceError(
                    f"Lie terms do not decay: ratio {report.ratio:.3f} at order {order}")
        previous = size
    last = report.term_norms[-1] if report.term_norms else 0.0
    report.tail = last / (1.0 - report.ratio) if report.ratio < 1.0 else float('inf')
    return total
