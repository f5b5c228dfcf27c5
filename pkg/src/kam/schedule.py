"""
Расписание параметров KAM

eps_j = eps_{j-1}^{5/4}, sigma_{j-1} - sigma_j = C* sigma_0 j^{-2},
kappa_j = eps_j^{1/(24(2 + d*/2beta))}, N_j = 2 (sigma_j - sigma_{j+1})^{-1} ln(1/eps_j),
mu_j = (eps_j / ((2M)^j eps^{6/5}))^{1/3} for j >= 1.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

from src.config import SCHEDULE_CONFIG
from src.errors import InvalidParameterError, ScheduleGateError

logger = logging.getLogger(__name__)

C_STAR = 3.0 / math.pi ** 2


def kappa_exponent(beta: float, d_star: float) -> float:
    return 1.0 / (24.0 * (2.0 + d_star / (2.0 * beta)))


def check_gate(eps: float, beta: float, d_star: float, delta0: float, policy: str) -> dict:
    """eps^{1/(24(2+d*/2beta))} <= delta0/2, raising under the 'enforce' policy."""
    if policy not in ('enforce', 'report'):
        raise InvalidParameterError(f"unknown gate policy {policy!r}")
    exponent = kappa_exponent(beta, d_star)
    value = eps ** exponent
    info = {'policy': policy, 'value': value, 'limit': delta0 / 2.0, 'holds': value <= delta0 / 2.0}
    if not info['holds']:
        message = (f"delta0 = {delta0:g} too small for eps = {eps:g}: "
                   f"eps^{exponent:.5f} = {value:.4f} > delta0/2")
        if policy == 'enforce':
            raise ScheduleGateError(message)
        logger.warning(message)
    return info


def required_M(eps0: float, mu0: float) -> float:
    """Least M keeping 2 mu_{j+1} <= mu_j for every j."""
    eps1 = eps0 ** 1.25
    return max(4.0 * eps0 ** 0.05 / mu0 ** 3, 4.0 * eps1 ** 0.25)


@dataclass
class KamSchedule:
    eps: List[float]
    kappa: List[float]
    sigma: List[float]
    mu: List[float]
    N: List[int]
    M_const: float
    C_star: float = C_STAR
    exponent: float = 0.0
    beta: float = 0.5
    d_star: float = 1.0
    delta0: float = 0.0
    kappa0: Optional[float] = None
    n_max: Optional[int] = None
    gate: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    @property
    def j_max(self) -> int:
        """Last step index the schedule covers."""
        return len(self.N) - 1

    def step(self, j: int) -> dict:
        if not 0 <= j <= self.j_max:
            raise InvalidParameterError(f"schedule holds steps 0..{self.j_max}, asked {j}")
        return {'j': j, 'eps': self.eps[j], 'eps_next': self.eps[j + 1], 'kappa': self.kappa[j],
                'sigma': self.sigma[j], 'sigma_next': self.sigma[j + 1], 'mu': self.mu[j],
                'mu_next': self.mu[j + 1], 'N': self.N[j]}

    def with_M(self, M: float) -> "KamSchedule":
        """Same inputs, new step constant (still raised to the halving minimum)."""
        return make_schedule(self.eps[0], self.sigma[0], self.mu[0], self.beta, self.d_star,
                             self.delta0, self.j_max, gate=self.gate.get('policy'),
                             kappa0=self.kappa0, n_max=self.n_max, M=M)

    def identities(self) -> dict:
        """Largest deviation of each defining relation."""
        dev = {'eps': 0.0, 'sigma': 0.0, 'kappa': 0.0, 'mu_halving': 0.0}
        s0 = self.sigma[0]
        for j in range(1, len(self.eps)):
            dev['eps'] = max(dev['eps'], abs(self.eps[j] - self.eps[j - 1] ** 1.25))
            dev['sigma'] = max(dev['sigma'],
                               abs(self.sigma[j - 1] - self.sigma[j] - self.C_star * s0 / j ** 2))
            dev['mu_halving'] = max(dev['mu_halving'], 2 * self.mu[j] - self.mu[j - 1])
        for j, eps_j in enumerate(self.eps):
            expected = (eps_j ** self.exponent if self.kappa0 is None
                        else self.kappa0 * (eps_j / self.eps[0]) ** self.exponent)
            dev['kappa'] = max(dev['kappa'], abs(self.kappa[j] - expected))
        return dev

    def to_dict(self) -> dict:
        return {'eps': self.eps, 'kappa': self.kappa, 'sigma': self.sigma, 'mu': self.mu,
                'N': self.N, 'M': self.M_const, 'C_star': self.C_star,
                'kappa_exponent': self.exponent, 'gate': self.gate, 'flags': self.flags}


def make_schedule(eps0: float, sigma0: float = None, mu0: float = None, beta: float = 0.5,
                  d_star: float = 1.0, delta0: float = 0.0, j_max: int = 3,
                  gate: Optional[str] = None, kappa0: Optional[float] = None,
                  n_max: Optional[int] = None, M: Optional[float] = None) -> KamSchedule:
    """
    Все последовательности до шага j_max.

    The gate eps0^{exponent} <= delta0/2 raises ScheduleGateError under the
    'enforce' policy and is only recorded under 'report'. N_j above n_max
    is capped and flagged. M is raised to the halving minimum when needed.
    """
    sigma0 = SCHEDULE_CONFIG['sigma0'] if sigma0 is None else sigma0
    mu0 = SCHEDULE_CONFIG['mu0'] if mu0 is None else mu0
    M = SCHEDULE_CONFIG['M'] if M is None else M
    gate = SCHEDULE_CONFIG['gate'] if gate is None else gate
    if not 0 < eps0 < 1:
        raise InvalidParameterError(f"eps0 must lie in (0, 1), got {eps0}")
    if not 0 < sigma0 <= 1 or not 0 < mu0 <= 1:
        raise InvalidParameterError("sigma0 and mu0 must lie in (0, 1]")
    if j_max < 0:
        raise InvalidParameterError("j_max must be nonnegative")

    exponent = kappa_exponent(beta, d_star)
    gate_info = check_gate(eps0, beta, d_star, delta0, gate)

    count = j_max + 1
    eps = [eps0]
    for _ in range(1, count + 1):
        eps.append(eps[-1] ** 1.25)
    sigma = [sigma0]
    for j in range(1, count + 1):
        sigma.append(sigma[-1] - C_STAR * sigma0 / j ** 2)
    if kappa0 is None:
        kappa = [e ** exponent for e in eps]
    else:
        kappa = [kappa0 * (e / eps0) ** exponent for e in eps]

    flags = {'N_capped': [], 'M_raised': None}
    N = []
    for j in range(count):
        raw = math.ceil(2.0 / (sigma[j] - sigma[j + 1]) * math.log(1.0 / eps[j]))
        if n_max is not None and raw > n_max:
            flags['N_capped'].append({'j': j, 'raw': raw, 'used': n_max})
            raw = n_max
        N.append(int(raw))
    if flags['N_capped']:
        logger.warning("N_j capped at %d on steps %s", n_max, [c['j'] for c in flags['N_capped']])

    needed = required_M(eps0, mu0)
    if M < needed:
        flags['M_raised'] = {'given': M, 'used': needed}
        logger.info("step constant M raised from %g to %g to keep mu halving", M, needed)
        M = needed
    mu = [mu0] + [(eps[j] / ((2.0 * M) ** j * eps0 ** 1.2)) ** (1.0 / 3.0)
                  for j in range(1, count + 1)]

    return KamSchedule(eps=eps, kappa=kappa, sigma=sigma, mu=mu, N=N, M_const=M,
                       exponent=exponent, beta=beta, d_star=d_star, delta0=delta0,
                       kappa0=kappa0, n_max=n_max, gate=gate_info, flags=flags)
