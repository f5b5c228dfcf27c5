"""
Нормы гамильтонианов

Weighted jet norms [f]^{beta}_{sigma, mu} and [f]^{beta+}_{sigma, mu}, and
their family version over parameter samples.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Sequence, Union

import numpy as np

from src.blocks.matrix import BlockMatrix, Flavor, norm_s_beta, norm_s_beta_plus, pair_factor
from src.config import NORM_CONFIG
from src.errors import InvalidParameterError
from src.hamiltonian.jet import JetHamiltonian, extract_jet
from src.hamiltonian.series import FTSeries

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NormParams:
    sigma: float
    mu: float
    s: float = NORM_CONFIG['s']
    beta: float = NORM_CONFIG['beta']

    def __post_init__(self):
        if not 0 < self.sigma <= 1 or not 0 < self.mu <= 1:
            raise InvalidParameterError(
                f"norm parameters need sigma, mu in (0, 1], got {self.sigma}, {self.mu}")
        if self.s < 0 or self.beta <= 0:
            raise InvalidParameterError("norm parameters need s >= 0, beta > 0")

    @classmethod
    def default(cls) -> "NormParams":
        return cls(NORM_CONFIG['sigma'], NORM_CONFIG['mu'])

    def shrunk(self, sigma: float = None, mu: float = None) -> "NormParams":
        return NormParams(self.sigma if sigma is None else sigma, self.mu if mu is None else mu,
                          self.s, self.beta)


@dataclass
class JetNorm:
    value: float
    parts: Dict[str, float] = field(default_factory=dict)

    def __float__(self):
        return self.value

    def to_dict(self) -> dict:
        return {'value': self.value, **self.parts}


def _pair_norms(blocks: np.ndarray, clusters, s: float, beta: float, plus: bool) -> np.ndarray:
    """|M(k)|_{s,beta(+)} for a stack of dense matrices (F, V, V)."""
    w = clusters.cluster_weights
    out = np.zeros(blocks.shape[0])
    for i, ci in enumerate(clusters.clusters):
        for j, cj in enumerate(clusters.clusters):
            sub = blocks[:, ci.var_slice, cj.var_slice]
            if not np.any(sub):
                continue
            norms = np.linalg.norm(sub, ord=2, axis=(1, 2))
            out = np.maximum(out, norms * pair_factor(w[i], w[j], s, beta, plus))
    return out


def _jet_parts(jet: JetHamiltonian, p: NormParams, plus: bool) -> Dict[str, float]:
    space = jet.space
    clusters = space.clusters
    e = space.box.weights(p.sigma)
    wv = clusters.var_weights
    low, high = wv ** (-p.s), wv ** (p.s + p.beta)
    mu = p.mu

    Z = jet.zetazeta
    has_z = bool(np.any(Z))
    sup_z = np.linalg.norm(low[None, :, None] * Z * low[None, None, :], ord=2, axis=(1, 2)) \
        if has_z else np.zeros(len(e))
    sup = np.abs(jet.theta) + mu ** 2 * np.abs(jet.r).sum(axis=1) \
        + mu * np.linalg.norm(jet.zeta * low, axis=1) + 0.5 * mu ** 2 * sup_z
    grad_z = np.linalg.norm(high[None, :, None] * Z * low[None, None, :], ord=2, axis=(1, 2)) \
        if has_z else np.zeros(len(e))
    grad = mu * (np.linalg.norm(jet.zeta * high, axis=1) + mu * grad_z)
    hess = mu ** 2 * _pair_norms(Z, clusters, p.s, p.beta, plus) if has_z else np.zeros(len(e))
    return {'sup': float(e @ sup), 'grad': float(e @ grad), 'hess': float(e @ hess)}


def _majorant_parts(rest: FTSeries, p: NormParams, plus: bool) -> Dict[str, float]:
    """Bounds for the non-jet monomials through coefficient majorants."""
    space = rest.space
    n = space.n
    if not rest.terms:
        return {'sup': 0.0, 'grad': 0.0, 'hess': 0.0}
    e = space.box.weights(p.sigma)
    wv = space.clusters.var_weights
    scale = np.concatenate([np.full(n, p.mu ** 2), p.mu * wv ** (-p.s)])
    exps = np.array(list(rest.terms), dtype=float)
    coeffs = np.array(list(rest.terms.values()))
    # e . |C| times the monomial majorant at the scale point
    weight = (np.abs(coeffs) @ e) * np.prod(scale ** exps, axis=1)
    sup = float(weight.sum())
    Z = exps[:, n:]
    zs = scale[n:]
    grad = (weight @ Z) / zs
    hess = ((Z * weight[:, None]).T @ Z - np.diag(weight @ Z)) / np.outer(zs, zs)
    grad_value = p.mu * float(np.linalg.norm(wv ** (p.s + p.beta) * grad))
    H = BlockMatrix.from_dense(space.clusters, hess, Flavor.REAL, s=p.s, beta=p.beta)
    hess_value = p.mu ** 2 * (norm_s_beta_plus(H) if plus else norm_s_beta(H)).value
    return {'sup': sup, 'grad': grad_value, 'hess': hess_value}


def jet_norm(f: Union[JetHamiltonian, FTSeries], params: NormParams,
             variant: str = 'beta') -> JetNorm:
    """
    Максимум трех частей: sup, градиент по zeta, гессиан по zeta.

    variant 'beta+' measures the Hessian part with |.|_{s,beta+}.
    Non-jet monomials of a series enter through majorants.
    """
    if variant not in ('beta', 'beta+'):
        raise InvalidParameterError(f"unknown norm variant {variant!r}")
    plus = variant == 'beta+'
    if isinstance(f, FTSeries):
        jet, rest = extract_jet(f)
        parts = _jet_parts(jet, params, plus)
        for key, value in _majorant_parts(rest, params, plus).items():
            parts[key] += value
    else:
        parts = _jet_parts(f, params, plus)
    return JetNorm(max(parts.values()), parts)


def family_norm(build: Callable[[np.ndarray], Union[JetHamiltonian, FTSeries]],
                rhos: Sequence[np.ndarray], params: NormParams, variant: str = 'beta',
                step: float = None) -> JetNorm:
    """
    max over samples of the norm and of its first rho-derivatives.

    Derivatives are central differences with step NORM_CONFIG['rho_step'].
    """
    step = NORM_CONFIG['rho_step'] if step is None else step
    c0, c1 = 0.0, 0.0
    for rho in rhos:
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        c0 = max(c0, jet_norm(build(rho), params, variant).value)
        for i in range(len(rho)):
            shift = np.zeros_like(rho)
            shift[i] = step
            diff = (build(rho + shift) - build(rho - shift)) * (0.5 / step)
            c1 = max(c1, jet_norm(diff, params, variant).value)
    return JetNorm(max(c0, c1), {'c0': c0, 'c1': c1})
