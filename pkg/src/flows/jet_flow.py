"""
Потоки струй

Flow of a jet S: theta' = S_r(theta), r' = -grad_theta S, zeta' = J grad_zeta S.
The angle equation is integrated by fixed-step RK4 with a step-doubling
check; the affine zeta and r parts are summed as iterated-integral series
on the same mesh.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple, Union

import numpy as np

from src.blocks.matrix import symplectic_unit
from src.config import FLOW_CONFIG
from src.errors import FlowIntegrationError, FlowSmallnessError
from src.hamiltonian.jet import JetHamiltonian, apply_j
from src.hamiltonian.norms import NormParams, jet_norm
from src.hamiltonian.series import FTSeries

logger = logging.getLogger(__name__)

Point = Tuple[np.ndarray, np.ndarray, np.ndarray]


def cumulative_simpson(values: np.ndarray, t: float) -> np.ndarray:
    """
    Integrals from 0 to every mesh point of samples on an even uniform mesh.

    Even points use Simpson's rule on each pair of intervals, odd points the
    quadratic through the same three samples.
    """
    steps = len(values) - 1
    out = np.zeros_like(values)
    if steps == 0 or t == 0:
        return out
    h = 2.0 * t / steps
    g0, gm, g1 = values[0:-1:2], values[1::2], values[2::2]
    full = np.cumsum(h / 6.0 * (g0 + 4.0 * gm + g1), axis=0)
    out[2::2] = full
    out[1::2] = out[0:-1:2] + h / 24.0 * (5.0 * g0 + 8.0 * gm - g1)
    return out


def _rk4(S: JetHamiltonian, theta0: np.ndarray, t: float, steps: int) -> np.ndarray:
    box = S.space.box
    coeffs = S.r

    def field(theta):
        return np.real(box.evaluate(coeffs, theta[None, :])[0])

    h = t / steps
    path = np.empty((steps + 1, len(theta0)))
    path[0] = theta0
    for j in range(steps):
        x = path[j]
        k1 = field(x)
        k2 = field(x + 0.5 * h * k1)
        k3 = field(x + 0.5 * h * k2)
        k4 = field(x + h * k3)
        path[j + 1] = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return path


def _angle_path(S: JetHamiltonian, theta0: np.ndarray, t: float, steps: int) -> np.ndarray:
    if not np.any(S.r):
        return np.repeat(theta0[None, :], steps + 1, axis=0)
    coarse = _rk4(S, theta0, t, steps)
    while True:
        fine = _rk4(S, theta0, t, 2 * steps)
        diff = float(np.max(np.abs(fine[-1] - coarse[-1])))
        if diff < FLOW_CONFIG['richardson_tol']:
            return fine
        steps *= 2
        if 2 * steps > FLOW_CONFIG['max_steps']:
            raise FlowIntegrationError(
                f"angle flow did not settle: step-doubling difference {diff:.3e} "
                f"at {steps} steps")
        coarse = fine


def _series(first: np.ndarray, step, what: str) -> np.ndarray:
    """first + step(first) + step(step(first)) + ... until terms drop below tolerance."""
    total = first.copy()
    term = first
    previous = float(np.max(np.abs(first), initial=0.0))
    if previous < FLOW_CONFIG['series_tol']:
        return total
    for order in range(2, FLOW_CONFIG['series_max_order'] + 1):
        term = step(term)
        size = float(np.max(np.abs(term), initial=0.0))
        total += term
        if size < FLOW_CONFIG['series_tol']:
            break
        if order > 3 and size > previous:
            raise FlowSmallnessError(f"{what} series grows at order {order}: {size:.3e}")
        previous = size
    return total


@dataclass
class FlowData:
    """
    Аффинные данные потока вдоль сетки по t.

    zeta(t) = a(t) + (I + B(t)) zeta0, r(t) = -alpha(t; zeta0) + (I - Lam(t)) r0.
    """
    S: JetHamiltonian
    t: float
    theta: np.ndarray        # (T, n)
    a: np.ndarray            # (T, V)
    B: np.ndarray            # (T, V, V)
    Lam: np.ndarray          # (T, n, n)
    L: np.ndarray            # (T, n, n), L_ij = d_i S_{r_j}
    d_theta: np.ndarray      # (T, n)
    d_zeta: np.ndarray       # (T, n, V)
    d_zetazeta: np.ndarray   # (T, n, V, V)

    @property
    def theta_end(self) -> np.ndarray:
        return self.theta[-1]

    def zeta_path(self, zeta0: np.ndarray) -> np.ndarray:
        return self.a + zeta0[None, :] + np.einsum('tuv,v->tu', self.B, zeta0)

    def alpha_inf(self, zeta0: np.ndarray) -> np.ndarray:
        """alpha(t; zeta0) along the mesh, quadratic in zeta0."""
        z = self.zeta_path(zeta0)
        source = (self.d_theta + np.einsum('tiv,tv->ti', self.d_zeta, z)
                  + 0.5 * np.einsum('tu,tiuv,tv->ti', z, self.d_zetazeta, z))
        first = cumulative_simpson(source, self.t)
        return _series(first, lambda x: cumulative_simpson(-np.einsum('tij,tj->ti', self.L, x),
                                                           self.t), 'alpha')

    def alpha_gradient(self, zeta0: np.ndarray) -> np.ndarray:
        """d alpha / d zeta0 along the mesh, shape (T, n, V)."""
        z = self.zeta_path(zeta0)
        sym = 0.5 * (self.d_zetazeta + np.swapaxes(self.d_zetazeta, 2, 3))
        source = self.d_zeta + np.einsum('tiuv,tv->tiu', sym, z)
        first = cumulative_simpson(np.einsum('tiu,tuv->tiv', source,
                                             np.eye(len(zeta0))[None] + self.B), self.t)
        return _series(first, lambda x: cumulative_simpson(-np.einsum('tij,tjv->tiv', self.L, x),
                                                           self.t), 'alpha gradient')

    def apply(self, r0: np.ndarray, zeta0: np.ndarray) -> Point:
        """(theta, r, zeta) at time t."""
        r0 = np.asarray(r0, dtype=float)
        zeta0 = np.asarray(zeta0, dtype=float)
        zeta = self.a[-1] + zeta0 + self.B[-1] @ zeta0
        r = -self.alpha_inf(zeta0)[-1] + r0 - self.Lam[-1] @ r0
        return self.theta[-1].copy(), r, zeta


def check_smallness(S: JetHamiltonian, params: Optional[NormParams] = None) -> float:
    """[S]^{beta+} against 1/2 nu^2 eta; returns the norm."""
    params = params or NormParams.default()
    value = jet_norm(S, params, 'beta+').value
    limit = 0.5 * FLOW_CONFIG['nu'] ** 2 * FLOW_CONFIG['eta']
    if value > limit:
        raise FlowSmallnessError(
            f"[S]^beta+ = {value:.3e} exceeds {limit:.3e}; the flow series are not controlled")
    return value


def flow_jet(S: JetHamiltonian, theta0, t: float = 1.0, params: Optional[NormParams] = None,
             check: bool = True, steps: int = None) -> FlowData:
    """Affine flow data of S started at the angle theta0."""
    if check:
        check_smallness(S, params)
    theta0 = np.asarray(theta0, dtype=float)
    n, V = S.space.n, S.space.V
    path = _angle_path(S, theta0, t, steps or FLOW_CONFIG['steps'])
    T = len(path)

    _, _, s_zeta, s_zz = S.at(path)
    M = apply_j(np.swapaxes(s_zz, 1, 2)).swapaxes(1, 2)

    def step_matrix(x):
        return cumulative_simpson(M @ x, t)

    if np.any(s_zz):
        B = _series(cumulative_simpson(M, t), step_matrix, 'B')
    else:
        B = np.zeros((T, V, V))
    a_first = cumulative_simpson(apply_j(s_zeta), t)
    a = _series(a_first, lambda x: cumulative_simpson(np.einsum('tuv,tv->tu', M, x), t), 'a')

    L = np.zeros((T, n, n))
    d_theta = np.zeros((T, n))
    d_zeta = np.zeros((T, n, V))
    d_zz = np.zeros((T, n, V, V))
    for i in range(n):
        di_theta, di_r, di_zeta, di_zz = S.at(path, derivative=i)
        d_theta[:, i] = di_theta
        L[:, i, :] = di_r
        d_zeta[:, i, :] = di_zeta
        d_zz[:, i] = di_zz
    Lam = -_series(cumulative_simpson(-L, t), lambda x: cumulative_simpson(-L @ x, t), 'Lambda')
    return FlowData(S, t, path, a, B, Lam, L, d_theta, d_zeta, d_zz)


def flow_point(S: JetHamiltonian, theta0, r0=None, zeta0=None, t: float = 1.0,
               check: bool = True) -> Point:
    n, V = S.space.n, S.space.V
    r0 = np.zeros(n) if r0 is None else r0
    zeta0 = np.zeros(V) if zeta0 is None else zeta0
    return flow_jet(S, theta0, t, check=check).apply(r0, zeta0)


def symplectic_form(n: int, V: int) -> np.ndarray:
    """[[0, I, 0], [-I, 0, 0], [0, 0, J]] in (theta, r, zeta) order."""
    D = 2 * n + V
    form = np.zeros((D, D))
    form[:n, n:2 * n] = np.eye(n)
    form[n:2 * n, :n] = -np.eye(n)
    form[2 * n:, 2 * n:] = symplectic_unit(V // 2)
    return form


def flow_jacobian(S: JetHamiltonian, theta0, r0=None, zeta0=None, t: float = 1.0,
                  h: float = 1e-5) -> Tuple[np.ndarray, float]:
    """
    Якобиан потока и дефект симплектичности.

    The flow is affine in r0 and zeta0 up to the quadratic alpha, so those
    columns come from the flow data; the angle columns are central
    differences on the mesh the unperturbed start settled on.
    """
    n, V = S.space.n, S.space.V
    check_smallness(S)
    theta0 = np.asarray(theta0, dtype=float)
    r0 = np.zeros(n) if r0 is None else np.asarray(r0, dtype=float)
    zeta0 = np.zeros(V) if zeta0 is None else np.asarray(zeta0, dtype=float)
    data = flow_jet(S, theta0, t, check=False)
    intervals = len(data.theta) - 1
    steps = intervals // 2 if np.any(S.r) else intervals

    D = 2 * n + V
    jac = np.zeros((D, D))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        plus = flow_jet(S, theta0 + e, t, check=False, steps=steps).apply(r0, zeta0)
        minus = flow_jet(S, theta0 - e, t, check=False, steps=steps).apply(r0, zeta0)
        jac[:, i] = (np.concatenate(plus) - np.concatenate(minus)) / (2.0 * h)
    jac[n:2 * n, n:2 * n] = np.eye(n) - data.Lam[-1]
    jac[n:2 * n, 2 * n:] = -data.alpha_gradient(zeta0)[-1]
    jac[2 * n:, 2 * n:] = np.eye(V) + data.B[-1]
    form = symplectic_form(n, V)
    defect = float(np.max(np.abs(jac.T @ form @ jac - form)))
    return jac, defect


def _value(h: Union[FTSeries, JetHamiltonian], point: Point) -> float:
    theta, r, zeta = point
    if isinstance(h, JetHamiltonian):
        return h.evaluate(theta, r, zeta)
    return h.value(theta, r, zeta)


def pullback_grid(h: Union[FTSeries, JetHamiltonian], S: JetHamiltonian,
                  points: Iterable[Point], t: float = 1.0, check: bool = True) -> np.ndarray:
    """h(Phi^t_S(x)) at every sample point."""
    values = []
    for theta, r, zeta in points:
        values.append(_value(h, flow_point(S, theta, r, zeta, t, check=check)))
        check = False
    return np.array(values)


def sample_points(space, count: int, rng: np.random.Generator, radius: float = 0.1) -> list:
    """Random real points: angles on the torus, small r and zeta."""
    pts = []
    for _ in range(count):
        pts.append((rng.uniform(0, 2 * np.pi, space.n), rng.uniform(-radius, radius, space.n),
                    rng.uniform(-radius, radius, space.V)))
    return pts


def increment_bounds(S: JetHamiltonian, theta0, r0, zeta0,
                     params: Optional[NormParams] = None, t: float = 1.0) -> Dict[str, float]:
    """Measured increments of one flow against their a priori bounds."""
    params = params or NormParams.default()
    norm = jet_norm(S, params, 'beta+').value
    flow = flow_jet(S, theta0, t, params)
    r0 = np.asarray(r0, dtype=float)
    zeta0 = np.asarray(zeta0, dtype=float)
    theta, r, zeta = flow.apply(r0, zeta0)
    w = S.space.clusters.var_weights
    mu, eta = params.mu, FLOW_CONFIG['eta']
    z0 = float(np.linalg.norm(w ** params.s * zeta0))
    B_weighted = (w ** (params.s + params.beta))[:, None] * flow.B[-1] * (w ** (-params.s))[None, :]
    return {
        'S_norm': norm,
        'theta': float(np.max(np.abs(theta - np.asarray(theta0, dtype=float)))),
        'theta_bound': norm / mu ** 2,
        'zeta': float(np.linalg.norm(w ** (params.s + params.beta) * (zeta - zeta0))),
        'zeta_bound': (z0 / mu ** 2 + 1.0 / mu) * norm,
        'r': float(np.max(np.abs(r - r0))),
        'r_bound': 4.0 / eta * (1.0 + z0 / mu + float(np.max(np.abs(r0), initial=0.0)) / mu ** 2
                                + z0 ** 2 / mu ** 2) * norm,
        'U_minus_I': float(np.linalg.norm(B_weighted, ord=2)) if B_weighted.size else 0.0,
        'S_matrix': float(np.linalg.norm(np.eye(S.space.n) - flow.Lam[-1], ord=2)),
    }
