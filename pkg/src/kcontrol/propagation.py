"""Forward and adjoint solves for the pulled-down bilinear control system.

Forward recursion:   g_{t+1} = g_t + (1/m) K B[u_t] g_t,   g_0 = offset * 1.
Backward recursion:  g*_s = M_s g*_{s+1} + l_s,  M_s = I + (1/m) K B*[u_s].

Cached right-to-left products of the transition matrices let one backward
solve serve many terminal conditions, which is what makes the control
Jacobian cheap across query points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import OperatorBank, apply, apply_combination, combination_matrix
from .rkhs import RkhsFunction, SupportSet, gram_matrix

STATE_SUP_LIMIT = 1e12


class DivergenceError(RuntimeError):
    """The forward state blew up under the current control."""


def _check_control(control, bank: OperatorBank) -> np.ndarray:
    u = np.asarray(control, dtype=float)
    if u.ndim != 2 or u.shape[0] != bank.q or u.shape[1] < 1:
        raise ValueError(f"control must have shape (q={bank.q}, T>=1), got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("control contains non-finite entries")
    return u


@dataclass(frozen=True)
class Trajectory:
    """States g_0..g_T plus the per-step driven terms B[u_t] g_t."""

    states: np.ndarray   # (T+1, m)
    driven: np.ndarray   # (T, m)
    control: np.ndarray  # (q, T)
    support: SupportSet
    offset: float

    @property
    def horizon(self) -> int:
        return self.driven.shape[0]


def forward_solve(control, bank: OperatorBank, support: SupportSet,
                  offset: float) -> Trajectory:
    u = _check_control(control, bank)
    if bank.dim != support.m:
        raise ValueError("operator dimension must match support size")
    if not np.isfinite(offset):
        raise ValueError("offset must be finite")
    T = u.shape[1]
    m = support.m
    K = support.gram
    states = np.empty((T + 1, m))
    driven = np.empty((T, m))
    g = np.full(m, float(offset))
    states[0] = g
    for t in range(T):
        d = apply_combination(bank, u[:, t], g)
        driven[t] = d
        g = g + K @ d / m
        if not np.all(np.isfinite(g)) or np.max(np.abs(g)) > STATE_SUP_LIMIT:
            raise DivergenceError(f"state diverged at step {t + 1}")
        states[t + 1] = g
    return Trajectory(states=states, driven=driven, control=u,
                      support=support, offset=float(offset))


def h_function(traj: Trajectory, t: int) -> RkhsFunction:
    """The RKHS function h_t, with weights w = sum_{s<t} B[u_s] g_s."""
    if not 0 <= t <= traj.horizon:
        raise ValueError(f"time index {t} outside [0, {traj.horizon}]")
    w = traj.driven[:t].sum(axis=0) if t > 0 else np.zeros(traj.support.m)
    return RkhsFunction(offset=traj.offset, weights=w, support=traj.support)


def h_values(traj: Trajectory, t: int, cross_gram: np.ndarray) -> np.ndarray:
    """Evaluate h_t at batch points given their cross-Gram K_{xi,x} (m, n)."""
    if not 0 <= t <= traj.horizon:
        raise ValueError(f"time index {t} outside [0, {traj.horizon}]")
    w = traj.driven[:t].sum(axis=0) if t > 0 else np.zeros(traj.support.m)
    return traj.offset + w @ cross_gram / traj.support.m


@dataclass
class AdjointBundle:
    """Backward transitions M_s and cached terminal products P_s = M_s...M_{T-1}."""

    transitions: np.ndarray  # (T, m, m)
    _products: np.ndarray = field(default=None, repr=False)

    @property
    def horizon(self) -> int:
        return self.transitions.shape[0]

    @property
    def terminal_products(self) -> np.ndarray:
        """(T+1, m, m) stack with P_T = I, computed right-to-left on demand."""
        if self._products is None:
            T, m, _ = self.transitions.shape
            P = np.empty((T + 1, m, m))
            P[T] = np.eye(m)
            for s in range(T - 1, -1, -1):
                P[s] = self.transitions[s] @ P[s + 1]
            self._products = P
        return self._products


@dataclass(frozen=True)
class CostateTrajectory:
    costates: np.ndarray  # (T+1, m)


def adjoint_transitions(control, bank: OperatorBank,
                        support: SupportSet) -> AdjointBundle:
    u = _check_control(control, bank)
    if bank.dim != support.m:
        raise ValueError("operator dimension must match support size")
    T = u.shape[1]
    m = support.m
    K = support.gram
    eye = np.eye(m)
    trans = np.empty((T, m, m))
    for s in range(T):
        # Both operator kinds are self-adjoint, so B*[u_s] = B[u_s].
        trans[s] = eye + K @ combination_matrix(bank, u[:, s]) / m
    return AdjointBundle(transitions=trans)


def adjoint_solve(bundle: AdjointBundle, terminal, sources=None) -> CostateTrajectory:
    T = bundle.horizon
    m = bundle.transitions.shape[1]
    gT = np.asarray(terminal, dtype=float)
    if gT.shape != (m,):
        raise ValueError(f"terminal vector must have length {m}")
    if sources is not None:
        sources = np.asarray(sources, dtype=float)
        if sources.shape != (T, m):
            raise ValueError(f"sources must have shape ({T}, {m})")
    costates = np.empty((T + 1, m))
    costates[T] = gT
    for s in range(T - 1, -1, -1):
        g = bundle.transitions[s] @ costates[s + 1]
        if sources is not None:
            g = g + sources[s]
        costates[s] = g
    return CostateTrajectory(costates=costates)


def cost_gradient(traj: Trajectory, costate: CostateTrajectory,
                  bank: OperatorBank, running_control_grad=None) -> np.ndarray:
    """Gradient entry (i, t) = (1/m) g*_{t+1}^T B_i g_t (+ running control term)."""
    T = traj.horizon
    m = traj.support.m
    if costate.costates.shape[0] != T + 1:
        raise ValueError("trajectory and costate horizons differ")
    grad = np.empty((bank.q, T))
    for t in range(T):
        gs = costate.costates[t + 1]
        for i, op in enumerate(bank.ops):
            grad[i, t] = gs @ apply(op, traj.states[t]) / m
    if running_control_grad is not None:
        rcg = np.asarray(running_control_grad, dtype=float)
        if rcg.shape != grad.shape:
            raise ValueError("running control gradient has wrong shape")
        grad = grad + rcg
    return grad


def _horizon_products(bundle: AdjointBundle, t: int) -> np.ndarray:
    """Products Q_s = M_s ... M_{t-1} for s = 0..t (Q_t = I)."""
    if t == bundle.horizon:
        return bundle.terminal_products
    m = bundle.transitions.shape[1]
    Q = np.empty((t + 1, m, m))
    Q[t] = np.eye(m)
    for s in range(t - 1, -1, -1):
        Q[s] = bundle.transitions[s] @ Q[s + 1]
    return Q


def control_jacobian(traj: Trajectory, bundle: AdjointBundle, bank: OperatorBank,
                     query_points, t: int, cross_gram=None) -> np.ndarray:
    """Derivatives of h_t at query points w.r.t. every control entry.

    Returns an (n, q*T) matrix; column i*T + s holds d h_t(x) / d u_{i,s}.
    Columns with s >= t are exactly zero (h_t cannot depend on later controls).
    The source-free backward solve with terminal kernel section kappa(x) is
    shared across queries through the cached transition products.
    """
    T = traj.horizon
    m = traj.support.m
    if not 0 <= t <= T:
        raise ValueError(f"time index {t} outside [0, {T}]")
    if cross_gram is None:
        Kxq = gram_matrix(np.atleast_2d(np.asarray(query_points, dtype=float)),
                          traj.support.points, traj.support.kernel)
    else:
        Kxq = np.asarray(cross_gram, dtype=float).T  # stored as (m, n)
    n = Kxq.shape[0]
    J = np.zeros((n, bank.q * T))
    if t == 0:
        return J
    Q = _horizon_products(bundle, t)
    # V columns are Q_{s+1}^T B_i g_s; each query row is (1/m) kappa(x)^T V.
    V = np.zeros((m, bank.q * T))
    for s in range(t):
        QT = Q[s + 1].T
        for i, op in enumerate(bank.ops):
            V[:, i * T + s] = QT @ apply(op, traj.states[s])
    J[:, :] = Kxq @ V / m
    return J
