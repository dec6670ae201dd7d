"""Terminal and running cost models and their pulled-down gradients.

The terminal gradient is returned already evaluated at the support points,
i.e. as the vector J_M DF(h_T) that seeds the backward costate recursion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .rkhs import SupportSet, gram_matrix

SQUARED_ERROR = "squared_error"
CROSS_ENTROPY = "cross_entropy"


@dataclass(frozen=True)
class Batch:
    """Training points with targets and their cross-Gram against the support."""

    inputs: np.ndarray      # (n, d)
    targets: np.ndarray     # (n,)
    cross_gram: np.ndarray  # (m, n), entry (j, i) = k(xi_j, x_i)

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets must have the same length")
        if self.inputs.shape[0] < 1:
            raise ValueError("batch must contain at least one sample")
        if self.cross_gram.shape[1] != self.inputs.shape[0]:
            raise ValueError("cross_gram inconsistent with batch size")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @classmethod
    def build(cls, inputs, targets, support: SupportSet) -> "Batch":
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        targets = np.asarray(targets, dtype=float)
        return cls(inputs=inputs, targets=targets,
                   cross_gram=gram_matrix(support.points, inputs, support.kernel))


@dataclass(frozen=True)
class CostModel:
    terminal_kind: str = SQUARED_ERROR
    # f_t as a callable (t, inputs) -> (n,) target values; None disables tracking
    running_target: Optional[Callable] = None
    control_penalty: float = 0.0

    def __post_init__(self):
        if self.terminal_kind not in (SQUARED_ERROR, CROSS_ENTROPY):
            raise ValueError(f"unknown terminal cost kind {self.terminal_kind!r}")
        if self.control_penalty < 0:
            raise ValueError("control penalty must be nonnegative")

    @property
    def has_running(self) -> bool:
        return self.running_target is not None or self.control_penalty > 0


def _sigmoid(h):
    out = np.empty_like(h)
    pos = h >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-h[pos]))
    e = np.exp(h[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _check_binary(y):
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("cross-entropy requires binary {0,1} targets")


def terminal_cost(kind: str, h_values, batch: Batch) -> float:
    h = np.asarray(h_values, dtype=float)
    y = batch.targets
    if h.shape != y.shape:
        raise ValueError("h_values/targets length mismatch")
    if kind == SQUARED_ERROR:
        return float(np.mean((h - y) ** 2))
    if kind == CROSS_ENTROPY:
        _check_binary(y)
        # log(1 + e^h) = max(h, 0) + log1p(e^{-|h|}), stable for |h| > 700
        return float(np.mean(np.maximum(h, 0.0) + np.log1p(np.exp(-np.abs(h))) - y * h))
    raise ValueError(f"unknown terminal cost kind {kind!r}")


def terminal_residual(kind: str, h_values, batch: Batch) -> np.ndarray:
    """Pointwise derivative dF/dh(x_i) scaled by n (the residual-like term)."""
    h = np.asarray(h_values, dtype=float)
    y = batch.targets
    if kind == SQUARED_ERROR:
        return 2.0 * (h - y)
    if kind == CROSS_ENTROPY:
        _check_binary(y)
        return _sigmoid(h) - y
    raise ValueError(f"unknown terminal cost kind {kind!r}")


def terminal_gradient_at_support(kind: str, h_values, batch: Batch) -> np.ndarray:
    """g*_T = J_M DF(h_T) = (1/n) K_{xi,x} (dF/dh per sample)."""
    return batch.cross_gram @ terminal_residual(kind, h_values, batch) / batch.n


def running_cost_and_grads(model: CostModel, t: int, h_values, u_t, batch: Batch):
    """Value, costate source at the support, and control gradient at time t.

    The source is the l_t fed directly to the backward recursion
    g*_t = M_t g*_{t+1} + l_t.
    """
    h = np.asarray(h_values, dtype=float)
    u_t = np.asarray(u_t, dtype=float)
    m = batch.cross_gram.shape[0]
    value = 0.0
    source = np.zeros(m)
    control_grad = np.zeros_like(u_t)
    if model.running_target is not None:
        ft = np.asarray(model.running_target(t, batch.inputs), dtype=float)
        if ft.shape != h.shape:
            raise ValueError("running target values have wrong length")
        resid = h - ft
        value += float(np.mean(resid**2))
        source = 2.0 * batch.cross_gram @ resid / batch.n
    if model.control_penalty > 0:
        value += model.control_penalty * float(u_t @ u_t)
        control_grad = 2.0 * model.control_penalty * u_t
    return value, source, control_grad
