"""Control operators on the pulled-down m-dimensional space.

Two kinds are provided: a diagonal operator acting as a Hadamard product
b o g (norm ||b||_inf) and a rank-one operator g -> ((1/m) beta^T g) beta
(norm (1/m) sum beta_j^2).  Both are self-adjoint under the (1/m)-weighted
inner product; the adjoint is still exposed separately so a non-self-adjoint
kind can be added without touching the propagation code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DIAGONAL = "diagonal"
RANK_ONE = "rank_one"

_NORM_TOL = 1e-8


@dataclass(frozen=True)
class ControlOperator:
    kind: str
    vector: np.ndarray  # b for diagonal, beta for rank-one

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        object.__setattr__(self, "vector", v)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("operator vector must be a nonempty 1-D array")
        if self.kind == DIAGONAL:
            norm = np.max(np.abs(v))
        elif self.kind == RANK_ONE:
            norm = np.sum(v**2) / v.size
        else:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValueError(f"{self.kind} operator not normalized (norm {norm})")

    @property
    def dim(self) -> int:
        return self.vector.size

    def matrix(self) -> np.ndarray:
        """Dense m x m representation (adjoint transitions need it)."""
        if self.kind == DIAGONAL:
            return np.diag(self.vector)
        return np.outer(self.vector, self.vector) / self.dim


def apply(op: ControlOperator, g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape != (op.dim,):
        raise ValueError(f"dimension mismatch: operator dim {op.dim}, got {g.shape}")
    if op.kind == DIAGONAL:
        return op.vector * g
    return (op.vector @ g / op.dim) * op.vector


def apply_adjoint(op: ControlOperator, g: np.ndarray) -> np.ndarray:
    # Both provided kinds are self-adjoint under <a, b> = (1/m) a^T b.
    return apply(op, g)


@dataclass(frozen=True)
class OperatorBank:
    ops: tuple

    def __post_init__(self):
        if len(self.ops) < 1:
            raise ValueError("operator bank needs at least one operator")
        dims = {op.dim for op in self.ops}
        if len(dims) != 1:
            raise ValueError("all operators must share dimension")

    @property
    def q(self) -> int:
        return len(self.ops)

    @property
    def dim(self) -> int:
        return self.ops[0].dim


def apply_combination(bank: OperatorBank, u_t: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Sum_i u_{i,t} B_i g."""
    u_t = np.asarray(u_t, dtype=float)
    if u_t.shape != (bank.q,):
        raise ValueError(f"control slice must have length q={bank.q}")
    out = np.zeros(bank.dim)
    for ui, op in zip(u_t, bank.ops):
        if ui != 0.0:
            out += ui * apply(op, g)
    return out


def combination_matrix(bank: OperatorBank, u_t: np.ndarray) -> np.ndarray:
    """Dense matrix of sum_i u_{i,t} B_i."""
    u_t = np.asarray(u_t, dtype=float)
    if u_t.shape != (bank.q,):
        raise ValueError(f"control slice must have length q={bank.q}")
    M = np.zeros((bank.dim, bank.dim))
    for ui, op in zip(u_t, bank.ops):
        if ui != 0.0:
            M += ui * op.matrix()
    return M


def make_operator_bank(seed: int, m: int, q: int = 2) -> OperatorBank:
    """Seeded bank: one diagonal and one rank-one operator, unit norm.

    Raw vectors are i.i.d. standard normal, then normalized (sup-norm for
    the diagonal b, empirical L2 for the rank-one beta).
    """
    if m < 1 or q < 1:
        raise ValueError("m and q must be >= 1")
    if q > 2:
        raise ValueError("default construction supports q <= 2; pass explicit operators")
    rng = np.random.default_rng(seed)
    b = rng.standard_normal(m)
    b = b / np.max(np.abs(b))
    ops = [ControlOperator(DIAGONAL, b)]
    if q == 2:
        beta = rng.standard_normal(m)
        beta = beta / np.sqrt(np.sum(beta**2) / m)
        ops.append(ControlOperator(RANK_ONE, beta))
    return OperatorBank(ops=tuple(ops))
