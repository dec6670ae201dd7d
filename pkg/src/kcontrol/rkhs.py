"""Gaussian kernel, Gram matrices, and kernel-expansion function evaluation.

Functions produced by the control system are linear combinations of kernel
sections anchored at a fixed support set, plus a constant offset.  Inner
products on the support set use the empirical weighting (1/m) f^T g, so the
1/m factor is applied at evaluation time and stored weights stay raw.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel exp(-||x-y||^2 / (2 s^2)) with width s."""

    scale: float

    def __post_init__(self):
        if not np.isfinite(self.scale) or self.scale <= 0:
            raise ValueError(f"kernel scale must be positive, got {self.scale}")


def kernel_eval(x, y, spec: KernelSpec) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d2 = np.sum((x - y) ** 2)
    return float(np.exp(-d2 / (2.0 * spec.scale**2)))


def gram_matrix(X, Y, spec: KernelSpec) -> np.ndarray:
    """Kernel matrix with entry (i, j) = k(X_i, Y_j).

    When X and Y coincide the result is exactly symmetric with unit diagonal.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.size == 0 or Y.size == 0:
        raise ValueError("empty point list")
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    d2 = cdist(X, Y, "sqeuclidean")
    K = np.exp(-d2 / (2.0 * spec.scale**2))
    if X.shape == Y.shape and np.array_equal(X, Y):
        K = 0.5 * (K + K.T)
        np.fill_diagonal(K, 1.0)
    return K


@dataclass(frozen=True)
class SupportSet:
    """The m support points carrying the kernel expansion, with cached Gram."""

    points: np.ndarray  # (m, d)
    kernel: KernelSpec
    gram: np.ndarray = field(repr=False, default=None)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_points(cls, points, kernel: KernelSpec) -> "SupportSet":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            raise ValueError("empty support set")
        if pts.shape[0] > 1 and pdist(pts).min() <= 1e-12:
            raise ValueError("support points must be pairwise distinct")
        return cls(points=pts, kernel=kernel, gram=gram_matrix(pts, pts, kernel))

    def cross_gram(self, X) -> np.ndarray:
        """m x n matrix of k(xi_j, x_i) against query points X."""
        return gram_matrix(self.points, X, self.kernel)


@dataclass(frozen=True)
class RkhsFunction:
    """h(x) = offset + (1/m) sum_j k(x, xi_j) w_j over a support set."""

    offset: float
    weights: np.ndarray  # (m,)
    support: SupportSet

    def __post_init__(self):
        if self.weights.shape != (self.support.m,):
            raise ValueError("weights length must match support size")

    def at(self, X) -> np.ndarray:
        """Evaluate at a batch of points, shape (n, d) -> (n,)."""
        Kx = gram_matrix(np.atleast_2d(np.asarray(X, dtype=float)),
                         self.support.points, self.support.kernel)
        return self.offset + Kx @ self.weights / self.support.m


def eval_function(f: RkhsFunction, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != f.support.dim:
        raise ValueError(f"expected a point of dimension {f.support.dim}")
    return float(f.at(x[None, :])[0])
