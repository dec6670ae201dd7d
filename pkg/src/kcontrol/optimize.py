"""Control-fitting algorithms: gradient descent and the two iterative
regressions, plus the regularized subproblem solvers they rely on.

All three start from a seeded Gaussian draw of the control matrix and
resample a minibatch every iteration (the full training set is used verbatim
when the configured batch size covers it, which keeps full-batch runs
deterministic step to step).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .costs import (CROSS_ENTROPY, SQUARED_ERROR, Batch, CostModel,
                    _sigmoid, running_cost_and_grads, terminal_cost,
                    terminal_gradient_at_support)
from .operators import OperatorBank
from .propagation import (AdjointBundle, DivergenceError, Trajectory,
                          adjoint_solve, adjoint_transitions, control_jacobian,
                          cost_gradient, forward_solve, h_function, h_values)
from .rkhs import SupportSet, gram_matrix

GRADIENT_DESCENT = "gradient_descent"
ITERATIVE_REGRESSION = "iterative_regression"
ENHANCED_ITERATIVE_REGRESSION = "enhanced_iterative_regression"

LSTSQ_RCOND = 1e-10       # singular-value cutoff for minimum-norm solves
FULL_COST_EVERY = 100     # iterations between full-train cost checkpoints


class FittingError(RuntimeError):
    def __init__(self, iteration: int, message: str):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True)
class ControlSystem:
    """Fixed ingredients of the forward system: operators, support, h_0 level."""

    bank: OperatorBank
    support: SupportSet
    offset: float = 1.0


@dataclass
class OptimizerConfig:
    algorithm: str = ITERATIVE_REGRESSION
    learning_rate: float = 0.1      # gradient descent only
    ridge: float = 1e-3             # subproblem regularizer (algorithms 2/3)
    batch_size: int = 300
    max_iterations: int = 100
    rel_tol: float = 1e-8
    init_mean: float = 0.0
    init_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.algorithm == GRADIENT_DESCENT and self.learning_rate <= 0:
            raise ValueError("learning rate must be positive for gradient descent")
        if self.ridge < 0 or self.rel_tol < 0:
            raise ValueError("ridge and rel_tol must be nonnegative")
        if self.batch_size < 1 or self.max_iterations < 0:
            raise ValueError("batch_size must be >= 1 and max_iterations >= 0")


@dataclass
class FittedModel:
    control: np.ndarray
    system: ControlSystem
    trajectory: Trajectory
    history: list = field(default_factory=list)       # per-iteration minibatch cost
    full_history: list = field(default_factory=list)  # (iteration, full-train cost)
    seed: Optional[int] = None

    @property
    def bank(self) -> OperatorBank:
        return self.system.bank

    @property
    def support(self) -> SupportSet:
        return self.system.support

    def predict(self, X) -> np.ndarray:
        return h_function(self.trajectory, self.trajectory.horizon).at(X)


@dataclass
class LinearizedModel:
    """Algorithm-3 output: base prediction plus the final linear correction."""

    base: FittedModel
    beta: np.ndarray          # (q, T)
    adjoint: AdjointBundle

    def predict(self, X) -> np.ndarray:
        traj = self.base.trajectory
        base_vals = self.base.predict(X)
        J = control_jacobian(traj, self.adjoint, self.base.bank,
                             np.atleast_2d(np.asarray(X, dtype=float)),
                             traj.horizon)
        return base_vals + J @ self.beta.ravel()


def predict(model, x):
    """Evaluate a fitted or linearized model at one point or a batch."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(model.predict(x[None, :])[0])
    return model.predict(x)


def evaluate_cost(control, cost: CostModel, batch: Batch,
                  system: ControlSystem) -> float:
    """Total (terminal + running) cost of a control on a batch."""
    traj = forward_solve(control, system.bank, system.support, system.offset)
    return _cost_from_trajectory(traj, cost, batch)


def _cost_from_trajectory(traj: Trajectory, cost: CostModel, batch: Batch) -> float:
    T = traj.horizon
    value = terminal_cost(cost.terminal_kind,
                          h_values(traj, T, batch.cross_gram), batch)
    if cost.has_running:
        for t in range(T):
            v, _, _ = running_cost_and_grads(
                cost, t, h_values(traj, t, batch.cross_gram),
                traj.control[:, t], batch)
            value += v
    return value


def evaluate_cost_and_gradient(control, cost: CostModel, batch: Batch,
                               system: ControlSystem):
    """One forward/backward sweep: returns (cost value, q x T gradient)."""
    traj = forward_solve(control, system.bank, system.support, system.offset)
    T = traj.horizon
    hT = h_values(traj, T, batch.cross_gram)
    value = terminal_cost(cost.terminal_kind, hT, batch)
    terminal = terminal_gradient_at_support(cost.terminal_kind, hT, batch)
    sources = None
    rcg = None
    if cost.has_running:
        sources = np.zeros((T, system.support.m))
        rcg = np.zeros_like(traj.control)
        for t in range(T):
            v, src, cg = running_cost_and_grads(
                cost, t, h_values(traj, t, batch.cross_gram),
                traj.control[:, t], batch)
            value += v
            sources[t] = src
            rcg[:, t] = cg
    bundle = adjoint_transitions(traj.control, system.bank, system.support)
    costate = adjoint_solve(bundle, terminal, sources)
    grad = cost_gradient(traj, costate, system.bank, rcg)
    return value, grad


def solve_ridge_subproblem(J, residual, lam: float) -> np.ndarray:
    """Minimize (1/n) ||residual + J beta||^2 + lam ||beta||^2.

    With lam = 0 and a rank-deficient J the minimum-norm minimizer is
    returned (singular values below 1e-10 of the largest are dropped).
    """
    J = np.asarray(J, dtype=float)
    r = np.asarray(residual, dtype=float)
    if not (np.all(np.isfinite(J)) and np.all(np.isfinite(r))):
        raise ValueError("non-finite entries in subproblem")
    n = J.shape[0]
    if lam > 0:
        A = J.T @ J / n + lam * np.eye(J.shape[1])
        return np.linalg.solve(A, -J.T @ r / n)
    beta, *_ = np.linalg.lstsq(J, -r, rcond=LSTSQ_RCOND)
    return beta


def solve_logistic_subproblem(J, offsets, labels, lam: float,
                              grad_tol: float = 1e-8,
                              max_newton: int = 50) -> np.ndarray:
    """Ridge-regularized logistic fit of labels on a_i + J_i beta.

    Minimizes (1/n) sum[log(1 + e^{a+Jb}) - y (a+Jb)] + lam ||b||^2 with
    damped Newton steps; converges when the gradient sup-norm drops below
    grad_tol or the step budget runs out.
    """
    J = np.asarray(J, dtype=float)
    a = np.asarray(offsets, dtype=float)
    y = np.asarray(labels, dtype=float)
    if not (np.all(np.isfinite(J)) and np.all(np.isfinite(a))):
        raise ValueError("non-finite entries in subproblem")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("labels must be binary")
    n, p = J.shape

    def objective(b):
        z = a + J @ b
        return (float(np.mean(np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
                              - y * z)) + lam * float(b @ b))

    beta = np.zeros(p)
    obj = objective(beta)
    for _ in range(max_newton):
        z = a + J @ beta
        s = _sigmoid(z)
        grad = J.T @ (s - y) / n + 2.0 * lam * beta
        if np.max(np.abs(grad)) < grad_tol:
            break
        w = s * (1.0 - s)
        H = J.T @ (w[:, None] * J) / n + 2.0 * lam * np.eye(p)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=LSTSQ_RCOND)[0]
        # halve until the objective decreases (or the step becomes negligible)
        scale = 1.0
        while scale > 1e-12:
            cand = beta - scale * step
            cand_obj = objective(cand)
            if cand_obj <= obj:
                beta, obj = cand, cand_obj
                break
            scale *= 0.5
        else:
            break
    return beta


def _init_control(config: OptimizerConfig, q: int, T: int, rng) -> np.ndarray:
    return rng.normal(config.init_mean, config.init_std, size=(q, T))


def _sample_batch(rng, dataset, cross_full, batch_size: int) -> Batch:
    n = dataset.inputs.shape[0]
    if batch_size >= n:
        return Batch(inputs=dataset.inputs, targets=dataset.targets,
                     cross_gram=cross_full)
    idx = rng.integers(0, n, size=batch_size)
    return Batch(inputs=dataset.inputs[idx], targets=dataset.targets[idx],
                 cross_gram=cross_full[:, idx])


class _StopRule:
    """Stop when consecutive full-train cost checkpoints change by < rel_tol."""

    def __init__(self, rel_tol: float):
        self.rel_tol = rel_tol
        self.last = None

    def update(self, value: float) -> bool:
        stop = False
        if self.last is not None and self.rel_tol > 0:
            denom = max(abs(self.last), 1e-300)
            stop = abs(value - self.last) / denom < self.rel_tol
        self.last = value
        return stop


def _full_batch(dataset, support: SupportSet):
    inputs = np.atleast_2d(np.asarray(dataset.inputs, dtype=float))
    cross = gram_matrix(support.points, inputs, support.kernel)
    return Batch(inputs=inputs, targets=np.asarray(dataset.targets, dtype=float),
                 cross_gram=cross), cross


def fit_sgd(config: OptimizerConfig, cost: CostModel, train,
            system: ControlSystem, T: int) -> FittedModel:
    """Algorithm: plain stochastic gradient descent on the controls."""
    if config.algorithm != GRADIENT_DESCENT:
        raise ValueError("config.algorithm must be gradient_descent")
    rng = np.random.default_rng(config.seed)
    u = _init_control(config, system.bank.q, T, rng)
    train_batch, cross_full = _full_batch(train, system.support)
    history, full_history = [], []
    stop = _StopRule(config.rel_tol)
    for it in range(config.max_iterations):
        batch = _sample_batch(rng, train_batch, cross_full, config.batch_size)
        try:
            value, grad = evaluate_cost_and_gradient(u, cost, batch, system)
        except DivergenceError as exc:
            raise FittingError(it, str(exc)) from exc
        if not np.all(np.isfinite(grad)):
            raise FittingError(it, "non-finite gradient")
        history.append(value)
        u = u - config.learning_rate * grad
        if it % FULL_COST_EVERY == 0:
            full = _cost_from_trajectory(
                forward_solve(u, system.bank, system.support, system.offset),
                cost, train_batch)
            full_history.append((it, full))
            if stop.update(full):
                break
    traj = forward_solve(u, system.bank, system.support, system.offset)
    return FittedModel(control=u, system=system, trajectory=traj,
                       history=history, full_history=full_history,
                       seed=config.seed)


def _regression_step(traj: Trajectory, bundle: AdjointBundle, cost: CostModel,
                     batch: Batch, system: ControlSystem, lam: float) -> np.ndarray:
    """One Gauss-Newton-style update beta for the linearized cost."""
    T = traj.horizon
    hT = h_values(traj, T, batch.cross_gram)
    JT = control_jacobian(traj, bundle, system.bank, batch.inputs, T,
                          cross_gram=batch.cross_gram)
    if cost.terminal_kind == CROSS_ENTROPY:
        if cost.has_running:
            raise NotImplementedError(
                "running costs are not supported with the cross-entropy subproblem")
        return solve_logistic_subproblem(JT, hT, batch.targets, lam)
    if not cost.has_running:
        return solve_ridge_subproblem(JT, hT - batch.targets, lam)
    # General quadratic assembly: terminal block, tracking blocks, control
    # penalty lam_u ||u_t + beta_t||^2, and the algorithm ridge lam.
    n = batch.n
    p = JT.shape[1]
    A = JT.T @ JT / n + lam * np.eye(p)
    rhs = -JT.T @ (hT - batch.targets) / n
    if cost.running_target is not None:
        for t in range(T):
            Jt = control_jacobian(traj, bundle, system.bank, batch.inputs, t,
                                  cross_gram=batch.cross_gram)
            rt = h_values(traj, t, batch.cross_gram) - np.asarray(
                cost.running_target(t, batch.inputs), dtype=float)
            A += Jt.T @ Jt / n
            rhs -= Jt.T @ rt / n
    if cost.control_penalty > 0:
        A += cost.control_penalty * np.eye(p)
        rhs -= cost.control_penalty * traj.control.ravel()
    try:
        return np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(A, rhs, rcond=LSTSQ_RCOND)[0]


def fit_iterative_regression(config: OptimizerConfig, cost: CostModel, train,
                             system: ControlSystem, T: int) -> FittedModel:
    """Algorithm: repeated ridge regression on the control-linearized cost."""
    if config.algorithm != ITERATIVE_REGRESSION:
        raise ValueError("config.algorithm must be iterative_regression")
    rng = np.random.default_rng(config.seed)
    u = _init_control(config, system.bank.q, T, rng)
    train_batch, cross_full = _full_batch(train, system.support)
    history, full_history = [], []
    stop = _StopRule(config.rel_tol)
    for it in range(config.max_iterations):
        batch = _sample_batch(rng, train_batch, cross_full, config.batch_size)
        try:
            traj = forward_solve(u, system.bank, system.support, system.offset)
        except DivergenceError as exc:
            raise FittingError(it, str(exc)) from exc
        history.append(_cost_from_trajectory(traj, cost, batch))
        bundle = adjoint_transitions(u, system.bank, system.support)
        beta = _regression_step(traj, bundle, cost, batch, system, config.ridge)
        if not np.all(np.isfinite(beta)):
            raise FittingError(it, "non-finite regression update")
        u = u + beta.reshape(u.shape)
        if it % FULL_COST_EVERY == 0:
            full = _cost_from_trajectory(
                forward_solve(u, system.bank, system.support, system.offset),
                cost, train_batch)
            full_history.append((it, full))
            if stop.update(full):
                break
    traj = forward_solve(u, system.bank, system.support, system.offset)
    return FittedModel(control=u, system=system, trajectory=traj,
                       history=history, full_history=full_history,
                       seed=config.seed)


def fit_enhanced(config: OptimizerConfig, cost: CostModel, train,
                 system: ControlSystem, T: int) -> LinearizedModel:
    """Iterative regression followed by one unregularized correction step.

    The returned model predicts with the base solution plus the final beta
    applied through the control Jacobian; the control itself is not updated.
    """
    if config.algorithm != ENHANCED_ITERATIVE_REGRESSION:
        raise ValueError("config.algorithm must be enhanced_iterative_regression")
    inner = dataclasses.replace(config, algorithm=ITERATIVE_REGRESSION)
    base = fit_iterative_regression(inner, cost, train, system, T)
    # fresh minibatch for the final step, from a stream disjoint to the fit's
    rng = np.random.default_rng([config.seed, 1])
    train_batch, cross_full = _full_batch(train, system.support)
    batch = _sample_batch(rng, train_batch, cross_full, config.batch_size)
    bundle = adjoint_transitions(base.control, system.bank, system.support)
    beta = _regression_step(base.trajectory, bundle, cost, batch, system, 0.0)
    return LinearizedModel(base=base, beta=beta.reshape(base.control.shape),
                           adjoint=bundle)
