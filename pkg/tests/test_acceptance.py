"""End-to-end acceptance gates for the package.

Each test prints a single pass line on success; tolerances and iteration
budgets are frozen and should not be loosened without recalibrating the
presets they exercise.
"""

import dataclasses
import time

import numpy as np

from kcontrol.costs import (CROSS_ENTROPY, SQUARED_ERROR, Batch, CostModel)
from kcontrol.data import (Dataset, sample_support, synthetic_classification,
                           CLASSIFICATION, HESTON_RANGES)
from kcontrol.experiment import (build_datasets, build_system, compute_metrics,
                                 config_from_pairs, kernel_ridge_baseline,
                                 run_experiment, _optimizer_config)
from kcontrol.heston import (HestonParams, black_scholes_call,
                             heston_fft_price, heston_mc_price)
from kcontrol.operators import ControlOperator, OperatorBank, make_operator_bank
from kcontrol.optimize import (ControlSystem, OptimizerConfig, evaluate_cost,
                               evaluate_cost_and_gradient, fit_enhanced,
                               fit_iterative_regression, fit_sgd)
from kcontrol.propagation import (adjoint_solve, adjoint_transitions,
                                  control_jacobian, forward_solve, h_function,
                                  h_values)
from kcontrol.rkhs import KernelSpec, SupportSet


def _random_instance(seed, m=5, T=4, q=2, n=7, d=2):
    """Seeded small system plus a batch, shared by the derivative checks."""
    rng = np.random.default_rng(seed)
    support = SupportSet.from_points(rng.standard_normal((m, d)),
                                     KernelSpec(scale=1.3))
    bank = make_operator_bank(seed + 1, m, q)
    system = ControlSystem(bank=bank, support=support, offset=1.0)
    u = rng.normal(0.0, 0.7, size=(q, T))
    inputs = rng.standard_normal((n, d))
    return system, u, inputs, rng


def _fd_gradient(u, cost, batch, system, step=1e-5):
    grad = np.empty_like(u)
    for i in range(u.shape[0]):
        for t in range(u.shape[1]):
            up, dn = u.copy(), u.copy()
            up[i, t] += step
            dn[i, t] -= step
            grad[i, t] = (evaluate_cost(up, cost, batch, system)
                          - evaluate_cost(dn, cost, batch, system)) / (2 * step)
    return grad


def test_criterion_01_gradient_matches_finite_differences():
    t0 = time.perf_counter()
    checked = 0
    for seed in range(20):
        system, u, inputs, rng = _random_instance(seed)
        for kind in (SQUARED_ERROR, CROSS_ENTROPY):
            targets = (rng.integers(0, 2, inputs.shape[0]).astype(float)
                       if kind == CROSS_ENTROPY
                       else rng.standard_normal(inputs.shape[0]))
            batch = Batch.build(inputs, targets, system.support)
            for cost in (CostModel(terminal_kind=kind),
                         CostModel(terminal_kind=kind,
                                   running_target=lambda t, X: 0.1 * X[:, 0],
                                   control_penalty=0.05)):
                _, grad = evaluate_cost_and_gradient(u, cost, batch, system)
                fd = _fd_gradient(u, cost, batch, system)
                scale = np.maximum(np.abs(fd), 1e-8)
                rel = np.max(np.abs(grad - fd) / scale)
                assert rel < 1e-5, (seed, kind, cost.has_running, rel)
                checked += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    print(f"\ncriterion 1 PASS: adjoint gradient vs finite differences, "
          f"{checked} instances, {elapsed:.1f}s")


def test_criterion_02_jacobian_matches_finite_differences():
    step = 1e-5
    for seed in range(5):
        system, u, inputs, _ = _random_instance(seed)
        T = u.shape[1]
        traj = forward_solve(u, system.bank, system.support, system.offset)
        bundle = adjoint_transitions(u, system.bank, system.support)
        cross = system.support.cross_gram(inputs)
        for t in (1, T // 2, T):
            J = control_jacobian(traj, bundle, system.bank, inputs, t)
            fd = np.empty_like(J)
            for i in range(system.bank.q):
                for s in range(T):
                    up, dn = u.copy(), u.copy()
                    up[i, s] += step
                    dn[i, s] -= step
                    hp = h_values(forward_solve(up, system.bank,
                                                system.support, system.offset),
                                  t, cross)
                    hm = h_values(forward_solve(dn, system.bank,
                                                system.support, system.offset),
                                  t, cross)
                    fd[:, i * T + s] = (hp - hm) / (2 * step)
            scale = np.maximum(np.abs(fd), 1e-8)
            assert np.max(np.abs(J - fd) / scale) < 1e-5
            # later controls cannot influence h_t
            for i in range(system.bank.q):
                assert np.all(J[:, i * T + t:(i + 1) * T] == 0.0)
    print("\ncriterion 2 PASS: control Jacobian vs finite differences, "
          "zero columns for s >= t")


def test_criterion_03_product_form_and_transition_basis():
    for seed in range(8):
        m = 2 + seed % 3  # m <= 4
        rng = np.random.default_rng([100, seed])
        support = SupportSet.from_points(rng.standard_normal((m, 2)),
                                         KernelSpec(scale=1.1))
        bank = make_operator_bank(seed, m, 2)
        T = 5
        u = rng.normal(0.0, 0.6, size=(2, T))
        K = support.gram

        # forward product form: g_T = prod (I + (1/m) K B[u_s]) g_0
        from kcontrol.operators import combination_matrix
        g = np.full(m, 1.0)
        for s in range(T):
            g = (np.eye(m) + K @ combination_matrix(bank, u[:, s]) / m) @ g
        traj = forward_solve(u, bank, support, 1.0)
        assert np.max(np.abs(g - traj.states[T])) < 1e-11

        # backward transition-product form with nonzero sources:
        # g*_s = P_s g_T + sum_{r >= s} (M_s ... M_{r-1}) l_r
        bundle = adjoint_transitions(u, bank, support)
        terminal = rng.standard_normal(m)
        sources = rng.standard_normal((T, m))
        costate = adjoint_solve(bundle, terminal, sources)
        M = bundle.transitions
        for s in range(T + 1):
            ref = terminal.copy()
            for r in range(T - 1, s - 1, -1):
                ref = M[r] @ ref
            for r in range(s, T):
                piece = sources[r].copy()
                for j in range(r - 1, s - 1, -1):
                    piece = M[j] @ piece
                ref = ref + piece
            assert np.max(np.abs(ref - costate.costates[s])) < 1e-9
    print("\ncriterion 3 PASS: forward product form to 1e-11, "
          "transition-basis adjoint with sources to 1e-9")


def _scalar_instance():
    """One support point, unit diagonal operator: E(u) = (1+u0)^2 (1+u1)^2."""
    support = SupportSet.from_points(np.array([[0.0]]), KernelSpec(scale=1.0))
    bank = OperatorBank(ops=(ControlOperator("diagonal", np.array([1.0])),))
    system = ControlSystem(bank=bank, support=support, offset=1.0)
    batch = Batch.build(np.array([[0.0]]), np.array([0.0]), support)
    return system, batch


def test_criterion_04_scalar_cost_is_not_convex():
    system, batch = _scalar_instance()
    cost = CostModel()

    def E(u):
        return evaluate_cost(u.reshape(1, 2), cost, batch, system)

    h = 1e-3
    H = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            ei = np.eye(2)[i] * h
            ej = np.eye(2)[j] * h
            H[i, j] = (E(ei + ej) - E(ei - ej) - E(-ei + ej)
                       + E(-ei - ej)) / (4 * h * h)
    assert np.max(np.abs(H - np.array([[2.0, 4.0], [4.0, 2.0]]))) < 1e-4
    det = np.linalg.det(H)
    assert abs(det - (-12.0)) < 0.01
    print(f"\ncriterion 4 PASS: FD Hessian [[2,4],[4,2]], det {det:.4f} "
          "(negative, so the cost is not convex)")


def test_criterion_05_sine_experiment():
    t0 = time.perf_counter()
    cfg = config_from_pairs({"task": "sine"})
    train, test = build_datasets(cfg)
    system = build_system(cfg, train)
    cost = CostModel()

    opt = _optimizer_config(cfg)
    m2 = fit_iterative_regression(opt, cost, train, system, cfg.horizon)
    rmse2 = compute_metrics(m2.predict(test.inputs), test.targets,
                            "regression")["rmse"]
    assert rmse2 < 2e-2, rmse2

    opt3 = dataclasses.replace(opt, algorithm="enhanced_iterative_regression")
    m3 = fit_enhanced(opt3, cost, train, system, cfg.horizon)
    rmse3 = compute_metrics(m3.predict(test.inputs), test.targets,
                            "regression")["rmse"]
    assert rmse3 < 5e-3, rmse3

    rng = np.random.default_rng(cfg.seed)
    u0 = rng.normal(cfg.init_mu, cfg.init_sigma, size=(cfg.q, cfg.horizon))
    traj0 = forward_solve(u0, system.bank, system.support, system.offset)
    naive = compute_metrics(h_function(traj0, cfg.horizon).at(test.inputs),
                            test.targets, "regression")["rmse"]
    opt1 = dataclasses.replace(opt, algorithm="gradient_descent",
                               learning_rate=cfg.learning_rate,
                               max_iterations=100_000, rel_tol=0.0)
    m1 = fit_sgd(opt1, cost, train, system, cfg.horizon)
    rmse1 = compute_metrics(m1.predict(test.inputs), test.targets,
                            "regression")["rmse"]
    assert rmse1 < 0.3, rmse1
    assert rmse1 < naive
    assert rmse1 < 0.86

    kr = kernel_ridge_baseline(train, test, system.support)["rmse"]
    assert kr < 1e-3, kr

    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    print(f"\ncriterion 5 PASS: sine rmse alg2 {rmse2:.2e} alg3 {rmse3:.2e} "
          f"alg1 {rmse1:.2e} (naive {naive:.2f}) kernel-ridge {kr:.2e}, "
          f"{elapsed:.0f}s")


def test_criterion_06_linear3_experiment():
    t0 = time.perf_counter()
    cfg = config_from_pairs({"task": "linear3"})
    train, test = build_datasets(cfg)
    system = build_system(cfg, train)
    model = fit_iterative_regression(_optimizer_config(cfg), CostModel(),
                                     train, system, cfg.horizon)
    rmse = compute_metrics(model.predict(test.inputs), test.targets,
                           "regression")["rmse"]
    assert test.n == 10_000
    assert rmse < 5e-2, rmse

    costs = [c for _, c in model.full_history]
    assert len(costs) >= 2
    assert all(a >= b for a, b in zip(costs, costs[1:])), costs

    kr = kernel_ridge_baseline(train, test, system.support)["rmse"]
    assert kr < 1e-3, kr

    elapsed = time.perf_counter() - t0
    assert elapsed < 600.0
    print(f"\ncriterion 6 PASS: linear3 rmse {rmse:.2e}, training-cost "
          f"checkpoints non-increasing ({len(costs)} windows), "
          f"kernel-ridge {kr:.2e}, {elapsed:.0f}s")


def test_criterion_07a_pricer_matches_oracles():
    rng = np.random.default_rng(42)
    lo = np.array([v[0] for v in HESTON_RANGES.values()])
    hi = np.array([v[1] for v in HESTON_RANGES.values()])
    names = list(HESTON_RANGES)
    worst = 0.0
    for i in range(10):
        row = lo + (hi - lo) * rng.random(len(lo))
        p = HestonParams(spot=100.0, **dict(zip(names, row)))
        fft = heston_fft_price(p)
        mc, se = heston_mc_price(p, paths=200_000, steps=1000, seed=i)
        worst = max(worst, abs(fft - mc) / se)
        assert abs(fft - mc) <= 3.0 * se, (i, fft, mc, se)

    # vanishing vol-of-vol with v0 = theta collapses to constant volatility
    bs = black_scholes_call(100.0, 100.0, 1.0, 0.02, 0.6)
    flat = HestonParams(strike=100.0, maturity=1.0, rate=0.02, kappa=2.0,
                        theta=0.6, rho=0.0, sigma_v=1e-4, v0=0.6)
    skewed = HestonParams(strike=100.0, maturity=1.0, rate=0.02, kappa=2.0,
                          theta=0.6, rho=-0.5, sigma_v=1e-5, v0=0.6)
    assert abs(heston_fft_price(flat) - bs) < 1e-4
    assert abs(heston_fft_price(skewed) - bs) < 1e-4
    print(f"\ncriterion 7a PASS: FFT within 3 SE of Monte Carlo on 10 tuples "
          f"(worst {worst:.2f} SE), constant-vol limit within 1e-4")


def test_criterion_07b_pricing_regression():
    t0 = time.perf_counter()
    cfg = config_from_pairs({"task": "heston"})
    train, test = build_datasets(cfg)
    system = build_system(cfg, train)

    rng = np.random.default_rng(cfg.seed)
    u0 = rng.normal(cfg.init_mu, cfg.init_sigma, size=(cfg.q, cfg.horizon))
    traj0 = forward_solve(u0, system.bank, system.support, system.offset)
    naive = compute_metrics(h_function(traj0, cfg.horizon).at(test.inputs),
                            test.targets, "regression")["mape"]

    model = fit_iterative_regression(_optimizer_config(cfg), CostModel(),
                                     train, system, cfg.horizon)
    mape = compute_metrics(model.predict(test.inputs), test.targets,
                           "regression")["mape"]
    assert mape < 0.25, mape
    assert naive / mape >= 5.0, (naive, mape)
    elapsed = time.perf_counter() - t0
    assert elapsed < 900.0
    print(f"\ncriterion 7b PASS: pricing mape {mape:.3f}, naive {naive:.3f} "
          f"({naive / mape:.1f}x worse), {elapsed:.0f}s")


def test_criterion_08_classification():
    train = synthetic_classification(5000, 0)
    test = synthetic_classification(1000, 1000)
    support = sample_support(train, 100, 0, KernelSpec(scale=10**0.75))
    bank = make_operator_bank(0, 100, 2)
    system = ControlSystem(bank=bank, support=support)

    opt = OptimizerConfig(algorithm="iterative_regression", ridge=1e-3,
                          batch_size=1000, max_iterations=100,
                          init_std=10.0, seed=0)
    quad = fit_iterative_regression(opt, CostModel(), train, system, 12)
    met = compute_metrics(quad.predict(test.inputs), test.targets,
                          CLASSIFICATION, threshold=0.5)
    assert met["accuracy"] >= 0.9, met
    assert met["f1"] >= 0.85, met

    # the cross-entropy route must run end to end (logistic subproblem;
    # it needs a lighter ridge because its gradients are bounded by one)
    opt_ce = dataclasses.replace(opt, ridge=1e-5, init_std=1.0)
    ce = fit_iterative_regression(opt_ce, CostModel(terminal_kind=CROSS_ENTROPY),
                                  train, system, 12)
    met_ce = compute_metrics(ce.predict(test.inputs), test.targets,
                             CLASSIFICATION, threshold=0.0)
    assert met_ce["accuracy"] > 0.5
    print(f"\ncriterion 8 PASS: quadratic acc {met['accuracy']:.3f} "
          f"f1 {met['f1']:.3f}; cross-entropy route acc "
          f"{met_ce['accuracy']:.3f}")


def test_criterion_09_determinism(tmp_path):
    pairs = {
        "task": "sine",
        "optimizer.max_iterations": "20",
        "output.figures": "false",
        "output.metrics_path": str(tmp_path / "metrics.txt"),
        "output.predictions_path": str(tmp_path / "predictions.csv"),
        "output.model_path": str(tmp_path / "model.json"),
    }
    outputs = []
    for _ in range(2):
        run_experiment(config_from_pairs(pairs))
        outputs.append(((tmp_path / "metrics.txt").read_bytes(),
                        (tmp_path / "predictions.csv").read_bytes()))
    assert outputs[0][0] == outputs[1][0]
    assert outputs[0][1] == outputs[1][1]
    print("\ncriterion 9 PASS: rerun produces byte-identical metrics and "
          "predictions files")


def test_criterion_10_first_order_conditions():
    system, batch = _scalar_instance()
    cost = CostModel()
    train = Dataset(inputs=batch.inputs, targets=batch.targets)
    cfg = OptimizerConfig(algorithm="gradient_descent", learning_rate=0.5,
                          batch_size=1, max_iterations=60_000, rel_tol=0.0,
                          init_mean=0.1, init_std=0.0, seed=0)
    model = fit_sgd(cfg, cost, train, system, T=2)
    value, grad = evaluate_cost_and_gradient(model.control, cost, batch, system)
    sup = float(np.max(np.abs(grad)))
    assert sup < 1e-6, sup
    print(f"\ncriterion 10 PASS: after gradient descent the cost gradient "
          f"sup-norm is {sup:.2e} (cost {value:.2e})")
