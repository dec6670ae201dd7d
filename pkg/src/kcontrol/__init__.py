"""Function learning with discrete-time bilinear control systems on an RKHS.

The approximant is the terminal state of a controlled difference equation on
a reproducing-kernel Hilbert space; fitting finds the control matrix by
adjoint-based gradient descent or iterative regression on the control-
linearized model.
"""

from .costs import Batch, CostModel
from .heston import FftGrid, HestonParams, heston_fft_price, heston_mc_price
from .operators import ControlOperator, OperatorBank, make_operator_bank
from .optimize import (ControlSystem, FittedModel, LinearizedModel,
                       OptimizerConfig, fit_enhanced, fit_iterative_regression,
                       fit_sgd, predict)
from .propagation import (AdjointBundle, Trajectory, adjoint_solve,
                          adjoint_transitions, control_jacobian, cost_gradient,
                          forward_solve, h_function)
from .rkhs import KernelSpec, RkhsFunction, SupportSet, gram_matrix, kernel_eval

__all__ = [
    "AdjointBundle", "Batch", "ControlOperator", "ControlSystem", "CostModel",
    "FftGrid", "FittedModel", "HestonParams", "KernelSpec", "LinearizedModel",
    "OperatorBank", "OptimizerConfig", "RkhsFunction", "SupportSet",
    "Trajectory", "adjoint_solve", "adjoint_transitions", "control_jacobian",
    "cost_gradient", "fit_enhanced", "fit_iterative_regression", "fit_sgd",
    "forward_solve", "gram_matrix", "h_function", "heston_fft_price",
    "heston_mc_price", "kernel_eval", "make_operator_bank", "predict",
]
__version__ = "0.1.0"
