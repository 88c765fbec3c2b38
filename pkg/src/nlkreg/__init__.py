"""nlkreg: data-driven regression of well-posed nonlocal diffusion kernels.

Learns compactly supported, possibly sign-changing radial kernels from
(solution, forcing) pairs produced by high-fidelity solvers, with a
coercivity-based inequality constraint that keeps the learnt operator
invertible. Ships generators for four benchmark data families, a
scikit-learn style estimator facade, and a CLI (``nlkreg``).
"""

__version__ = "0.1.0"

from .bernstein import bernstein_design, bernstein_eval, bernstein_moment
from .constraints import PerturbationBound, constraint_residual
from .dataset import Dataset, read_dataset, write_dataset
from .estimator import FractionalKernelRegressor, NonlocalKernelRegressor
from .fourier import FourierSpec, sample_fourier, spectral_multiplier
from .grid import Grid1D
from .kernels import (KernelModel, ManufacturedKernel, kernel_eval,
                      load_model, manufactured_eval, save_model)
from .operator import (OperatorMatrix, apply_nonlocal, assemble_matrix,
                       coercivity_kappa, operator_lambda_min, solve_nonlocal)
from .regression import (EvalReport, TrainConfig, TrainReport, evaluate,
                         loss_l1, train, xnorm)

__all__ = [
    "Dataset", "EvalReport", "FourierSpec", "FractionalKernelRegressor",
    "Grid1D", "KernelModel", "ManufacturedKernel", "NonlocalKernelRegressor",
    "OperatorMatrix", "PerturbationBound", "TrainConfig", "TrainReport",
    "apply_nonlocal", "assemble_matrix", "bernstein_design", "bernstein_eval",
    "bernstein_moment", "coercivity_kappa", "constraint_residual",
    "evaluate", "kernel_eval", "load_model", "loss_l1", "manufactured_eval",
    "operator_lambda_min", "read_dataset", "sample_fourier", "save_model",
    "solve_nonlocal", "spectral_multiplier", "train", "write_dataset",
    "xnorm",
]
