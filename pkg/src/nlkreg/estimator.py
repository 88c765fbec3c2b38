"""Scikit-learn style estimators wrapping the two-stage kernel regression.

``fit(U, F)`` consumes paired sample matrices (solutions as X, forcings as
y, one row per sample in the dataset column layout of the grid) and learns
the kernel; ``predict(U)`` applies the learnt operator forward; ``solve(F)``
inverts it. The estimators compose with sklearn tooling through
``get_params``/``set_params``/``clone``.
"""

import numpy as np
from sklearn.base import BaseEstimator

from .dataset import (LAYOUT_INTERVAL, LAYOUT_PERIODIC_EVAL, Dataset)
from .grid import DIRICHLET, PERIODIC, Grid1D, periodic_extend
from .kernels import VARIANT_FRACTIONAL, VARIANT_STANDARD
from .operator import apply_nonlocal, solve_nonlocal
from .regression import TrainConfig, evaluate, train
from .validation import check_sample_pair


class NonlocalKernelRegressor(BaseEstimator):
    """Learns a compactly supported, possibly sign-changing diffusion kernel.

    Parameters mirror the training configuration; ``grid`` defaults to the
    periodic unit interval with one interval per data column minus one
    (columns are the n+1 evaluation nodes, the last duplicating the first).

    Attributes ending in ``_`` are set by ``fit``: ``model_`` (the kernel),
    ``C_``, ``D_``, ``kappa_`` and ``report_``.
    """

    def __init__(self, order=2, delta=0.5, grid=None, stage="both",
                 batch_size=100, lr=5e-3, stage1_max_epochs=500,
                 stagnation_rtol=1e-4, stagnation_window=10,
                 al_epochs=10, al_step_max=100, x_points=None,
                 random_state=0):
        self.order = order
        self.delta = delta
        self.grid = grid
        self.stage = stage
        self.batch_size = batch_size
        self.lr = lr
        self.stage1_max_epochs = stage1_max_epochs
        self.stagnation_rtol = stagnation_rtol
        self.stagnation_window = stagnation_window
        self.al_epochs = al_epochs
        self.al_step_max = al_step_max
        self.x_points = x_points
        self.random_state = random_state

    def _resolved_grid(self, n_columns):
        if self.grid is not None:
            return self.grid
        return Grid1D(a=0.0, b=1.0, n=n_columns - 1, bc=PERIODIC)

    def _layout(self, grid):
        return LAYOUT_INTERVAL if grid.bc == DIRICHLET else LAYOUT_PERIODIC_EVAL

    def _config(self):
        return TrainConfig(
            order=self.order, delta=self.delta, variant=self._variant,
            stage=self.stage, batch_size=self.batch_size, lr=self.lr,
            stage1_max_epochs=self.stage1_max_epochs,
            stagnation_rtol=self.stagnation_rtol,
            stagnation_window=self.stagnation_window,
            al_epochs=self.al_epochs, al_step_max=self.al_step_max,
            x_points=self.x_points, seed=self.random_state)

    _variant = VARIANT_STANDARD

    def _dataset(self, U, F):
        U, F = check_sample_pair(U, F)
        grid = self._resolved_grid(U.shape[1])
        meta = {"kind": "in_memory", "layout": self._layout(grid)}
        return Dataset(u=U, f=F, grid=grid, meta=meta)

    def fit(self, U, F):
        ds = self._dataset(U, F)
        model, report = train(ds, self._config())
        self.model_ = model
        self.C_ = np.array(model.C)
        self.D_ = np.array(model.D)
        self.alpha_ = model.alpha
        self.kappa_ = report.kappa
        self.report_ = report
        self.grid_ = ds.grid
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("estimator is not fitted; call fit(U, F) first")

    def predict(self, U):
        """Forward action of the learnt operator on each sample row."""
        self._check_fitted()
        U = np.asarray(U, dtype=float)
        grid = self.grid_
        single = U.ndim == 1
        U = np.atleast_2d(U)
        out = np.empty_like(U)
        for i, row in enumerate(U):
            if grid.bc == PERIODIC:
                v = apply_nonlocal(self.model_, grid, row[:grid.n])
                out[i] = periodic_extend(v)
            else:
                v = apply_nonlocal(self.model_, grid, row[1:-1], q=0.0)
                out[i, 0] = out[i, -1] = 0.0
                out[i, 1:-1] = v
        return out[0] if single else out

    def solve(self, F, q=None):
        """Invert the learnt operator for each forcing row."""
        self._check_fitted()
        F = np.asarray(F, dtype=float)
        grid = self.grid_
        single = F.ndim == 1
        F = np.atleast_2d(F)
        out = np.empty_like(F)
        for i, row in enumerate(F):
            if grid.bc == PERIODIC:
                u = solve_nonlocal(self.model_, grid, row[:grid.n])
                out[i] = periodic_extend(u)
            else:
                u = solve_nonlocal(self.model_, grid, row[1:-1],
                                   q=0.0 if q is None else q)
                out[i, 0] = out[i, -1] = 0.0
                out[i, 1:-1] = u
        return out[0] if single else out

    def score(self, U, F):
        """Negative forward validation loss (higher is better)."""
        self._check_fitted()
        report = evaluate(self.model_, self._dataset(U, F),
                          x_points=self.x_points)
        return -report.forward_loss


class FractionalKernelRegressor(NonlocalKernelRegressor):
    """Single-stage fit of the singularity-scaled kernel (C, alpha)."""

    _variant = VARIANT_FRACTIONAL

    def __init__(self, order=0, delta=2.0, grid=None, batch_size=100,
                 lr=5e-3, stage1_max_epochs=500, x_points=None,
                 random_state=0):
        super().__init__(order=order, delta=delta, grid=grid, stage="1",
                         batch_size=batch_size, lr=lr,
                         stage1_max_epochs=stage1_max_epochs,
                         x_points=x_points, random_state=random_state)

    def _resolved_grid(self, n_columns):
        if self.grid is not None:
            return self.grid
        return Grid1D(a=-1.0, b=1.0, n=n_columns - 1, bc=DIRICHLET,
                      delta=self.delta)
