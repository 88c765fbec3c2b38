import numpy as np
import pytest

from nlkreg.constraints import (PerturbationBound, constraint_residual,
                                interior_closed_form,
                                perturbation_bound_value)
from nlkreg.grid import Grid1D
from nlkreg.kernels import KernelModel
from nlkreg.operator import assemble_matrix, coercivity_kappa, operator_lambda_min
from nlkreg.regression import xnorm


@pytest.fixture(scope="module")
def grid():
    return Grid1D(0.0, 1.0, 100)


class TestXnorm:
    def test_zeros(self):
        assert xnorm(np.zeros(7)) == 0.0

    def test_constant(self):
        assert xnorm(np.full(13, -2.5)) == pytest.approx(2.5)

    def test_plus_minus_one(self):
        assert xnorm(np.array([1.0, -1.0])) == pytest.approx(1.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            xnorm(np.array([]))


class TestPerturbationBound:
    def test_zero_correction(self, grid):
        assert perturbation_bound_value(np.zeros(4), 0.5, 3, grid) == 0.0

    def test_constant_basis_closed_form(self, grid):
        # order 0, D = [d0]: profile d0/delta^3 on [0, delta]. Half the L1
        # norm over the line and half the horizon integral each give
        # d0/delta^2, so N = 2 d0 / delta^2.
        delta, d0 = 0.5, 0.7
        bound = PerturbationBound(delta, 0, grid)
        val, grad = bound.value_grad(np.array([d0]))
        assert val == pytest.approx(2.0 * d0 / delta**2, rel=1e-6)
        # both halves contribute equally
        assert grad[0] == pytest.approx(2.0 / delta**2, rel=1e-6)

    def test_absolute_homogeneity(self, grid):
        rng = np.random.default_rng(0)
        bound = PerturbationBound(0.5, 6, grid)
        D = rng.uniform(-1, 1, 7)
        base = bound.value(D)
        for c in (-2.0, 0.5):
            assert bound.value(c * D) == pytest.approx(abs(c) * base, rel=1e-12)

    def test_midpoint_convexity(self, grid):
        rng = np.random.default_rng(1)
        bound = PerturbationBound(0.4, 8, grid)
        for _ in range(25):
            D1 = rng.uniform(-3, 3, 9)
            D2 = rng.uniform(-3, 3, 9)
            mid = bound.value(0.5 * (D1 + D2))
            assert mid <= 0.5 * (bound.value(D1) + bound.value(D2)) + 1e-12

    def test_gradient_matches_finite_differences(self, grid):
        rng = np.random.default_rng(2)
        bound = PerturbationBound(0.5, 5, grid)
        for _ in range(5):
            D = rng.uniform(0.2, 1.0, 6) * rng.choice([-1.0, 1.0], 6)
            _, grad = bound.value_grad(D)
            fd = np.empty_like(D)
            h = 1e-7
            for j in range(D.size):
                e = np.zeros_like(D)
                e[j] = h
                fd[j] = (bound.value(D + e) - bound.value(D - e)) / (2 * h)
            np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-8)

    def test_interior_closed_form_cross_check(self, grid):
        # discrete horizon quadrature vs the continuum closed form (O(h^2));
        # per basis function, where no coefficient cancellation can hide bias
        delta, order = 0.5, 6
        bound = PerturbationBound(delta, order, grid)
        per_basis = bound._W[0]
        np.testing.assert_allclose(per_basis, 2.0 * delta / (order + 1),
                                   rtol=5e-3)
        one = np.ones(order + 1)
        psi = float(per_basis @ one) / delta**3
        assert abs(psi) == pytest.approx(interior_closed_form(one, delta, order),
                                         rel=5e-3)

    def test_dirichlet_max_over_collar(self):
        # near the ends of the padded domain the horizon truncates, so the
        # max must be attained where the horizon is complete for one-signed D
        grid = Grid1D(0.0, 1.0, 50, bc="dirichlet", delta=0.2)
        bound = PerturbationBound(0.2, 2, grid)
        D = np.array([1.0, 1.0, 1.0])
        rows = (bound._W @ D)
        assert rows.max() == pytest.approx(np.abs(rows).max())
        assert rows[0] < rows.max()  # truncated horizon at the far edge


class TestConstraintResidual:
    def test_feasible_slack_closes_residual(self, grid):
        bound = PerturbationBound(0.5, 3, grid)
        kappa = 0.05
        theta = np.sqrt(1.0 / (2.0 * kappa))
        assert constraint_residual(np.zeros(4), theta, kappa, bound) == \
            pytest.approx(0.0, abs=1e-14)

    def test_zero_slack_leaves_full_budget(self, grid):
        bound = PerturbationBound(0.5, 3, grid)
        kappa = 0.05
        assert constraint_residual(np.zeros(4), 0.0, kappa, bound) == \
            pytest.approx(1.0 / (2.0 * kappa))

    def test_negative_when_bound_violated(self, grid):
        delta = 0.5
        bound = PerturbationBound(delta, 0, grid)
        kappa = 0.05
        budget = 1.0 / (2.0 * kappa)
        d0 = 1.5 * budget * delta**2 / 2.0  # N = 2 d0 / delta^2 > budget
        assert constraint_residual(np.array([d0]), 0.0, kappa, bound) < 0.0


class TestFeasibleCorrectionsStayInvertible:
    def test_random_feasible_draws(self, grid):
        # the advertised guarantee: N(D) < 1/(2 kappa) keeps the full
        # operator positive definite on the training grid
        rng = np.random.default_rng(4)
        delta, order = 0.5, 6
        bound = PerturbationBound(delta, order, grid)
        for trial in range(10):
            C = rng.uniform(0.5, 2.0, order + 1)
            model_c = KernelModel(delta=delta, order=order, C=C)
            kappa = coercivity_kappa(assemble_matrix(model_c, grid))
            direction = rng.uniform(-1.0, 1.0, order + 1)
            scale = 0.99 / (2.0 * kappa * bound.value(direction))
            D = direction * scale
            assert bound.value(D) <= 0.99 / (2.0 * kappa) * (1 + 1e-12)
            full = KernelModel(delta=delta, order=order, C=C, D=D)
            lam = operator_lambda_min(assemble_matrix(full, grid))
            assert lam > 0.0
