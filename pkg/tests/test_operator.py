import numpy as np
import pytest

from nlkreg.exceptions import (DegenerateKernelError, HorizonError,
                               NonZeroMeanWarning, NotInvertibleError)
from nlkreg.grid import Grid1D, horizon_offsets
from nlkreg.kernels import (COSINE_SIGN_CHANGING, LINEAR_RAMP, KernelModel,
                            ManufacturedKernel, kernel_values)
from nlkreg.operator import (OperatorMatrix, apply_nonlocal, assemble_matrix,
                             coercivity_kappa, operator_lambda_min,
                             solve_nonlocal)


def random_model(rng, delta=0.5, order=4, signed=False):
    C = rng.uniform(0.2, 2.0, order + 1)
    D = rng.uniform(-0.2, 0.2, order + 1) if signed else None
    return KernelModel(delta=delta, order=order, C=C, D=D)


def dense_lambda_min_oracle(A, periodic):
    """Brute-force reference: full eigendecomposition, drop the constant mode."""
    vals, vecs = np.linalg.eigh(A)
    if not periodic:
        return vals[0]
    n = A.shape[0]
    ones = np.ones(n) / np.sqrt(n)
    keep = np.abs(vecs.T @ ones) < 0.5
    return vals[keep].min()


class TestApply:
    def test_constants_are_annihilated_periodic(self):
        grid = Grid1D(0.0, 1.0, 50)
        for kernel in [ManufacturedKernel(kind=LINEAR_RAMP, delta=0.2),
                       ManufacturedKernel(kind=COSINE_SIGN_CHANGING, delta=0.2),
                       random_model(np.random.default_rng(0), delta=0.2)]:
            out = apply_nonlocal(kernel, grid, np.ones(grid.n))
            scale = np.abs(kernel_values(kernel, 0.1)) + 1.0
            assert np.max(np.abs(out)) < 1e-12 * scale

    def test_quadratic_sees_minus_second_derivative(self):
        # linear ramp has second moment exactly 2, so L x^2 -> -2
        grid = Grid1D(0.0, 1.0, 400, bc="dirichlet", delta=0.1)
        kernel = ManufacturedKernel(kind=LINEAR_RAMP, delta=0.1)
        u = grid.free_nodes**2
        q = grid.nodes[grid.exterior_index] ** 2
        out = apply_nonlocal(kernel, grid, u, q=q)
        np.testing.assert_allclose(out, -2.0, atol=0.01)

    def test_cosine_is_discrete_eigenvector(self):
        # oracle: the spectral multiplier recomputed as a direct offset sum
        grid = Grid1D(0.0, 1.0, 100)
        kernel = ManufacturedKernel(kind=COSINE_SIGN_CHANGING, delta=0.5)
        offsets, weights = horizon_offsets(grid, 0.5)
        kv = kernel_values(kernel, offsets * grid.h)
        for k in (1, 3, 7):
            mk = np.sum(2.0 * weights * kv
                        * (1.0 - np.cos(2.0 * np.pi * k * offsets * grid.h)))
            u = np.cos(2.0 * np.pi * k * grid.nodes)
            out = apply_nonlocal(kernel, grid, u)
            np.testing.assert_allclose(out, mk * u, rtol=1e-12, atol=1e-12 * abs(mk))

    def test_periodic_wrap_horizon_beyond_half_period(self):
        # horizons up to the full period are meaningful in the offset picture
        grid = Grid1D(0.0, 1.0, 100)
        kernel = ManufacturedKernel(kind=COSINE_SIGN_CHANGING, delta=0.99)
        out = apply_nonlocal(kernel, grid, np.ones(grid.n))
        assert np.max(np.abs(out)) < 1e-9

    def test_horizon_errors(self):
        grid = Grid1D(0.0, 1.0, 100)
        with pytest.raises(HorizonError):
            apply_nonlocal(ManufacturedKernel(kind=LINEAR_RAMP, delta=1.0),
                           grid, np.zeros(grid.n))
        with pytest.raises(HorizonError):
            apply_nonlocal(ManufacturedKernel(kind=LINEAR_RAMP, delta=0.001),
                           grid, np.zeros(grid.n))

    def test_dirichlet_requires_exterior_values(self):
        grid = Grid1D(0.0, 1.0, 50, bc="dirichlet", delta=0.1)
        kernel = ManufacturedKernel(kind=LINEAR_RAMP, delta=0.1)
        with pytest.raises(ValueError):
            apply_nonlocal(kernel, grid, np.zeros(grid.n_free))


class TestAssemble:
    @pytest.mark.parametrize("bc", ["periodic", "dirichlet"])
    def test_matrix_matches_apply_on_random_vectors(self, bc):
        rng = np.random.default_rng(42)
        if bc == "periodic":
            grid = Grid1D(0.0, 1.0, 64)
            q = None
        else:
            grid = Grid1D(0.0, 1.0, 64, bc="dirichlet", delta=0.125)
            q = 0.0
        model = random_model(rng, delta=0.125, signed=True)
        A = assemble_matrix(model, grid).A
        for _ in range(20):
            u = rng.standard_normal(grid.n_free)
            direct = apply_nonlocal(model, grid, u, q=q)
            via_matrix = A @ u
            denom = max(np.max(np.abs(direct)), 1e-30)
            assert np.max(np.abs(via_matrix - direct)) < 1e-12 * denom

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        for grid in [Grid1D(0.0, 1.0, 80),
                     Grid1D(0.0, 1.0, 80, bc="dirichlet", delta=0.1)]:
            A = assemble_matrix(random_model(rng, delta=0.1, signed=True), grid).A
            assert np.max(np.abs(A - A.T)) < 1e-12 * np.max(np.abs(A))

    def test_periodic_row_sums_vanish(self):
        rng = np.random.default_rng(2)
        grid = Grid1D(0.0, 1.0, 100)
        A = assemble_matrix(random_model(rng, delta=0.25, signed=True), grid).A
        assert np.max(np.abs(A.sum(axis=1))) < 1e-10 * np.max(np.abs(A))


class TestSolve:
    def test_zero_forcing(self):
        grid = Grid1D(0.0, 1.0, 60)
        model = random_model(np.random.default_rng(3), delta=0.2)
        u = solve_nonlocal(model, grid, np.zeros(grid.n))
        assert np.max(np.abs(u)) < 1e-14
        gd = Grid1D(0.0, 1.0, 60, bc="dirichlet", delta=0.2)
        u = solve_nonlocal(model, gd, np.zeros(gd.n_free), q=0.0)
        assert np.max(np.abs(u)) < 1e-14

    def test_solve_then_apply_round_trip(self):
        rng = np.random.default_rng(4)
        grid = Grid1D(0.0, 1.0, 90)
        model = random_model(rng, delta=0.3)
        f = rng.standard_normal(grid.n)
        f -= f.mean()
        u = solve_nonlocal(model, grid, f)
        back = apply_nonlocal(model, grid, u)
        assert np.linalg.norm(back - f) < 1e-9 * np.linalg.norm(f)

    def test_eigenfunction_solve(self):
        grid = Grid1D(0.0, 1.0, 100)
        kernel = ManufacturedKernel(kind=LINEAR_RAMP, delta=0.25)
        offsets, weights = horizon_offsets(grid, 0.25)
        kv = kernel_values(kernel, offsets * grid.h)
        m1 = np.sum(2.0 * weights * kv
                    * (1.0 - np.cos(2.0 * np.pi * offsets * grid.h)))
        u_exact = np.cos(2.0 * np.pi * grid.nodes)
        u = solve_nonlocal(kernel, grid, m1 * u_exact)
        assert np.linalg.norm(u - u_exact) < 1e-8 * np.linalg.norm(u_exact)

    def test_mean_projection_warns(self):
        grid = Grid1D(0.0, 1.0, 50)
        model = random_model(np.random.default_rng(5), delta=0.2)
        f = np.cos(2.0 * np.pi * grid.nodes) + 0.5
        with pytest.warns(NonZeroMeanWarning):
            u = solve_nonlocal(model, grid, f)
        assert abs(u.mean()) < 1e-12

    def test_dirichlet_requires_q(self):
        gd = Grid1D(0.0, 1.0, 50, bc="dirichlet", delta=0.1)
        model = random_model(np.random.default_rng(6), delta=0.1)
        with pytest.raises(ValueError):
            solve_nonlocal(model, gd, np.zeros(gd.n_free))

    def test_indefinite_operator_is_rejected_with_eigenvalue(self):
        # a large negative correction makes the operator indefinite; the
        # solve must refuse and report the offending eigenvalue
        grid = Grid1D(0.0, 1.0, 60)
        model = KernelModel(delta=0.2, order=0, C=[1.0], D=[-8.0])
        f = np.cos(2.0 * np.pi * grid.nodes)
        with pytest.raises(NotInvertibleError) as err:
            solve_nonlocal(model, grid, f)
        assert err.value.lambda_min is not None
        assert err.value.lambda_min < 0.0


class TestCoercivity:
    def _synthetic(self, A):
        n = A.shape[0] + 1
        grid = Grid1D(0.0, 1.0, n, bc="dirichlet", delta=2.0 / n)
        return OperatorMatrix(A=A, grid=grid, h=grid.h, bc="dirichlet",
                              kernel_id="synthetic")

    def test_identity_matrix(self):
        assert coercivity_kappa(self._synthetic(np.eye(7))) == pytest.approx(1.0)

    def test_scaling(self):
        grid = Grid1D(0.0, 1.0, 40)
        model = random_model(np.random.default_rng(7), delta=0.25)
        op = assemble_matrix(model, grid)
        kappa = coercivity_kappa(op)
        scaled = OperatorMatrix(A=3.0 * op.A.copy(), grid=grid, h=op.h,
                                bc=op.bc, kernel_id="scaled")
        assert coercivity_kappa(scaled) == pytest.approx(kappa / 3.0, rel=1e-12)

    def test_linear_ramp_small_grid_vs_dense_oracle(self):
        grid = Grid1D(0.0, 1.0, 12)
        kernel = ManufacturedKernel(kind=LINEAR_RAMP, delta=0.25)
        op = assemble_matrix(kernel, grid)
        kappa = coercivity_kappa(op)
        lam_oracle = dense_lambda_min_oracle(op.A, periodic=True)
        assert kappa > 0.0
        assert kappa == pytest.approx(1.0 / lam_oracle, rel=1e-10)

    def test_eigen_consistency_up_to_200_nodes(self):
        rng = np.random.default_rng(8)
        for n in (50, 120, 200):
            grid = Grid1D(0.0, 1.0, n)
            model = random_model(rng, delta=0.2, order=3, signed=True)
            op = assemble_matrix(model, grid)
            lam = operator_lambda_min(op)
            lam_oracle = dense_lambda_min_oracle(op.A, periodic=True)
            assert lam == pytest.approx(lam_oracle, rel=1e-9)
        gd = Grid1D(0.0, 1.0, 100, bc="dirichlet", delta=0.2)
        op = assemble_matrix(random_model(rng, delta=0.2), gd)
        assert operator_lambda_min(op) == pytest.approx(
            dense_lambda_min_oracle(op.A, periodic=False), rel=1e-9)

    def test_degenerate_kernel_rejected(self):
        grid = Grid1D(0.0, 1.0, 30)
        model = KernelModel(delta=0.2, order=2, C=[0.0, 0.0, 0.0])
        with pytest.raises(DegenerateKernelError):
            coercivity_kappa(assemble_matrix(model, grid))


class TestLocalLimit:
    def test_refinement_reduces_defect(self):
        # ramp kernel tends to -u'' as delta, h -> 0 (with h/delta shrinking
        # too: the x^2 defect is purely the radial quadrature error)
        errs_quad, errs_sin = [], []
        for delta, n in [(0.2, 100), (0.1, 400), (0.05, 1600)]:
            grid = Grid1D(0.0, 1.0, n, bc="dirichlet", delta=delta)
            kernel = ManufacturedKernel(kind=LINEAR_RAMP, delta=delta)
            xs = grid.free_nodes
            q_nodes = grid.nodes[grid.exterior_index]
            u, upp = xs**2, np.full_like(xs, 2.0)
            out = apply_nonlocal(kernel, grid, u, q=q_nodes**2)
            errs_quad.append(np.sqrt(np.mean((out + upp) ** 2)))
            u = np.sin(2.0 * np.pi * xs)
            upp = -(2.0 * np.pi) ** 2 * np.sin(2.0 * np.pi * xs)
            out = apply_nonlocal(kernel, grid, u, q=np.sin(2.0 * np.pi * q_nodes))
            errs_sin.append(np.sqrt(np.mean((out + upp) ** 2)))
        assert errs_quad[0] > errs_quad[1] > errs_quad[2]
        assert errs_sin[0] > errs_sin[1] > errs_sin[2]
