"""One-point quadrature discretization of the nonlocal diffusion operator.

At a node x_i the operator action is

    (L u)_i = sum_{0 < |m h| <= delta} w_m K(|m h|) (u_i - u_{i +- m}),

with per-direction weights w_m from :func:`nlkreg.grid.horizon_offsets`.
The sign convention makes L a positive, -Laplacian-like operator for
nonnegative kernels: L u -> -u'' * (second moment of K)/2 as delta, h -> 0.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .exceptions import (DegenerateKernelError, NonZeroMeanWarning,
                         NotInvertibleError)
from .grid import DIRICHLET, PERIODIC, Grid1D, horizon_offsets
from .kernels import kernel_horizon, kernel_values

_LMIN_FLOOR = 1e-14


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense symmetric operator matrix over the free nodes of a grid."""

    A: np.ndarray
    grid: Grid1D
    h: float
    bc: str
    kernel_id: str

    def __post_init__(self):
        self.A.setflags(write=False)

    @property
    def n(self):
        return self.A.shape[0]


def _weighted_profile(kernel, grid):
    offsets, weights = horizon_offsets(grid, kernel_horizon(kernel))
    kvals = kernel_values(kernel, offsets * grid.h)
    return offsets, weights * kvals


def _full_vector(grid, u, q):
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.n_free,):
        raise ValueError(f"u must have length {grid.n_free}, got {u.shape}")
    if grid.bc == PERIODIC:
        return u
    if q is None:
        raise ValueError("Dirichlet volume constraints require exterior values q")
    full = np.empty(len(grid.nodes))
    full[grid.free_index] = u
    ext = grid.exterior_index
    q = np.asarray(q, dtype=float)
    if q.ndim == 0:
        full[ext] = q
    elif q.shape == (len(ext),):
        full[ext] = q
    else:
        raise ValueError(f"q must be scalar or have length {len(ext)}, got {q.shape}")
    return full


def apply_nonlocal(kernel, grid, u, q=None):
    """Apply the discretized operator to a node vector over the free nodes."""
    offsets, wk = _weighted_profile(kernel, grid)
    if grid.bc == PERIODIC:
        u = np.asarray(u, dtype=float)
        if u.shape != (grid.n,):
            raise ValueError(f"u must have length {grid.n}, got {u.shape}")
        out = np.zeros_like(u)
        for m, w in zip(offsets, wk):
            out += w * (2.0 * u - np.roll(u, -m) - np.roll(u, m))
        return out
    full = _full_vector(grid, u, q)
    free = grid.free_index
    out = np.zeros(grid.n_free)
    for m, w in zip(offsets, wk):
        out += w * (2.0 * full[free] - full[free + m] - full[free - m])
    return out


def assemble_matrix(kernel, grid):
    """Assemble the dense matrix A with A u = apply_nonlocal(u) at q = 0."""
    offsets, wk = _weighted_profile(kernel, grid)
    if grid.bc == PERIODIC:
        n = grid.n
        first = np.zeros(n)
        first[0] = 2.0 * wk.sum()
        for m, w in zip(offsets, wk):
            first[m % n] -= w
            first[-m % n] -= w
        idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        A = first[idx]
    else:
        n = grid.n_free
        col = np.zeros(n)
        col[0] = 2.0 * wk.sum()
        upto = min(len(offsets), n - 1)
        col[1:upto + 1] = -wk[:upto]
        A = toeplitz(col)
    fp = kernel.fingerprint() if hasattr(kernel, "fingerprint") else repr(kernel)
    return OperatorMatrix(A=A, grid=grid, h=grid.h, bc=grid.bc, kernel_id=fp)


def exterior_coupling(kernel, grid, q):
    """Contribution of the exterior data to the operator action (Dirichlet)."""
    if grid.bc != DIRICHLET:
        raise ValueError("exterior coupling exists only for Dirichlet grids")
    return apply_nonlocal(kernel, grid, np.zeros(grid.n_free), q)


def _helmert_basis(n):
    # Orthonormal basis of the complement of constants: column k has k leading
    # entries 1/sqrt(k(k+1)) followed by -k/sqrt(k(k+1)).
    Q = np.zeros((n, n - 1))
    for k in range(1, n):
        s = 1.0 / np.sqrt(k * (k + 1.0))
        Q[:k, k - 1] = s
        Q[k, k - 1] = -k * s
    return Q


def operator_lambda_min(opmat):
    """Smallest eigenvalue of A on the admissible subspace.

    Periodic operators annihilate constants, so the constant mode is deflated
    by restricting A to an orthonormal basis of its complement before the
    dense symmetric eigensolve.
    """
    A = opmat.A
    if opmat.bc == PERIODIC:
        Q = _helmert_basis(A.shape[0])
        A = Q.T @ A @ Q
    return float(np.linalg.eigvalsh(A)[0])


def coercivity_kappa(opmat):
    """Coercivity constant kappa = 1 / lambda_min of the deflated operator.

    With the lumped mass h I, the Rayleigh quotient of (h A, h I) over the
    admissible subspace reduces to the eigenvalues of A itself.
    """
    lam = operator_lambda_min(opmat)
    if lam <= _LMIN_FLOOR:
        raise DegenerateKernelError(
            f"kernel fails coercivity numerically: lambda_min={lam:.3e}")
    return 1.0 / lam


def _check_residual(A, u, rhs, rtol, opmat):
    res = np.linalg.norm(A @ u - rhs)
    scale = max(np.linalg.norm(rhs), _LMIN_FLOOR)
    if res > rtol * scale:
        lam = operator_lambda_min(opmat)
        raise NotInvertibleError(
            f"solve residual {res:.3e} exceeds {rtol:.1e} * |rhs|; "
            f"lambda_min={lam:.3e}", lambda_min=lam)


def solve_nonlocal(kernel, grid, f, q=None, rtol=1e-10):
    """Solve the volume-constrained problem L u = f for the free nodes.

    Periodic mode solves on the zero-mean subspace (one Lagrange multiplier
    row for the constant); the right-hand side is mean-projected with a
    warning when its mean is not already zero to 1e-8 relative.

    Raises NotInvertibleError when the operator is singular or indefinite
    beyond the deflated constant mode; this is the failure the coercivity
    constraint exists to rule out.
    """
    f = np.asarray(f, dtype=float)
    opmat = assemble_matrix(kernel, grid)
    A = opmat.A
    lam = operator_lambda_min(opmat)
    if lam <= _LMIN_FLOOR * max(1.0, float(np.max(np.abs(A)))):
        raise NotInvertibleError(
            f"operator is singular or indefinite: lambda_min={lam:.6e}",
            lambda_min=lam)
    if grid.bc == PERIODIC:
        if f.shape != (grid.n,):
            raise ValueError(f"f must have length {grid.n}, got {f.shape}")
        mean = f.mean()
        if abs(mean) > 1e-8 * max(np.sqrt(np.mean(f**2)), _LMIN_FLOOR):
            warnings.warn(
                f"periodic forcing has nonzero mean {mean:.3e}; projecting",
                NonZeroMeanWarning, stacklevel=2)
        rhs = f - mean
        n = grid.n
        K = np.zeros((n + 1, n + 1))
        K[:n, :n] = A
        K[:n, n] = 1.0
        K[n, :n] = 1.0
        try:
            sol = np.linalg.solve(K, np.append(rhs, 0.0))
        except np.linalg.LinAlgError:
            lam = operator_lambda_min(opmat)
            raise NotInvertibleError(
                f"singular periodic operator; lambda_min={lam:.3e}",
                lambda_min=lam) from None
        u = sol[:n]
        _check_residual(A, u, rhs, rtol, opmat)
        return u - u.mean()
    if f.shape != (grid.n_free,):
        raise ValueError(f"f must have length {grid.n_free}, got {f.shape}")
    if q is None:
        raise ValueError("Dirichlet volume constraints require exterior values q")
    rhs = f - exterior_coupling(kernel, grid, q)
    try:
        u = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        lam = operator_lambda_min(opmat)
        raise NotInvertibleError(
            f"singular Dirichlet operator; lambda_min={lam:.3e}",
            lambda_min=lam) from None
    _check_residual(A, u, rhs, rtol, opmat)
    return u
