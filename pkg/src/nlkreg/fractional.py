"""Fractional-Laplacian ground truth on the unit interval.

Solutions of (-Delta)^s u = f on (-1, 1) with u = 0 outside are produced by
quadrature against the closed-form Green's function of the interval. An
independent brute-force reference, a fine-grid collocation solve of the
horizon-truncated kernel, validates that route (and doubles as the
truncated-kernel baseline at coarse resolution).
"""

import math

import numpy as np
from scipy.linalg import solve_toeplitz
from scipy.special import hyp2f1

from .dataset import LAYOUT_INTERVAL, Dataset
from .fourier import FourierSpec, row_rng, sample_fourier
from .grid import DIRICHLET, Grid1D
from .kernels import fractional_normalization
from .validation import check_int, check_scalar


def interval_grid(n, delta):
    """Dirichlet grid on [-1, 1] with a collar of width delta."""
    return Grid1D(a=-1.0, b=1.0, n=n, bc=DIRICHLET, delta=delta)


def green_function(x, y, s):
    """Green's function of the fractional Laplacian on (-1, 1), zero exterior.

    G(x, y) = kappa_s |x-y|^(2s-1) I(r0) with r0 = (1-x^2)(1-y^2)/|x-y|^2,
    kappa_s = 4^(-s)/Gamma(s)^2 and I(r0) = int_0^r0 t^(s-1)(1+t)^(-1/2) dt.
    The incomplete integral is evaluated through a Pfaff-transformed
    hypergeometric series, stable for all r0 >= 0. For s > 1/2 the diagonal
    limit is finite and handled explicitly.
    """
    s = check_scalar("s", s, low=0.0, high=1.0, low_open=True, high_open=True)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    kap = 4.0 ** (-s) / math.gamma(s) ** 2
    d = np.abs(x - y)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        r0 = np.clip(1.0 - x**2, 0.0, None) * np.clip(1.0 - y**2, 0.0, None) / d**2
        w = r0 / (1.0 + r0)
        inner = r0**s / s * (1.0 + r0) ** (-0.5) * hyp2f1(0.5, 1.0, s + 1.0, w)
        out = kap * d ** (2.0 * s - 1.0) * inner
    if s <= 0.5:
        # diagonal is singular; caller's quadrature must not hit it
        return np.where(d == 0.0, np.inf, out)
    diag = kap * (np.clip(1.0 - x**2, 0.0, None)
                  * np.clip(1.0 - y**2, 0.0, None)) ** (s - 0.5) / (s - 0.5)
    return np.where(d < 1e-14, diag, out)


def fractional_solve(f_values, s, nodes):
    """u(x) = int G(x, y) f(y) dy by the trapezoid rule on the given nodes.

    ``nodes`` must be a uniform partition of [-1, 1] including both ends;
    the returned solution vanishes there.
    """
    nodes = np.asarray(nodes, dtype=float)
    f_values = np.asarray(f_values, dtype=float)
    if f_values.shape[-1] != nodes.size:
        raise ValueError("f must be sampled on the quadrature nodes")
    h = nodes[1] - nodes[0]
    X, Y = np.meshgrid(nodes, nodes, indexing="ij")
    G = green_function(X, Y, s)
    w = np.full(nodes.size, h)
    w[0] = w[-1] = 0.5 * h
    return f_values @ (G * w[None, :]).T


def analytic_constant_forcing(x, s):
    """Closed-form solution for f = 1: proportional to (1 - x^2)^s."""
    s = check_scalar("s", s, low=0.0, high=1.0, low_open=True, high_open=True)
    c = 2.0 ** (2.0 * s) * math.gamma(1.0 + s) * math.gamma(0.5 + s) / math.gamma(0.5)
    return np.clip(1.0 - np.asarray(x, dtype=float) ** 2, 0.0, None) ** s / c


def truncated_reference_solve(s, delta, h, f_fn):
    """Collocation solve of the horizon-truncated fractional kernel problem.

    Toeplitz system over the interior nodes of a uniform grid on [-1, 1]
    with spacing h; kernel mass is integrated exactly over each neighbor
    cell, which keeps the near-singularity quadrature error small on fine
    grids. Serves as the independent reference for ``fractional_solve`` (at
    large delta and small h) and as the truncated-kernel baseline.
    """
    s = check_scalar("s", s, low=0.0, high=1.0, low_open=True, high_open=True)
    check_scalar("delta", delta, low=0.0, low_open=True)
    n = int(round(2.0 / h))
    if abs(n * h - 2.0) > 1e-12:
        raise ValueError("h must divide the interval length 2")
    nodes = -1.0 + h * np.arange(1, n)
    R = int(round(delta / h))
    m = np.arange(1, R + 1)
    lo = (m - 0.5) * h
    hi = np.minimum((m + 0.5) * h, delta)
    C = fractional_normalization(1, s)
    # exact integral of C r^(-1-2s) over each cell [(m-1/2)h, min((m+1/2)h, delta)]
    wk = C * (lo ** (-2.0 * s) - hi ** (-2.0 * s)) / (2.0 * s)
    col = np.zeros(nodes.size)
    col[0] = 2.0 * wk.sum()
    upto = min(R, nodes.size - 1)
    col[1:upto + 1] = -wk[:upto]
    u = solve_toeplitz(col, f_fn(nodes))
    return nodes, u


def gen_fractional(s, n_samples, grid, seed, spec=None):
    """Corpus of (u_i, f_i) from Green's-function quadrature on [-1, 1].

    Data are stored on the n+1 interval nodes; the boundary values vanish.
    The default forcing distribution includes the constant (k = 0) mode:
    the volume-constrained problem imposes no zero-mean restriction.
    """
    check_int("n_samples", n_samples, low=1)
    if grid.bc != DIRICHLET or grid.a != -1.0 or grid.b != 1.0:
        raise ValueError("fractional corpus requires a Dirichlet grid on [-1, 1]")
    if spec is None:
        spec = FourierSpec(kind="low", kmin=0, kmax=99, L=2.0)
    nodes = grid.eval_nodes
    h = grid.h
    X, Y = np.meshgrid(nodes, nodes, indexing="ij")
    G = green_function(X, Y, s)
    w = np.full(nodes.size, h)
    w[0] = w[-1] = 0.5 * h
    GW = (G * w[None, :]).T
    U = np.empty((n_samples, nodes.size))
    F = np.empty((n_samples, nodes.size))
    for i in range(n_samples):
        sample = sample_fourier(spec, row_rng(seed, i))
        F[i] = sample.values(nodes)
        U[i] = F[i] @ GW
    meta = {
        "kind": "fractional",
        "layout": LAYOUT_INTERVAL,
        "seed": int(seed),
        "params": {"s": s, "spec": vars(spec) | {"krange": list(spec.krange)}},
    }
    return Dataset(u=U, f=F, grid=grid, meta=meta)
