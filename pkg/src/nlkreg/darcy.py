"""Fine-scale Darcy solves on a periodic two-phase microstructure and their
cell-average coarse-graining.

The fine problem is -(kappa(x) u')' = f on a periodic interval, kappa
alternating between two values on subdomains of equal width, discretized
with P1 elements (exact elementwise-constant coefficients). Coarse data are
cell averages over one full microstructure period, which suppresses the
oscillatory corrector and exposes the homogenized response.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dataset import LAYOUT_CELLS, Dataset
from .exceptions import SolvabilityError
from .grid import PERIODIC, Grid1D
from .validation import check_int, check_scalar

_GAUSS2 = np.array([-1.0, 1.0]) / np.sqrt(3.0)


@dataclass(frozen=True)
class Microstructure:
    omega: float = 10.0
    sub_width: float = 0.1
    kappa1: float = 1.0
    kappa2: float = 4.0
    elems_per_sub: int = 16

    def __post_init__(self):
        check_scalar("omega", self.omega, low=0.0, low_open=True)
        check_scalar("sub_width", self.sub_width, low=0.0, low_open=True)
        check_scalar("kappa1", self.kappa1, low=0.0, low_open=True)
        check_scalar("kappa2", self.kappa2, low=0.0, low_open=True)
        check_int("elems_per_sub", self.elems_per_sub, low=1)
        periods = self.omega / (2.0 * self.sub_width)
        if abs(periods - round(periods)) > 1e-9:
            raise ValueError("omega must be an integer multiple of one "
                             "microstructure period 2 * sub_width")

    @property
    def n_elements(self):
        return int(round(self.omega / self.sub_width)) * self.elems_per_sub

    @property
    def h(self):
        return self.omega / self.n_elements

    @property
    def cell_width(self):
        return 2.0 * self.sub_width

    @property
    def n_cells(self):
        return int(round(self.omega / self.cell_width))

    def kappa_effective(self):
        """Harmonic mean, the classical 1-d homogenized coefficient."""
        return 2.0 * self.kappa1 * self.kappa2 / (self.kappa1 + self.kappa2)


class DarcyFineSolver:
    """Periodic P1 solver with the factorization cached across forcings."""

    def __init__(self, ms):
        self.ms = ms
        n = ms.n_elements
        self.nodes = ms.h * np.arange(n)
        sub_of_element = np.arange(n) // ms.elems_per_sub
        self.kappa_el = np.where(sub_of_element % 2 == 0, ms.kappa1, ms.kappa2)
        k = self.kappa_el / ms.h
        left = np.arange(n)
        right = (left + 1) % n
        rows = np.concatenate([left, right, left, right])
        cols = np.concatenate([left, right, right, left])
        vals = np.concatenate([k, k, -k, -k])
        self.A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        # constants are in the null space; pin node 0 and re-center afterwards
        self._lu = spla.splu(self.A[1:, 1:].tocsc())

    def load_vector(self, n_harm):
        """Consistent load for f = sin(2 pi n x / omega), 2-point Gauss."""
        ms = self.ms
        n = ms.n_elements
        q = 2.0 * np.pi * n_harm / ms.omega
        xg = self.nodes[:, None] + (1.0 + _GAUSS2[None, :]) * (ms.h / 2.0)
        fg = np.sin(q * xg)
        shape_r = (1.0 + _GAUSS2) / 2.0
        w = ms.h / 2.0
        load = np.zeros(n)
        np.add.at(load, np.arange(n), w * fg @ (1.0 - shape_r))
        np.add.at(load, (np.arange(n) + 1) % n, w * fg @ shape_r)
        return load

    def solve(self, n_harm, rtol=1e-10):
        """Zero-mean nodal solution for the harmonic forcing index n_harm >= 1."""
        n_harm = check_int("n_harm", n_harm, low=0)
        if n_harm == 0:
            raise SolvabilityError("n = 0 forcing has nonzero mean on the period")
        load = self.load_vector(n_harm)
        u = np.zeros(self.ms.n_elements)
        u[1:] = self._lu.solve(load[1:])
        u -= u.mean()
        res = np.linalg.norm(self.A @ u - load)
        if res > rtol * max(np.linalg.norm(load), 1e-300):
            raise RuntimeError(f"FEM residual {res:.3e} exceeds tolerance")
        return u

    def flux(self, u):
        """Element-wise discrete flux kappa u' (constant per element)."""
        du = (np.roll(u, -1) - u) / self.ms.h
        return self.kappa_el * du


def coarsen(values, omega, cell_width):
    """Cell averages of a periodic P1 nodal field over aligned cells.

    The average of the P1 interpolant over each cell is the trapezoid rule
    over the nodes it spans, which is exact for piecewise-linear fields.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    h = omega / n
    per = cell_width / h
    if abs(per - round(per)) > 1e-9:
        raise ValueError("cell width must span an integer number of elements")
    per = int(round(per))
    if n % per != 0:
        raise ValueError("cells must tile the domain exactly")
    ext = np.append(values, values[0])
    cells = n // per
    out = np.empty(cells)
    for c in range(cells):
        seg = ext[c * per:(c + 1) * per + 1]
        out[c] = (0.5 * seg[0] + seg[1:-1].sum() + 0.5 * seg[-1]) * h / cell_width
    return out


def coarse_grid(ms):
    """Periodic grid of cell centers carrying the coarse-grained data."""
    return Grid1D(a=0.0, b=ms.omega, n=ms.n_cells, bc=PERIODIC)


def gen_darcy(ms, n_samples, lambda_min, seed):
    """Coarse corpus: harmonic forcings with wavelengths >= lambda_min.

    Draws n uniformly from the integer harmonics {1, ..., floor(omega /
    lambda_min)}; stores cell averages of the fine solution and forcing.
    """
    check_int("n_samples", n_samples, low=1)
    lambda_min = check_scalar("lambda_min", lambda_min, low=0.0, low_open=True,
                              high=ms.omega)
    n_max = int(np.floor(ms.omega / lambda_min))
    if n_max < 1:
        raise ValueError("lambda_min admits no integer harmonic")
    solver = DarcyFineSolver(ms)
    rng = np.random.default_rng([int(seed), 0])
    harmonics = rng.integers(1, n_max + 1, n_samples)
    fine = {n: solver.solve(n) for n in np.unique(harmonics)}
    fbar = {n: coarsen(np.sin(2.0 * np.pi * n * solver.nodes / ms.omega),
                       ms.omega, ms.cell_width)
            for n in np.unique(harmonics)}
    ubar = {n: coarsen(fine[n], ms.omega, ms.cell_width) for n in fine}
    U = np.array([ubar[n] for n in harmonics])
    F = np.array([fbar[n] for n in harmonics])
    meta = {
        "kind": "darcy",
        "layout": LAYOUT_CELLS,
        "seed": int(seed),
        "params": {
            "omega": ms.omega, "sub_width": ms.sub_width,
            "kappa1": ms.kappa1, "kappa2": ms.kappa2,
            "elems_per_sub": ms.elems_per_sub,
            "lambda_min": lambda_min, "n_max": n_max,
            "harmonics": harmonics.tolist(),
        },
    }
    return Dataset(u=U, f=F, grid=coarse_grid(ms), meta=meta)


def coarse_test_pair(ms, n_harm, solver=None):
    """Coarsened (forcing, reference solution) for one harmonic index."""
    solver = solver or DarcyFineSolver(ms)
    fbar = coarsen(np.sin(2.0 * np.pi * n_harm * solver.nodes / ms.omega),
                   ms.omega, ms.cell_width)
    ubar = coarsen(solver.solve(n_harm), ms.omega, ms.cell_width)
    return fbar, ubar
