"""Synthetic corpora: manufactured-kernel pairs and spectral biharmonic solves.

All generators are deterministic given their seed; each row draws from an
independent substream keyed by (seed, row index) so the corpus is invariant
under parallel generation order.
"""

import numpy as np

from .dataset import (LAYOUT_PERIODIC_EVAL, Dataset)
from .exceptions import SolvabilityError
from .fourier import FourierSpec, multiplier_table, row_rng, sample_fourier
from .grid import PERIODIC, periodic_extend
from .kernels import KernelModel, ManufacturedKernel
from .operator import assemble_matrix
from .validation import check_int, check_scalar


def _require_periodic(grid):
    if grid.bc != PERIODIC:
        raise ValueError("this generator requires a periodic grid")


def _spec_list(specs):
    if isinstance(specs, FourierSpec):
        return [specs]
    return list(specs)


def _spec_for_row(spec_list, i, n_samples):
    # contiguous equal blocks, one per spec (a 50/50 mix for two specs)
    block = -(-n_samples // len(spec_list))
    return spec_list[min(i // block, len(spec_list) - 1)]


def gen_manufactured(kernel, specs, n_samples, grid, seed, quad_n=2048):
    """Pairs (u_i, f_i) with f_i synthesized mode-wise from the continuum
    spectral multipliers of a manufactured kernel.

    ``specs`` is one FourierSpec or a sequence of them; rows are split into
    equal contiguous blocks, one per spec.
    """
    check_int("n_samples", n_samples, low=1)
    _require_periodic(grid)
    if not isinstance(kernel, ManufacturedKernel):
        raise TypeError("gen_manufactured expects a ManufacturedKernel")
    spec_list = _spec_list(specs)
    kmax = max(s.max_mode() for s in spec_list)
    L = spec_list[0].L
    if any(s.L != L for s in spec_list):
        raise ValueError("all specs must share the same period L")
    mult = multiplier_table(kernel, kmax, L, quad_n)
    x = grid.nodes
    U = np.empty((n_samples, grid.n))
    F = np.empty((n_samples, grid.n))
    for i in range(n_samples):
        spec = _spec_for_row(spec_list, i, n_samples)
        sample = sample_fourier(spec, row_rng(seed, i))
        U[i] = sample.values(x)
        fk = mult[sample.k]
        ang = 2.0 * np.pi * np.outer(sample.k, x) / L
        F[i] = (fk * sample.cos) @ np.cos(ang) + (fk * sample.sin) @ np.sin(ang)
    U = periodic_extend(U)
    F = periodic_extend(F)
    meta = {
        "kind": "manufactured",
        "layout": LAYOUT_PERIODIC_EVAL,
        "seed": int(seed),
        "params": {
            "kernel": {"kind": kernel.kind, "delta": kernel.delta, "s": kernel.s},
            "specs": [vars(s) | {"krange": list(s.krange)} for s in spec_list],
            "quad_n": quad_n,
        },
    }
    return Dataset(u=U, f=F, grid=grid, meta=meta)


def gen_on_grid(model, specs, n_samples, grid, seed):
    """Pairs whose f_i are the exact discrete-operator images of u_i.

    Used for recovery experiments: the forward map is reproduced identically
    by the same quadrature, so a matching model can drive the loss to zero.
    """
    check_int("n_samples", n_samples, low=1)
    _require_periodic(grid)
    if not isinstance(model, KernelModel):
        raise TypeError("gen_on_grid expects a KernelModel")
    spec_list = _spec_list(specs)
    A = assemble_matrix(model, grid).A
    x = grid.nodes
    U = np.empty((n_samples, grid.n))
    for i in range(n_samples):
        spec = _spec_for_row(spec_list, i, n_samples)
        U[i] = sample_fourier(spec, row_rng(seed, i)).values(x)
    F = U @ A.T
    meta = {
        "kind": "on_grid",
        "layout": LAYOUT_PERIODIC_EVAL,
        "seed": int(seed),
        "params": {
            "model": {"variant": model.variant, "delta": model.delta,
                      "order": model.order, "C": model.C.tolist(),
                      "D": model.D.tolist()},
            "specs": [vars(s) | {"krange": list(s.krange)} for s in spec_list],
        },
    }
    return Dataset(u=periodic_extend(U), f=periodic_extend(F), grid=grid, meta=meta)


def biharmonic_multiplier(k, c, delta, L):
    """Symbol of the fourth-order high-fidelity operator on mode k."""
    q = 2.0 * np.pi * np.asarray(k, dtype=float) / L
    return q**2 + c * delta**2 * q**4


def biharmonic_solve(c, delta, f_cos, L, nodes):
    """Invert the fourth-order operator spectrally for a cosine-series forcing.

    ``f_cos[k]`` is the coefficient of cos(2 pi k x / L); the k = 0 entry
    must vanish (the periodic problem is solvable only for zero-mean f).
    """
    check_scalar("c", c, low=0.0)
    check_scalar("delta", delta, low=0.0, low_open=True)
    f_cos = np.asarray(f_cos, dtype=float)
    if f_cos.ndim != 1:
        raise ValueError("f_cos must be a coefficient vector")
    if f_cos.size and f_cos[0] != 0.0:
        raise SolvabilityError("k = 0 mode present: periodic problem unsolvable")
    k = np.arange(f_cos.size)
    u_cos = np.zeros_like(f_cos)
    if f_cos.size > 1:
        u_cos[1:] = f_cos[1:] / biharmonic_multiplier(k[1:], c, delta, L)
    ang = 2.0 * np.pi * np.outer(k, np.asarray(nodes, dtype=float)) / L
    return u_cos @ np.cos(ang)


def gen_biharmonic(c, delta, n_samples, grid, seed, spec=None):
    """Corpus for the fourth-order surrogate experiment on a periodic grid."""
    check_int("n_samples", n_samples, low=1)
    _require_periodic(grid)
    if spec is None:
        spec = FourierSpec(kind="low", kmin=1, kmax=99, L=grid.length)
    if spec.kmin < 1:
        raise SolvabilityError("biharmonic forcing must exclude the k = 0 mode")
    x = grid.nodes
    kmax = spec.kmax
    mu = biharmonic_multiplier(np.arange(kmax + 1), c, delta, spec.L)
    U = np.empty((n_samples, grid.n))
    F = np.empty((n_samples, grid.n))
    for i in range(n_samples):
        sample = sample_fourier(spec, row_rng(seed, i))
        ang = 2.0 * np.pi * np.outer(sample.k, x) / spec.L
        F[i] = sample.cos @ np.cos(ang)
        U[i] = (sample.cos / mu[sample.k]) @ np.cos(ang)
    U = periodic_extend(U)
    F = periodic_extend(F)
    meta = {
        "kind": "biharmonic",
        "layout": LAYOUT_PERIODIC_EVAL,
        "seed": int(seed),
        "params": {"c": c, "delta": delta,
                   "spec": vars(spec) | {"krange": list(spec.krange)}},
    }
    return Dataset(u=U, f=F, grid=grid, meta=meta)


def biharmonic_test_forcing(c, delta, grid):
    """Single-mode forcing whose exact solution is sin(2 pi x / L)."""
    L = grid.length
    mu1 = float(biharmonic_multiplier(1, c, delta, L))
    x = grid.nodes
    return mu1 * np.sin(2.0 * np.pi * x / L), np.sin(2.0 * np.pi * x / L)
