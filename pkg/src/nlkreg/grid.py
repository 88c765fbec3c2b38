"""Uniform 1-d grids with periodic or Dirichlet volume-constraint boundaries.

A periodic grid on [a, b] has n nodes x_j = a + j h (the node at b is
identified with the node at a). A Dirichlet grid additionally carries a
collar of width ``delta`` on each side of [a, b]; nodes strictly inside
(a, b) are unknowns, all remaining nodes hold prescribed exterior values.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import HorizonError
from .validation import check_int, check_scalar

PERIODIC = "periodic"
DIRICHLET = "dirichlet"

_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class Grid1D:
    a: float
    b: float
    n: int
    bc: str = PERIODIC
    delta: float = None

    def __post_init__(self):
        check_int("n", self.n, low=2)
        if not self.b > self.a:
            raise ValueError(f"need b > a, got [{self.a}, {self.b}]")
        if self.bc == PERIODIC:
            if self.delta is not None:
                raise ValueError("periodic grids carry no collar width")
        elif self.bc == DIRICHLET:
            if self.delta is None:
                raise ValueError("Dirichlet grids require the collar width delta")
            check_scalar("delta", self.delta, low=0.0, low_open=True)
            ext = self.delta / self.h
            if abs(ext - round(ext)) > _EDGE_TOL:
                raise ValueError(
                    f"delta={self.delta} must be an integer multiple of h={self.h}")
        else:
            raise ValueError(f"unknown boundary mode {self.bc!r}")

    @property
    def h(self):
        return (self.b - self.a) / self.n

    @property
    def length(self):
        return self.b - self.a

    @property
    def n_collar(self):
        """Number of collar nodes on each side (Dirichlet only)."""
        return int(round(self.delta / self.h)) if self.bc == DIRICHLET else 0

    @property
    def nodes(self):
        """Periodic: the n distinct nodes. Dirichlet: all nodes on [a-delta, b+delta]."""
        if self.bc == PERIODIC:
            return self.a + self.h * np.arange(self.n)
        e = self.n_collar
        return self.a - self.delta + self.h * np.arange(self.n + 2 * e + 1)

    @property
    def eval_nodes(self):
        """Nodes used for data representation.

        Periodic: n+1 equidistant points on [a, b], the last duplicating the
        first by periodicity. Dirichlet: the n+1 nodes on [a, b].
        """
        return self.a + self.h * np.arange(self.n + 1)

    @property
    def free_index(self):
        """Indices of unknowns within ``nodes``."""
        if self.bc == PERIODIC:
            return np.arange(self.n)
        e = self.n_collar
        return np.arange(e + 1, e + self.n)

    @property
    def exterior_index(self):
        """Indices of constrained nodes within ``nodes`` (Dirichlet only)."""
        if self.bc == PERIODIC:
            return np.arange(0)
        e = self.n_collar
        return np.concatenate([np.arange(e + 1), np.arange(e + self.n, 2 * e + self.n + 1)])

    @property
    def n_free(self):
        return self.n if self.bc == PERIODIC else self.n - 1

    @property
    def free_nodes(self):
        return self.nodes[self.free_index] if self.bc == DIRICHLET else self.nodes


def horizon_offsets(grid, delta):
    """Node offsets and quadrature weights covering the horizon.

    Returns (offsets, weights): integer offsets m = 1..R with |m h| <= delta
    and per-direction weights. Interior offsets carry the full cell measure h;
    an offset landing exactly on the horizon carries h/2, which makes the
    radial sum a trapezoid rule over [-delta, delta] (the self node drops out
    of the operator identically).
    """
    check_scalar("delta", delta, low=0.0, low_open=True)
    h = grid.h
    if grid.bc == PERIODIC and delta >= grid.length:
        raise HorizonError(
            f"horizon delta={delta} must be smaller than the period {grid.length}")
    if grid.bc == DIRICHLET and delta > grid.delta + _EDGE_TOL * h:
        raise HorizonError(
            f"horizon delta={delta} exceeds the grid collar {grid.delta}")
    R = int(np.floor(delta / h + _EDGE_TOL))
    if R < 1:
        raise HorizonError(f"horizon delta={delta} is below the grid spacing h={h}")
    offsets = np.arange(1, R + 1)
    weights = np.full(R, h)
    if abs(R * h - delta) <= _EDGE_TOL * max(h, delta):
        weights[-1] = 0.5 * h
    return offsets, weights


def periodic_extend(values):
    """Append the wrap-around node so a periodic node vector matches eval_nodes."""
    values = np.asarray(values, dtype=float)
    return np.concatenate([values, values[..., :1]], axis=-1)
