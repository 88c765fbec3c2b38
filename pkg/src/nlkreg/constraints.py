"""Well-posedness bound for the signed kernel correction.

The correction coefficients D define the perturbation profile
phi_D(x) = sum_m D_m / delta^(d+2) B_{m,M}(|x|/delta), supported on
[-delta, delta]. Writing the full kernel as 2 rho + 2 h with 2 h = phi_D,
the learnt operator stays coercive (hence invertible) whenever

    N(D) = 1/2 ||phi_D||_L1 + 1/2 ||int phi_D(|y - x|) dy||_Linf  <  1/(2 kappa),

kappa being the coercivity constant of the nonnegative part. The L1 term is
integrated with a fixed-panel trapezoid rule; the Linf term takes the max of
the discrete horizon quadrature over the grid nodes (on periodic grids every
node sees the same full horizon, which has the closed form
2 |sum_m D_m| / (delta^2 (M+1)) in the continuum limit).
"""

import numpy as np

from .bernstein import bernstein_design
from .grid import PERIODIC, horizon_offsets
from .validation import check_int, check_scalar


class PerturbationBound:
    """Evaluates N(D) and its subgradient; quadratures are precomputed."""

    def __init__(self, delta, order, grid, quad_panels=2048, d=1):
        self.delta = check_scalar("delta", delta, low=0.0, low_open=True)
        self.order = check_int("order", order, low=0)
        self.d = check_int("d", d, low=1, high=1)
        check_int("quad_panels", quad_panels, low=16)
        t = np.linspace(0.0, 1.0, quad_panels + 1)
        self._B = bernstein_design(order, t)
        w = np.full(t.size, 1.0 / quad_panels)
        w[0] = w[-1] = 0.5 / quad_panels
        self._w = w
        offsets, weights = horizon_offsets(grid, delta)
        Boff = bernstein_design(order, offsets * grid.h / delta)
        # the horizon integral keeps the self node (finite integrand), unlike
        # the operator sum where the u(y) - u(x) factor removes it
        self_term = grid.h * bernstein_design(order, np.zeros(1))[0]
        if grid.bc == PERIODIC:
            # every node sees the full horizon: one row suffices
            self._W = (2.0 * (weights[:, None] * Boff).sum(axis=0)
                       + self_term)[None, :]
        else:
            nodes = grid.nodes
            n_all = nodes.size
            W = np.tile(self_term, (n_all, 1))
            wB = weights[:, None] * Boff
            for j, m in enumerate(offsets):
                W[np.arange(m, n_all)] += wB[j]
                W[np.arange(0, n_all - m)] += wB[j]
            self._W = W
        self._scale = delta ** (self.d + 2)

    def value_grad(self, D):
        """Return (N(D), dN/dD). Subgradients take sign(0) = 0 at kinks."""
        D = np.asarray(D, dtype=float)
        if D.shape != (self.order + 1,):
            raise ValueError(f"D must have length {self.order + 1}, got {D.shape}")
        # L1 half-term: (1/delta^2) int_0^1 |sum_m D_m B_m(t)| dt   (d = 1)
        phi = self._B @ D
        l1 = float(self._w @ np.abs(phi)) / self.delta**2
        g1 = (self._B.T @ (self._w * np.sign(phi))) / self.delta**2
        # Linf half-term over the grid nodes
        psi = (self._W @ D) / self._scale
        j = int(np.argmax(np.abs(psi)))
        linf = 0.5 * abs(float(psi[j]))
        g2 = 0.5 * np.sign(psi[j]) * self._W[j] / self._scale
        return l1 + linf, g1 + g2

    def value(self, D):
        return self.value_grad(D)[0]


def perturbation_bound_value(D, delta, order, grid, quad_panels=2048):
    return PerturbationBound(delta, order, grid, quad_panels).value(D)


def interior_closed_form(D, delta, order):
    """Continuum value of the horizon integral max term on a periodic interior.

    Cross-check for the discrete Linf quadrature: the full-horizon integral of
    the profile equals 2 |sum_m D_m| / (delta^2 (order+1)).
    """
    D = np.asarray(D, dtype=float)
    return 2.0 * abs(float(D.sum())) / (delta**2 * (order + 1))


def constraint_residual(D, theta, kappa, bound):
    """Slack form of the inequality: H = 1/(2 kappa) - N(D) - theta^2."""
    check_scalar("kappa", kappa, low=0.0, low_open=True)
    return 1.0 / (2.0 * kappa) - bound.value(D) - float(theta) ** 2
