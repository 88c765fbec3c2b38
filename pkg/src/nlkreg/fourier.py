"""Random Fourier-series sampling and spectral multipliers of radial kernels."""

from dataclasses import dataclass

import numpy as np

from .kernels import kernel_horizon, kernel_values
from .validation import check_int, check_scalar

LOW_FREQ = "low"
HIGH_FREQ = "high"


@dataclass(frozen=True)
class FourierSpec:
    """Distribution of random periodic functions.

    ``low``  draws damped cosine series: u = sum_{k=kmin..kmax} uhat_k
    cos(2 pi k x / L) with uhat_k = exp(-decay k^2) xi_k, xi_k ~ U[0, 1].

    ``high`` draws a two-mode sample xi_1 sin(2 pi k_1 x / L) +
    xi_2 cos(2 pi k_2 x / L) with k_1, k_2 uniform integers in ``krange``.
    """

    kind: str = LOW_FREQ
    kmax: int = 100
    kmin: int = 0
    decay: float = 0.1
    L: float = 1.0
    krange: tuple = (5, 15)

    def __post_init__(self):
        if self.kind not in (LOW_FREQ, HIGH_FREQ):
            raise ValueError(f"unknown Fourier kind {self.kind!r}")
        check_int("kmax", self.kmax, low=1)
        check_int("kmin", self.kmin, low=0, high=self.kmax)
        check_scalar("decay", self.decay, low=0.0, low_open=True)
        check_scalar("L", self.L, low=0.0, low_open=True)
        lo, hi = self.krange
        check_int("krange.low", lo, low=1)
        check_int("krange.high", hi, low=lo)

    def max_mode(self):
        return self.kmax if self.kind == LOW_FREQ else self.krange[1]


@dataclass(frozen=True)
class FourierSample:
    """Coefficients of one drawn function: sum_k cos_k cos + sin_k sin."""

    k: np.ndarray
    cos: np.ndarray
    sin: np.ndarray
    L: float

    def values(self, x):
        x = np.asarray(x, dtype=float)
        ang = 2.0 * np.pi * np.outer(self.k, x) / self.L
        return self.cos @ np.cos(ang) + self.sin @ np.sin(ang)


def row_rng(seed, row):
    """Independent per-row generator derived from (seed, row index)."""
    return np.random.default_rng([int(seed), int(row)])


def sample_fourier(spec, rng):
    """Draw one FourierSample from the given distribution."""
    if spec.kind == LOW_FREQ:
        k = np.arange(spec.kmin, spec.kmax + 1)
        xi = rng.uniform(0.0, 1.0, k.size)
        cos = np.exp(-spec.decay * k.astype(float) ** 2) * xi
        sin = np.zeros_like(cos)
        return FourierSample(k=k, cos=cos, sin=sin, L=spec.L)
    xi = rng.uniform(0.0, 1.0, 2)
    lo, hi = spec.krange
    kk = rng.integers(lo, hi + 1, 2)
    k = np.array([kk[0], kk[1]])
    return FourierSample(k=k, cos=np.array([0.0, xi[1]]),
                         sin=np.array([xi[0], 0.0]), L=spec.L)


def spectral_multiplier(kernel, k, L, quad_n=2048):
    """Action of the operator on the mode exp(2 pi i k x / L).

    m_k = int_{-delta}^{delta} K(|z|) (1 - cos(2 pi k z / L)) dz by a
    composite trapezoid rule with ``quad_n`` panels; exactly 0 for k = 0.
    By translation invariance the same multiplier applies to sin and cos.
    """
    check_int("quad_n", quad_n, low=256)
    k = check_int("k", k, low=0)
    if k == 0:
        return 0.0
    delta = kernel_horizon(kernel)
    z = np.linspace(-delta, delta, quad_n + 1)
    g = kernel_values(kernel, np.abs(z)) * (1.0 - np.cos(2.0 * np.pi * k * z / L))
    return float(np.trapezoid(g, z))


def multiplier_table(kernel, kmax, L, quad_n=2048):
    return np.array([spectral_multiplier(kernel, k, L, quad_n) for k in range(kmax + 1)])
