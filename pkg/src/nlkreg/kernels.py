"""Radial kernel models: the learnable Bernstein-coefficient kernel and the
closed-form kernels used to manufacture data.

Every kernel is radial and compactly supported on [0, delta]. The learnable
model comes in two variants:

``standard``
    K(r) = sum_m (C_m + D_m) / delta^(d+2) * B_{m,M}(r/delta), with C >= 0
    carrying the nonnegative part and D the signed correction.

``fractional``
    K(r) = sum_m C_m * B_{m,M}(r/delta) / r^alpha, a singularity-scaled
    variant with a tunable exponent alpha in [0, d+2) and D identically zero.
"""

import json
import math
import zlib
from dataclasses import dataclass

import numpy as np

from .bernstein import bernstein_design
from .exceptions import SingularPointError
from .validation import check_int, check_scalar

VARIANT_STANDARD = "standard"
VARIANT_FRACTIONAL = "fractional"

# Amplitude of the sign-changing cosine test kernel (used verbatim).
COSINE_AMPLITUDE = 21.4615

LINEAR_RAMP = "linear_ramp"
COSINE_SIGN_CHANGING = "cosine_sign_changing"
TRUNCATED_FRACTIONAL = "truncated_fractional"

MODEL_FORMAT_VERSION = 1


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class KernelModel:
    """Learnable radial kernel parametrized by Bernstein coefficients."""

    delta: float
    order: int
    C: np.ndarray
    D: np.ndarray = None
    alpha: float = None
    d: int = 1
    variant: str = VARIANT_STANDARD

    def __post_init__(self):
        check_scalar("delta", self.delta, low=0.0, low_open=True)
        check_int("order", self.order, low=0)
        check_int("d", self.d, low=1, high=1)
        C = _readonly(self.C)
        D = _readonly(np.zeros(self.order + 1) if self.D is None else self.D)
        if C.shape != (self.order + 1,) or D.shape != (self.order + 1,):
            raise ValueError(
                f"C and D must have length order+1={self.order + 1}, "
                f"got {C.shape} and {D.shape}"
            )
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        if self.variant == VARIANT_STANDARD:
            if self.alpha is not None:
                raise ValueError("alpha is only meaningful for the fractional variant")
        elif self.variant == VARIANT_FRACTIONAL:
            if np.any(D != 0.0):
                raise ValueError("fractional variant carries no signed correction D")
            alpha = 0.0 if self.alpha is None else float(self.alpha)
            check_scalar("alpha", alpha, low=0.0, high=self.d + 2, high_open=True)
            object.__setattr__(self, "alpha", alpha)
        else:
            raise ValueError(f"unknown variant {self.variant!r}")

    def fingerprint(self):
        payload = (f"{self.variant}|{self.d}|{self.delta!r}|{self.order}|"
                   f"{self.alpha!r}").encode() + self.C.tobytes() + self.D.tobytes()
        return f"kernelmodel-{zlib.crc32(payload):08x}"


@dataclass(frozen=True)
class ManufacturedKernel:
    """Closed-form kernel used to generate synthetic training data."""

    kind: str
    delta: float
    s: float = None

    def __post_init__(self):
        check_scalar("delta", self.delta, low=0.0, low_open=True)
        if self.kind not in (LINEAR_RAMP, COSINE_SIGN_CHANGING, TRUNCATED_FRACTIONAL):
            raise ValueError(f"unknown manufactured kernel kind {self.kind!r}")
        if self.kind == TRUNCATED_FRACTIONAL:
            if self.s is None:
                raise ValueError("truncated_fractional requires the order s")
            check_scalar("s", self.s, low=0.0, high=1.0, low_open=True, high_open=True)

    def fingerprint(self):
        return f"manufactured-{self.kind}-{self.delta!r}-{self.s!r}"


def fractional_normalization(d, s):
    """Normalization constant of the d-dimensional fractional Laplacian kernel.

    C_{d,s} = 4^s Gamma(d/2 + s) / (pi^(d/2) |Gamma(-s)|).
    """
    check_int("d", d, low=1)
    check_scalar("s", s, low=0.0, high=1.0, low_open=True, high_open=True)
    return (4.0**s * math.gamma(d / 2 + s)
            / (math.pi ** (d / 2) * abs(math.gamma(-s))))


def kernel_eval(model, r):
    """Evaluate a KernelModel at radii r >= 0 (scalar or array).

    Returns 0 beyond the horizon. For the fractional variant the value at
    r = 0 is the alpha = 0 limit; quadratures never consume it because the
    self node is excluded.
    """
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    if np.any(r < 0.0):
        raise ValueError("r must be nonnegative")
    inside = r <= model.delta
    out = np.zeros_like(r)
    t = np.where(inside, r / model.delta, 0.0)
    B = bernstein_design(model.order, t)
    if model.variant == VARIANT_STANDARD:
        vals = B @ (model.C + model.D) / model.delta ** (model.d + 2)
    else:
        with np.errstate(divide="ignore"):
            scale = np.where(r > 0.0, r ** (-model.alpha), 1.0)
        vals = (B @ model.C) * scale
    out[inside] = vals[inside]
    return float(out[0]) if scalar else out


def manufactured_eval(kernel, r):
    """Evaluate a ManufacturedKernel at radii r >= 0 (scalar or array)."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    if np.any(r < 0.0):
        raise ValueError("r must be nonnegative")
    d3 = kernel.delta**3
    inside = r <= kernel.delta
    out = np.zeros_like(r)
    if kernel.kind == LINEAR_RAMP:
        out[inside] = 4.0 / d3 * (r[inside] / kernel.delta)
    elif kernel.kind == COSINE_SIGN_CHANGING:
        out[inside] = (COSINE_AMPLITUDE / d3
                       * np.cos(3.0 * np.pi * r[inside] / (5.0 * kernel.delta)))
    else:
        if np.any(inside & (r == 0.0)):
            raise SingularPointError(
                "truncated fractional kernel is singular at r = 0")
        c = fractional_normalization(1, kernel.s)
        out[inside] = c / r[inside] ** (1.0 + 2.0 * kernel.s)
    return float(out[0]) if scalar else out


def kernel_values(kernel, r):
    """Dispatch kernel evaluation over both kernel families."""
    if isinstance(kernel, KernelModel):
        return kernel_eval(kernel, r)
    if isinstance(kernel, ManufacturedKernel):
        return manufactured_eval(kernel, r)
    raise TypeError(f"not a kernel: {type(kernel).__name__}")


def kernel_horizon(kernel):
    return kernel.delta


def _g17(x):
    return format(float(x), ".17g")


def model_to_json(model):
    """Serialize a KernelModel; all numbers carry 17 significant digits."""
    alpha = "null" if model.alpha is None else _g17(model.alpha)
    c_list = ", ".join(_g17(v) for v in model.C)
    d_list = ", ".join(_g17(v) for v in model.D)
    return (
        "{\n"
        f'  "format_version": {MODEL_FORMAT_VERSION},\n'
        f'  "variant": "{model.variant}",\n'
        f'  "d": {model.d},\n'
        f'  "delta": {_g17(model.delta)},\n'
        f'  "order": {model.order},\n'
        f'  "C": [{c_list}],\n'
        f'  "D": [{d_list}],\n'
        f'  "alpha": {alpha}\n'
        "}\n"
    )


def save_model(model, path):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(model_to_json(model))


def load_model(path):
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format: {doc.get('format_version')!r}")
    return KernelModel(
        delta=doc["delta"],
        order=doc["order"],
        C=np.asarray(doc["C"], dtype=float),
        D=np.asarray(doc["D"], dtype=float),
        alpha=doc["alpha"],
        d=doc["d"],
        variant=doc["variant"],
    )
