"""Two-stage constrained kernel regression.

Stage 1 fits the nonnegative coefficients C by minibatch Adam on the data
misfit (ReLU applied inside the loss and as a projection after every step),
then computes the coercivity constant kappa of the fitted operator once.
Stage 2 fits the signed correction D under N(D) <= 1/(2 kappa) with an
augmented Lagrangian on the slack form H(D, theta) = 1/(2 kappa) - N(D) -
theta^2, Adam solving each inner subproblem.

The misfit is quadratic in the coefficients, so per-sample responses of each
basis kernel are precomputed once and every batch loss/gradient reduces to
small dense algebra.
"""

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .adam import AdamParams, adam_minimize
from .bernstein import bernstein_design
from .constraints import PerturbationBound
from .dataset import (LAYOUT_CELLS, LAYOUT_INTERVAL, LAYOUT_PERIODIC_EVAL)
from .exceptions import NotInvertibleError
from .grid import DIRICHLET, PERIODIC, horizon_offsets
from .kernels import (VARIANT_FRACTIONAL, VARIANT_STANDARD, KernelModel)
from .operator import (assemble_matrix, coercivity_kappa,
                       operator_lambda_min, solve_nonlocal)
from .validation import check_int, check_scalar

PAPER_CORPUS_SIZE = 50000


def xnorm(values):
    """Root-mean-square over a discrete point set."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty point set")
    return float(np.sqrt(np.mean(values**2)))


def paper_equivalent_epochs(n_samples, base_epochs, cap=20000):
    """Epoch budget holding the reference total gradient-step count.

    The optimizer's travel is bounded by lr * steps, so shrinking a corpus
    without rescaling epochs starves the fit; this keeps epochs * (N / batch)
    at its full-corpus value.
    """
    scale = PAPER_CORPUS_SIZE / max(1, n_samples)
    return int(min(cap, math.ceil(base_epochs * scale)))


@dataclass(frozen=True)
class TrainConfig:
    order: int
    delta: float
    variant: str = VARIANT_STANDARD
    stage: str = "both"            # "1", "2", "both"
    batch_size: int = 100
    lr: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    stage1_max_epochs: int = 500
    stagnation_rtol: float = 1e-4
    stagnation_window: int = 10
    al_epochs: int = 10
    al_step_max: int = 100
    al_lambda0: float = 0.0
    al_mu0: float = 1.0
    al_rho: float = 10.0
    al_shrink: float = 0.25
    al_tol: float = 1e-8
    al_mu_cap: float = 1e20
    feasibility_tol: float = 1e-6
    quad_panels: int = 2048
    seed: int = 0
    x_points: dict = None

    def __post_init__(self):
        check_int("order", self.order, low=0)
        check_scalar("delta", self.delta, low=0.0, low_open=True)
        if self.variant not in (VARIANT_STANDARD, VARIANT_FRACTIONAL):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.stage not in ("1", "2", "both"):
            raise ValueError(f"stage must be '1', '2' or 'both', got {self.stage!r}")
        check_scalar("al_shrink", self.al_shrink, low=0.0, high=1.0,
                     low_open=True, high_open=True)
        check_scalar("al_rho", self.al_rho, low=1.0, low_open=True)
        check_int("batch_size", self.batch_size, low=1)

    def adam_params(self, max_epochs=None, stagnation=True):
        return AdamParams(
            lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.adam_eps,
            batch_size=self.batch_size,
            max_epochs=self.stage1_max_epochs if max_epochs is None else max_epochs,
            stagnation_rtol=self.stagnation_rtol if stagnation else 0.0,
            stagnation_window=self.stagnation_window if stagnation else 10**9)


@dataclass
class TrainReport:
    config: dict
    stage1_epochs: int = 0
    stage1_trace: list = field(default_factory=list)
    stage1_loss: float = None
    kappa: float = None
    al_log: list = field(default_factory=list)
    stage2_loss: float = None
    termination: str = ""
    feasible: bool = None
    selected_iteration: int = None
    final_loss: float = None
    warnings: list = field(default_factory=list)
    wall_time: float = 0.0

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def trace_csv(self):
        """Rows (epoch, loss, H, mu, lambda); AL iterations follow stage 1.

        Fields that do not apply to a row carry nan so every cell parses as
        a float and the file re-emits byte-identically.
        """
        lines = ["epoch,loss,H,mu,lambda"]
        for e, loss in enumerate(self.stage1_trace):
            lines.append(f"{e},{loss:.17g},nan,nan,nan")
        for entry in self.al_log:
            lines.append(f"{entry['iteration']},{entry['misfit']:.17g},"
                         f"{entry['H']:.17g},{entry['mu']:.17g},{entry['lambda']:.17g}")
        return "\n".join(lines) + "\n"


@dataclass
class EvalReport:
    forward_loss: float
    forward_rel_error: float
    n_samples: int
    solution_rel_error: float = None
    details: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# data layout -> training arrays

def resolve_x_indices(grid, layout, descriptor=None):
    """Indices into the free-node vector realizing the discrete X point set.

    Repeats are allowed (piecewise-constant fields evaluated on a finer X
    set); periodic eval layouts wrap the duplicate endpoint back to node 0.
    """
    if descriptor is None:
        if layout == LAYOUT_PERIODIC_EVAL:
            descriptor = {"kind": "eval_nodes"}
        elif layout == LAYOUT_CELLS:
            descriptor = {"kind": "uniform", "n_points": 10 * grid.n}
        else:
            descriptor = {"kind": "free_nodes"}
    kind = descriptor.get("kind")
    if kind == "eval_nodes":
        return np.arange(grid.n + 1) % grid.n
    if kind == "free_nodes":
        return np.arange(grid.n_free)
    if kind == "uniform":
        n_points = check_int("n_points", descriptor["n_points"], low=1)
        x = grid.a + grid.length * np.arange(n_points) / n_points
        if layout == LAYOUT_CELLS:
            return np.floor((x - grid.a) / grid.h).astype(int) % grid.n
        return np.round((x - grid.a) / grid.h).astype(int) % grid.n
    if kind == "uniform_range":
        lo, hi = descriptor["lo"], descriptor["hi"]
        n_points = check_int("n_points", descriptor["n_points"], low=2)
        x = np.linspace(lo, hi, n_points)
        free = grid.free_nodes
        idx = np.round((x - free[0]) / grid.h).astype(int)
        if np.any(idx < 0) or np.any(idx >= free.size) \
                or np.max(np.abs(free[idx] - x)) > 1e-9 * grid.h + 1e-12:
            raise ValueError("X points must coincide with free grid nodes")
        return idx
    raise ValueError(f"unknown X-point descriptor {descriptor!r}")


def training_arrays(dataset, x_points=None):
    """Split a dataset into operator inputs and X-point targets.

    Returns (U_free, F_x, x_idx): node values feeding the operator, the
    forcing evaluated on the X set, and the free-node indices of X.
    """
    grid = dataset.grid
    layout = dataset.layout
    x_idx = resolve_x_indices(grid, layout,
                              x_points or dataset.meta.get("x_points"))
    if layout == LAYOUT_PERIODIC_EVAL:
        U = dataset.u[:, :grid.n]
        F = dataset.f[:, :grid.n]
    elif layout == LAYOUT_CELLS:
        U = dataset.u
        F = dataset.f
    elif layout == LAYOUT_INTERVAL:
        U = dataset.u[:, 1:-1]
        F = dataset.f[:, 1:-1]
    else:
        raise ValueError(f"unknown layout {layout!r}")
    return U, F[:, x_idx], x_idx


# ---------------------------------------------------------------------------
# quadratic response machinery (standard variant)

@dataclass
class ResponseGrams:
    Q: np.ndarray          # (N, M+1, M+1)
    b: np.ndarray          # (N, M+1)
    c: np.ndarray          # (N,)

    @property
    def n_samples(self):
        return self.Q.shape[0]

    def misfit(self, coeffs, idx=None):
        """Mean over samples of the squared X-norm residual at C+D = coeffs.

        The quadratic form can dip a few ulps below zero at an exact root;
        the value is clipped since the misfit is a mean of squares.
        """
        Q, b, c = ((self.Q, self.b, self.c) if idx is None
                   else (self.Q[idx], self.b[idx], self.c[idx]))
        return max(float(coeffs @ Q.mean(0) @ coeffs
                         - 2.0 * b.mean(0) @ coeffs + c.mean(0)), 0.0)


def basis_matrices(grid, delta, order):
    """Operator matrices of the unit-coefficient Bernstein basis kernels."""
    offsets, weights = horizon_offsets(grid, delta)
    Boff = bernstein_design(order, offsets * grid.h / delta) / delta**3
    mats = []
    if grid.bc == PERIODIC:
        n = grid.n
        idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        for m in range(order + 1):
            wk = weights * Boff[:, m]
            first = np.zeros(n)
            first[0] = 2.0 * wk.sum()
            for off, w in zip(offsets, wk):
                first[off % n] -= w
                first[-off % n] -= w
            mats.append(first[idx])
    else:
        from scipy.linalg import toeplitz
        n = grid.n_free
        for m in range(order + 1):
            wk = weights * Boff[:, m]
            col = np.zeros(n)
            col[0] = 2.0 * wk.sum()
            upto = min(len(offsets), n - 1)
            col[1:upto + 1] = -wk[:upto]
            mats.append(toeplitz(col))
    return mats


def build_grams(U_free, F_x, grid, delta, order, x_idx, chunk=2000):
    """Per-sample quadratic forms of the misfit in the basis coefficients."""
    n = U_free.shape[0]
    n_x = len(x_idx)
    mats = basis_matrices(grid, delta, order)
    Q = np.empty((n, order + 1, order + 1))
    b = np.empty((n, order + 1))
    c = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        Ub = U_free[lo:hi]
        R = np.stack([Ub @ A.T for A in mats], axis=2)[:, x_idx, :]
        Fb = F_x[lo:hi]
        Q[lo:hi] = np.einsum("ixm,ixk->imk", R, R) / n_x
        b[lo:hi] = np.einsum("ixm,ix->im", R, Fb) / n_x
        c[lo:hi] = np.einsum("ix,ix->i", Fb, Fb) / n_x
    return ResponseGrams(Q=Q, b=b, c=c)


def loss_l1(C, grams):
    """Stage-1 loss at coefficients C; the ReLU is applied inside."""
    return grams.misfit(np.maximum(np.asarray(C, dtype=float), 0.0))


def _l1_step(grams):
    def step(C, idx):
        Cp = np.maximum(C, 0.0)
        Qm = grams.Q[idx].mean(0)
        bm = grams.b[idx].mean(0)
        cm = grams.c[idx].mean(0)
        loss = max(float(Cp @ Qm @ Cp - 2.0 * bm @ Cp + cm), 0.0)
        grad = 2.0 * (Qm @ Cp - bm) * (C > 0.0)
        return loss, grad
    return step


def stage1_fit(grams, grid, config, rng):
    """Fit C >= 0 by projected Adam, then compute kappa of the fitted operator."""
    C0 = rng.uniform(0.0, 1.0, config.order + 1)
    C, trace = adam_minimize(
        _l1_step(grams), C0, grams.n_samples, config.adam_params(), rng,
        projection=lambda x: np.maximum(x, 0.0))
    C = np.maximum(C, 0.0)
    model = KernelModel(delta=config.delta, order=config.order, C=C)
    kappa = coercivity_kappa(assemble_matrix(model, grid))
    return C, kappa, trace


def stage2_fit(grams, grid, config, C_star, kappa, rng):
    """Augmented Lagrangian loop for the signed correction D.

    Follows the two-stage scheme exactly: each outer iteration runs a fixed
    Adam budget on the penalized loss, then updates (lambda, mu) from |H|.
    Among the outer iterates that satisfy the bound (D = 0 included, it is
    always feasible), the one with the smallest full-data misfit is returned,
    so the correction can never lose to the feasible start.
    """
    bound = PerturbationBound(config.delta, config.order, grid,
                              config.quad_panels)
    half_inv = 1.0 / (2.0 * kappa)
    m1 = config.order + 1
    state = {"lam": config.al_lambda0, "mu": config.al_mu0}

    def l2_step(z, idx):
        D, th = z[:-1], z[-1]
        coeffs = C_star + D
        Qm = grams.Q[idx].mean(0)
        bm = grams.b[idx].mean(0)
        cm = grams.c[idx].mean(0)
        mis = float(coeffs @ Qm @ coeffs - 2.0 * bm @ coeffs + cm)
        gD = 2.0 * (Qm @ coeffs - bm)
        Nv, gN = bound.value_grad(D)
        Hv = half_inv - Nv - th * th
        coef = state["lam"] + state["mu"] * Hv
        loss = mis + state["lam"] * Hv + 0.5 * state["mu"] * Hv * Hv
        return loss, np.concatenate([gD - coef * gN, [-2.0 * coef * th]])

    amp = 1.0 / np.sqrt(m1)
    z = np.concatenate([rng.uniform(-amp, amp, m1), [1.0]])
    H_prev = half_inv - bound.value(z[:-1]) - z[-1] ** 2
    best = (grams.misfit(C_star), np.zeros(m1), 0)
    inner = config.adam_params(max_epochs=config.al_epochs, stagnation=False)
    log = []
    termination = "step_max"
    raw_feasible = True
    for s in range(1, config.al_step_max + 1):
        z, _ = adam_minimize(l2_step, z, grams.n_samples, inner, rng)
        D, th = z[:-1], z[-1]
        Nv = bound.value(D)
        Hs = half_inv - Nv - th * th
        mis = grams.misfit(C_star + D)
        raw_feasible = Nv <= half_inv + config.feasibility_tol
        log.append({"iteration": s, "H": float(Hs), "mu": state["mu"],
                    "lambda": state["lam"], "N": float(Nv),
                    "misfit": mis, "feasible": bool(raw_feasible)})
        if raw_feasible and mis < best[0]:
            best = (mis, D.copy(), s)
        if abs(Hs) <= config.al_tol:
            termination = "converged"
            break
        if abs(Hs) >= config.al_shrink * abs(H_prev):
            state["mu"] *= config.al_rho
            if state["mu"] >= config.al_mu_cap:
                termination = "mu_cap"
                break
        else:
            state["lam"] += state["mu"] * Hs
        H_prev = Hs
    warnings_out = []
    if not raw_feasible:
        warnings_out.append(
            "augmented-Lagrangian exit iterate violates the bound; "
            "returning the best feasible iterate")
    D_best = best[1]
    assert bound.value(D_best) <= half_inv + config.feasibility_tol
    return D_best, log, termination, best[2], warnings_out


# ---------------------------------------------------------------------------
# fractional variant: joint (C, alpha) fit with convolution responses

def _next_pow2(n):
    return 1 << (n - 1).bit_length()


def fit_fractional(U_interval, F_x, grid, config, rng, x_idx):
    """Joint Adam fit of (C, alpha) for the singularity-scaled kernel.

    Responses are evaluated by FFT convolution of the zero-extended samples
    with the symmetric horizon stencil; the alpha gradient differentiates the
    stencil weights analytically (d/d alpha r^-alpha = -ln r * r^-alpha).
    """
    if grid.bc != DIRICHLET:
        raise ValueError("fractional fit requires a Dirichlet grid")
    offsets, weights = horizon_offsets(grid, config.delta)
    h = grid.h
    r_off = offsets * h
    Boff = bernstein_design(config.order, r_off / config.delta)
    n_cols = U_interval.shape[1]
    if n_cols != grid.n + 1:
        raise ValueError("fractional samples must live on the n+1 interval nodes")
    R = len(offsets)
    NF = _next_pow2(n_cols + 2 * R + 1)
    Upad = np.zeros((U_interval.shape[0], NF))
    Upad[:, :n_cols] = U_interval
    Uhat = np.fft.rfft(Upad, axis=1)
    log_r = np.log(r_off)
    alpha_max = 3.0  # d + 2 with d = 1
    n_free = grid.n - 1
    m1 = config.order + 1

    def stencil_fft(wk):
        st = np.zeros(NF)
        st[0] = 2.0 * wk.sum()
        st[offsets] -= wk
        st[NF - offsets] -= wk
        return np.fft.rfft(st)

    def responses(idx, profiles):
        stf = np.stack([stencil_fft(weights * p) for p in profiles])
        out = np.fft.irfft(Uhat[idx][:, None, :] * stf[None, :, :], n=NF, axis=2)
        return out[:, :, 1:1 + n_free][:, :, x_idx]

    def step(z, idx):
        C, alpha = z[:-1], z[-1]
        Cp = np.maximum(C, 0.0)
        base = r_off ** (-alpha)
        profiles = [Boff[:, m] * base for m in range(m1)]
        profiles.append((Boff @ Cp) * base * (-log_r))
        resp = responses(idx, profiles)
        model_resp = np.tensordot(Cp, resp[:, :m1, :], axes=(0, 1))
        res = model_resp - F_x[idx]
        loss = float(np.mean(np.mean(res**2, axis=1)))
        gC = 2.0 * np.array([np.mean(np.mean(res * resp[:, m, :], axis=1))
                             for m in range(m1)]) * (C > 0.0)
        gA = 2.0 * float(np.mean(np.mean(res * resp[:, m1, :], axis=1)))
        return loss, np.concatenate([gC, [gA]])

    def project(z):
        z = z.copy()
        z[:-1] = np.maximum(z[:-1], 0.0)
        z[-1] = min(max(z[-1], 0.0), alpha_max - 1e-12)
        return z

    z0 = np.concatenate([rng.uniform(0.0, 1.0, m1), [0.0]])
    z, trace = adam_minimize(step, z0, U_interval.shape[0],
                             config.adam_params(), rng, projection=project)
    z = project(z)
    return z[:-1], float(z[-1]), trace


def fractional_full_loss(C, alpha, U_interval, F_x, grid, config, x_idx,
                         chunk=1000):
    """Full-data misfit of a fractional model (same responses as the fit)."""
    model = KernelModel(delta=config.delta, order=config.order, C=C,
                        alpha=alpha, variant=VARIANT_FRACTIONAL)
    A = assemble_matrix(model, grid).A
    total = 0.0
    n = U_interval.shape[0]
    for lo in range(0, n, chunk):
        Ub = U_interval[lo:lo + chunk, 1:-1]
        res = (Ub @ A.T)[:, x_idx] - F_x[lo:lo + chunk]
        total += float(np.sum(np.mean(res**2, axis=1)))
    return total / n


# ---------------------------------------------------------------------------
# high-level driver

def train(dataset, config, stage1_model=None):
    """Run the configured stages on a dataset; returns (model, report).

    ``stage1_model`` supplies (C, kappa inputs) when resuming at stage 2.
    """
    t0 = time.perf_counter()
    grid = dataset.grid
    report = TrainReport(config=asdict(config))
    U_free, F_x, x_idx = training_arrays(dataset, config.x_points)

    if config.variant == VARIANT_FRACTIONAL:
        if dataset.layout != LAYOUT_INTERVAL:
            raise ValueError("fractional variant expects interval-node data")
        rng = np.random.default_rng([config.seed, 303])
        U_interval = dataset.u
        C, alpha, trace = fit_fractional(U_interval, F_x, grid, config, rng,
                                         x_idx)
        model = KernelModel(delta=config.delta, order=config.order, C=C,
                            alpha=alpha, variant=VARIANT_FRACTIONAL)
        report.stage1_epochs = len(trace)
        report.stage1_trace = trace
        final = fractional_full_loss(C, alpha, U_interval, F_x, grid, config,
                                     x_idx)
        report.stage1_loss = final
        report.final_loss = final
        report.termination = "stage1"
        report.wall_time = time.perf_counter() - t0
        return model, report

    grams = build_grams(U_free, F_x, grid, config.delta, config.order, x_idx)

    if config.stage in ("1", "both") or stage1_model is None:
        rng1 = np.random.default_rng([config.seed, 101])
        C, kappa, trace = stage1_fit(grams, grid, config, rng1)
        report.stage1_epochs = len(trace)
        report.stage1_trace = trace
    else:
        C = np.asarray(stage1_model.C, dtype=float)
        kappa = coercivity_kappa(assemble_matrix(
            KernelModel(delta=config.delta, order=config.order, C=C), grid))
    report.kappa = kappa
    report.stage1_loss = grams.misfit(np.maximum(C, 0.0))

    D = np.zeros(config.order + 1)
    termination = "stage1"
    if config.stage in ("2", "both"):
        rng2 = np.random.default_rng([config.seed, 202])
        D, log, termination, selected, warn = stage2_fit(
            grams, grid, config, C, kappa, rng2)
        report.al_log = log
        report.selected_iteration = selected
        report.warnings.extend(warn)
        report.stage2_loss = grams.misfit(C + D)
        report.feasible = True
    report.termination = termination
    report.final_loss = grams.misfit(C + D)
    model = KernelModel(delta=config.delta, order=config.order, C=C, D=D)
    report.wall_time = time.perf_counter() - t0
    return model, report


def evaluate(model, dataset, x_points=None, solve=False):
    """Forward metrics of a model on a dataset.

    Reports the forward validation loss (mean squared X-norm residual of
    L u_i - f_i) and the aggregate forward relative error. With
    ``solve=True`` each forcing row is additionally inverted through the
    model and compared to the stored solution; on periodic grids the
    comparison is between zero-mean representatives (the constant mode is
    invisible to the operator). Raises NotInvertibleError if the learnt
    operator cannot be inverted.
    """
    grid = dataset.grid
    U_free, F_x, x_idx = training_arrays(dataset, x_points)
    A = assemble_matrix(model, grid).A
    res = (U_free @ A.T)[:, x_idx] - F_x
    per_sample = np.mean(res**2, axis=1)
    loss = float(np.mean(per_sample))
    denom = float(np.sum(np.mean(F_x**2, axis=1)))
    rel = math.sqrt(float(np.sum(per_sample)) / denom) if denom > 0 else 0.0
    report = EvalReport(forward_loss=loss, forward_rel_error=rel,
                        n_samples=dataset.n_samples)
    if solve:
        report.solution_rel_error = _mean_solution_error(
            model, dataset, U_free, x_idx)
    return report


def _mean_solution_error(model, dataset, U_free, x_idx):
    # one factorization, all right-hand sides at once
    grid = dataset.grid
    if dataset.layout == LAYOUT_PERIODIC_EVAL:
        F_nodes = dataset.f[:, :grid.n]
    elif dataset.layout == LAYOUT_CELLS:
        F_nodes = dataset.f
    else:
        F_nodes = dataset.f[:, 1:-1]
    lam = operator_lambda_min(assemble_matrix(model, grid))
    if lam <= 1e-14:
        raise NotInvertibleError(
            f"operator is singular or indefinite: lambda_min={lam:.6e}",
            lambda_min=lam)
    A = assemble_matrix(model, grid).A
    if grid.bc == PERIODIC:
        n = grid.n
        K = np.zeros((n + 1, n + 1))
        K[:n, :n] = A
        K[:n, n] = 1.0
        K[n, :n] = 1.0
        rhs = np.zeros((n + 1, F_nodes.shape[0]))
        rhs[:n] = (F_nodes - F_nodes.mean(axis=1, keepdims=True)).T
        U_pred = np.linalg.solve(K, rhs)[:n].T
        U_ref = U_free - U_free.mean(axis=1, keepdims=True)
    else:
        U_pred = np.linalg.solve(A, F_nodes.T).T
        U_ref = U_free
    diff = (U_pred - U_ref)[:, x_idx]
    ref = U_ref[:, x_idx]
    per_row = np.sqrt(np.mean(diff**2, axis=1) / np.mean(ref**2, axis=1))
    return float(np.mean(per_row))


def solution_error(model, grid, f_free, u_ref_free, x_idx, q=None):
    """Relative X-norm error of the model's solve against a reference."""
    u_pred = solve_nonlocal(model, grid, f_free, q=q)
    diff = (u_pred - u_ref_free)[x_idx]
    ref = u_ref_free[x_idx]
    return xnorm(diff) / xnorm(ref)
