"""Command-line front end.

Subcommands: ``generate`` (build a dataset directory), ``train`` (fit a
kernel to a dataset), ``eval`` (forward metrics of a model on a dataset),
``solve`` (invert a model for a configured forcing), and ``reproduce``
(one-command benchmark families with CSV outputs and a pass/fail summary).

Exit codes: 0 success (warnings allowed), 1 usage or configuration error,
2 numerical failure.
"""

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from .darcy import Microstructure, gen_darcy
from .dataset import read_dataset, write_dataset
from .exceptions import (ConfigError, DatasetFormatError,
                         DegenerateKernelError, DivergenceError,
                         HorizonError, NlkregError, NonZeroMeanWarning,
                         NotInvertibleError, SolvabilityError)
from .fourier import FourierSpec
from .fractional import (analytic_constant_forcing, gen_fractional,
                         interval_grid)
from .generators import (biharmonic_test_forcing, gen_biharmonic,
                         gen_manufactured)
from .grid import PERIODIC, Grid1D
from .kernels import (COSINE_SIGN_CHANGING, LINEAR_RAMP,
                      ManufacturedKernel, load_model, save_model)
from .operator import solve_nonlocal
from .regression import TrainConfig, evaluate, train
from .experiments import run_experiment, write_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

_KERNEL_KINDS = {"linear_ramp": LINEAR_RAMP,
                 "cosine_sign_changing": COSINE_SIGN_CHANGING}


def _load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None


def _check_keys(doc, allowed, required, ctx):
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(f"{ctx}: unknown keys {unknown}")
    missing = sorted(set(required) - set(doc))
    if missing:
        raise ConfigError(f"{ctx}: missing required keys {missing}")


def _write_resolved(out_dir, doc, name="resolved_config.json"):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_generate(args):
    doc = _load_config(args.config)
    ctx = args.config
    _check_keys(doc, {"kind", "n_samples", "seed", "delta", "kernel",
                      "corpus", "grid_n", "c", "s", "lambda_min", "omega",
                      "sub_width", "kappa1", "kappa2", "elems_per_sub",
                      "spec"},
                {"kind", "n_samples", "seed"}, ctx)
    kind = doc["kind"]
    n = int(doc["n_samples"])
    seed = int(doc["seed"])
    if kind == "manufactured":
        if "delta" not in doc or "kernel" not in doc:
            raise ConfigError(f"{ctx}: manufactured needs 'delta' and 'kernel'")
        if doc["kernel"] not in _KERNEL_KINDS:
            raise ConfigError(f"{ctx}: kernel must be one of "
                              f"{sorted(_KERNEL_KINDS)}")
        grid = Grid1D(0.0, 1.0, int(doc.get("grid_n", 100)), bc=PERIODIC)
        kernel = ManufacturedKernel(kind=_KERNEL_KINDS[doc["kernel"]],
                                    delta=float(doc["delta"]))
        low = FourierSpec(kind="low", kmax=100, L=grid.length)
        high = FourierSpec(kind="high", L=grid.length)
        corpus = doc.get("corpus", "low")
        specs = {"low": [low], "high": [high], "mixed": [low, high]}.get(corpus)
        if specs is None:
            raise ConfigError(f"{ctx}: corpus must be low, high or mixed")
        ds = gen_manufactured(kernel, specs, n, grid, seed)
    elif kind == "biharmonic":
        for key in ("c", "delta"):
            if key not in doc:
                raise ConfigError(f"{ctx}: biharmonic needs '{key}'")
        grid = Grid1D(0.0, 1.0, int(doc.get("grid_n", 100)), bc=PERIODIC)
        ds = gen_biharmonic(float(doc["c"]), float(doc["delta"]), n, grid, seed)
    elif kind == "darcy":
        if "lambda_min" not in doc:
            raise ConfigError(f"{ctx}: darcy needs 'lambda_min'")
        ms = Microstructure(
            omega=float(doc.get("omega", 10.0)),
            sub_width=float(doc.get("sub_width", 0.1)),
            kappa1=float(doc.get("kappa1", 1.0)),
            kappa2=float(doc.get("kappa2", 4.0)),
            elems_per_sub=int(doc.get("elems_per_sub", 16)))
        lam = float(doc["lambda_min"])
        if lam > ms.omega:
            raise ConfigError(f"{ctx}: lambda_min={lam} exceeds the domain "
                              f"length {ms.omega}")
        ds = gen_darcy(ms, n, lam, seed)
    elif kind == "fractional":
        if "s" not in doc or "delta" not in doc:
            raise ConfigError(f"{ctx}: fractional needs 's' and 'delta'")
        grid = interval_grid(int(doc.get("grid_n", 200)), float(doc["delta"]))
        ds = gen_fractional(float(doc["s"]), n, grid, seed)
    else:
        raise ConfigError(f"{ctx}: unknown generator kind {kind!r}")
    write_dataset(ds, args.out)
    _write_resolved(args.out, doc)
    print(f"wrote dataset ({ds.n_samples} samples) to {args.out}")
    return EXIT_OK


_TRAIN_KEYS = {"order", "delta", "variant", "batch_size", "lr",
               "stage1_max_epochs", "stagnation_rtol", "stagnation_window",
               "al_epochs", "al_step_max", "seed", "x_points", "quad_panels"}


def cmd_train(args):
    doc = _load_config(args.config)
    _check_keys(doc, _TRAIN_KEYS, {"order", "delta"}, args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    config = TrainConfig(stage=args.stage, **doc)
    ds = read_dataset(args.dataset)
    stage1_model = load_model(args.model) if args.model else None
    if args.stage == "2" and stage1_model is None:
        print("note: --stage 2 without --model runs both stages in sequence",
              file=sys.stderr)
    model, report = train(ds, config, stage1_model=stage1_model)
    os.makedirs(args.out, exist_ok=True)
    save_model(model, os.path.join(args.out, "model.json"))
    with open(os.path.join(args.out, "train_report.json"), "w") as fh:
        fh.write(report.to_json())
    with open(os.path.join(args.out, "loss_trace.csv"), "w") as fh:
        fh.write(report.trace_csv())
    _write_resolved(args.out, {"train": doc, "stage": args.stage,
                               "dataset": args.dataset})
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"trained model written to {args.out} "
          f"(final loss {report.final_loss:.6e})")
    return EXIT_OK


def cmd_eval(args):
    model = load_model(args.model)
    ds = read_dataset(args.dataset)
    report = evaluate(model, ds)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "eval_report.json"), "w") as fh:
        fh.write(report.to_json())
    _write_resolved(args.out, {"model": args.model, "dataset": args.dataset})
    print(f"forward loss {report.forward_loss:.6e}, "
          f"relative error {report.forward_rel_error:.6e}")
    return EXIT_OK


def cmd_solve(args):
    doc = _load_config(args.config)
    _check_keys(doc, {"forcing", "grid_n"}, {"forcing"}, args.config)
    model = load_model(args.model)
    forcing = doc["forcing"]
    _check_keys(forcing, {"kind", "harmonic", "amplitude", "phase", "c",
                          "value", "reference"}, {"kind"},
                f"{args.config}:forcing")
    kind = forcing["kind"]
    if kind in ("harmonic", "biharmonic_test"):
        grid = Grid1D(0.0, 1.0, int(doc.get("grid_n", 100)), bc=PERIODIC)
        x = grid.nodes
        if kind == "harmonic":
            k = int(forcing.get("harmonic", 1))
            amp = float(forcing.get("amplitude", 1.0))
            phase = forcing.get("phase", "cos")
            if phase not in ("cos", "sin"):
                raise ConfigError(f"{args.config}: phase must be cos or sin")
            ang = 2.0 * np.pi * k * x / grid.length
            f = amp * (np.cos(ang) if phase == "cos" else np.sin(ang))
            u_ref = None
        else:
            if "c" not in forcing:
                raise ConfigError(f"{args.config}: biharmonic_test needs 'c'")
            f, u_ref = biharmonic_test_forcing(float(forcing["c"]),
                                               model.delta, grid)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NonZeroMeanWarning)
            u = solve_nonlocal(model, grid, f)
        notes = [str(w.message) for w in caught
                 if issubclass(w.category, NonZeroMeanWarning)]
        x_out = grid.eval_nodes
        u_out = np.append(u, u[0])
        f_out = np.append(f, f[0])
        u_ref_out = None if u_ref is None else np.append(u_ref, u_ref[0])
    elif kind == "constant":
        grid = interval_grid(int(doc.get("grid_n", 200)), model.delta)
        value = float(forcing.get("value", 1.0))
        f = np.full(grid.n_free, value)
        u = solve_nonlocal(model, grid, f, q=0.0)
        notes = []
        x_out = grid.eval_nodes
        u_out = np.concatenate([[0.0], u, [0.0]])
        f_out = np.full(grid.n + 1, value)
        # "reference": s emits the closed-form fractional solution column
        u_ref_out = None
        if forcing.get("reference") is not None:
            u_ref_out = value * analytic_constant_forcing(
                x_out, float(forcing["reference"]))
    else:
        raise ConfigError(f"{args.config}: unknown forcing kind {kind!r}")
    os.makedirs(args.out, exist_ok=True)
    header = ["x", "u_pred", "f"] + ([] if u_ref_out is None else ["u_ref"])
    rows = []
    for i in range(x_out.size):
        row = [x_out[i], u_out[i], f_out[i]]
        if u_ref_out is not None:
            row.append(u_ref_out[i])
        rows.append(row)
    write_csv(os.path.join(args.out, "solution.csv"), header, rows)
    meta = {"model": args.model, "config": doc, "notes": notes}
    _write_resolved(args.out, meta)
    for note in notes:
        print(f"warning: {note}", file=sys.stderr)
    print(f"solution ({x_out.size} rows) written to {args.out}")
    return EXIT_OK


def cmd_reproduce(args):
    out = args.out
    os.makedirs(out, exist_ok=True)
    summary = run_experiment(args.experiment, out, scale=args.scale,
                             seed=args.seed if args.seed is not None else 0)
    _write_resolved(out, {"experiment": args.experiment, "scale": args.scale,
                          "seed": args.seed})
    status = "PASS" if summary.get("pass") else "FAIL"
    print(f"{args.experiment}: {status} (details in {out}/summary.json)")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nlkreg",
        description="Learn well-posed nonlocal diffusion kernels from "
                    "synthetic high-fidelity data.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a dataset directory")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit a kernel to a dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", help="stage-1 model to resume from")
    p.add_argument("--stage", choices=["1", "2", "both"], default="both")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="forward metrics of a model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("solve", help="solve the learnt problem for a forcing")
    p.add_argument("--model", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("reproduce", help="run a benchmark family end to end")
    p.add_argument("experiment",
                   choices=["manufactured", "darcy", "biharmonic",
                            "fractional"])
    p.add_argument("--out", required=True)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_reproduce)

    for sp in sub.choices.values():
        sp.add_argument("--threads", type=int, default=None,
                        help="cap BLAS worker threads (best effort)")
    return parser


def _apply_threads(n):
    if n is None:
        return
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(limits=n)
    except ImportError:
        print("note: threadpoolctl not installed; --threads ignored",
              file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    _apply_threads(args.threads)
    try:
        return args.func(args)
    except (ConfigError, DatasetFormatError, SolvabilityError, HorizonError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NotInvertibleError, DegenerateKernelError, DivergenceError) as exc:
        extra = ""
        if isinstance(exc, NotInvertibleError) and exc.lambda_min is not None:
            extra = f" (lambda_min={exc.lambda_min:.6e})"
        print(f"numerical failure: {exc}{extra}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NlkregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
