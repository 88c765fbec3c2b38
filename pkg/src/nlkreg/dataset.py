"""Training-corpus container and its on-disk format.

A dataset is a directory holding ``meta.json`` (generator descriptor, grid,
seed, shapes, checksums) plus ``u.csv`` and ``f.csv``: one row per sample,
one column per data point, comma-separated decimal text with 17 significant
digits. The format round-trips doubles bitwise.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DatasetFormatError
from .grid import DIRICHLET, PERIODIC, Grid1D

FORMAT_VERSION = 1

# data layouts: how columns map onto the grid
LAYOUT_PERIODIC_EVAL = "periodic_eval"     # n+1 columns, last duplicates first
LAYOUT_CELLS = "cells"                     # n columns at cell centers, periodic
LAYOUT_INTERVAL = "interval_nodes"         # n+1 columns on [a, b], Dirichlet


@dataclass
class Dataset:
    u: np.ndarray
    f: np.ndarray
    grid: Grid1D
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        if self.u.shape != self.f.shape or self.u.ndim != 2:
            raise DatasetFormatError(
                f"u and f must be matrices of identical shape, "
                f"got {self.u.shape} and {self.f.shape}")
        expected = _expected_columns(self.grid, self.layout)
        if self.u.shape[1] != expected:
            raise DatasetFormatError(
                f"layout {self.layout!r} expects {expected} columns, "
                f"got {self.u.shape[1]}")

    @property
    def n_samples(self):
        return self.u.shape[0]

    @property
    def layout(self):
        return self.meta.get("layout", LAYOUT_PERIODIC_EVAL)


def _expected_columns(grid, layout):
    if layout == LAYOUT_CELLS:
        return grid.n
    if layout in (LAYOUT_PERIODIC_EVAL, LAYOUT_INTERVAL):
        return grid.n + 1
    raise DatasetFormatError(f"unknown layout {layout!r}")


def grid_to_meta(grid):
    doc = {"a": grid.a, "b": grid.b, "n": grid.n, "bc": grid.bc}
    if grid.bc == DIRICHLET:
        doc["delta"] = grid.delta
    return doc


def grid_from_meta(doc):
    return Grid1D(a=doc["a"], b=doc["b"], n=doc["n"], bc=doc["bc"],
                  delta=doc.get("delta"))


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_dataset(ds, path):
    """Write a dataset directory; byte-identical for identical inputs."""
    os.makedirs(path, exist_ok=True)
    for name, mat in (("u.csv", ds.u), ("f.csv", ds.f)):
        np.savetxt(os.path.join(path, name), mat, fmt="%.17g", delimiter=",")
    meta = dict(ds.meta)
    meta["format_version"] = FORMAT_VERSION
    meta["grid"] = grid_to_meta(ds.grid)
    meta["shape"] = list(ds.u.shape)
    meta["sha256"] = {name: _sha256(os.path.join(path, name))
                      for name in ("u.csv", "f.csv")}
    with open(os.path.join(path, "meta.json"), "w", encoding="ascii") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_dataset(path):
    meta_path = os.path.join(path, "meta.json")
    try:
        with open(meta_path, "r", encoding="ascii") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise DatasetFormatError(f"missing meta.json in {path}") from None
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"malformed meta.json in {path}: {exc}") from None
    if meta.get("format_version") != FORMAT_VERSION:
        raise DatasetFormatError(
            f"unsupported dataset format {meta.get('format_version')!r}")
    for key in ("grid", "shape", "sha256"):
        if key not in meta:
            raise DatasetFormatError(f"meta.json lacks required key {key!r}")
    shape = tuple(meta["shape"])
    mats = {}
    for name in ("u.csv", "f.csv"):
        fpath = os.path.join(path, name)
        recorded = meta["sha256"].get(name)
        if recorded is not None and _sha256(fpath) != recorded:
            raise DatasetFormatError(f"checksum mismatch for {name} in {path}")
        mat = np.loadtxt(fpath, delimiter=",", ndmin=2)
        if mat.shape != shape:
            raise DatasetFormatError(
                f"{name} has shape {mat.shape}, meta.json declares {shape}")
        mats[name] = mat
    grid = grid_from_meta(meta["grid"])
    meta = {k: v for k, v in meta.items()
            if k not in ("format_version", "grid", "shape", "sha256")}
    return Dataset(u=mats["u.csv"], f=mats["f.csv"], grid=grid, meta=meta)
