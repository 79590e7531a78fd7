"""Legacy VTK output for node fields and CSV output for the per-iteration metrics."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField
from .metrics import MetricsRecord

METRICS_HEADER = ("run", "iter", "E2", "delta_E", "err_cloud", "l1_update", "l1_error", "wall_ms")
_PER_LINE = 6


@dataclass(frozen=True)
class OutputSpec:
    prefix: str = "slrecon_out"
    write_fields: bool = False
    write_metrics: bool = False
    write_per_run: bool = True

    def ensure_dir(self) -> None:
        d = os.path.dirname(os.path.abspath(self.prefix))
        os.makedirs(d, exist_ok=True)

    def field_path(self, r: int) -> str:
        return f"{self.prefix}_run{r}.vtk" if self.write_per_run else f"{self.prefix}.vtk"

    @property
    def metrics_path(self) -> str:
        return f"{self.prefix}_metrics.csv"


def write_field_vtk(field: ScalarField, path, name: str = "phi") -> None:
    """ASCII ``STRUCTURED_POINTS`` file, x index fastest; 2D grids get a unit z extent."""
    g = field.grid
    dims = list(g.dims) + [1] * (3 - g.dim)
    origin = list(g.origin) + [0.0] * (3 - g.dim)
    flat = field.flat_x_fastest()
    lines = [
        "# vtk DataFile Version 3.0",
        f"slrecon {name}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS " + " ".join(str(n) for n in dims),
        "ORIGIN " + " ".join(repr(float(o)) for o in origin),
        "SPACING " + " ".join(repr(float(g.dx)) for _ in range(3)),
        f"POINT_DATA {flat.size}",
        f"SCALARS {name} double 1",
        "LOOKUP_TABLE default",
    ]
    vals = [repr(float(v)) for v in flat]
    lines += [" ".join(vals[i:i + _PER_LINE]) for i in range(0, len(vals), _PER_LINE)]
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc.strerror or exc}") from exc


def read_field_vtk(path) -> ScalarField:
    """Read back a file produced by :func:`write_field_vtk`."""
    with open(path, encoding="ascii") as fh:
        tokens = fh.read().split("\n")
    header = {}
    body_start = None
    for i, line in enumerate(tokens):
        parts = line.split()
        if not parts:
            continue
        key = parts[0].upper()
        if key in ("DIMENSIONS", "ORIGIN", "SPACING", "POINT_DATA"):
            header[key] = parts[1:]
        elif key == "LOOKUP_TABLE":
            body_start = i + 1
            break
    if body_start is None or "DIMENSIONS" not in header:
        raise ValueError(f"{path}: not a structured-points VTK file")
    dims = [int(v) for v in header["DIMENSIONS"]]
    origin = [float(v) for v in header["ORIGIN"]]
    dx = float(header["SPACING"][0])
    values = np.array([float(t) for line in tokens[body_start:] for t in line.split()])
    dim = 2 if dims[2] == 1 else 3
    dims, origin = dims[:dim], origin[:dim]
    if values.size != math.prod(dims):
        raise ValueError(f"{path}: expected {math.prod(dims)} values, found {values.size}")
    grid = Grid(tuple(origin), dx, tuple(dims))
    return ScalarField(grid, values.reshape(dims, order="F"))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_metrics_csv(log, path) -> None:
    try:
        with open(path, "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(METRICS_HEADER)
            for rec in log:
                w.writerow([_fmt(getattr(rec, k)) for k in METRICS_HEADER])
    except OSError as exc:
        raise OSError(f"cannot write metrics file {path}: {exc.strerror or exc}") from exc


def read_metrics_csv(path) -> list:
    out = []
    with open(path, newline="", encoding="ascii") as fh:
        rows = csv.reader(fh)
        header = next(rows)
        if tuple(header) != METRICS_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in rows:
            d = dict(zip(header, row))
            out.append(MetricsRecord(
                run=int(d["run"]),
                iter=int(d["iter"]),
                E2=float(d["E2"]),
                delta_E=float(d["delta_E"]),
                err_cloud=float(d["err_cloud"]),
                l1_update=float(d["l1_update"]),
                l1_error=float(d["l1_error"]) if d["l1_error"] else None,
                wall_ms=float(d["wall_ms"]) if d["wall_ms"] else None,
            ))
    return out
