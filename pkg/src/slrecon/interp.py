"""Local interpolation of node data: multilinear (Q1) and dimension-split WENO.

Both interpolants are evaluated one axis at a time, last axis first (y then x
in 2D, z then y then x in 3D).  The 1D building blocks are plain arithmetic
functions so the very same expressions run element-wise on numpy arrays and,
compiled, inside the numba kernels; the two backends therefore agree bit for
bit.

Along an axis where the four-node WENO stencil would leave the grid the WENO
interpolant degrades to the linear blend of the two cell nodes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _accel
from ._accel import njit, prange
from .errors import ConfigError, OutOfDomainError
from .grid import ScalarField

_CHUNK = 1 << 15


class InterpolatorKind(str, enum.Enum):
    Q1 = "q1"
    WENO = "weno"

    @classmethod
    def parse(cls, value) -> "InterpolatorKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown interpolator {value!r}; expected 'q1' or 'weno'") from None


@dataclass(frozen=True)
class Stencil4:
    """Four consecutive node values ``v[j-1] .. v[j+2]`` and the local coordinate in ``[x_j, x_{j+1}]``."""

    v: tuple
    dx: float
    theta: float

    def __post_init__(self):
        v = tuple(float(x) for x in self.v)
        if len(v) != 4:
            raise ValueError("a stencil holds exactly four values")
        if not all(np.isfinite(v)):
            raise ValueError("stencil values must be finite")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        object.__setattr__(self, "v", v)


# --------------------------------------------------------------------------
# 1D building blocks (shared by both backends)

def _lerp(v1, v2, t):
    return (1.0 - t) * v1 + t * v2


def _weno_parts(v0, v1, v2, v3, t, dx):
    dl = v0 - 2.0 * v1 + v2
    dr = v1 - 2.0 * v2 + v3
    pl = v1 + 0.5 * t * (v2 - v0) + 0.5 * t * t * dl
    pr = v1 + 0.5 * t * (-3.0 * v1 + 4.0 * v2 - v3) + 0.5 * t * t * dr
    eps = dx * dx
    il = dl * dl / eps
    ir = dr * dr / eps
    cl = (2.0 - t) / 3.0
    cr = (1.0 + t) / 3.0
    al = cl / ((il + eps) * (il + eps))
    ar = cr / ((ir + eps) * (ir + eps))
    return pl, pr, il, ir, cl, cr, al, ar


def _weno(v0, v1, v2, v3, t, dx):
    pl, pr, il, ir, cl, cr, al, ar = _weno_parts(v0, v1, v2, v3, t, dx)
    return (al * pl + ar * pr) / (al + ar)


_lerp_nb = njit(_lerp)
_weno_parts_nb = njit(_weno_parts)


@njit
def _weno_nb(v0, v1, v2, v3, t, dx):
    pl, pr, il, ir, cl, cr, al, ar = _weno_parts_nb(v0, v1, v2, v3, t, dx)
    return (al * pl + ar * pr) / (al + ar)


@njit
def _axis_nb(v0, v1, v2, v3, t, full, dx):
    if full:
        return _weno_nb(v0, v1, v2, v3, t, dx)
    return _lerp_nb(v1, v2, t)


def weno_1d(st, theta: float | None = None, dx: float | None = None) -> float:
    """WENO value inside ``[x_j, x_{j+1}]`` from a :class:`Stencil4` (or four values plus theta and dx)."""
    if not isinstance(st, Stencil4):
        st = Stencil4(tuple(st), dx, theta)
    v0, v1, v2, v3 = st.v
    return float(_weno(v0, v1, v2, v3, st.theta, st.dx))


@dataclass(frozen=True)
class WenoWeights:
    P_L: float
    P_R: float
    I_L: float
    I_R: float
    C_L: float
    C_R: float
    w_L: float
    w_R: float


def weno_weights(st: Stencil4) -> WenoWeights:
    """Substencil parabolas, smoothness indicators and weights behind :func:`weno_1d`."""
    pl, pr, il, ir, cl, cr, al, ar = _weno_parts(*st.v, st.theta, st.dx)
    s = al + ar
    return WenoWeights(pl, pr, il, ir, cl, cr, al / s, ar / s)


# --------------------------------------------------------------------------
# point location

def _locate(field: ScalarField, pts: np.ndarray):
    g = field.grid
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[1] != g.dim:
        raise ValueError(f"points must have {g.dim} components")
    inside = g.contains(pts)
    if not np.all(inside):
        bad = pts[~inside][0]
        raise OutOfDomainError(f"point {tuple(bad)} lies outside the grid hull")
    u = (pts - np.asarray(g.origin)) / g.dx
    cell = np.clip(np.floor(u).astype(np.int64), 0, np.asarray(g.dims) - 2)
    theta = np.clip(u - cell, 0.0, 1.0)
    return np.ascontiguousarray(cell), np.ascontiguousarray(theta)


# --------------------------------------------------------------------------
# numpy path

def _np_cells(values, cell, theta, kind, dx):
    dims = values.shape
    dim = values.ndim
    n = cell.shape[0]
    width = 4 if kind is InterpolatorKind.WENO else 2
    first = -1 if width == 4 else 0
    offs = np.arange(first, first + width)
    idx = []
    for a in range(dim):
        ia = np.clip(cell[:, a, None] + offs, 0, dims[a] - 1)
        shape = [n] + [1] * dim
        shape[1 + a] = width
        idx.append(ia.reshape(shape))
    block = values[tuple(idx)]
    for a in range(dim - 1, -1, -1):
        t = theta[:, a].reshape((n,) + (1,) * a)
        if width == 2:
            block = _lerp(block[..., 0], block[..., 1], t)
        else:
            full = ((cell[:, a] >= 1) & (cell[:, a] + 2 <= dims[a] - 1)).reshape((n,) + (1,) * a)
            v0, v1, v2, v3 = (block[..., k] for k in range(4))
            with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                w = _weno(v0, v1, v2, v3, t, dx)
            block = np.where(full, w, _lerp(v1, v2, t))
    return block


def _np_batch(values, cell, theta, kind, dx):
    out = np.empty(cell.shape[0])
    for s in range(0, cell.shape[0], _CHUNK):
        sl = slice(s, s + _CHUNK)
        out[sl] = _np_cells(values, cell[sl], theta[sl], kind, dx)
    return out


# --------------------------------------------------------------------------
# numba kernels

@njit(parallel=True)
def _q1_2d(values, cell, theta, out):
    for p in prange(cell.shape[0]):
        i = cell[p, 0]
        j = cell[p, 1]
        ty = theta[p, 1]
        a = _lerp_nb(values[i, j], values[i, j + 1], ty)
        b = _lerp_nb(values[i + 1, j], values[i + 1, j + 1], ty)
        out[p] = _lerp_nb(a, b, theta[p, 0])


@njit(parallel=True)
def _q1_3d(values, cell, theta, out):
    for p in prange(cell.shape[0]):
        i = cell[p, 0]
        j = cell[p, 1]
        k = cell[p, 2]
        tz = theta[p, 2]
        ty = theta[p, 1]
        yv = np.empty(2)
        for a in range(2):
            z0 = _lerp_nb(values[i + a, j, k], values[i + a, j, k + 1], tz)
            z1 = _lerp_nb(values[i + a, j + 1, k], values[i + a, j + 1, k + 1], tz)
            yv[a] = _lerp_nb(z0, z1, ty)
        out[p] = _lerp_nb(yv[0], yv[1], theta[p, 0])


@njit
def _clip(i, n):
    if i < 0:
        return 0
    if i > n - 1:
        return n - 1
    return i


@njit(parallel=True)
def _weno_2d(values, cell, theta, dx, out):
    nx, ny = values.shape
    for p in prange(cell.shape[0]):
        i = cell[p, 0]
        j = cell[p, 1]
        fullx = i >= 1 and i + 2 <= nx - 1
        fully = j >= 1 and j + 2 <= ny - 1
        ty = theta[p, 1]
        col = np.empty(4)
        for a in range(4):
            ii = _clip(i - 1 + a, nx)
            col[a] = _axis_nb(values[ii, _clip(j - 1, ny)], values[ii, j], values[ii, j + 1],
                              values[ii, _clip(j + 2, ny)], ty, fully, dx)
        out[p] = _axis_nb(col[0], col[1], col[2], col[3], theta[p, 0], fullx, dx)


@njit(parallel=True)
def _weno_3d(values, cell, theta, dx, out):
    nx, ny, nz = values.shape
    for p in prange(cell.shape[0]):
        i = cell[p, 0]
        j = cell[p, 1]
        k = cell[p, 2]
        fullx = i >= 1 and i + 2 <= nx - 1
        fully = j >= 1 and j + 2 <= ny - 1
        fullz = k >= 1 and k + 2 <= nz - 1
        tz = theta[p, 2]
        ty = theta[p, 1]
        km = _clip(k - 1, nz)
        kp = _clip(k + 2, nz)
        col = np.empty(4)
        zv = np.empty(4)
        for a in range(4):
            ii = _clip(i - 1 + a, nx)
            for b in range(4):
                jj = _clip(j - 1 + b, ny)
                zv[b] = _axis_nb(values[ii, jj, km], values[ii, jj, k], values[ii, jj, k + 1],
                                 values[ii, jj, kp], tz, fullz, dx)
            col[a] = _axis_nb(zv[0], zv[1], zv[2], zv[3], ty, fully, dx)
        out[p] = _axis_nb(col[0], col[1], col[2], col[3], theta[p, 0], fullx, dx)


def _nb_batch(values, cell, theta, kind, dx):
    out = np.empty(cell.shape[0])
    values = np.ascontiguousarray(values)
    if kind is InterpolatorKind.Q1:
        (_q1_2d if values.ndim == 2 else _q1_3d)(values, cell, theta, out)
    else:
        (_weno_2d if values.ndim == 2 else _weno_3d)(values, cell, theta, float(dx), out)
    return out


# --------------------------------------------------------------------------
# public API

def interp_cells(kind, field: ScalarField, cell, theta) -> np.ndarray:
    """Evaluate inside explicitly chosen cells (``cell`` lower-corner indices, ``theta`` in [0, 1])."""
    kind = InterpolatorKind.parse(kind)
    cell = np.ascontiguousarray(np.atleast_2d(cell), dtype=np.int64)
    theta = np.ascontiguousarray(np.atleast_2d(theta), dtype=np.float64)
    dims = np.asarray(field.grid.dims)
    if np.any(cell < 0) or np.any(cell > dims - 2):
        raise OutOfDomainError("cell index outside the grid")
    if np.any(theta < 0) or np.any(theta > 1):
        raise ValueError("theta must lie in [0, 1]")
    fn = _nb_batch if _accel.use_numba() else _np_batch
    return fn(field.values, cell, theta, kind, field.grid.dx)


def interp_points(kind, field: ScalarField, points) -> np.ndarray:
    """Evaluate at many points (shape ``(N, dim)``) at once."""
    kind = InterpolatorKind.parse(kind)
    cell, theta = _locate(field, points)
    fn = _nb_batch if _accel.use_numba() else _np_batch
    return fn(field.values, cell, theta, kind, field.grid.dx)


def interp(kind, field: ScalarField, point) -> float:
    return float(interp_points(kind, field, np.asarray(point, dtype=float)[None, :])[0])


def interp_q1(field: ScalarField, point) -> float:
    return interp(InterpolatorKind.Q1, field, point)


def interp_weno(field: ScalarField, point) -> float:
    return interp(InterpolatorKind.WENO, field, point)
