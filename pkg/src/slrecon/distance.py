"""Unsigned distance to the cloud: exact near the samples, fast sweeping elsewhere."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import _accel
from ._accel import njit
from .cloud import PointCloud
from .errors import EmptySeedError, OutOfDomainError
from .grid import Grid, ScalarField

SWEEP_TOL = 1e-3
SWEEP_ROUNDS = 8


@dataclass
class DistanceField:
    field: ScalarField
    exact_mask: np.ndarray

    @property
    def grid(self) -> Grid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values


def sentinel(grid: Grid) -> float:
    return 10.0 * grid.diagonal


def seed_exact_distance(grid: Grid, cloud: PointCloud) -> DistanceField:
    """Exact distance to the whole cloud on a 4-per-axis node block around every sample."""
    if cloud.dim != grid.dim:
        raise ValueError("cloud and grid dimensions differ")
    inside = grid.contains(cloud.points)
    if not np.all(inside):
        bad = cloud.points[~inside][0]
        raise OutOfDomainError(f"cloud point {tuple(bad)} lies outside the grid")
    dims = np.asarray(grid.dims)
    cell = np.floor((cloud.points - np.asarray(grid.origin)) / grid.dx).astype(np.int64)
    cell = np.clip(cell, 0, dims - 2)
    mask = np.zeros(grid.dims, dtype=bool)
    for off in itertools.product(range(-1, 3), repeat=grid.dim):
        idx = np.clip(cell + np.asarray(off), 0, dims - 1)
        mask[tuple(idx.T)] = True
    values = np.full(grid.dims, sentinel(grid))
    nodes = np.nonzero(mask)
    d, _ = cKDTree(cloud.points).query(grid.coords(nodes))
    values[nodes] = d
    return DistanceField(ScalarField(grid, values), mask)


def fast_sweep(field: DistanceField, tol: float = SWEEP_TOL, max_rounds: int = SWEEP_ROUNDS) -> DistanceField:
    """Godunov fast sweeping for ``|grad d| = 1``; nodes in ``exact_mask`` stay fixed.

    A round visits all ``2**dim`` axis orderings; rounds repeat until no node
    drops by ``tol * dx`` or more, or ``max_rounds`` is reached.
    """
    u = field.values.copy()
    sweep_inplace(u, field.exact_mask, field.grid.dx, tol * field.grid.dx, max_rounds)
    return DistanceField(ScalarField(field.grid, u), field.exact_mask.copy())


def sweep_inplace(u: np.ndarray, fixed: np.ndarray, h: float, tol: float, max_rounds: int) -> int:
    if not np.any(fixed):
        raise EmptySeedError("no fixed node to sweep from")
    if _accel.use_numba():
        fn = _sweep2_nb if u.ndim == 2 else _sweep3_nb
        return int(fn(u, fixed, float(h), float(tol), int(max_rounds)))
    return _sweep_np(u, fixed, float(h), float(tol), int(max_rounds))


def build_distance_field(grid: Grid, cloud: PointCloud) -> DistanceField:
    return fast_sweep(seed_exact_distance(grid, cloud))


# --------------------------------------------------------------------------
# numba kernels

@njit
def _solve2(a, b, h):
    if b < a:
        a, b = b, a
    x = a + h
    if x > b:
        x = (a + b + np.sqrt(2.0 * h * h - (a - b) * (a - b))) / 2.0
    return x


@njit
def _solve3(a, b, c, h):
    if b < a:
        a, b = b, a
    if c < b:
        b, c = c, b
        if b < a:
            a, b = b, a
    x = a + h
    if x > b:
        x = (a + b + np.sqrt(2.0 * h * h - (a - b) * (a - b))) / 2.0
        if x > c:
            s = a + b + c
            disc = s * s - 3.0 * (a * a + b * b + c * c - h * h)
            x = (s + np.sqrt(max(disc, 0.0))) / 3.0
    return x


@njit
def _sweep2_nb(u, fixed, h, tol, max_rounds):
    nx, ny = u.shape
    inf = np.inf
    rounds = 0
    for _ in range(max_rounds):
        rounds += 1
        change = 0.0
        for sx in (1, -1):
            for sy in (1, -1):
                for jj in range(ny):
                    j = jj if sy > 0 else ny - 1 - jj
                    for ii in range(nx):
                        i = ii if sx > 0 else nx - 1 - ii
                        if fixed[i, j]:
                            continue
                        a = min(u[i - 1, j] if i > 0 else inf, u[i + 1, j] if i < nx - 1 else inf)
                        b = min(u[i, j - 1] if j > 0 else inf, u[i, j + 1] if j < ny - 1 else inf)
                        x = _solve2(a, b, h)
                        if x < u[i, j]:
                            change = max(change, u[i, j] - x)
                            u[i, j] = x
        if change < tol:
            break
    return rounds


@njit
def _sweep3_nb(u, fixed, h, tol, max_rounds):
    nx, ny, nz = u.shape
    inf = np.inf
    rounds = 0
    for _ in range(max_rounds):
        rounds += 1
        change = 0.0
        for sx in (1, -1):
            for sy in (1, -1):
                for sz in (1, -1):
                    for kk in range(nz):
                        k = kk if sz > 0 else nz - 1 - kk
                        for jj in range(ny):
                            j = jj if sy > 0 else ny - 1 - jj
                            for ii in range(nx):
                                i = ii if sx > 0 else nx - 1 - ii
                                if fixed[i, j, k]:
                                    continue
                                a = min(u[i - 1, j, k] if i > 0 else inf, u[i + 1, j, k] if i < nx - 1 else inf)
                                b = min(u[i, j - 1, k] if j > 0 else inf, u[i, j + 1, k] if j < ny - 1 else inf)
                                c = min(u[i, j, k - 1] if k > 0 else inf, u[i, j, k + 1] if k < nz - 1 else inf)
                                x = _solve3(a, b, c, h)
                                if x < u[i, j, k]:
                                    change = max(change, u[i, j, k] - x)
                                    u[i, j, k] = x
        if change < tol:
            break
    return rounds


# --------------------------------------------------------------------------
# numpy path: Gauss-Seidel by wavefronts.  Within one ordering a node only
# reads already-updated neighbours on the previous anti-diagonal level and
# not-yet-updated ones on the next, so processing level by level reproduces
# the lexicographic sweep exactly.

def _solve_np(nb, h):
    nb = np.sort(nb, axis=1)
    a = nb[:, 0]
    b = nb[:, 1]
    with np.errstate(invalid="ignore", over="ignore"):
        x = a + h
        two = (a + b + np.sqrt(2.0 * h * h - (a - b) * (a - b))) / 2.0
        x = np.where(x > b, two, x)
        if nb.shape[1] == 3:
            c = nb[:, 2]
            s = a + b + c
            disc = s * s - 3.0 * (a * a + b * b + c * c - h * h)
            three = (s + np.sqrt(np.maximum(disc, 0.0))) / 3.0
            x = np.where((a + h > b) & (two > c), three, x)
    return x


def _sweep_np(u, fixed, h, tol, max_rounds):
    shape = u.shape
    dim = u.ndim
    padded = np.pad(u, 1, constant_values=np.inf)
    pfixed = np.pad(fixed, 1, constant_values=True).ravel()
    flat = padded.reshape(-1)
    strides = [int(np.prod([n + 2 for n in shape[a + 1:]])) for a in range(dim)]
    # an ordering and its full reversal share level sets, visited backwards
    base_levels = {}
    rounds = 0
    for _ in range(max_rounds):
        rounds += 1
        change = 0.0
        for signs in itertools.product((1, -1), repeat=dim):
            key = signs if signs[0] == 1 else tuple(-s for s in signs)
            if key not in base_levels:
                base_levels[key] = _reflected_levels(shape, key)
            levels = base_levels[key]
            seq = levels if signs[0] == 1 else levels[::-1]
            for nodes in seq:
                nodes = nodes[~pfixed[nodes]]
                if nodes.size == 0:
                    continue
                nb = np.empty((nodes.size, dim))
                for a in range(dim):
                    st = strides[a]
                    nb[:, a] = np.minimum(flat[nodes - st], flat[nodes + st])
                x = _solve_np(nb, h)
                old = flat[nodes]
                better = x < old
                if np.any(better):
                    change = max(change, float(np.max(old[better] - x[better])))
                    flat[nodes[better]] = x[better]
        if change < tol:
            break
    u[...] = padded[tuple(slice(1, -1) for _ in range(dim))]
    return rounds


def _reflected_levels(shape, signs):
    """Level sets ordered along the sweep direction ``signs`` (first sign is +1)."""
    dim = len(shape)
    idx = np.indices(shape).reshape(dim, -1)
    t = np.array([idx[a] if signs[a] > 0 else shape[a] - 1 - idx[a] for a in range(dim)])
    level = t.sum(axis=0)
    order = np.argsort(level, kind="stable")
    padded_shape = tuple(n + 2 for n in shape)
    flat = np.ravel_multi_index(tuple(idx[:, order] + 1), padded_shape)
    counts = np.bincount(level, minlength=sum(n - 1 for n in shape) + 1)
    return np.split(flat, np.cumsum(counts)[:-1])
