"""Uniform Cartesian grids, node fields, narrow bands, cut and cutoff."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import GridTooLargeError, OutOfDomainError

DEFAULT_NODE_BUDGET = 50_000_000

INACTIVE = 0
REINIT_HALO = 1
ACTIVE = 2


@dataclass(frozen=True)
class Grid:
    origin: tuple
    dx: float
    dims: tuple

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "dims", tuple(int(v) for v in self.dims))
        if len(self.origin) != len(self.dims) or len(self.dims) not in (2, 3):
            raise ValueError("grid must be 2D or 3D with matching origin/dims")
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        if min(self.dims) < 6:
            raise ValueError("every axis needs at least 6 nodes")

    @property
    def dim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return math.prod(self.dims)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + (np.asarray(self.dims) - 1) * self.dx

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm((np.asarray(self.dims) - 1) * self.dx))

    def axes(self) -> list[np.ndarray]:
        return [o + self.dx * np.arange(n) for o, n in zip(self.origin, self.dims)]

    def node(self, index) -> np.ndarray:
        return np.asarray(self.origin) + self.dx * np.asarray(index, dtype=float)

    def coords(self, idx) -> np.ndarray:
        """Coordinates of nodes given as a tuple of index arrays; returns (N, dim)."""
        return np.stack([o + self.dx * i for o, i in zip(self.origin, idx)], axis=-1)

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        pts = np.atleast_2d(points)
        slack = tol * self.dx
        lo = np.asarray(self.origin) - slack
        hi = self.upper + slack
        return np.all((pts >= lo) & (pts <= hi), axis=-1)

    def clamp(self, points) -> np.ndarray:
        return np.clip(points, np.asarray(self.origin), self.upper)


@dataclass
class ScalarField:
    """Node values of one grid; ``values[i, j(, k)]`` is the node at ``origin + (i, j, k) * dx``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.dims:
            raise ValueError(f"values shape {v.shape} does not match grid dims {self.grid.dims}")
        self.values = v

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def flat_x_fastest(self) -> np.ndarray:
        return self.values.ravel(order="F")


@dataclass(frozen=True)
class BandParams:
    gamma: float
    beta: float

    def __post_init__(self):
        if not 0 < self.beta < self.gamma:
            raise ValueError("band parameters need 0 < beta < gamma")

    @classmethod
    def default(cls, dim: int, dx: float) -> "BandParams":
        return cls(4 * dx, 2 * dx) if dim == 2 else cls(6 * dx, 3 * dx)


@dataclass
class BandMask:
    grid: Grid
    state: np.ndarray
    gamma: float

    @property
    def active(self) -> np.ndarray:
        return self.state == ACTIVE

    @property
    def halo(self) -> np.ndarray:
        return self.state == REINIT_HALO

    @property
    def reinit_region(self) -> np.ndarray:
        return self.state != INACTIVE


def build_grid(bbox_min, bbox_max, dx: float, pad_cells: int, node_budget: int = DEFAULT_NODE_BUDGET) -> Grid:
    lo = np.asarray(bbox_min, dtype=float)
    hi = np.asarray(bbox_max, dtype=float)
    if lo.shape != hi.shape or np.any(lo > hi):
        raise ValueError("bbox_min must not exceed bbox_max")
    if not dx > 0:
        raise ValueError("dx must be positive")
    if pad_cells < 2:
        raise ValueError("pad_cells must be at least 2")
    cells = np.ceil((hi - lo) / dx + 2 * pad_cells - 1e-9).astype(np.int64)
    dims = np.maximum(cells + 1, 6)
    total = float(np.prod(dims.astype(float)))
    if total > node_budget:
        raise GridTooLargeError(f"grid of {tuple(dims)} nodes exceeds the budget of {node_budget}")
    return Grid(tuple(lo - pad_cells * dx), dx, tuple(dims))


def locate_cell(grid: Grid, point) -> tuple:
    """Index of the lower corner of the cell containing ``point``.

    Points on the upper hull boundary belong to the last cell.
    """
    p = np.asarray(point, dtype=float)
    if not grid.contains(p)[0]:
        raise OutOfDomainError(f"point {tuple(p)} lies outside the grid hull")
    u = (p - np.asarray(grid.origin)) / grid.dx
    c = np.floor(u).astype(np.int64)
    c = np.clip(c, 0, np.asarray(grid.dims) - 2)
    return tuple(int(v) for v in c)


def gradient_at(values: np.ndarray, idx, dx: float) -> np.ndarray:
    """Centered differences at the nodes ``idx``; one-sided on the grid boundary. Returns (N, dim)."""
    out = np.empty((len(idx[0]), values.ndim))
    for a in range(values.ndim):
        n = values.shape[a]
        ip = np.minimum(idx[a] + 1, n - 1)
        im = np.maximum(idx[a] - 1, 0)
        plus = list(idx)
        minus = list(idx)
        plus[a] = ip
        minus[a] = im
        out[:, a] = (values[tuple(plus)] - values[tuple(minus)]) / ((ip - im) * dx)
    return out


def centered_gradient(field: ScalarField, index) -> np.ndarray:
    idx = tuple(np.array([int(i)]) for i in index)
    return gradient_at(field.values, idx, field.grid.dx)[0]


def gradient_field(field: ScalarField) -> np.ndarray:
    """Gradient at every node, stacked on the last axis."""
    v = field.values
    return np.stack(np.gradient(v, field.grid.dx, edge_order=1), axis=-1)


def narrow_band(field: ScalarField, gamma: float) -> BandMask:
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    active = np.abs(field.values) < gamma
    grown = ndimage.binary_dilation(active, structure=np.ones((3,) * field.grid.dim, dtype=bool))
    state = np.full(field.grid.dims, INACTIVE, dtype=np.int8)
    state[grown] = REINIT_HALO
    state[active] = ACTIVE
    return BandMask(field.grid, state, float(gamma))


def clamp_field(field: ScalarField, gamma: float) -> ScalarField:
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return ScalarField(field.grid, np.clip(field.values, -gamma, gamma))


def cutoff_weight(phi, params: BandParams):
    """Smooth band-edge damping: 1 inside ``beta``, 0 beyond ``gamma``, cubic in between."""
    a = np.abs(np.asarray(phi, dtype=float))
    g, b = params.gamma, params.beta
    mid = (a - g) ** 2 * (2 * a + g - 3 * b) / (g - b) ** 3
    out = np.where(a <= b, 1.0, np.where(a <= g, mid, 0.0))
    return float(out) if out.ndim == 0 else out
