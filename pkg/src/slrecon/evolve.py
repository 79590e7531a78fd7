"""Semi-Lagrangian time step for the level-set equation

    phi_t = C(x) * (grad d . grad phi + (delta / p) * d * |grad phi| * kappa),
    C(x)  = (d(x) / E_p)^(p - 1),

with ``d`` the distance to the cloud.  The advection part moves each foot
along ``grad d``; the curvature part is realised by averaging over symmetric
displacements in the tangent space of the level sets through the node.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .distance import DistanceField
from .errors import InvalidEnergyError, NumericalFailure
from .grid import BandMask, BandParams, ScalarField, cutoff_weight, gradient_at
from .interp import InterpolatorKind, interp_points

_DEGENERATE = 1e-14


@dataclass(frozen=True)
class TangentBasis:
    """Unit tangent(s) to the level set: one column in 2D, two orthonormal columns in 3D."""

    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def sigma(self) -> np.ndarray:
        return self.vectors[:, 0]

    @property
    def nu1(self) -> np.ndarray:
        return self.vectors[:, 0]

    @property
    def nu2(self) -> np.ndarray:
        return self.vectors[:, 1]


@dataclass(frozen=True)
class StepConfig:
    p: int
    delta: float
    dt: float
    interpolator: InterpolatorKind = InterpolatorKind.WENO
    band: BandParams | None = None
    fallback_C: float = 1e-3
    fallback_alpha: float = 1.0

    def __post_init__(self):
        if self.p not in (1, 2):
            raise ValueError("p must be 1 or 2")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "interpolator", InterpolatorKind.parse(self.interpolator))

    @property
    def fallback_threshold(self) -> float:
        return self.fallback_C * self.dt ** self.fallback_alpha


def tangent_vectors(grad) -> np.ndarray:
    """Vectorised tangent bases for gradients of shape ``(N, dim)``; returns ``(N, dim, dim - 1)``."""
    g = np.asarray(grad, dtype=float)
    n, dim = g.shape
    norm = np.sqrt(np.sum(g * g, axis=1))
    out = np.zeros((n, dim, dim - 1))
    with np.errstate(invalid="ignore", divide="ignore"):
        if dim == 2:
            ok = norm > 0
            out[:, 0, 0] = np.where(ok, g[:, 1] / norm, 1.0)
            out[:, 1, 0] = np.where(ok, -g[:, 0] / norm, 0.0)
            return out
        g1, g2, g3 = g[:, 0], g[:, 1], g[:, 2]
        s = np.sqrt(g1 * g1 + g3 * g3)
        ok = (norm > 0) & (s >= _DEGENERATE * norm)
        out[:, 0, 0] = np.where(ok, -g3 / s, 1.0)
        out[:, 1, 0] = 0.0
        out[:, 2, 0] = np.where(ok, g1 / s, 0.0)
        out[:, 0, 1] = np.where(ok, -g1 * g2 / s / norm, 0.0)
        out[:, 1, 1] = np.where(ok, s / norm, 0.0)
        out[:, 2, 1] = np.where(ok, -g2 * g3 / s / norm, 1.0)
    return out


def tangent_basis(grad) -> TangentBasis:
    """Tangent basis for a single gradient.

    In 2D the tangent is ``(g2, -g1) / |g|``.  In 3D, with ``s = sqrt(g1^2 + g3^2)``,
    ``nu1 = (-g3, 0, g1) / s`` and ``nu2 = (-g1 g2 / s, s, -g2 g3 / s) / |g|``;
    when ``s`` vanishes (gradient along y, or zero) the constant pair
    ``(1, 0, 0)``, ``(0, 0, 1)`` is used.  A zero 2D gradient gives ``(1, 0)``.
    """
    g = np.asarray(grad, dtype=float).reshape(1, -1)
    if g.shape[1] not in (2, 3) or not np.all(np.isfinite(g)):
        raise ValueError("gradient must be a finite 2- or 3-vector")
    return TangentBasis(tangent_vectors(g)[0])


def scale_factor(d_j, E_p, p: int):
    """``(d / E_p)^(p - 1)``; identically 1 for ``p = 1``. Accepts scalars or arrays."""
    d = np.asarray(d_j, dtype=float)
    if p == 1:
        out = np.ones_like(d)
    else:
        if not E_p > 0:
            raise InvalidEnergyError(f"scale factor needs a positive energy, got {E_p!r}")
        out = d / E_p
        if p != 2:
            out = out ** (p - 1)
    return float(out) if out.ndim == 0 else out


def _lambdas(dim: int) -> np.ndarray:
    if dim == 2:
        return np.array([[-1.0], [1.0]])
    return np.array(list(itertools.product((-1.0, 1.0), repeat=2)))


@dataclass
class Feet:
    """Characteristic feet of the ACTIVE nodes for one step (``points`` is ``(N, m, dim)``)."""

    nodes: tuple
    points: np.ndarray
    fallback: np.ndarray
    scale: np.ndarray = field(repr=False)


def characteristic_feet(phi: ScalarField, dist: DistanceField, mask: BandMask, cfg: StepConfig, E_p: float) -> Feet:
    grid = phi.grid
    if dist.grid != grid or mask.grid != grid:
        raise ValueError("phi, distance field and band must share one grid")
    nodes = np.nonzero(mask.active)
    x = grid.coords(nodes)
    d = dist.values[nodes]
    g = gradient_at(phi.values, nodes, grid.dx)
    gd = gradient_at(dist.values, nodes, grid.dx)
    C = scale_factor(d, E_p, cfg.p)
    fallback = np.sqrt(np.sum(g * g, axis=1)) < cfg.fallback_threshold
    base = x + (C * cfg.dt)[:, None] * gd
    amp = np.sqrt(np.maximum(C * cfg.delta * d * cfg.dt / cfg.p, 0.0))
    if cfg.delta == 0.0:
        feet = base[:, None, :]
    else:
        tv = tangent_vectors(g)
        disp = np.einsum("nij,mj->nmi", tv, _lambdas(grid.dim))
        feet = base[:, None, :] + amp[:, None, None] * disp
    feet = grid.clamp(feet)
    return Feet(nodes, feet, fallback, C)


def sl_step(phi: ScalarField, dist: DistanceField, mask: BandMask, cfg: StepConfig, E_p: float) -> ScalarField:
    """Advance ``phi`` by one step on the ACTIVE nodes; everything else is copied."""
    grid = phi.grid
    band = cfg.band or BandParams.default(grid.dim, grid.dx)
    ft = characteristic_feet(phi, dist, mask, cfg, E_p)
    n, m, dim = ft.points.shape
    lost = ~np.all(np.isfinite(ft.points), axis=(1, 2))
    if np.any(lost):
        j = tuple(int(ix[np.argmax(lost)]) for ix in ft.nodes)
        raise NumericalFailure(f"non-finite characteristic foot at node {j}")
    vals = interp_points(cfg.interpolator, phi, ft.points.reshape(-1, dim)).reshape(n, m)
    star = vals[:, 0].copy()
    for k in range(1, m):
        star += vals[:, k]
    star /= m

    fb = np.nonzero(ft.fallback)[0]
    if fb.size:
        star[fb] = _neighbour_mean(phi, tuple(ix[fb] for ix in ft.nodes), cfg.interpolator)

    old = phi.values[ft.nodes]
    new = old + cutoff_weight(old, band) * (star - old)
    bad = ~np.isfinite(new)
    if np.any(bad):
        j = tuple(int(ix[np.argmax(bad)]) for ix in ft.nodes)
        raise NumericalFailure(f"non-finite value produced at node {j}")
    out = phi.values.copy()
    out[ft.nodes] = new
    return ScalarField(grid, out)


def _neighbour_mean(phi: ScalarField, nodes: tuple, kind) -> np.ndarray:
    """Mean of the interpolant at the axis neighbours that exist on the grid."""
    grid = phi.grid
    dims = grid.dims
    total = np.zeros(len(nodes[0]))
    count = np.zeros(len(nodes[0]))
    base = np.stack(nodes, axis=1)
    for a in range(grid.dim):
        for s in (-1, 1):
            nb = base.copy()
            nb[:, a] += s
            ok = (nb[:, a] >= 0) & (nb[:, a] < dims[a])
            if not np.any(ok):
                continue
            pts = np.asarray(grid.origin) + grid.dx * nb[ok]
            total[ok] += interp_points(kind, phi, pts)
            count[ok] += 1
    return total / count
