"""Front localisation, the energy functional, error measures and the stopping rule."""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .cloud import PointCloud, ShapeSpec, exact_sdf
from .distance import DistanceField
from .grid import BandMask, ScalarField
from .interp import InterpolatorKind, interp_points

K_WINDOW = 10


@dataclass
class EnergyHistory:
    values: list = field(default_factory=list)
    k_window: int = K_WINDOW

    def __post_init__(self):
        if self.k_window < 1:
            raise ValueError("k_window must be at least 1")
        self.values = [float(v) for v in self.values]
        if any(v < 0 or not math.isfinite(v) for v in self.values):
            raise ValueError("energies must be finite and non-negative")

    def append(self, value: float) -> None:
        value = float(value)
        if value < 0 or not math.isfinite(value):
            raise ValueError(f"invalid energy {value!r}")
        self.values.append(value)

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class MetricsRecord:
    run: int
    iter: int
    E2: float
    delta_E: float
    err_cloud: float
    l1_update: float
    l1_error: float | None = None
    wall_ms: float | None = None


# --------------------------------------------------------------------------
# front localisation

def interface_cells(phi: ScalarField) -> np.ndarray:
    """Lower-corner indices ``(N, dim)`` of cells whose corners are not all strictly of one sign."""
    v = phi.values
    dim = v.ndim
    lo = np.full(tuple(n - 1 for n in v.shape), np.inf)
    hi = np.full_like(lo, -np.inf)
    for off in itertools.product((0, 1), repeat=dim):
        c = v[tuple(slice(o, n - 1 + o) for o, n in zip(off, v.shape))]
        lo = np.minimum(lo, c)
        hi = np.maximum(hi, c)
    mixed = ~((lo > 0) | (hi < 0))
    return np.argwhere(mixed)


# --------------------------------------------------------------------------
# energy

def _bilinear(values, cell, t):
    """Bilinear values at ``cell + t`` for 2D arrays (``t`` in cell units)."""
    i, j = cell[:, 0], cell[:, 1]
    tx, ty = t[:, 0], t[:, 1]
    a = (1.0 - ty) * values[i, j] + ty * values[i, j + 1]
    b = (1.0 - ty) * values[i + 1, j] + ty * values[i + 1, j + 1]
    return (1.0 - tx) * a + tx * b


# corners in counter-clockwise order and the edges between consecutive ones
_CORNERS = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])
_EDGES = [(0, 1), (1, 2), (2, 3), (3, 0)]


def front_segments(phi: ScalarField):
    """Marching-squares segments of the zero level set.

    Returns ``(cells, a, b)``: the owning cell of every segment and its two
    endpoints in local cell coordinates.  A corner counts as inside when
    ``phi < 0``.  Saddle cells are split by the sign of the mean of the
    four corner values.
    """
    v = phi.values
    if v.ndim != 2:
        raise ValueError("front_segments is two-dimensional")
    cells = interface_cells(phi)
    if cells.size == 0:
        empty = np.zeros((0, 2))
        return np.zeros((0, 2), dtype=np.int64), empty, empty
    corner = np.stack([v[cells[:, 0] + dx_, cells[:, 1] + dy_] for dx_, dy_ in _CORNERS], axis=1)
    inside = corner < 0
    cross = np.zeros((len(cells), 4), dtype=bool)
    pts = np.zeros((len(cells), 4, 2))
    for e, (a, b) in enumerate(_EDGES):
        va, vb = corner[:, a], corner[:, b]
        cross[:, e] = inside[:, a] != inside[:, b]
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(cross[:, e], va / (va - vb), 0.0)
        pts[:, e] = (1.0 - t)[:, None] * _CORNERS[a] + t[:, None] * _CORNERS[b]

    count = cross.sum(axis=1)
    seg_cell, seg_a, seg_b = [], [], []
    two = np.nonzero(count == 2)[0]
    if two.size:
        e_idx = np.argsort(~cross[two], axis=1, kind="stable")[:, :2]
        seg_cell.append(cells[two])
        seg_a.append(pts[two, e_idx[:, 0]])
        seg_b.append(pts[two, e_idx[:, 1]])
    four = np.nonzero(count == 4)[0]
    if four.size:
        centre_inside = corner[four].mean(axis=1) < 0
        # corner 0 joined to the centre: cut off corners 1 and 3, else 0 and 2
        joined = centre_inside == inside[four, 0]
        first = np.where(joined[:, None], [[0, 1]], [[3, 0]])
        second = np.where(joined[:, None], [[2, 3]], [[1, 2]])
        for pair in (first, second):
            seg_cell.append(cells[four])
            seg_a.append(pts[four, pair[:, 0]])
            seg_b.append(pts[four, pair[:, 1]])
    return np.concatenate(seg_cell), np.concatenate(seg_a), np.concatenate(seg_b)


def energy_2d(phi: ScalarField, dist: DistanceField, p: int = 2) -> float:
    """``(integral of d^p along the zero level set)^(1/p)`` with trapezoidal segments."""
    if phi.grid.dim != 2:
        raise ValueError("energy_2d needs a 2D field")
    if p < 1:
        raise ValueError("p must be at least 1")
    cells, a, b = front_segments(phi)
    if cells.shape[0] == 0:
        return 0.0
    length = np.sqrt(np.sum((b - a) ** 2, axis=1)) * phi.grid.dx
    da = np.abs(_bilinear(dist.values, cells, a))
    db = np.abs(_bilinear(dist.values, cells, b))
    total = float(np.sum(length * (da ** p + db ** p) / 2.0))
    return total ** (1.0 / p)


def _subcell_weights(R: int) -> np.ndarray:
    c = (np.arange(R) + 0.5) / R
    t = np.stack(np.meshgrid(c, c, c, indexing="ij"), axis=-1).reshape(-1, 3)
    w = np.empty((t.shape[0], 8))
    for k, off in enumerate(itertools.product((0, 1), repeat=3)):
        f = np.ones(t.shape[0])
        for a in range(3):
            f = f * (t[:, a] if off[a] else 1.0 - t[:, a])
        w[:, k] = f
    return w


def energy_3d(phi: ScalarField, dist: DistanceField, p: int = 2, R: int = 5,
              kind: InterpolatorKind | str = InterpolatorKind.Q1) -> float:
    """Sub-cell quadrature of the energy.

    Every front cell is split into ``R^3`` sub-cells of side ``h = dx / R``.
    A sub-cell counts when ``|phi|`` at its centre is below ``(sqrt(3)/2) h``,
    and it contributes ``|d|^p h^2``.  The result is the ``1/p`` root of the sum.
    """
    if phi.grid.dim != 3:
        raise ValueError("energy_3d needs a 3D field")
    if R < 1 or p < 1:
        raise ValueError("R and p must be at least 1")
    kind = InterpolatorKind.parse(kind)
    cells = interface_cells(phi)
    if cells.shape[0] == 0:
        return 0.0
    h = phi.grid.dx / R
    thresh = math.sqrt(3.0) / 2.0 * h
    total = 0.0
    chunk = max(1, 200_000 // (R ** 3))
    if kind is InterpolatorKind.Q1:
        W = _subcell_weights(R)
        offs = list(itertools.product((0, 1), repeat=3))
        for s in range(0, cells.shape[0], chunk):
            c = cells[s:s + chunk]
            pc = np.stack([phi.values[c[:, 0] + o[0], c[:, 1] + o[1], c[:, 2] + o[2]] for o in offs], axis=1)
            dc = np.stack([dist.values[c[:, 0] + o[0], c[:, 1] + o[1], c[:, 2] + o[2]] for o in offs], axis=1)
            ps = pc @ W.T
            ds = dc @ W.T
            sel = np.abs(ps) < thresh
            total += float(np.sum(np.abs(ds[sel]) ** p))
    else:
        c1 = (np.arange(R) + 0.5) / R
        local = np.stack(np.meshgrid(c1, c1, c1, indexing="ij"), axis=-1).reshape(-1, 3)
        origin = np.asarray(phi.grid.origin)
        for s in range(0, cells.shape[0], chunk):
            c = cells[s:s + chunk]
            pts = (origin + phi.grid.dx * (c[:, None, :] + local[None, :, :])).reshape(-1, 3)
            ps = interp_points(kind, phi, pts)
            ds = interp_points(kind, dist.field, pts)
            sel = np.abs(ps) < thresh
            total += float(np.sum(np.abs(ds[sel]) ** p))
    return (total * h * h) ** (1.0 / p)


def energy(phi: ScalarField, dist: DistanceField, p: int = 2, R: int = 5) -> float:
    return energy_2d(phi, dist, p) if phi.grid.dim == 2 else energy_3d(phi, dist, p, R)


# --------------------------------------------------------------------------
# errors and update norms

def err_on_cloud(phi: ScalarField, cloud: PointCloud, kind=InterpolatorKind.WENO) -> float:
    """Mean of ``|phi|`` interpolated at the cloud points."""
    vals = interp_points(kind, phi, cloud.points)
    return float(np.mean(np.abs(vals)))


def l1_update(prev: ScalarField, nxt: ScalarField, band: BandMask) -> float:
    if prev.grid != nxt.grid or band.grid != prev.grid:
        raise ValueError("fields and band must share one grid")
    diff = np.abs(nxt.values[band.active] - prev.values[band.active])
    return float(np.sum(diff)) * prev.grid.dx ** prev.grid.dim


def l1_error_vs_exact(phi: ScalarField, spec: ShapeSpec, band: BandMask, clamp: bool = True) -> float:
    """``sum |phi - sdf| dx^dim`` over the reinitialisation band.

    ``phi`` is cut at ``+-band.gamma``, so by default the exact distance is cut
    the same way before comparing.  ``clamp=False`` compares with the raw
    signed distance, which also counts the cut itself as error on the outer
    ring of the band.
    """
    nodes = np.nonzero(band.reinit_region)
    exact = np.asarray(exact_sdf(spec, phi.grid.coords(nodes)))
    if clamp:
        exact = np.clip(exact, -band.gamma, band.gamma)
    return float(np.sum(np.abs(phi.values[nodes] - exact))) * phi.grid.dx ** phi.grid.dim


# --------------------------------------------------------------------------
# stopping rule

class StopDecision(str, enum.Enum):
    CONTINUE = "continue"
    STOP = "stop"


def trailing_mean(values, end: int, k: int) -> float:
    """Mean of ``values[end - k + 1 .. end]``."""
    return math.fsum(values[end - k + 1:end + 1]) / k


def delta_energy(values, n: int, k_window: int = K_WINDOW) -> float:
    """Relative change of the ``k``-point trailing mean, ``k = min(n, k_window)``.

    ``values[i]`` is the energy after ``i`` iterations.  Returns ``nan`` for
    ``n < 1`` and ``0`` when the current mean vanishes.
    """
    if n < 1:
        return math.nan
    if len(values) <= n:
        raise ValueError(f"history holds {len(values)} values, need index {n}")
    k = min(n, k_window)
    cur = trailing_mean(values, n, k)
    prev = trailing_mean(values, n - 1, k)
    if cur == 0.0:
        return 0.0
    return abs(prev - cur) / cur


def stopping_check(hist: EnergyHistory, n: int, min_iters: int = 10, max_iters: int = 100,
                   tol: float = 1e-4) -> StopDecision:
    if n >= max_iters:
        return StopDecision.STOP
    if n < min_iters or n < 1:
        return StopDecision.CONTINUE
    k = min(n, hist.k_window)
    if trailing_mean(hist.values, n, k) == 0.0:
        return StopDecision.STOP
    if delta_energy(hist.values, n, hist.k_window) < tol:
        return StopDecision.STOP
    return StopDecision.CONTINUE
