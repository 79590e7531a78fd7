"""Initial data, the per-run iteration loop and the multi-run refinement schedule."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .cloud import CloudStats, PointCloud, ShapeSpec, cloud_stats
from .distance import DistanceField, build_distance_field, sentinel, sweep_inplace, SWEEP_ROUNDS, SWEEP_TOL
from .errors import ConfigError, ReconError
from .evolve import StepConfig, sl_step
from .grid import (
    DEFAULT_NODE_BUDGET,
    BandMask,
    BandParams,
    Grid,
    ScalarField,
    build_grid,
    narrow_band,
)
from .interp import InterpolatorKind, interp_points
from .metrics import (
    EnergyHistory,
    MetricsRecord,
    StopDecision,
    delta_energy,
    energy,
    err_on_cloud,
    l1_error_vs_exact,
    l1_update,
    stopping_check,
)
from .reinit import reinitialize

PAD_EXTRA = 4


@dataclass(frozen=True)
class RunEntry:
    r: int
    p: int
    delta: float

    def __post_init__(self):
        if self.r < 1:
            raise ConfigError("run index r starts at 1")
        if self.p not in (1, 2):
            raise ConfigError(f"run {self.r}: p must be 1 or 2")
        if not 0.0 <= self.delta <= 1.0:
            raise ConfigError(f"run {self.r}: delta must lie in [0, 1]")

    @classmethod
    def default(cls, r: int) -> "RunEntry":
        if r == 1:
            return cls(1, 1, 0.0)
        if r == 2:
            return cls(2, 2, 0.0)
        return cls(r, 2, 1.0)


def default_runs(n: int) -> list:
    return [RunEntry.default(r) for r in range(1, n + 1)]


@dataclass
class ScheduleConfig:
    runs: list = field(default_factory=lambda: default_runs(3))
    dx_rule: str = "standard"
    dt_factor: float = 0.25
    K_S: float = 2.0
    seed: int = 0
    min_iters: int = 10
    max_iters: int = 100
    tol: float = 1e-4
    interpolator: InterpolatorKind = InterpolatorKind.WENO
    sample_fraction: float = 0.1
    energy_R: int = 5
    node_budget: int = DEFAULT_NODE_BUDGET

    def __post_init__(self):
        if not self.runs:
            raise ConfigError("the schedule needs at least one run")
        self.runs = [r if isinstance(r, RunEntry) else RunEntry(*r) for r in self.runs]
        if self.dx_rule not in ("standard", "fine"):
            raise ConfigError(f"dx_rule must be 'standard' or 'fine', got {self.dx_rule!r}")
        if not self.dt_factor > 0:
            raise ConfigError("dt_factor must be positive")
        if not self.K_S > 0:
            raise ConfigError("K_S must be positive")
        if self.min_iters < 0 or self.max_iters < 1 or self.min_iters > self.max_iters:
            raise ConfigError("need 0 <= min_iters <= max_iters and max_iters >= 1")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.energy_R < 1:
            raise ConfigError("energy_R must be at least 1")
        try:
            self.interpolator = InterpolatorKind.parse(self.interpolator)
        except ReconError as exc:
            raise ConfigError(str(exc)) from None

    def dx_for(self, h_S: float, r: int) -> float:
        shift = r if self.dx_rule == "fine" else r - 1
        return h_S / 2 ** shift


@dataclass
class RunState:
    entry: RunEntry
    grid: Grid
    phi: ScalarField
    dist: DistanceField
    band: BandMask
    metrics: list = field(default_factory=list)
    initial_E2: float = math.nan
    initial_err_cloud: float = math.nan
    wall_s: float = 0.0


@dataclass
class ScheduleResult:
    stats: CloudStats
    runs: list

    @property
    def final(self) -> RunState:
        return self.runs[-1]

    @property
    def metrics(self) -> list:
        return [m for run in self.runs for m in run.metrics]


# --------------------------------------------------------------------------
# initial data

def mark_external(dist: DistanceField, gamma_S: float) -> np.ndarray:
    """Nodes reachable from the grid boundary through axis neighbours with ``d >= gamma_S``."""
    if not gamma_S > 0:
        raise ValueError("gamma_S must be positive")
    free = dist.values >= gamma_S
    labels, count = ndimage.label(free)
    if count == 0:
        return np.zeros_like(free)
    dim = free.ndim
    border = []
    for a in range(dim):
        for end in (0, -1):
            sl = [slice(None)] * dim
            sl[a] = end
            border.append(labels[tuple(sl)].ravel())
    touching = np.unique(np.concatenate(border))
    touching = touching[touching > 0]
    return np.isin(labels, touching)


def initial_level_set(dist: DistanceField, external: np.ndarray, gamma_S: float) -> ScalarField:
    """``d - gamma_S`` outside, a swept distance (negated) inside the ``d = gamma_S`` shell."""
    grid = dist.grid
    u = np.where(external, dist.values - gamma_S, sentinel(grid))
    sweep_inplace(u, external, grid.dx, SWEEP_TOL * grid.dx, SWEEP_ROUNDS)
    u = np.where(external, u, -u)
    return ScalarField(grid, u)


def transfer_solution(coarse: ScalarField, fine_grid: Grid) -> ScalarField:
    """Multilinear transfer of ``coarse`` onto ``fine_grid``; nodes beyond the coarse hull use the nearest hull point."""
    if coarse.grid.dim != fine_grid.dim:
        raise ValueError("grid dimensions differ")
    pts = np.stack([m.ravel() for m in fine_grid.mesh()], axis=1)
    pts = coarse.grid.clamp(pts)
    vals = interp_points(InterpolatorKind.Q1, coarse, pts)
    return ScalarField(fine_grid, vals.reshape(fine_grid.dims))


# --------------------------------------------------------------------------
# schedule

def _prepare_grid(cloud: PointCloud, stats: CloudStats, cfg: ScheduleConfig, r: int):
    dx = cfg.dx_for(stats.h_S, r)
    band = BandParams.default(cloud.dim, dx)
    pad = math.ceil(max(stats.gamma_S, band.gamma) / dx - 1e-9) + PAD_EXTRA
    grid = build_grid(cloud.bbox_min, cloud.bbox_max, dx, pad, cfg.node_budget)
    return grid, band


def _context(exc: ReconError, r: int, n: int | None) -> ReconError:
    where = f"run {r}" if n is None else f"run {r}, iteration {n}"
    try:
        new = type(exc)(f"{where}: {exc}")
    except TypeError:
        return exc
    return new


def run_schedule(cloud: PointCloud, cfg: ScheduleConfig | None = None, *, exact: ShapeSpec | None = None,
                 callback: Callable[[MetricsRecord], None] | None = None,
                 timing: bool = True) -> ScheduleResult:
    """Run every entry of the schedule, refining the grid from one run to the next.

    ``exact`` enables the L1 error against the analytic shape; ``callback``
    receives each :class:`MetricsRecord` as soon as it is produced.
    """
    cfg = cfg or ScheduleConfig()
    stats = cloud_stats(cloud, cfg.K_S, cfg.sample_fraction, cfg.seed)
    runs = []
    prev_phi = None
    for entry in cfg.runs:
        t_run = time.perf_counter()
        try:
            grid, bp = _prepare_grid(cloud, stats, cfg, entry.r)
            dist = build_distance_field(grid, cloud)
            if prev_phi is None:
                ext = mark_external(dist, stats.gamma_S)
                phi = initial_level_set(dist, ext, stats.gamma_S)
            else:
                phi = transfer_solution(prev_phi, grid)
            phi = reinitialize(phi, narrow_band(phi, bp.gamma))
        except ReconError as exc:
            raise _context(exc, entry.r, None) from exc
        state = _run_one(cloud, entry, grid, bp, dist, phi, cfg, exact, callback, timing)
        state.wall_s = time.perf_counter() - t_run
        runs.append(state)
        prev_phi = state.phi
    return ScheduleResult(stats, runs)


def _run_one(cloud, entry, grid, bp, dist, phi, cfg, exact, callback, timing):
    step = StepConfig(entry.p, entry.delta, cfg.dt_factor * grid.dx, cfg.interpolator, bp)
    hist = EnergyHistory()
    E2 = energy(phi, dist, 2, cfg.energy_R)
    hist.append(E2)
    band = narrow_band(phi, bp.gamma)
    state = RunState(entry, grid, phi, dist, band)
    state.initial_E2 = E2
    state.initial_err_cloud = err_on_cloud(phi, cloud, cfg.interpolator)
    n = 0
    while True:
        t0 = time.perf_counter()
        try:
            band = narrow_band(phi, bp.gamma)
            E_p = hist.values[n] if entry.p == 2 else 1.0
            moved = sl_step(phi, dist, band, step, E_p)
            new = reinitialize(moved, band)
            E2 = energy(new, dist, 2, cfg.energy_R)
        except ReconError as exc:
            raise _context(exc, entry.r, n + 1) from exc
        hist.append(E2)
        upd = l1_update(phi, new, band)
        phi = new
        n += 1
        new_band = narrow_band(phi, bp.gamma)
        rec = MetricsRecord(
            run=entry.r,
            iter=n,
            E2=E2,
            delta_E=delta_energy(hist.values, n, hist.k_window),
            err_cloud=err_on_cloud(phi, cloud, cfg.interpolator),
            l1_update=upd,
            l1_error=None if exact is None else l1_error_vs_exact(phi, exact, new_band),
            wall_ms=(time.perf_counter() - t0) * 1e3 if timing else None,
        )
        state.metrics.append(rec)
        if callback is not None:
            callback(rec)
        if stopping_check(hist, n, cfg.min_iters, cfg.max_iters, cfg.tol) is StopDecision.STOP:
            break
    state.phi = phi
    state.band = narrow_band(phi, bp.gamma)
    return state
