"""Level-set surface reconstruction from unorganised point clouds.

A zero level set is evolved towards the cloud with a semi-Lagrangian scheme
on a uniform grid, using multilinear or WENO interpolation, inside a narrow
band.  The grid is refined over several runs.

Typical use::

    from slrecon import ShapeSpec, sample_shape, run_schedule, ScheduleConfig
    cloud = sample_shape(ShapeSpec("circle", 64))
    result = run_schedule(cloud, ScheduleConfig(K_S=1.0))
    phi = result.final.phi
"""
from ._accel import backend, set_backend, set_threads, using
from .cloud import CloudStats, PointCloud, ShapeSpec, cloud_stats, exact_sdf, load_cloud, sample_shape
from .distance import DistanceField, build_distance_field
from .driver import RunEntry, ScheduleConfig, ScheduleResult, default_runs, run_schedule
from .errors import ReconError
from .grid import BandMask, BandParams, Grid, ScalarField, build_grid, narrow_band
from .interp import InterpolatorKind, interp, interp_points
from .io import read_field_vtk, read_metrics_csv, write_field_vtk, write_metrics_csv
from .metrics import MetricsRecord, energy_2d, energy_3d, err_on_cloud

__version__ = "0.1.0"

__all__ = [
    "BandMask", "BandParams", "CloudStats", "DistanceField", "Grid", "InterpolatorKind", "MetricsRecord",
    "PointCloud", "ReconError", "RunEntry", "ScalarField", "ScheduleConfig", "ScheduleResult", "ShapeSpec",
    "backend", "build_distance_field", "build_grid", "cloud_stats", "default_runs", "energy_2d", "energy_3d",
    "err_on_cloud", "exact_sdf", "interp", "interp_points", "load_cloud", "narrow_band", "read_field_vtk",
    "read_metrics_csv", "run_schedule", "sample_shape", "set_backend", "set_threads", "using",
    "write_field_vtk", "write_metrics_csv",
]
