"""Point clouds: file ingestion, resolution statistics and synthetic shapes.

Synthetic shapes come with analytic signed distance functions (negative
inside) so reconstructions can be scored against the exact surface.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    CloudFormatError,
    EmptyCloudError,
    InsufficientDataError,
    ParseError,
    ShapeSpecError,
)

SHAPE_KINDS = ("circle", "square45", "sphere", "cube_spheres")


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise EmptyCloudError("point cloud is empty")
        if pts.shape[1] not in (2, 3):
            raise CloudFormatError(f"points must have 2 or 3 components, got {pts.shape[1]}")
        if not np.all(np.isfinite(pts)):
            raise CloudFormatError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def bbox_min(self) -> np.ndarray:
        return self.points.min(axis=0)

    @property
    def bbox_max(self) -> np.ndarray:
        return self.points.max(axis=0)


@dataclass(frozen=True)
class CloudStats:
    h_S: float
    gamma_S: float
    K_S: float
    bbox_min: tuple
    bbox_max: tuple
    sample_seed: int


@dataclass(frozen=True)
class ShapeSpec:
    """Analytic test shape.

    ``params`` holds the size parameters of the kind: ``radius`` for circle
    and sphere, ``edge`` for square45 and ``edge``/``big_radius``/
    ``small_radius``/``angles`` for cube_spheres.  ``center`` defaults to the
    origin.
    """

    kind: str
    n_points: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ShapeSpecError(f"unknown shape kind {self.kind!r}; expected one of {SHAPE_KINDS}")
        if self.n_points < 4:
            raise ShapeSpecError("n_points must be at least 4")
        merged = {**_DEFAULT_PARAMS[self.kind], **self.params}
        for key in ("radius", "edge", "big_radius", "small_radius"):
            if key in merged and not merged[key] > 0:
                raise ShapeSpecError(f"{key} must be positive")
        object.__setattr__(self, "params", merged)

    @property
    def dim(self) -> int:
        return 2 if self.kind in ("circle", "square45") else 3

    @property
    def center(self) -> np.ndarray:
        c = self.params.get("center")
        return np.zeros(self.dim) if c is None else np.asarray(c, dtype=float)


_DEFAULT_PARAMS = {
    "circle": {"radius": 1.0},
    "square45": {"edge": 1.0},
    "sphere": {"radius": 1.0},
    "cube_spheres": {
        "edge": 0.8,
        "big_radius": 0.25,
        "small_radius": 0.15,
        "angles": (0.45, 0.6, 0.3),
    },
}


# --------------------------------------------------------------------------
# file formats

def load_cloud(path, format: str | None = None) -> PointCloud:
    """Read an ``xyz`` (whitespace columns) or ``ply`` file.

    The format defaults to the file extension.
    """
    path = os.fspath(path)
    if format is None:
        ext = os.path.splitext(path)[1].lower().lstrip(".")
        format = "ply" if ext == "ply" else "xyz"
    format = format.lower()
    if format == "xyz":
        with open(path, "r", encoding="utf-8") as fh:
            pts = _parse_xyz(fh)
    elif format == "ply":
        with open(path, "rb") as fh:
            pts = _parse_ply(fh)
    else:
        raise ParseError(f"unsupported point-cloud format {format!r}")
    return PointCloud(pts, source_id=path)


def _parse_xyz(lines) -> np.ndarray:
    rows = []
    ncols = None
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.replace(",", " ").split()
        try:
            row = [float(p) for p in parts]
        except ValueError:
            raise ParseError(f"cannot parse coordinates {text!r}", line=lineno) from None
        if len(row) not in (2, 3):
            raise CloudFormatError(f"expected 2 or 3 columns, got {len(row)}", line=lineno)
        if ncols is None:
            ncols = len(row)
        elif len(row) != ncols:
            raise CloudFormatError(f"expected {ncols} columns, got {len(row)}", line=lineno)
        if not all(math.isfinite(v) for v in row):
            raise ParseError("non-finite coordinate", line=lineno)
        rows.append(row)
    if not rows:
        raise EmptyCloudError("no points in file")
    return np.array(rows, dtype=np.float64)


_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _parse_ply(fh) -> np.ndarray:
    magic = fh.readline().strip()
    if magic != b"ply":
        raise ParseError("missing 'ply' magic", line=1)
    fmt = None
    elements = []  # (name, count, [(prop_name, dtype or ('list', count_t, item_t))])
    lineno = 1
    while True:
        raw = fh.readline()
        lineno += 1
        if not raw:
            raise ParseError("unterminated PLY header", line=lineno)
        tokens = raw.decode("ascii", errors="replace").split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        key = tokens[0]
        if key == "format":
            if len(tokens) < 2 or tokens[1] not in ("ascii", "binary_little_endian"):
                raise ParseError(f"unsupported PLY format {' '.join(tokens[1:])!r}", line=lineno)
            fmt = tokens[1]
        elif key == "element":
            if len(tokens) != 3:
                raise ParseError("malformed element line", line=lineno)
            try:
                elements.append((tokens[1], int(tokens[2]), []))
            except ValueError:
                raise ParseError("element count is not an integer", line=lineno) from None
        elif key == "property":
            if not elements:
                raise ParseError("property before any element", line=lineno)
            if tokens[1] == "list":
                if len(tokens) != 5 or tokens[2] not in _PLY_TYPES or tokens[3] not in _PLY_TYPES:
                    raise ParseError("malformed list property", line=lineno)
                elements[-1][2].append((tokens[4], ("list", _PLY_TYPES[tokens[2]], _PLY_TYPES[tokens[3]])))
            else:
                if len(tokens) != 3 or tokens[1] not in _PLY_TYPES:
                    raise ParseError(f"unknown property type {tokens[1]!r}", line=lineno)
                elements[-1][2].append((tokens[2], _PLY_TYPES[tokens[1]]))
        elif key == "end_header":
            break
        else:
            raise ParseError(f"unexpected header keyword {key!r}", line=lineno)
    if fmt is None:
        raise ParseError("PLY header has no format line", line=lineno)
    names = [e[0] for e in elements]
    if "vertex" not in names:
        raise ParseError("PLY file has no vertex element", line=lineno)
    for name, count, props in elements:
        pnames = [p[0] for p in props]
        if name == "vertex":
            for axis in "xyz":
                if axis not in pnames:
                    raise CloudFormatError(f"vertex element lacks property {axis!r}", line=lineno)
                if dict(props)[axis] not in ("f4", "f8"):
                    raise CloudFormatError(f"vertex property {axis!r} must be float or double", line=lineno)
    if fmt == "ascii":
        return _ply_ascii(fh, elements, lineno)
    return _ply_binary(fh, elements)


def _ply_ascii(fh, elements, lineno) -> np.ndarray:
    for name, count, props in elements:
        if name != "vertex":
            for _ in range(count):
                fh.readline()
                lineno += 1
            continue
        cols = [p[0] for p in props]
        if any(isinstance(p[1], tuple) for p in props):
            raise CloudFormatError("list properties on vertex elements are not supported", line=lineno)
        ix = [cols.index(a) for a in "xyz"]
        pts = np.empty((count, 3))
        for n in range(count):
            raw = fh.readline()
            lineno += 1
            parts = raw.split()
            if len(parts) < len(cols):
                raise ParseError("truncated vertex record", line=lineno)
            try:
                pts[n] = [float(parts[i]) for i in ix]
            except ValueError:
                raise ParseError("cannot parse vertex coordinates", line=lineno) from None
        if count == 0:
            raise EmptyCloudError("PLY vertex element is empty")
        return pts
    raise ParseError("vertex element missing")  # pragma: no cover


def _ply_binary(fh, elements) -> np.ndarray:
    for name, count, props in elements:
        if any(isinstance(p[1], tuple) for p in props):
            if name == "vertex":
                raise CloudFormatError("list properties on vertex elements are not supported")
            _skip_binary_lists(fh, count, props)
            continue
        dtype = np.dtype([(p[0], "<" + p[1]) for p in props])
        buf = fh.read(dtype.itemsize * count)
        if len(buf) != dtype.itemsize * count:
            raise ParseError(f"truncated binary data in element {name!r}")
        if name == "vertex":
            rec = np.frombuffer(buf, dtype=dtype)
            if count == 0:
                raise EmptyCloudError("PLY vertex element is empty")
            return np.stack([rec[a].astype(np.float64) for a in "xyz"], axis=1)
    raise ParseError("vertex element missing")  # pragma: no cover


def _skip_binary_lists(fh, count, props):
    for _ in range(count):
        for _, t in props:
            if isinstance(t, tuple):
                _, count_t, item_t = t
                size = np.dtype(count_t).itemsize
                n = int(np.frombuffer(fh.read(size), dtype="<" + count_t)[0])
                fh.read(n * np.dtype(item_t).itemsize)
            else:
                fh.read(np.dtype(t).itemsize)


def write_cloud_xyz(cloud: PointCloud, path) -> None:
    """Write one point per line with round-trip exact (``repr``) decimals."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in cloud.points:
            fh.write(" ".join(repr(float(v)) for v in p))
            fh.write("\n")


# --------------------------------------------------------------------------
# statistics

def nearest_neighbour_distances(cloud: PointCloud, which=None) -> np.ndarray:
    """Distance from each selected point to its nearest *other* point of the cloud."""
    tree = cKDTree(cloud.points)
    query = cloud.points if which is None else cloud.points[which]
    dist, _ = tree.query(query, k=2)
    return dist[:, 1]


def estimate_resolution(cloud: PointCloud, sample_fraction: float = 0.1, seed: int = 0) -> float:
    """Mean nearest-neighbour spacing over a seeded random sample of the cloud."""
    if len(cloud) < 2:
        raise InsufficientDataError("resolution estimate needs at least two points")
    if not 0.0 < sample_fraction <= 1.0:
        raise ValueError("sample_fraction must lie in (0, 1]")
    n = len(cloud)
    m = max(1, int(round(sample_fraction * n)))
    if m >= n:
        which = np.arange(n)
    else:
        which = np.random.default_rng(seed).permutation(n)[:m]
    return float(np.mean(nearest_neighbour_distances(cloud, which)))


def cloud_stats(cloud: PointCloud, K_S: float = 2.0, sample_fraction: float = 0.1, seed: int = 0) -> CloudStats:
    h = estimate_resolution(cloud, sample_fraction, seed)
    return CloudStats(
        h_S=h,
        gamma_S=K_S * h,
        K_S=K_S,
        bbox_min=tuple(cloud.bbox_min.tolist()),
        bbox_max=tuple(cloud.bbox_max.tolist()),
        sample_seed=seed,
    )


# --------------------------------------------------------------------------
# synthetic shapes

def _rotation(angles: Sequence[float]) -> np.ndarray:
    a, b, c = angles
    rx = np.array([[1, 0, 0], [0, math.cos(a), -math.sin(a)], [0, math.sin(a), math.cos(a)]])
    ry = np.array([[math.cos(b), 0, math.sin(b)], [0, 1, 0], [-math.sin(b), 0, math.cos(b)]])
    rz = np.array([[math.cos(c), -math.sin(c), 0], [math.sin(c), math.cos(c), 0], [0, 0, 1]])
    return rz @ ry @ rx


def fibonacci_sphere(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    theta = math.pi * (3.0 - math.sqrt(5.0)) * np.arange(n)
    pts = np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def _cube_spheres_parts(params):
    a = params["edge"]
    h = a / 2.0
    spheres = [
        (np.array([h, h, 0.0]), params["big_radius"]),
        (np.array([-h, -h, h]), params["small_radius"]),
        (np.array([-h, -h, -h]), params["small_radius"]),
    ]
    return h, spheres


def _cube_spheres_body_sdf(q, params):
    h, spheres = _cube_spheres_parts(params)
    parts = [_box_sdf(q, np.full(3, h))]
    parts += [np.linalg.norm(q - c, axis=-1) - r for c, r in spheres]
    return np.min(np.stack(parts, axis=0), axis=0), parts


def _box_sdf(q, half):
    d = np.abs(q) - half
    outside = np.linalg.norm(np.maximum(d, 0.0), axis=-1)
    inside = np.minimum(np.max(d, axis=-1), 0.0)
    return outside + inside


def _cube_spheres_points(params, spacing):
    h, spheres = _cube_spheres_parts(params)
    m = max(1, int(round(2 * h / spacing)))
    s = (np.arange(m) + 0.5) / m * 2 * h - h
    u, v = np.meshgrid(s, s, indexing="ij")
    u, v = u.ravel(), v.ravel()
    chunks = []
    for axis in range(3):
        for sign in (-1.0, 1.0):
            face = np.empty((u.size, 3))
            others = [i for i in range(3) if i != axis]
            face[:, axis] = sign * h
            face[:, others[0]] = u
            face[:, others[1]] = v
            chunks.append(face)
    for c, r in spheres:
        n = max(4, int(round(4 * math.pi * r * r / spacing ** 2)))
        chunks.append(c + r * fibonacci_sphere(n))
    pts = np.concatenate(chunks)
    _, parts = _cube_spheres_body_sdf(pts, params)
    # keep points not strictly inside another component
    keep = np.ones(len(pts), dtype=bool)
    tol = 1e-12
    start = 0
    for ci, chunk in enumerate([np.concatenate(chunks[:6])] + chunks[6:]):
        stop = start + len(chunk)
        for pj, part in enumerate(parts):
            if pj != ci:
                keep[start:stop] &= part[start:stop] >= -tol
        start = stop
    return pts[keep]


def sample_shape(spec: ShapeSpec, seed: int = 0) -> PointCloud:
    """Deterministic sample of the shape boundary.

    ``seed`` is accepted for interface uniformity; all current samplers are
    deterministic lattices.
    """
    n = spec.n_points
    c = spec.center
    p = spec.params
    if spec.kind == "circle":
        t = 2.0 * math.pi * np.arange(n) / n
        pts = c + p["radius"] * np.stack([np.cos(t), np.sin(t)], axis=1)
    elif spec.kind == "square45":
        e = p["edge"]
        s = np.arange(n) * (4.0 * e / n)
        side = np.minimum((s // e).astype(int), 3)
        u = s - side * e
        corners = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float) * (e / 2.0)
        a = corners[side]
        b = corners[(side + 1) % 4]
        local = a + (b - a) * (u / e)[:, None]
        pts = c + local @ _rot2(math.pi / 4).T
    elif spec.kind == "sphere":
        pts = c + p["radius"] * fibonacci_sphere(n)
    else:
        area0 = _cube_spheres_points(p, 0.05).shape[0] * 0.05 ** 2
        spacing = math.sqrt(area0 / n)
        for _ in range(3):
            count = _cube_spheres_points(p, spacing).shape[0]
            spacing *= math.sqrt(count / n)
        body = _cube_spheres_points(p, spacing)
        pts = c + body @ _rotation(p["angles"]).T
    return PointCloud(pts, source_id=f"{spec.kind}:{n}")


def _rot2(theta):
    return np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])


def exact_sdf(spec: ShapeSpec, point) -> np.ndarray | float:
    """Analytic signed distance (negative inside); accepts one point or an (N, dim) array."""
    q = np.asarray(point, dtype=float)
    scalar = q.ndim == 1
    q = np.atleast_2d(q)
    if q.shape[-1] != spec.dim:
        raise ShapeSpecError(f"point dimension {q.shape[-1]} does not match shape dimension {spec.dim}")
    q = q - spec.center
    p = spec.params
    if spec.kind in ("circle", "sphere"):
        out = np.linalg.norm(q, axis=1) - p["radius"]
    elif spec.kind == "square45":
        local = q @ _rot2(math.pi / 4)  # inverse rotation applied to row vectors
        out = _box_sdf(local, np.full(2, p["edge"] / 2.0))
    else:
        body = q @ _rotation(p["angles"])
        out, _ = _cube_spheres_body_sdf(body, p)
    return float(out[0]) if scalar else out
