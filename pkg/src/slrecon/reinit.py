"""Reinitialization of the level-set function to a signed distance near the front.

Two stages.  First, the nodes touching the zero level set (a strict sign
change to an axis neighbour) receive a one-step distance estimate and are
frozen, which pins the front.  Second, the remaining band nodes are relaxed
with Jacobi iterations of ``phi_tau + s(phi0) (|grad phi| - 1) = 0`` using
the first-order Godunov upwind norm.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _accel
from ._accel import njit, prange
from .errors import NoInterfaceError
from .grid import BandMask, ScalarField, clamp_field


@dataclass(frozen=True)
class ReinitConfig:
    dtau: float
    max_iters: int
    residual_tol: float = 1e-3
    sign_eps: float | None = None

    def __post_init__(self):
        if not self.dtau > 0:
            raise ValueError("dtau must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.sign_eps is not None and not self.sign_eps > 0:
            raise ValueError("sign_eps must be positive")

    @classmethod
    def default(cls, dx: float, gamma: float) -> "ReinitConfig":
        return cls(dtau=0.5 * dx, max_iters=4 * math.ceil(gamma / dx - 1e-9), residual_tol=1e-3, sign_eps=dx)


@dataclass
class ReinitInfo:
    iterations: int
    residual: float
    frozen: int
    no_interface: bool = False


def _shift(v: np.ndarray, axis: int, step: int) -> np.ndarray:
    """``v`` moved by ``step`` along ``axis``; entries with no source are NaN."""
    out = np.full_like(v, np.nan)
    src = [slice(None)] * v.ndim
    dst = [slice(None)] * v.ndim
    if step > 0:
        src[axis] = slice(step, None)
        dst[axis] = slice(None, -step)
    else:
        src[axis] = slice(None, step)
        dst[axis] = slice(-step, None)
    out[tuple(dst)] = v[tuple(src)]
    return out


def interface_nodes(values: np.ndarray) -> np.ndarray:
    """Nodes with an axis neighbour of strictly opposite sign, plus exact zeros."""
    mask = values == 0.0
    for a in range(values.ndim):
        for s in (-1, 1):
            nb = _shift(values, a, s)
            with np.errstate(invalid="ignore"):
                mask |= values * nb < 0
    return mask


def interface_one_step(phi: ScalarField, *, method: str = "gradient"):
    """Distance estimate at interface nodes; returns ``(field, frozen_mask)``.

    ``method="gradient"`` divides ``phi_j`` by a gradient magnitude built from
    the largest of the centred and one-sided differences per axis.  This is
    exact for any planar front, whatever its orientation.  ``method="axis"``
    takes the smallest axis-wise linear crossing distance.  That is exact
    only for axis-aligned fronts; it is kept for comparison.
    Nodes where ``phi`` is exactly zero stay zero.
    """
    v = phi.values
    dx = phi.grid.dx
    if not (np.any(v < 0) and np.any(v > 0)) and not np.any(v == 0):
        raise NoInterfaceError("phi has no sign change")
    frozen = interface_nodes(v)
    if not np.any(v < 0) and not np.any(v > 0):
        frozen[...] = True
    out = v.copy()
    idx = np.nonzero(frozen & (v != 0))
    if method == "gradient":
        g2 = np.zeros(idx[0].size)
        for a in range(v.ndim):
            fp = _shift(v, a, 1)[idx]
            fm = _shift(v, a, -1)[idx]
            c = v[idx]
            cand = np.stack([np.abs(fp - c), np.abs(c - fm), np.abs(fp - fm) / 2.0], axis=1)
            da = np.max(np.where(np.isnan(cand), 0.0, cand), axis=1) / dx
            g2 += da * da
        out[idx] = v[idx] / np.sqrt(g2)
    elif method == "axis":
        best = np.full(idx[0].size, np.inf)
        c = v[idx]
        for a in range(v.ndim):
            for s in (-1, 1):
                nb = _shift(v, a, s)[idx]
                with np.errstate(invalid="ignore"):
                    cross = c * nb < 0
                off = dx * np.abs(c) / (np.abs(c) + np.abs(np.where(cross, nb, 1.0)))
                best = np.where(cross, np.minimum(best, off), best)
        out[idx] = np.sign(c) * best
    else:
        raise ValueError(f"unknown one-step method {method!r}")
    return ScalarField(phi.grid, out), frozen


# --------------------------------------------------------------------------
# Jacobi iteration kernels.  Both backends evaluate the same expressions in
# the same order so their results agree bit for bit.

def _upwind_terms(dm, dp, positive):
    """Squared Godunov contribution of one axis."""
    if positive:
        a = max(dm, 0.0)
        b = min(dp, 0.0)
    else:
        a = min(dm, 0.0)
        b = max(dp, 0.0)
    return max(a * a, b * b)


_upwind_terms_nb = njit(_upwind_terms)


@njit(parallel=True)
def _jacobi_nb(uf, shp, strides, nodes, sgn, dtau, dx, out):
    dim = shp.shape[0]
    for p in prange(nodes.shape[0]):
        flat = nodes[p]
        c = uf[flat]
        s = sgn[p]
        g2 = 0.0
        for a in range(dim):
            i = (flat // strides[a]) % shp[a]
            dm = (c - uf[flat - strides[a]]) / dx if i > 0 else 0.0
            dp = (uf[flat + strides[a]] - c) / dx if i < shp[a] - 1 else 0.0
            g2 += _upwind_terms_nb(dm, dp, s > 0)
        out[p] = c - dtau * s * (np.sqrt(g2) - 1.0)


def _jacobi_np(u, nodes, sgn, dtau, dx):
    shp = u.shape
    dim = u.ndim
    idx = np.unravel_index(nodes, shp)
    uf = u.reshape(-1)
    c = uf[nodes]
    pos = sgn > 0
    g2 = np.zeros(nodes.size)
    stride = 1
    strides = [0] * dim
    for a in range(dim - 1, -1, -1):
        strides[a] = stride
        stride *= shp[a]
    for a in range(dim):
        lo = idx[a] > 0
        hi = idx[a] < shp[a] - 1
        dm = np.where(lo, (c - uf[np.where(lo, nodes - strides[a], nodes)]) / dx, 0.0)
        dp = np.where(hi, (uf[np.where(hi, nodes + strides[a], nodes)] - c) / dx, 0.0)
        a_pos = np.maximum(dm, 0.0)
        b_pos = np.minimum(dp, 0.0)
        a_neg = np.minimum(dm, 0.0)
        b_neg = np.maximum(dp, 0.0)
        ta = np.where(pos, a_pos, a_neg)
        tb = np.where(pos, b_pos, b_neg)
        g2 = g2 + np.maximum(ta * ta, tb * tb)
    return c - dtau * sgn * (np.sqrt(g2) - 1.0)


def reinit_iterate(phi: ScalarField, band: BandMask, frozen: np.ndarray, cfg: ReinitConfig,
                   phi0: ScalarField | None = None, info: ReinitInfo | None = None) -> ScalarField:
    """Relax the band (minus ``frozen``) towards ``|grad phi| = 1``.

    The smoothed sign comes from ``phi0`` (the field before the one-step
    stage; defaults to ``phi``).  Updates that would flip a node's sign are
    halved towards zero instead.
    """
    if not np.any(frozen):
        raise ValueError("frozen set must not be empty")
    dx = phi.grid.dx
    eps = cfg.sign_eps if cfg.sign_eps is not None else dx
    ref = (phi0 if phi0 is not None else phi).values
    region = band.reinit_region & ~frozen
    nodes = np.flatnonzero(region)
    u = phi.values.copy()
    r0 = ref.reshape(-1)[nodes]
    sgn = r0 / np.sqrt(r0 * r0 + eps * eps)
    tol = cfg.residual_tol * dx
    it = 0
    res = 0.0
    uf = u.reshape(-1)
    shp = np.asarray(u.shape, dtype=np.int64)
    strides = np.asarray(u.strides, dtype=np.int64) // u.itemsize
    for it in range(1, int(cfg.max_iters) + 1):
        if nodes.size == 0:
            break
        if _accel.use_numba():
            new = np.empty(nodes.size)
            _jacobi_nb(uf, shp, strides, nodes, sgn, float(cfg.dtau), float(dx), new)
        else:
            new = _jacobi_np(u, nodes, sgn, float(cfg.dtau), float(dx))
        old = uf[nodes]
        new = np.where(new * r0 < 0, 0.5 * old, new)
        res = float(np.max(np.abs(new - old)))
        uf[nodes] = new
        if res < tol:
            break
    if info is not None:
        info.iterations = it
        info.residual = res
    return ScalarField(phi.grid, u)


def reinitialize(phi: ScalarField, band: BandMask, cfg: ReinitConfig | None = None, *,
                 method: str = "gradient", return_info: bool = False):
    """One-step pinning, band relaxation, then clamping to ``[-gamma, gamma]``."""
    if cfg is None:
        cfg = ReinitConfig.default(phi.grid.dx, band.gamma)
    try:
        pinned, frozen = interface_one_step(phi, method=method)
    except NoInterfaceError:
        warnings.warn("no zero level set found; field only clamped", RuntimeWarning, stacklevel=2)
        out = clamp_field(phi, band.gamma)
        info = ReinitInfo(0, 0.0, 0, no_interface=True)
        return (out, info) if return_info else out
    info = ReinitInfo(0, 0.0, int(frozen.sum()))
    relaxed = reinit_iterate(pinned, band, frozen, cfg, phi0=phi, info=info)
    out = clamp_field(relaxed, band.gamma)
    return (out, info) if return_info else out
