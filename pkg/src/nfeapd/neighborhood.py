"""Nonlocal neighbor lists with quadrature-weighted volumes, and pre-cracks."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .material import LINEAR_INFLUENCE
from .mesh import MIDPOINT3, MeshError


@dataclass(eq=False)
class BondTable:
    """CSR bond storage: row ``i`` holds bonds ``row[i]:row[i+1]`` sorted by
    neighbor id.

    ``broken`` is the only mutable array; flags only ever go from False to
    True.
    """

    row: np.ndarray
    nbr: np.ndarray
    volume: np.ndarray
    length: np.ndarray
    direction: np.ndarray
    broken: np.ndarray
    horizon: float
    mode: str = "nfea"

    @classmethod
    def from_csr(cls, nodes, row, nbr, volume, horizon, mode="nfea"):
        owner = np.repeat(np.arange(len(row) - 1), np.diff(row))
        vec = nodes[nbr] - nodes[owner]
        length = np.hypot(vec[:, 0], vec[:, 1])
        if np.any(length <= 0):
            raise MeshError("coincident nodes produce a zero-length bond")
        direction = vec / length[:, None]
        return cls(np.asarray(row, dtype=np.int64), np.asarray(nbr, dtype=np.int32),
                   np.asarray(volume, dtype=float), length, np.ascontiguousarray(direction),
                   np.zeros(len(nbr), dtype=bool), float(horizon), mode)

    @property
    def n_nodes(self):
        return len(self.row) - 1

    @property
    def n_bonds(self):
        return len(self.nbr)

    def owners(self):
        return np.repeat(np.arange(self.n_nodes), np.diff(self.row))

    def neighbors(self, i):
        return self.nbr[self.row[i]:self.row[i + 1]]

    def volumes(self, i):
        return self.volume[self.row[i]:self.row[i + 1]]

    def bond_index(self, i, j):
        k = np.searchsorted(self.neighbors(i), j)
        if k >= self.row[i + 1] - self.row[i] or self.nbr[self.row[i] + k] != j:
            raise KeyError((i, j))
        return int(self.row[i] + k)

    def copy(self):
        return BondTable(self.row, self.nbr, self.volume, self.length, self.direction,
                         self.broken.copy(), self.horizon, self.mode)

    def total_volume(self):
        return np.add.reduceat(self.volume, self.row[:-1]) if self.n_bonds else np.zeros(self.n_nodes)

    def dump_csv(self, path):
        """One record per bond: ``i,j,V_ij,length,broken``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "V_ij", "length", "broken"])
            for i, j, v, L, b in zip(self.owners(), self.nbr, self.volume, self.length, self.broken):
                w.writerow([int(i), int(j), repr(float(v)), repr(float(L)), int(b)])


def _grid_for(points, eps):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    cell = eps * (1.0 + 1e-9)
    nx, ny = (np.floor((hi - lo) / cell).astype(np.int64) + 1).tolist()
    return lo.astype(float), cell, int(nx), int(ny)


def build_neighbors(mesh, horizon, J=LINEAR_INFLUENCE, rule=MIDPOINT3) -> BondTable:
    """Neighbor lists and weighted volumes from element quadrature.

    Node ``j`` is a neighbor of ``i`` when a quadrature point of an element
    incident to ``j`` lies within the horizon of ``x_i``; its volume is the
    sum over those points of ``J(|x_q - x_i|/eps) phi_j(x_q) w_q``.
    """
    _check_horizon(mesh, horizon)
    M, Q = mesh.n_elements, rule.size
    p = mesh.nodes[mesh.elements]
    qpts = np.ascontiguousarray(np.einsum("qv,mvd->mqd", rule.points, p).reshape(-1, 2))
    qweight = (mesh.areas()[:, None] * rule.weights[None, :]).ravel()
    qowner = np.repeat(np.arange(M, dtype=np.int64), Q)
    qlocal = np.tile(np.arange(Q, dtype=np.int64), M)
    origin, cell, nx, ny = _grid_for(np.vstack([qpts, mesh.nodes]), horizon)
    row, nbr, vol = _kernels.nfea_neighbors(
        mesh.nodes, mesh.elements, qpts, qowner, qlocal, qweight,
        np.ascontiguousarray(rule.points), float(horizon), J.kernel, origin, cell, nx, ny)
    return BondTable.from_csr(mesh.nodes, row, nbr, vol, horizon, "nfea")


def build_neighbors_meshfree(mesh, horizon, J=LINEAR_INFLUENCE) -> BondTable:
    """Lattice neighbor lists with ``V_ij = J(|x_j - x_i|/eps) h^2``."""
    if mesh.structured is None:
        raise MeshError("the meshfree discretization needs a structured uniform mesh")
    _check_horizon(mesh, horizon)
    h = mesh.structured.h
    origin, cell, nx, ny = _grid_for(mesh.nodes, horizon)
    row, nbr, vol = _kernels.lattice_neighbors(mesh.nodes, float(horizon), J.kernel, h * h,
                                               origin, cell, nx, ny)
    return BondTable.from_csr(mesh.nodes, row, nbr, vol, horizon, "meshfree")


def _check_horizon(mesh, horizon):
    if not horizon > 1e-12 * mesh.diameter:
        raise MeshError(f"horizon {horizon!r} is too small for the mesh")
    h = mesh.mesh_size()
    if horizon < h:
        warnings.warn(f"horizon {horizon:g} is smaller than the mesh size {h:g} (under-resolved)",
                      stacklevel=3)


# --------------------------------------------------------------------------
# pre-cracks


@dataclass(frozen=True)
class CrackGeometry:
    segments: tuple

    def __init__(self, segments: Sequence):
        segs = []
        for a, b in segments:
            a = (float(a[0]), float(a[1]))
            b = (float(b[0]), float(b[1]))
            if a == b:
                raise ValueError("crack segment endpoints must differ")
            segs.append((a, b))
        object.__setattr__(self, "segments", tuple(segs))


def _orient(ax, ay, bx, by, cx, cy):
    """Sign of the turn a->b->c with a scale-aware zero band."""
    ux, uy = bx - ax, by - ay
    vx, vy = cx - ax, cy - ay
    cross = ux * vy - uy * vx
    scale = np.hypot(ux, uy) * np.hypot(vx, vy)
    return np.where(np.abs(cross) <= 1e-12 * scale, 0, np.sign(cross)).astype(np.int8)


def segments_intersect(p1, p2, q1, q2):
    """Proper crossing or collinear overlap of positive length.

    Arguments broadcast, so arrays of segments can be tested at once.
    Touching at an endpoint does not count.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    d1 = _orient(q1[..., 0], q1[..., 1], q2[..., 0], q2[..., 1], p1[..., 0], p1[..., 1])
    d2 = _orient(q1[..., 0], q1[..., 1], q2[..., 0], q2[..., 1], p2[..., 0], p2[..., 1])
    d3 = _orient(p1[..., 0], p1[..., 1], p2[..., 0], p2[..., 1], q1[..., 0], q1[..., 1])
    d4 = _orient(p1[..., 0], p1[..., 1], p2[..., 0], p2[..., 1], q2[..., 0], q2[..., 1])
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)

    # collinear: project both onto the p direction and require overlap
    collinear = (d1 == 0) & (d2 == 0) & (d3 == 0) & (d4 == 0)
    u = p2 - p1
    uu = np.maximum(np.sum(u * u, axis=-1), np.finfo(float).tiny)
    t1 = np.sum((q1 - p1) * u, axis=-1) / uu
    t2 = np.sum((q2 - p1) * u, axis=-1) / uu
    lo = np.maximum(0.0, np.minimum(t1, t2))
    hi = np.minimum(1.0, np.maximum(t1, t2))
    overlap = collinear & (hi - lo > 1e-12)
    out = proper | overlap
    return bool(out) if out.ndim == 0 else out


def apply_precrack(table, mesh, crack) -> BondTable:
    """Mark every bond crossing a crack segment as broken (in place)."""
    if isinstance(crack, CrackGeometry):
        segments = crack.segments
    else:
        segments = CrackGeometry(crack).segments
    nodes = mesh.nodes
    pad = table.horizon + mesh.mesh_size()
    for a, b in segments:
        a = np.array(a)
        b = np.array(b)
        near = np.all((nodes >= np.minimum(a, b) - pad) & (nodes <= np.maximum(a, b) + pad), axis=1)
        owners = np.flatnonzero(near)
        if owners.size == 0:
            continue
        counts = table.row[owners + 1] - table.row[owners]
        starts = np.repeat(table.row[owners] - np.cumsum(counts) + counts, counts)
        bonds = starts + np.arange(counts.sum())
        own = np.repeat(owners, counts)
        hit = segments_intersect(nodes[own], nodes[table.nbr[bonds]], a, b)
        table.broken[bonds[hit]] = True
    return table
