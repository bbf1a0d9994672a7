"""Post-processing: element strains, L2 differences between meshes,
convergence rates, crack tracking and damage-zone metrics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .mesh import RADON7, MeshError, interpolate_at, shape_gradients


@dataclass
class ElementStrainField:
    tensor: np.ndarray  # (M, 2, 2)
    magnitude: np.ndarray  # (M,)


def element_strain(mesh, U):
    """Small strain ``(grad u + grad u^T)/2`` per linear element and its
    Frobenius norm."""
    U = np.asarray(U, dtype=float)
    if U.shape != (mesh.n_nodes, 2):
        raise ValueError(f"displacement shape {U.shape} does not match {mesh.n_nodes} nodes")
    if np.any(mesh.areas() <= 0):
        raise MeshError("degenerate element")
    G = shape_gradients(mesh)  # (M, 3, 2): dN_v/dx_d
    grad = np.einsum("mvi,mvd->mid", U[mesh.elements], G)  # du_i/dx_d
    E = 0.5 * (grad + grad.transpose(0, 2, 1))
    return ElementStrainField(E, np.sqrt(np.einsum("mij,mij->m", E, E)))


# --------------------------------------------------------------------------
# errors and rates


def l2_diff(fine_mesh, fine_U, coarse_mesh, coarse_U, rule=RADON7, norm="fe",
            return_excluded=False):
    """L2 norm of ``u_coarse - u_fine`` over the fine mesh.

    ``norm="fe"`` integrates with ``rule`` on every fine element, evaluating
    the coarse interpolant at the quadrature points. ``norm="nodal"`` uses
    the lumped nodal areas of the fine mesh instead. Points that fall
    outside the coarse mesh are skipped and counted.
    """
    fine_U = np.asarray(fine_U, dtype=float)
    coarse_U = np.asarray(coarse_U, dtype=float)
    if norm == "fe":
        p = fine_mesh.nodes[fine_mesh.elements]
        pts = np.einsum("qv,mvd->mqd", rule.points, p).reshape(-1, 2)
        w = (fine_mesh.areas()[:, None] * rule.weights[None, :]).ravel()
        uf = np.einsum("qv,mv...->mq...", rule.points, fine_U[fine_mesh.elements])
        uf = uf.reshape((len(pts),) + fine_U.shape[1:])
    elif norm == "nodal":
        pts = fine_mesh.nodes
        w = fine_mesh.nodal_areas()
        uf = fine_U
    else:
        raise ValueError(f"unknown norm {norm!r}")
    uc, eids = interpolate_at(coarse_mesh, coarse_U, pts)
    ok = eids >= 0
    excluded = int((~ok).sum())
    if excluded:
        warnings.warn(f"{excluded} evaluation points lie outside the coarse mesh and were skipped",
                      stacklevel=2)
    d = (uc[ok] - uf[ok]).reshape(ok.sum(), -1)
    err = math.sqrt(float(np.sum(w[ok] * np.sum(d * d, axis=1))))
    return (err, excluded) if return_excluded else err


def convergence_rate(err_coarse, err_fine, h_coarse, h_fine):
    """``log(e_c/e_f) / log(h_c/h_f)``; NaN when either error is zero."""
    if not h_coarse > h_fine > 0:
        raise ValueError("need h_coarse > h_fine > 0")
    if err_coarse < 0 or err_fine < 0:
        raise ValueError("errors must be non-negative")
    if err_coarse == 0 or err_fine == 0:
        return float("nan")
    return (math.log(err_coarse) - math.log(err_fine)) / (math.log(h_coarse) - math.log(h_fine))


# --------------------------------------------------------------------------
# damage topology


def _components(mesh, mask):
    """Connected components of the masked nodes along mesh edges."""
    e = mesh.edges()
    keep = mask[e[:, 0]] & mask[e[:, 1]]
    e = e[keep]
    n = mesh.n_nodes
    g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    return labels


def seed_component(mesh, mask, seed, radius):
    """Masked nodes connected to any masked node within ``radius`` of
    ``seed``."""
    if not mask.any():
        return np.zeros_like(mask)
    labels = _components(mesh, mask)
    near = mask & (np.hypot(*(mesh.nodes - np.asarray(seed, dtype=float)).T) <= radius)
    if not near.any():
        return np.zeros_like(mask)
    return mask & np.isin(labels, np.unique(labels[near]))


@dataclass
class CrackTrace:
    t: np.ndarray
    tip: np.ndarray  # (K, 2)
    length: np.ndarray
    v: np.ndarray
    v_over_cR: np.ndarray
    t_bar: np.ndarray
    t1: float = float("nan")
    t2: float = float("nan")

    def __len__(self):
        return len(self.t)

    def rows(self):
        for k in range(len(self.t)):
            yield (self.t[k], self.tip[k, 0], self.tip[k, 1], self.length[k], self.v[k],
                   self.v_over_cR[k], self.t_bar[k])

    header = ("t", "tip_x", "tip_y", "length", "v", "v_over_cR", "t_bar")

    @property
    def max_speed(self):
        return float(self.v.max()) if len(self.v) else 0.0

    def mean_speed(self):
        """Mean speed over ``[t1, t2]``."""
        sel = (self.t > self.t1) & (self.t <= self.t2)
        return float(self.v[sel].mean()) if sel.any() else 0.0


def track_crack(times, Z_list, mesh, seed, axis, horizon, c_R, threshold=1.0):
    """Follow the tip of the damaged region grown from ``seed``.

    The tip is the node of the seed's connected ``{Z >= threshold}`` set
    that lies farthest along ``axis``; the length is that distance from the
    seed, kept as a running maximum. Speeds are backward differences.
    """
    times = np.asarray(times, dtype=float)
    seed = np.asarray(seed, dtype=float)
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.hypot(*axis)
    K = len(times)
    if K != len(Z_list):
        raise ValueError("need one damage field per time")
    if not any(np.any(np.asarray(Z) >= threshold) for Z in Z_list):
        e = np.zeros(0)
        return CrackTrace(e, np.zeros((0, 2)), e, e, e, e)

    proj = (mesh.nodes - seed) @ axis
    length = np.zeros(K)
    tip = np.tile(seed, (K, 1))
    best, best_tip = 0.0, seed.copy()
    for k, Z in enumerate(Z_list):
        comp = seed_component(mesh, np.asarray(Z) >= threshold, seed, horizon)
        if comp.any():
            idx = np.flatnonzero(comp)
            j = idx[np.argmax(proj[idx])]
            if proj[j] > best:
                best, best_tip = float(proj[j]), mesh.nodes[j].copy()
        length[k] = best
        tip[k] = best_tip

    v = np.zeros(K)
    if K > 1:
        v[1:] = np.diff(length) / np.diff(times)
    moved = np.flatnonzero(length > 0.5 * horizon)
    grew = np.flatnonzero(np.diff(length) > 0) + 1
    t1 = float(times[moved[0]]) if moved.size else float("nan")
    t2 = float(times[grew[-1]]) if grew.size else float("nan")
    if moved.size and grew.size and t2 > t1:
        t_bar = np.clip((times - t1) / (t2 - t1), 0.0, 1.0)
    else:
        t_bar = np.full(K, np.nan)
    return CrackTrace(times, tip, length, v, v / c_R, t_bar, t1, t2)


def damage_band_width(Z, nodes, axis, threshold=1.0, exclude=(), slice_width=None, mask=None):
    """Largest extent of ``{Z >= threshold}`` perpendicular to ``axis``,
    measured slice by slice along the axis.

    Nodes inside any box of ``exclude`` are ignored; ``mask`` further
    restricts the set (e.g. to one connected component).
    """
    nodes = np.asarray(nodes, dtype=float)
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.hypot(*axis)
    normal = np.array([-axis[1], axis[0]])
    sel = np.asarray(Z) >= threshold
    if mask is not None:
        sel &= mask
    for box in exclude:
        sel &= ~box.contains(nodes)
    if not sel.any():
        return 0.0
    s = nodes[sel] @ axis
    w = nodes[sel] @ normal
    if slice_width is None:
        scale = max(np.ptp(s), 1.0)
        key = np.round(s / (1e-9 * scale)).astype(np.int64)
    else:
        key = np.floor(s / slice_width).astype(np.int64)
    order = np.argsort(key, kind="stable")
    key, w = key[order], w[order]
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    width = np.maximum.reduceat(w, starts) - np.minimum.reduceat(w, starts)
    return float(width.max())


def jaccard(a, b):
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    union = np.count_nonzero(a | b)
    return 1.0 if union == 0 else np.count_nonzero(a & b) / union


def containment(small_pts, large_pts, radius):
    """Fraction of ``small_pts`` within ``radius`` of some ``large_pts``
    (1.0 when ``small_pts`` is empty)."""
    small_pts = np.asarray(small_pts, dtype=float).reshape(-1, 2)
    large_pts = np.asarray(large_pts, dtype=float).reshape(-1, 2)
    if len(small_pts) == 0:
        return 1.0
    if len(large_pts) == 0:
        return 0.0
    d, _ = cKDTree(large_pts).query(small_pts, distance_upper_bound=radius * (1 + 1e-12))
    return float(np.mean(np.isfinite(d)))
