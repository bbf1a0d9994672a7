"""Linear triangle meshes: construction, Gmsh input, shape functions,
quadrature and point location.

Node and element arrays are plain numpy arrays.  A :class:`TriMesh` is
treated as immutable once built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import numba

# barycentric containment tolerance (dimensionless, i.e. relative to the
# element height)
CONTAINS_TOL = 1e-10
DEGENERATE_AREA_TOL = 1e-14

NOT_FOUND = -1


class MeshError(ValueError):
    pass


class MshParseError(MeshError):
    def __init__(self, msg, lineno=None):
        if lineno is not None:
            msg = f"line {lineno}: {msg}"
        super().__init__(msg)
        self.lineno = lineno


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference triangle.

    ``points`` are barycentric coordinates (one row per point), ``weights``
    are fractions of the element area and sum to one.
    """

    name: str
    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def size(self):
        return len(self.weights)


MIDPOINT3 = QuadratureRule(
    "midpoint3",
    np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    np.full(3, 1.0 / 3.0),
    2,
)

CENTROID1 = QuadratureRule("centroid1", np.array([[1.0, 1.0, 1.0]]) / 3.0, np.ones(1), 1)


def _radon7():
    # degree-5 rule (Radon); weights and points in closed form
    s15 = np.sqrt(15.0)
    a1 = (6.0 - s15) / 21.0
    a2 = (6.0 + s15) / 21.0
    w1 = (155.0 - s15) / 1200.0
    w2 = (155.0 + s15) / 1200.0
    pts = [[1 / 3, 1 / 3, 1 / 3]]
    wts = [9.0 / 40.0]
    for a, w in ((a1, w1), (a2, w2)):
        b = 1.0 - 2.0 * a
        pts += [[a, a, b], [a, b, a], [b, a, a]]
        wts += [w, w, w]
    return QuadratureRule("radon7", np.array(pts), np.array(wts), 5)


RADON7 = _radon7()

RULES = {r.name: r for r in (MIDPOINT3, CENTROID1, RADON7)}


@dataclass(frozen=True)
class StructuredInfo:
    origin: tuple
    h: float
    n: int  # cells per side


@dataclass(eq=False)
class TriMesh:
    nodes: np.ndarray
    elements: np.ndarray
    structured: Optional[StructuredInfo] = None
    adj_offsets: np.ndarray = field(init=False, repr=False)
    adj_elements: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise MeshError("nodes must have shape (N, 2)")
        if self.elements.ndim != 2 or self.elements.shape[1] != 3:
            raise MeshError("elements must have shape (M, 3)")
        self._check()
        self.adj_offsets, self.adj_elements = _build_adjacency(self.elements, len(self.nodes))
        self._locator = None
        for arr in (self.nodes, self.elements, self.adj_offsets, self.adj_elements):
            arr.flags.writeable = False

    def _check(self):
        n = len(self.nodes)
        el = self.elements
        if el.size and (el.min() < 0 or el.max() >= n):
            raise MeshError("element references a node id out of range")
        if np.any((el[:, 0] == el[:, 1]) | (el[:, 1] == el[:, 2]) | (el[:, 0] == el[:, 2])):
            raise MeshError("element with repeated node ids")
        area = self.signed_areas()
        lo, hi = self.bbox
        bbox_area = max(np.prod(hi - lo), np.finfo(float).tiny)
        bad = np.flatnonzero(np.abs(area) < DEGENERATE_AREA_TOL * bbox_area)
        if bad.size:
            raise MeshError(f"degenerate element(s) {bad[:5].tolist()} (area below tolerance)")
        if np.any(area < 0):
            raise MeshError("elements must be counter-clockwise (positive signed area)")

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def bbox(self):
        return self.nodes.min(axis=0), self.nodes.max(axis=0)

    @property
    def diameter(self):
        lo, hi = self.bbox
        return float(np.hypot(*(hi - lo)))

    def signed_areas(self):
        p = self.nodes[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def areas(self):
        return np.abs(self.signed_areas())

    def elem_adjacency(self, j):
        """Element ids having node ``j`` as a vertex (ascending)."""
        return self.adj_elements[self.adj_offsets[j]:self.adj_offsets[j + 1]]

    def edge_lengths(self):
        p = self.nodes[self.elements]
        return np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)

    def mesh_size(self):
        """Largest element edge length."""
        if self.structured is not None:
            return self.structured.h
        return float(self.edge_lengths().max())

    def nodal_areas(self):
        """Lumped area per node (one third of each incident element)."""
        out = np.zeros(self.n_nodes)
        np.add.at(out, self.elements.ravel(), np.repeat(self.areas() / 3.0, 3))
        return out

    def edges(self):
        """Unique undirected edges as an (E, 2) array with i < j."""
        e = self.elements
        pairs = np.concatenate([e[:, [0, 1]], e[:, [1, 2]], e[:, [2, 0]]])
        pairs.sort(axis=1)
        return np.unique(pairs, axis=0)


def _build_adjacency(elements, n_nodes):
    flat = elements.ravel()
    owner = np.repeat(np.arange(len(elements), dtype=np.int64), 3)
    order = np.lexsort((owner, flat))
    counts = np.bincount(flat, minlength=n_nodes)
    offsets = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets, owner[order]


# --------------------------------------------------------------------------
# construction


def build_uniform_square_mesh(side, h, origin=(0.0, 0.0)):
    """Uniform grid on ``[0, side]^2`` with every cell split into two
    triangles along the ``(0,0)-(1,1)`` diagonal.

    Node ``(ix, iy)`` has id ``iy*(n+1) + ix``; cell ``(ix, iy)`` owns
    elements ``2*(iy*n + ix)`` (below the diagonal) and ``+1`` (above).
    """
    if side <= 0 or h <= 0:
        raise MeshError("side and h must be positive")
    ratio = side / h
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * max(ratio, 1.0):
        raise MeshError(f"side/h = {ratio!r} is not a positive integer")
    h = side / n
    x0, y0 = float(origin[0]), float(origin[1])
    idx = np.arange(n + 1)
    gx, gy = np.meshgrid(x0 + idx * h, y0 + idx * h)
    nodes = np.column_stack([gx.ravel(), gy.ravel()])

    ix, iy = np.meshgrid(np.arange(n), np.arange(n))
    ix = ix.ravel()
    iy = iy.ravel()
    a = iy * (n + 1) + ix
    b = a + 1
    c = a + n + 2
    d = a + n + 1
    elements = np.empty((2 * n * n, 3), dtype=np.int64)
    elements[0::2] = np.column_stack([a, b, c])
    elements[1::2] = np.column_stack([a, c, d])
    return TriMesh(nodes, elements, StructuredInfo((x0, y0), h, n))


_MSH_NODES_PER_TYPE = {15: 1, 1: 2, 2: 3}


def load_msh(path) -> TriMesh:
    """Read an ASCII Gmsh MSH 2.2 file.

    Only triangles (type 2) are kept; points (15) and lines (1) are
    skipped.  Nodes not referenced by any triangle are dropped and the
    remaining ones renumbered in file order.  Clockwise triangles are
    reoriented.
    """
    text = Path(path).read_text()
    lines = text.splitlines()
    pos = 0

    def nextline():
        nonlocal pos
        while pos < len(lines):
            pos += 1
            s = lines[pos - 1].strip()
            if s:
                return s
        raise MshParseError("unexpected end of file", pos)

    node_ids = coords = None
    tris = []
    seen_format = False
    while True:
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            break
        head = nextline()
        if not head.startswith("$"):
            raise MshParseError(f"expected a section header, got {head[:40]!r}", pos)
        name = head[1:]
        if name == "MeshFormat":
            parts = nextline().split()
            if len(parts) < 2:
                raise MshParseError("malformed $MeshFormat", pos)
            if not parts[0].startswith("2."):
                raise MshParseError(f"unsupported MSH version {parts[0]} (only 2.2 ASCII)", pos)
            if parts[1] != "0":
                raise MshParseError("binary MSH files are not supported", pos)
            seen_format = True
        elif name == "Nodes":
            try:
                count = int(nextline())
            except ValueError:
                raise MshParseError("malformed node count", pos) from None
            node_ids = np.empty(count, dtype=np.int64)
            coords = np.empty((count, 2))
            for k in range(count):
                parts = nextline().split()
                try:
                    node_ids[k] = int(parts[0])
                    coords[k] = float(parts[1]), float(parts[2])
                except (ValueError, IndexError):
                    raise MshParseError("malformed node record", pos) from None
        elif name == "Elements":
            if node_ids is None:
                raise MshParseError("$Elements before $Nodes", pos)
            lookup = {int(t): k for k, t in enumerate(node_ids)}
            try:
                count = int(nextline())
            except ValueError:
                raise MshParseError("malformed element count", pos) from None
            for _ in range(count):
                parts = nextline().split()
                try:
                    etype = int(parts[1])
                    ntags = int(parts[2])
                except (ValueError, IndexError):
                    raise MshParseError("malformed element record", pos) from None
                if etype not in _MSH_NODES_PER_TYPE:
                    raise MshParseError(f"unsupported element type {etype}", pos)
                conn = parts[3 + ntags:]
                if len(conn) != _MSH_NODES_PER_TYPE[etype]:
                    raise MshParseError("wrong number of element nodes", pos)
                try:
                    ids = [lookup[int(c)] for c in conn]
                except KeyError as exc:
                    raise MshParseError(f"dangling node reference {exc.args[0]}", pos) from None
                if etype == 2:
                    tris.append(ids)
        else:
            # unknown sections are skipped wholesale
            pass
        end = "$End" + name
        while nextline() != end:
            if name in ("MeshFormat", "Nodes", "Elements"):
                raise MshParseError(f"missing {end}", pos)
    if not seen_format:
        raise MshParseError("missing $MeshFormat section")
    if node_ids is None:
        raise MshParseError("missing $Nodes section")
    if not tris:
        raise MshParseError("no triangles in file")

    el = np.array(tris, dtype=np.int64)
    used = np.unique(el)
    remap = np.full(len(coords), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    nodes = coords[used]
    el = remap[el]
    p = nodes[el]
    sa = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    flip = sa < 0
    el[flip] = el[flip][:, [0, 2, 1]]
    return TriMesh(nodes, el)


# --------------------------------------------------------------------------
# shape functions and quadrature


def barycentric(mesh, elem, point):
    p = mesh.nodes[mesh.elements[elem]]
    return _bary(p, np.asarray(point, dtype=float))


def _bary(p, x):
    d1 = p[1] - p[0]
    d2 = p[2] - p[0]
    det = d1[0] * d2[1] - d1[1] * d2[0]
    r = x - p[0]
    l1 = (r[0] * d2[1] - r[1] * d2[0]) / det
    l2 = (d1[0] * r[1] - d1[1] * r[0]) / det
    return np.array([1.0 - l1 - l2, l1, l2])


def shape_value(mesh, elem, vertex, point):
    """Linear shape function of local ``vertex`` of ``elem`` at ``point``."""
    lam = barycentric(mesh, elem, point)
    if lam.min() < -CONTAINS_TOL:
        raise MeshError(f"point {tuple(point)} lies outside element {elem}")
    return float(min(max(lam[vertex], 0.0), 1.0))


def quadrature_points(mesh, elem, rule=MIDPOINT3):
    """Physical quadrature points and weights (weights sum to the area)."""
    p = mesh.nodes[mesh.elements[elem]]
    pts = rule.points @ p
    d1 = p[1] - p[0]
    d2 = p[2] - p[0]
    area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
    return [(pts[q], rule.weights[q] * area) for q in range(rule.size)]


def all_quadrature_points(mesh, rule=MIDPOINT3):
    """Quadrature points of every element, shape (M*Q, 2), with weights."""
    p = mesh.nodes[mesh.elements]  # (M, 3, 2)
    pts = np.einsum("qv,mvd->mqd", rule.points, p).reshape(-1, 2)
    w = (mesh.areas()[:, None] * rule.weights[None, :]).ravel()
    return pts, w


# --------------------------------------------------------------------------
# point location


def locate_point(mesh, point):
    """Element containing ``point`` (lowest id on ties) or ``NOT_FOUND``."""
    return int(locate_points(mesh, np.asarray(point, dtype=float)[None, :])[0])


def locate_points(mesh, points):
    points = np.ascontiguousarray(points, dtype=float).reshape(-1, 2)
    if mesh.structured is not None:
        return _locate_structured(mesh, points)
    if mesh._locator is None:
        mesh._locator = _ElementGrid(mesh)
    return mesh._locator.locate(points)


def _locate_structured(mesh, pts):
    s = mesh.structured
    n, h = s.n, s.h
    rel = (pts - np.asarray(s.origin)) / h
    tol = 1e-10
    best = np.full(len(pts), np.iinfo(np.int64).max, dtype=np.int64)
    base = np.floor(rel).astype(np.int64)
    # a point on a cell boundary belongs to up to four cells; probe them all
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            cx = base[:, 0] + dx
            cy = base[:, 1] + dy
            ok = (cx >= 0) & (cx < n) & (cy >= 0) & (cy < n)
            fx = rel[:, 0] - cx
            fy = rel[:, 1] - cy
            inside = ok & (fx >= -tol) & (fx <= 1 + tol) & (fy >= -tol) & (fy <= 1 + tol)
            lower = inside & (fx - fy >= -tol)
            upper = inside & (fy - fx >= -tol)
            eid = 2 * (cy * n + cx)
            best = np.where(lower & (eid < best), eid, best)
            best = np.where(upper & (eid + 1 < best), eid + 1, best)
    best[best == np.iinfo(np.int64).max] = NOT_FOUND
    return best


class _ElementGrid:
    """Bucket grid over element bounding boxes for unstructured lookup."""

    def __init__(self, mesh):
        self.mesh = mesh
        p = mesh.nodes[mesh.elements]
        lo = p.min(axis=1)
        hi = p.max(axis=1)
        self.origin = mesh.nodes.min(axis=0)
        size = float(np.median(hi - lo)) or 1.0
        self.cell = size
        span = mesh.nodes.max(axis=0) - self.origin
        self.shape = np.maximum((span / size).astype(np.int64) + 1, 1)
        c0 = np.floor((lo - self.origin) / size).astype(np.int64)
        c1 = np.floor((hi - self.origin) / size).astype(np.int64)
        c0 = np.clip(c0, 0, self.shape - 1)
        c1 = np.clip(c1, 0, self.shape - 1)
        cells, elems = [], []
        for e in range(mesh.n_elements):
            xs = np.arange(c0[e, 0], c1[e, 0] + 1)
            ys = np.arange(c0[e, 1], c1[e, 1] + 1)
            cc = (ys[:, None] * self.shape[0] + xs[None, :]).ravel()
            cells.append(cc)
            elems.append(np.full(cc.size, e))
        cells = np.concatenate(cells)
        elems = np.concatenate(elems)
        order = np.lexsort((elems, cells))
        self.items = elems[order]
        counts = np.bincount(cells, minlength=int(np.prod(self.shape)))
        self.offsets = np.zeros(counts.size + 1, dtype=np.int64)
        np.cumsum(counts, out=self.offsets[1:])

    def locate(self, pts):
        return _grid_locate(pts, self.mesh.nodes, self.mesh.elements, self.origin,
                            self.cell, self.shape, self.offsets, self.items, CONTAINS_TOL)


@numba.njit(cache=True)
def _grid_locate(pts, nodes, elements, origin, cell, shape, offsets, items, tol):
    out = np.full(len(pts), -1, dtype=np.int64)
    for k in range(len(pts)):
        x = pts[k, 0]
        y = pts[k, 1]
        cx0 = int(np.floor((x - origin[0]) / cell - 1e-9))
        cx1 = int(np.floor((x - origin[0]) / cell + 1e-9))
        cy0 = int(np.floor((y - origin[1]) / cell - 1e-9))
        cy1 = int(np.floor((y - origin[1]) / cell + 1e-9))
        best = -1
        for cx in range(max(cx0, 0), min(cx1, shape[0] - 1) + 1):
            for cy in range(max(cy0, 0), min(cy1, shape[1] - 1) + 1):
                c = cy * shape[0] + cx
                for p in range(offsets[c], offsets[c + 1]):
                    e = items[p]
                    if best >= 0 and e >= best:
                        continue
                    a = elements[e, 0]
                    b = elements[e, 1]
                    d = elements[e, 2]
                    d1x = nodes[b, 0] - nodes[a, 0]
                    d1y = nodes[b, 1] - nodes[a, 1]
                    d2x = nodes[d, 0] - nodes[a, 0]
                    d2y = nodes[d, 1] - nodes[a, 1]
                    det = d1x * d2y - d1y * d2x
                    rx = x - nodes[a, 0]
                    ry = y - nodes[a, 1]
                    l1 = (rx * d2y - ry * d2x) / det
                    l2 = (d1x * ry - d1y * rx) / det
                    if l1 >= -tol and l2 >= -tol and 1.0 - l1 - l2 >= -tol:
                        best = e
        out[k] = best
    return out


def interpolate_field(mesh, values, point):
    """Evaluate the piecewise linear interpolant of nodal ``values``.

    Raises :class:`MeshError` if ``point`` is in no element.
    """
    e = locate_point(mesh, point)
    if e == NOT_FOUND:
        raise MeshError(f"point {tuple(point)} is not inside the mesh")
    lam = np.clip(barycentric(mesh, e, point), 0.0, 1.0)
    return lam @ np.asarray(values)[mesh.elements[e]]


def interpolate_at(mesh, values, points):
    """Vectorised :func:`interpolate_field`; returns (values, element ids)
    with NaN rows for points outside the mesh."""
    values = np.asarray(values, dtype=float)
    eids = locate_points(mesh, points)
    shape = (len(points),) + values.shape[1:]
    out = np.full(shape, np.nan)
    ok = eids >= 0
    if ok.any():
        lam = barycentric_many(mesh, eids[ok], points[ok])
        out[ok] = np.einsum("kv,kv...->k...", lam, values[mesh.elements[eids[ok]]])
    return out, eids


def barycentric_many(mesh, eids, points):
    p = mesh.nodes[mesh.elements[eids]]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    r = points - p[:, 0]
    l1 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
    l2 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
    return np.column_stack([1.0 - l1 - l2, l1, l2])


def shape_gradients(mesh):
    """Constant gradients of the three shape functions, shape (M, 3, 2)."""
    p = mesh.nodes[mesh.elements]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    g1 = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
    return np.stack([-g1 - g2, g1, g2], axis=1)
