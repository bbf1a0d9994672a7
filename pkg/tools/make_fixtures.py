"""Generate the MSH 2.2 meshes shipped with the package.

Run from the repository root:  python3 tools/make_fixtures.py

Meshes are built from a square lattice plus points placed on curved or
slanted boundaries, triangulated with scipy's Delaunay, and trimmed to the
domain. The output is deterministic.
"""

import math
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "nfeapd" / "data"
FIXTURES = ROOT / "tests" / "fixtures"


def write_msh(path, nodes, elements):
    """Write nodes and triangles as ASCII MSH 2.2 (1-based ids)."""
    lines = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(len(nodes))]
    lines += [f"{i + 1} {x:.12g} {y:.12g} 0" for i, (x, y) in enumerate(nodes)]
    lines += ["$EndNodes", "$Elements", str(len(elements))]
    lines += [f"{k + 1} 2 2 0 1 {a + 1} {b + 1} {c + 1}" for k, (a, b, c) in enumerate(elements)]
    lines += ["$EndElements"]
    Path(path).write_text("\n".join(lines) + "\n")


def _lattice(W, H, h):
    nx = int(round(W / h))
    ny = int(round(H / h))
    x, y = np.meshgrid(np.linspace(0, W, nx + 1), np.linspace(0, H, ny + 1))
    return np.column_stack([x.ravel(), y.ravel()])


def _circle(cx, cy, r, h):
    n = max(int(math.ceil(2 * math.pi * r / h)), 8)
    a = 2 * math.pi * np.arange(n) / n
    return np.column_stack([cx + r * np.cos(a), cy + r * np.sin(a)])


def _segment(p, q, h):
    n = max(int(math.ceil(np.hypot(*(np.subtract(q, p))) / h)), 1)
    s = np.linspace(0, 1, n + 1)[:, None]
    return np.asarray(p) + s * (np.asarray(q) - np.asarray(p))


def _triangulate(points, keep):
    """Delaunay triangles whose centroid satisfies ``keep``, CCW, with
    unused points dropped."""
    points = np.unique(np.round(points, 12), axis=0)
    tri = Delaunay(points)
    el = tri.simplices
    cen = points[el].mean(axis=1)
    p = points[el]
    area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    h2 = np.median(np.abs(area))
    ok = keep(cen) & (np.abs(area) > 1e-6 * h2)
    el, area = el[ok], area[ok]
    el[area < 0] = el[area < 0][:, [0, 2, 1]]
    used = np.unique(el)
    remap = np.full(len(points), -1)
    remap[used] = np.arange(len(used))
    return points[used], remap[el]


def hole_plate(W, H, cx, cy, r, h):
    pts = _lattice(W, H, h)
    pts = pts[np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) > r + 0.5 * h]
    pts = np.vstack([pts, _circle(cx, cy, r, h)])
    return _triangulate(pts, lambda c: np.hypot(c[:, 0] - cx, c[:, 1] - cy) > r)


def notched_beam(L, H, depth, angle_deg, h):
    half = depth * math.tan(math.radians(angle_deg) / 2)
    xc = L / 2
    a, apex, b = (xc - half, 0.0), (xc, depth), (xc + half, 0.0)

    def inside_notch(p, pad=0.0):
        y = p[:, 1]
        w = half * (1 - y / depth)
        return (y < depth + pad) & (np.abs(p[:, 0] - xc) < w + pad)

    pts = _lattice(L, H, h)
    pts = pts[~inside_notch(pts, 0.5 * h)]
    pts = np.vstack([pts, _segment(a, apex, h), _segment(apex, b, h)])
    return _triangulate(pts, lambda c: ~inside_notch(c))


def tiny():
    """Two triangles on the unit square, plus a point element and a line
    element that the reader has to skip."""
    return """$MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
1
2 1 "domain"
$EndPhysicalNames
$Nodes
5
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
5 2 2 0
$EndNodes
$Elements
4
1 15 2 0 1 1
2 1 2 0 1 1 2
3 2 2 1 1 1 2 3
4 2 2 1 1 1 3 4
$EndElements
"""


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    FIXTURES.mkdir(parents=True, exist_ok=True)
    meshes = {
        "hole_axial.msh": hole_plate(0.04, 0.04, 0.02, 0.02, 0.005, 2.5e-4),
        "vnotch_bend.msh": notched_beam(0.05, 0.015, 0.004, 60.0, 2.5e-4),
        "hole_precrack.msh": hole_plate(0.02, 0.01, 0.01, 0.0065, 0.0015, 1e-4),
    }
    for name, (nodes, elements) in meshes.items():
        write_msh(DATA / name, nodes, elements)
        print(f"{name}: {len(nodes)} nodes, {len(elements)} triangles")
    small = hole_plate(0.01, 0.01, 0.005, 0.005, 0.002, 1e-3)
    write_msh(FIXTURES / "hole_small.msh", *small)
    print(f"hole_small.msh: {len(small[0])} nodes, {len(small[1])} triangles")
    (FIXTURES / "tiny.msh").write_text(tiny())


if __name__ == "__main__":
    main()
