"""Slow, independent reference implementations used as test oracles.

Nothing here imports the compiled kernels: neighbor volumes and forces are
computed by brute force over all node/quadrature-point pairs with plain
numpy, following the nodal algorithm step by step.
"""

import math

import numpy as np

MIDPOINT_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


def tri_area(p):
    return 0.5 * abs((p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0]))


def volumes_all_pairs(nodes, elements, eps, J=lambda r: max(1.0 - r, 0.0)):
    """Dense ``V[i, j]``: for every element and each of its three edge
    midpoints within ``eps`` of ``x_i``, add ``J * phi_j * area/3`` to every
    vertex ``j != i`` of that element."""
    N = len(nodes)
    V = np.zeros((N, N))
    for e, tri in enumerate(elements):
        p = nodes[tri]
        w = tri_area(p) / 3.0
        for lam in MIDPOINT_BARY:
            xq = lam @ p
            d = np.hypot(nodes[:, 0] - xq[0], nodes[:, 1] - xq[1])
            for i in np.flatnonzero(d <= eps * (1 + 1e-12)):
                jw = J(d[i] / eps) * w
                for v in range(3):
                    j = tri[v]
                    if j != i:
                        V[i, j] += jw * lam[v]
    return V


def lattice_volumes_all_pairs(nodes, eps, h, J=lambda r: max(1.0 - r, 0.0)):
    d = np.hypot(nodes[:, None, 0] - nodes[None, :, 0], nodes[:, None, 1] - nodes[None, :, 1])
    V = np.where((d <= eps * (1 + 1e-12)) & (d > 0), np.maximum(1.0 - d / eps, 0.0) * h * h, 0.0)
    return V


def rnp_force_all_pairs(nodes, V, U, c, beta, eps, prefactor=2.0, broken=None):
    """``F_i = prefactor/(pi eps^3) sum_j c beta exp(-beta L S^2) S e_ij V_ij``
    over all pairs with nonzero volume."""
    dx = nodes[None, :, :] - nodes[:, None, :]
    L = np.hypot(dx[..., 0], dx[..., 1])
    np.fill_diagonal(L, 1.0)
    e = dx / L[..., None]
    du = U[None, :, :] - U[:, None, :]
    S = np.sum(du * e, axis=-1) / L
    f = c * beta * np.exp(-beta * L * S * S) * S * V
    if broken is not None:
        f = np.where(broken, 0.0, f)
    np.fill_diagonal(f, 0.0)
    scale = prefactor / (math.pi * eps ** 3)
    return scale * np.einsum("ij,ijd->id", f, e)


def three_term(U0, U1, accel, dt, steps):
    """``U^{k+1} = 2U^k - U^{k-1} + dt^2 a(U^k, k)``."""
    prev, cur = U0.copy(), U1.copy()
    for k in range(1, steps):
        prev, cur = cur, 2 * cur - prev + dt * dt * accel(cur, k)
    return cur


def read_vtk_legacy(path):
    """Minimal parser for the ASCII legacy unstructured-grid subset.

    Returns points, cells, cell types and dicts of point and cell data.
    Raises ``ValueError`` on any structural mismatch.
    """
    tokens = []
    with open(path) as fh:
        header = [fh.readline() for _ in range(4)]
        if not header[0].startswith("# vtk DataFile Version"):
            raise ValueError("bad magic line")
        if header[2].strip() != "ASCII":
            raise ValueError("not ASCII")
        if header[3].split() != ["DATASET", "UNSTRUCTURED_GRID"]:
            raise ValueError("not an unstructured grid")
        for line in fh:
            tokens.extend(line.split())
    pos = 0

    def take(n):
        nonlocal pos
        out = tokens[pos:pos + n]
        if len(out) != n:
            raise ValueError("unexpected end of file")
        pos += n
        return out

    out = {"point_data": {}, "cell_data": {}}
    section = None
    count = {}
    while pos < len(tokens):
        key = take(1)[0]
        if key == "POINTS":
            n, _ = take(2)
            n = int(n)
            out["points"] = np.array(take(3 * n), dtype=float).reshape(n, 3)
            count["points"] = n
        elif key == "CELLS":
            n, size = (int(v) for v in take(2))
            raw = np.array(take(size), dtype=np.int64)
            cells, k = [], 0
            for _ in range(n):
                m = raw[k]
                cells.append(raw[k + 1:k + 1 + m])
                k += m + 1
            if k != size:
                raise ValueError("CELLS size mismatch")
            out["cells"] = np.array(cells)
            count["cells"] = n
        elif key == "CELL_TYPES":
            n = int(take(1)[0])
            out["cell_types"] = np.array(take(n), dtype=int)
        elif key in ("POINT_DATA", "CELL_DATA"):
            n = int(take(1)[0])
            if n != count["points" if key == "POINT_DATA" else "cells"]:
                raise ValueError(f"{key} count mismatch")
            section = ("point_data" if key == "POINT_DATA" else "cell_data", n)
        elif key in ("SCALARS", "VECTORS", "TENSORS"):
            name, _ = take(2)
            where, n = section
            if key == "SCALARS":
                ncomp = int(take(1)[0])
                if take(2) != ["LOOKUP_TABLE", "default"]:
                    raise ValueError("expected default lookup table")
                arr = np.array(take(n * ncomp), dtype=float)
            elif key == "VECTORS":
                arr = np.array(take(3 * n), dtype=float).reshape(n, 3)
            else:
                arr = np.array(take(9 * n), dtype=float).reshape(n, 3, 3)
            out[where][name] = arr
        else:
            raise ValueError(f"unknown keyword {key!r}")
    return out
