"""Compiled inner loops.

Every kernel that produces per-node output is parallel over rows and sums
each row sequentially in stored (ascending neighbor) order, so results do
not depend on the number of threads.
"""

import math

import numba
import numpy as np
from numba import prange

# relative slack on the horizon test so that lattice points at exactly
# distance eps are not lost to rounding
HORIZON_RTOL = 1e-12


@numba.njit(cache=True)
def _ratio(d, eps):
    # distances within rounding of the horizon count as exactly on it
    r = d / eps
    return 1.0 if r > 1.0 - HORIZON_RTOL else r


@numba.njit(cache=True)
def cell_grid(points, origin, cell, nx, ny):
    """CSR bucket list of ``points`` on an ``nx`` by ``ny`` grid."""
    n = len(points)
    cid = np.empty(n, dtype=np.int64)
    for p in range(n):
        cx = int((points[p, 0] - origin[0]) / cell)
        cy = int((points[p, 1] - origin[1]) / cell)
        cx = min(max(cx, 0), nx - 1)
        cy = min(max(cy, 0), ny - 1)
        cid[p] = cy * nx + cx
    counts = np.zeros(nx * ny + 1, dtype=np.int64)
    for p in range(n):
        counts[cid[p] + 1] += 1
    for c in range(nx * ny):
        counts[c + 1] += counts[c]
    fill = counts[:-1].copy()
    items = np.empty(n, dtype=np.int64)
    for p in range(n):  # stable: ascending point id inside a cell
        items[fill[cid[p]]] = p
        fill[cid[p]] += 1
    return counts, items


@numba.njit(cache=True)
def _row_contributions(i, xi, yi, qpts, qowner, qlocal, qweight, bary, elements,
                       offsets, items, origin, cell, nx, ny, eps, J, buf_j, buf_v):
    """Collect (j, J*phi_j*w) for quadrature points within eps of node i."""
    cx = min(max(int((xi - origin[0]) / cell), 0), nx - 1)
    cy = min(max(int((yi - origin[1]) / cell), 0), ny - 1)
    lim = eps * (1.0 + HORIZON_RTOL)
    m = 0
    for gy in range(max(cy - 1, 0), min(cy + 1, ny - 1) + 1):
        for gx in range(max(cx - 1, 0), min(cx + 1, nx - 1) + 1):
            c = gy * nx + gx
            for p in range(offsets[c], offsets[c + 1]):
                q = items[p]
                dx = qpts[q, 0] - xi
                dy = qpts[q, 1] - yi
                d = math.sqrt(dx * dx + dy * dy)
                if d > lim:
                    continue
                e = qowner[q]
                jw = J(_ratio(d, eps)) * qweight[q]
                for v in range(3):
                    j = elements[e, v]
                    if j == i:
                        continue
                    buf_j[m] = j
                    buf_v[m] = jw * bary[qlocal[q], v]
                    m += 1
    return m


@numba.njit(cache=True)
def _reduce_row(buf_j, buf_v, m, out_j, out_v):
    order = np.argsort(buf_j[:m], kind="mergesort")
    k = -1
    last = -1
    for t in range(m):
        j = buf_j[order[t]]
        if j != last:
            k += 1
            out_j[k] = j
            out_v[k] = 0.0
            last = j
        out_v[k] += buf_v[order[t]]
    return k + 1


@numba.njit(parallel=True, cache=True)
def nfea_neighbors(nodes, elements, qpts, qowner, qlocal, qweight, bary, eps, J,
                   origin, cell, nx, ny):
    offsets, items = cell_grid(qpts, origin, cell, nx, ny)
    n = len(nodes)
    # upper bound on contributions per row: quad points in 3x3 cells times 3
    cap = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        cx = min(max(int((nodes[i, 0] - origin[0]) / cell), 0), nx - 1)
        cy = min(max(int((nodes[i, 1] - origin[1]) / cell), 0), ny - 1)
        s = 0
        for gy in range(max(cy - 1, 0), min(cy + 1, ny - 1) + 1):
            for gx in range(max(cx - 1, 0), min(cx + 1, nx - 1) + 1):
                c = gy * nx + gx
                s += offsets[c + 1] - offsets[c]
        cap[i] = 3 * s
    counts = np.zeros(n + 1, dtype=np.int64)
    for i in prange(n):
        bj = np.empty(cap[i], dtype=np.int64)
        bv = np.empty(cap[i])
        m = _row_contributions(i, nodes[i, 0], nodes[i, 1], qpts, qowner, qlocal, qweight, bary,
                               elements, offsets, items, origin, cell, nx, ny, eps, J, bj, bv)
        oj = np.empty(m, dtype=np.int64)
        ov = np.empty(m)
        counts[i + 1] = _reduce_row(bj, bv, m, oj, ov)
    row = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        row[i + 1] = row[i] + counts[i + 1]
    nbr = np.empty(row[n], dtype=np.int32)
    vol = np.empty(row[n])
    for i in prange(n):
        bj = np.empty(cap[i], dtype=np.int64)
        bv = np.empty(cap[i])
        m = _row_contributions(i, nodes[i, 0], nodes[i, 1], qpts, qowner, qlocal, qweight, bary,
                               elements, offsets, items, origin, cell, nx, ny, eps, J, bj, bv)
        oj = np.empty(m, dtype=np.int64)
        ov = np.empty(m)
        k = _reduce_row(bj, bv, m, oj, ov)
        for t in range(k):
            nbr[row[i] + t] = oj[t]
            vol[row[i] + t] = ov[t]
    return row, nbr, vol


@numba.njit(cache=True)
def _lattice_row(i, nodes, offsets, items, origin, cell, nx, ny, eps, J, cellvol):
    xi = nodes[i, 0]
    yi = nodes[i, 1]
    cx = min(max(int((xi - origin[0]) / cell), 0), nx - 1)
    cy = min(max(int((yi - origin[1]) / cell), 0), ny - 1)
    lim = eps * (1.0 + HORIZON_RTOL)
    cand = 0
    for gy in range(max(cy - 1, 0), min(cy + 1, ny - 1) + 1):
        for gx in range(max(cx - 1, 0), min(cx + 1, nx - 1) + 1):
            c = gy * nx + gx
            cand += offsets[c + 1] - offsets[c]
    bj = np.empty(cand, dtype=np.int64)
    bv = np.empty(cand)
    m = 0
    for gy in range(max(cy - 1, 0), min(cy + 1, ny - 1) + 1):
        for gx in range(max(cx - 1, 0), min(cx + 1, nx - 1) + 1):
            c = gy * nx + gx
            for p in range(offsets[c], offsets[c + 1]):
                j = items[p]
                if j == i:
                    continue
                dx = nodes[j, 0] - xi
                dy = nodes[j, 1] - yi
                d = math.sqrt(dx * dx + dy * dy)
                if d > lim:
                    continue
                bj[m] = j
                bv[m] = J(_ratio(d, eps)) * cellvol
                m += 1
    order = np.argsort(bj[:m])
    return bj[order], bv[order]


@numba.njit(parallel=True, cache=True)
def lattice_neighbors(nodes, eps, J, cellvol, origin, cell, nx, ny):
    offsets, items = cell_grid(nodes, origin, cell, nx, ny)
    n = len(nodes)
    counts = np.zeros(n + 1, dtype=np.int64)
    for i in prange(n):
        bj, _ = _lattice_row(i, nodes, offsets, items, origin, cell, nx, ny, eps, J, cellvol)
        counts[i + 1] = len(bj)
    row = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        row[i + 1] = row[i] + counts[i + 1]
    nbr = np.empty(row[n], dtype=np.int32)
    vol = np.empty(row[n])
    for i in prange(n):
        bj, bv = _lattice_row(i, nodes, offsets, items, origin, cell, nx, ny, eps, J, cellvol)
        for t in range(len(bj)):
            nbr[row[i] + t] = bj[t]
            vol[row[i] + t] = bv[t]
    return row, nbr, vol


@numba.njit(parallel=True, cache=True)
def rnp_force(row, nbr, vol, blen, bdir, broken, U, scale, c, beta, out):
    n = len(row) - 1
    for i in prange(n):
        fx = 0.0
        fy = 0.0
        uxi = U[i, 0]
        uyi = U[i, 1]
        for p in range(row[i], row[i + 1]):
            if broken[p]:
                continue
            j = nbr[p]
            ex = bdir[p, 0]
            ey = bdir[p, 1]
            L = blen[p]
            s = ((U[j, 0] - uxi) / L) * ex + ((U[j, 1] - uyi) / L) * ey
            f = scale * (c * beta * math.exp(-beta * (L * s * s))) * s * vol[p]
            fx += f * ex
            fy += f * ey
        out[i, 0] = fx
        out[i, 1] = fy
    return out


@numba.njit(parallel=True, cache=True)
def pmb_break(row, nbr, blen, bdir, broken, U, s_crit):
    n = len(row) - 1
    newly = 0
    for i in prange(n):
        for p in range(row[i], row[i + 1]):
            if broken[p]:
                continue
            j = nbr[p]
            L = blen[p]
            s = ((U[j, 0] - U[i, 0]) / L) * bdir[p, 0] + ((U[j, 1] - U[i, 1]) / L) * bdir[p, 1]
            if s >= s_crit:
                broken[p] = True
                newly += 1
    return newly


@numba.njit(parallel=True, cache=True)
def pmb_force(row, nbr, vol, blen, bdir, broken, U, c_pmb, out):
    n = len(row) - 1
    for i in prange(n):
        fx = 0.0
        fy = 0.0
        for p in range(row[i], row[i + 1]):
            if broken[p]:
                continue
            j = nbr[p]
            ex = bdir[p, 0]
            ey = bdir[p, 1]
            L = blen[p]
            s = ((U[j, 0] - U[i, 0]) / L) * ex + ((U[j, 1] - U[i, 1]) / L) * ey
            f = c_pmb * s * vol[p]
            fx += f * ex
            fy += f * ey
        out[i, 0] = fx
        out[i, 1] = fy
    return out


@numba.njit(parallel=True, cache=True)
def damage_fields(row, nbr, vol, blen, bdir, broken, U, r_star, s_const, z, phi):
    """Max strain ratio over intact bonds and broken-volume fraction.

    ``r_star > 0`` selects the RNP critical strain ``r_star/sqrt(L)``,
    otherwise the constant ``s_const`` is used.
    """
    n = len(row) - 1
    for i in prange(n):
        zmax = 0.0
        vb = 0.0
        vt = 0.0
        for p in range(row[i], row[i + 1]):
            vt += vol[p]
            if broken[p]:
                vb += vol[p]
                continue
            j = nbr[p]
            L = blen[p]
            s = ((U[j, 0] - U[i, 0]) / L) * bdir[p, 0] + ((U[j, 1] - U[i, 1]) / L) * bdir[p, 1]
            sc = r_star / math.sqrt(L) if r_star > 0 else s_const
            ratio = abs(s) / sc
            if ratio > zmax:
                zmax = ratio
            if ratio >= 1.0:
                vb += vol[p]
        z[i] = zmax
        phi[i] = vb / vt if vt > 0 else 0.0
