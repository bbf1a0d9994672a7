"""Result writers: legacy ASCII VTK snapshots and CSV time series."""

from __future__ import annotations

import csv
import math
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from .analysis import element_strain

VTK_TRIANGLE = 5


def _fmt(x):
    x = float(x)
    if x == 0.0:
        return "0"  # also folds -0
    return "%.9g" % x


def _lines(arr):
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        return "\n".join(_fmt(v) for v in arr)
    return "\n".join(" ".join(_fmt(v) for v in row) for row in arr)


def write_vtk(snapshot, mesh, path, scale=0.0, title=None):
    """Write one snapshot as a legacy ASCII VTK unstructured grid.

    Points are ``x + scale * U``. Point data: displacement, velocity,
    ``Z``, ``phi`` and a 0/1 ``damaged`` flag (``Z >= 1``); cell data: the
    small-strain tensor and its magnitude. All arrays are checked before the
    file is opened.
    """
    if not scale >= 0:
        raise ValueError("scale factor must be non-negative")
    N, M = mesh.n_nodes, mesh.n_elements
    U = np.asarray(snapshot.U, dtype=float)
    V = np.asarray(snapshot.V, dtype=float)
    Z = np.asarray(snapshot.Z, dtype=float)
    phi = np.asarray(snapshot.phi, dtype=float)
    for name, a, shape in (("U", U, (N, 2)), ("V", V, (N, 2)), ("Z", Z, (N,)), ("phi", phi, (N,))):
        if a.shape != shape:
            raise ValueError(f"field {name} has shape {a.shape}, expected {shape}")
    strain = element_strain(mesh, U)

    pts = np.zeros((N, 3))
    pts[:, :2] = mesh.nodes + scale * U
    vec = lambda a: np.column_stack([a, np.zeros(N)])
    tens = np.zeros((M, 9))
    tens[:, [0, 1, 3, 4]] = strain.tensor.reshape(M, 4)
    cells = np.column_stack([np.full(M, 3), mesh.elements])

    if title is None:
        title = f"nfeapd snapshot step={getattr(snapshot, 'step', 0)} t={_fmt(snapshot.time)}"
    parts = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {N} double",
        _lines(pts),
        f"CELLS {M} {4 * M}",
        "\n".join(" ".join(str(int(v)) for v in row) for row in cells),
        f"CELL_TYPES {M}",
        "\n".join([str(VTK_TRIANGLE)] * M),
        f"POINT_DATA {N}",
        "VECTORS displacement double",
        _lines(vec(U)),
        "VECTORS velocity double",
        _lines(vec(V)),
        "SCALARS Z double 1", "LOOKUP_TABLE default", _lines(Z),
        "SCALARS phi double 1", "LOOKUP_TABLE default", _lines(phi),
        "SCALARS damaged int 1", "LOOKUP_TABLE default",
        "\n".join("1" if z >= 1.0 else "0" for z in Z),
        f"CELL_DATA {M}",
        "TENSORS strain double",
        _lines(tens.reshape(-1, 3)),
        "SCALARS strain_magnitude double 1", "LOOKUP_TABLE default", _lines(strain.magnitude),
    ]
    text = "\n".join(p for p in parts if p != "") + "\n"
    path = Path(path)
    path.write_text(text)
    return path


# --------------------------------------------------------------------------
# CSV


def _table(data):
    if hasattr(data, "header") and hasattr(data, "rows"):
        return list(data.header), list(data.rows())
    if isinstance(data, Mapping):
        header = list(data)
        cols = [np.asarray(data[k]).tolist() for k in header]
        n = {len(c) for c in cols}
        if len(n) > 1:
            raise ValueError("columns have different lengths")
        return header, list(zip(*cols)) if cols else []
    header, rows = data
    return list(header), list(rows)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def write_timeseries_csv(data, path):
    """Header plus one record per row; floats use ``repr`` so values
    round-trip exactly.

    ``data`` is a crack trace, a column mapping, or ``(header, rows)``.
    """
    header, rows = _table(data)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


def read_timeseries_csv(path):
    """Columns of a CSV written by :func:`write_timeseries_csv` as float
    arrays (non-numeric columns stay strings)."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = {}
    for k, name in enumerate(header):
        col = [r[k] for r in body]
        try:
            out[name] = np.array([float(v) for v in col])
        except ValueError:
            out[name] = col
    return out
