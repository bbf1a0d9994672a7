import csv
import math
from pathlib import Path

import numpy as np
import pytest

from nfeapd.mesh import RADON7, MeshError, TriMesh, build_uniform_square_mesh, load_msh
from nfeapd.neighborhood import (BondTable, CrackGeometry, apply_precrack, build_neighbors,
                                 build_neighbors_meshfree, segments_intersect)
from oracles import lattice_volumes_all_pairs, volumes_all_pairs

FIX = Path(__file__).parent / "fixtures"


def dense(table):
    V = np.zeros((table.n_nodes, table.n_nodes))
    V[table.owners(), table.nbr] = table.volume
    return V


def test_matches_all_pairs_oracle_uniform():
    m = build_uniform_square_mesh(1.0, 0.1)
    t = build_neighbors(m, 0.25)
    ref = volumes_all_pairs(m.nodes, m.elements, 0.25)
    assert np.max(np.abs(dense(t) - ref)) <= 1e-15 * ref.max()


def test_matches_all_pairs_oracle_unstructured():
    m = load_msh(FIX / "hole_small.msh")
    eps = 2.5e-3
    t = build_neighbors(m, eps)
    ref = volumes_all_pairs(m.nodes, m.elements, eps)
    assert np.max(np.abs(dense(t) - ref)) <= 1e-15 * ref.max()
    # every pair with a non-negligible oracle volume is a bond
    assert np.all(dense(t)[ref > 1e-12 * ref.max()] > 0)


def test_table_invariants():
    m = build_uniform_square_mesh(1.0, 0.05)
    t = build_neighbors(m, 0.2)
    own = t.owners()
    assert np.all(own != t.nbr)
    assert np.all(t.length > 0)
    assert np.all(t.volume >= 0)
    for i in range(t.n_nodes):
        assert np.all(np.diff(t.neighbors(i)) > 0)
    assert np.allclose(np.hypot(*t.direction.T), 1.0, atol=1e-15)


def test_interior_volume_sum_fine():
    eps = 0.1
    m = build_uniform_square_mesh(1.0, eps / 8)
    t = build_neighbors(m, eps)
    interior = np.all((m.nodes > 0.2) & (m.nodes < 0.8), axis=1)
    target = math.pi * eps ** 2 / 3
    err = np.abs(t.total_volume()[interior] - target) / target
    assert err.max() <= 0.02


def _disk_integral(J_eps, tri, i, n=200):
    """Integral of J * (1 - phi_i) over a triangle by centroid sums on an
    n x n sub-triangulation."""
    p = tri
    total = 0.0
    d1, d2 = p[1] - p[0], p[2] - p[0]
    area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
    sub = area / n ** 2
    for a in range(n):
        for b in range(n - a):
            for up in (True, False):
                if up:
                    lam = np.array([a + 1 / 3, b + 1 / 3]) / n
                else:
                    if a + b >= n - 1:
                        continue
                    lam = np.array([a + 2 / 3, b + 2 / 3]) / n
                l1, l2 = lam
                bary = np.array([1 - l1 - l2, l1, l2])
                x = bary @ p
                total += J_eps(np.hypot(*(x - p[i]))) * (1 - bary[i]) * sub
    return total


def test_single_triangle_against_refined_quadrature():
    nodes = np.array([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]])
    m = TriMesh(nodes, np.array([[0, 1, 2]]))
    eps = 50.0
    t = build_neighbors(m, eps, rule=RADON7)
    J_eps = lambda d: max(1 - d / eps, 0.0)
    ref = _disk_integral(J_eps, nodes, 0)
    assert t.volumes(0).sum() == pytest.approx(ref, rel=1e-3)


def test_small_horizon_only_incident_nodes():
    m = build_uniform_square_mesh(1.0, 0.1)
    with pytest.warns(UserWarning):
        t = build_neighbors(m, 0.06)
    for i in range(m.n_nodes):
        incident = set(m.elements[m.elem_adjacency(i)].ravel().tolist()) - {i}
        assert set(t.neighbors(i).tolist()) <= incident


def test_horizon_monotone_and_complete():
    m = build_uniform_square_mesh(1.0, 0.05)
    small = build_neighbors(m, 0.12)
    large = build_neighbors(m, 0.2)
    for i in range(0, m.n_nodes, 7):
        assert set(small.neighbors(i)) <= set(large.neighbors(i))
    h = 0.05
    for i in range(0, m.n_nodes, 5):
        d = np.hypot(*(m.nodes - m.nodes[i]).T)
        must = set(np.flatnonzero((d <= 0.2 - 2 * h) & (d > 0)).tolist())
        assert must <= set(large.neighbors(i).tolist())


def test_symmetry_of_uniform_table():
    n = 10
    m = build_uniform_square_mesh(1.0, 1.0 / n)
    t = build_neighbors(m, 0.3)
    V = dense(t)
    ix, iy = np.divmod(np.arange(m.n_nodes), n + 1)[::-1]
    # transpose (x <-> y) and point reflection both keep the diagonal split
    for perm in ((ix * (n + 1) + iy), ((n - iy) * (n + 1) + (n - ix))):
        assert np.allclose(V, V[np.ix_(perm, perm)], rtol=0, atol=1e-12 * V.max())


def test_lattice_counts_and_volumes():
    h = 0.1
    m = build_uniform_square_mesh(1.0, h)
    t = build_neighbors_meshfree(m, 2 * h)
    centre = 5 * 11 + 5
    assert len(t.neighbors(centre)) == 12
    d = t.length[t.row[centre]:t.row[centre + 1]]
    assert np.all(t.volumes(centre)[np.isclose(d, 2 * h)] == 0.0)
    ref = lattice_volumes_all_pairs(m.nodes, 2 * h, h)
    assert np.allclose(dense(t), ref, rtol=0, atol=1e-15)


def test_lattice_riemann_limit():
    eps = 0.16
    m = build_uniform_square_mesh(1.0, eps / 16)
    t = build_neighbors_meshfree(m, eps)
    i = (m.structured.n // 2) * (m.structured.n + 1) + m.structured.n // 2
    assert t.total_volume()[i] == pytest.approx(math.pi * eps ** 2 / 3, rel=0.03)


def test_meshfree_needs_structured_mesh():
    with pytest.raises(MeshError):
        build_neighbors_meshfree(load_msh(FIX / "hole_small.msh"), 3e-3)


def test_segments_intersect_cases():
    assert segments_intersect((0, 0), (1, 1), (0, 1), (1, 0))
    assert not segments_intersect((0, 0), (1, 0), (2, 0), (3, 0))
    assert not segments_intersect((0, 0), (1, 0), (1, 0), (2, 1))
    assert segments_intersect((0, 0), (2, 0), (1, 0), (3, 0))  # collinear overlap
    out = segments_intersect(np.array([[49.0, 0.0], [49.0, 5.0]]), np.array([[51.0, 0.0], [49.0, 9.0]]),
                             (50.0, -10.0), (50.0, 10.0))
    assert out.tolist() == [True, False]


def _three_node_table():
    nodes = np.array([[49.0, 0.0], [51.0, 0.0], [50.0, 0.0], [49.0, 30.0]])
    m = TriMesh(nodes, np.array([[0, 1, 3]]))
    row = np.array([0, 2, 3, 4, 4])
    nbr = np.array([1, 2, 0, 0])
    return m, BondTable.from_csr(nodes, row, nbr, np.ones(4), 5.0)


def test_precrack_rules():
    m, t = _three_node_table()
    apply_precrack(t, m, [((50.0, -10.0), (50.0, 10.0))])
    # 0-1 crosses, 0-2 ends on the crack, 2-0 starts on it
    assert t.broken.tolist() == [True, False, True, False]
    before = t.broken.copy()
    apply_precrack(t, m, CrackGeometry([((50.0, -10.0), (50.0, 10.0))]))
    assert np.array_equal(t.broken, before)
    _, t2 = _three_node_table()
    apply_precrack(t2, m, [((60.0, -10.0), (60.0, 10.0))])
    assert not t2.broken.any()


def test_precrack_on_uniform_mesh_is_idempotent():
    m = build_uniform_square_mesh(1.0, 0.05)
    t = build_neighbors(m, 0.15)
    crack = [((0.5 + 1e-7, 0.3), (0.5 + 1e-7, 0.7))]
    apply_precrack(t, m, crack)
    n1 = t.broken.sum()
    apply_precrack(t, m, crack)
    assert t.broken.sum() == n1 > 0
    own = m.nodes[t.owners()]
    nb = m.nodes[t.nbr]
    lo = np.minimum(own[:, 0], nb[:, 0])
    hi = np.maximum(own[:, 0], nb[:, 0])
    xc = crack[0][0][0]
    assert np.all((lo[t.broken] < xc) & (hi[t.broken] > xc))


def test_dump_csv(tmp_path):
    m = build_uniform_square_mesh(1.0, 0.5)
    t = build_neighbors(m, 0.6)
    t.dump_csv(tmp_path / "b.csv")
    rows = list(csv.reader(open(tmp_path / "b.csv")))
    assert rows[0] == ["i", "j", "V_ij", "length", "broken"]
    assert len(rows) == t.n_bonds + 1
    assert float(rows[1][2]) == t.volume[0]
