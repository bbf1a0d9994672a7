import math

import numpy as np
import pytest

from nfeapd.analysis import (containment, convergence_rate, damage_band_width, element_strain,
                             jaccard, l2_diff, seed_component, track_crack)
from nfeapd.integrator import Box
from nfeapd.mesh import build_uniform_square_mesh


def test_element_strain_examples():
    m = build_uniform_square_mesh(1.0, 0.25)
    x, y = m.nodes.T
    s = element_strain(m, np.column_stack([0.01 * x, 0 * x]))
    assert np.allclose(s.tensor[:, 0, 0], 0.01, rtol=1e-12)
    assert np.allclose(s.tensor[:, 1, 1], 0.0, atol=1e-15)
    assert np.allclose(s.magnitude, 0.01, rtol=1e-12)
    # rigid rotation (infinitesimal) has zero strain
    s = element_strain(m, np.column_stack([-1e-3 * y, 1e-3 * x]))
    assert np.max(np.abs(s.tensor)) <= 1e-15
    s = element_strain(m, np.column_stack([0.02 * y, 0 * x]))
    assert np.allclose(s.tensor[:, 0, 1], 0.01, rtol=1e-12)
    with pytest.raises(ValueError):
        element_strain(m, np.zeros((3, 2)))


def test_l2_identical_and_constant():
    f = build_uniform_square_mesh(1.0, 0.125)
    c = build_uniform_square_mesh(1.0, 0.25)
    U = np.sin(f.nodes)
    assert l2_diff(f, U, f, U) <= 1e-14
    cU = np.tile([0.3, -0.4], (c.n_nodes, 1))
    assert l2_diff(f, np.zeros((f.n_nodes, 2)), c, cU) == pytest.approx(0.5, rel=1e-12)
    assert l2_diff(f, np.zeros(f.n_nodes), c, np.full(c.n_nodes, 2.0), norm="nodal") == pytest.approx(2.0, rel=1e-12)


def test_l2_interpolation_order():
    ref = build_uniform_square_mesh(1.0, 1 / 64)
    u = lambda p: p[:, 0] ** 2 + np.sin(3 * p[:, 1])
    errs = []
    for h in (1 / 8, 1 / 16):
        c = build_uniform_square_mesh(1.0, h)
        errs.append(l2_diff(ref, u(ref.nodes), c, u(c.nodes)))
    assert convergence_rate(errs[0], errs[1], 1 / 8, 1 / 16) == pytest.approx(2.0, abs=0.1)


def test_l2_symmetry_and_triangle_inequality():
    m = build_uniform_square_mesh(1.0, 0.1)
    rng = np.random.default_rng(0)
    a, b, c = (rng.standard_normal((m.n_nodes, 2)) for _ in range(3))
    assert l2_diff(m, a, m, b) == pytest.approx(l2_diff(m, b, m, a), rel=1e-12)
    assert l2_diff(m, a, m, c) <= l2_diff(m, a, m, b) + l2_diff(m, b, m, c) + 1e-12


def test_convergence_rate_examples():
    assert convergence_rate(4.0, 1.0, 2.0, 1.0) == pytest.approx(2.0)
    assert convergence_rate(1.0, 1.0, 2.0, 1.0) == 0.0
    assert math.isnan(convergence_rate(0.0, 1.0, 2.0, 1.0))
    with pytest.raises(ValueError):
        convergence_rate(1.0, 1.0, 1.0, 2.0)


def _synthetic_crack(speed, times, m, horizon):
    """Damage along x = 0.5 growing upward from y = 0.2."""
    x, y = m.nodes.T
    return [((np.abs(x - 0.5) < 1e-9) & (y >= 0.2) & (y <= 0.2 + speed * t + 1e-9)).astype(float) * 2.0
            for t in times]


def test_track_crack_constant_speed():
    m = build_uniform_square_mesh(1.0, 0.01)
    times = np.arange(0, 11) * 0.05
    Z = _synthetic_crack(1.0, times, m, 0.03)
    tr = track_crack(times, Z, m, seed=(0.5, 0.2), axis=(0, 1), horizon=0.03, c_R=2.0)
    assert tr.length[-1] == pytest.approx(0.5, abs=1e-9)
    assert np.all(np.diff(tr.length) >= 0)
    assert tr.v[1:] == pytest.approx(np.ones(10), rel=1e-9)
    assert tr.v_over_cR[1:] == pytest.approx(np.full(10, 0.5), rel=1e-9)
    assert tr.t1 == pytest.approx(0.05) and tr.t2 == pytest.approx(0.5)


def test_track_crack_units():
    # 1 mm per microsecond is 1000 m/s
    m = build_uniform_square_mesh(0.01, 1e-4)
    times = np.arange(5) * 1e-6
    x, y = m.nodes.T
    Z = [((np.abs(x - 0.005) < 1e-12) & (y <= 1e-3 * k)).astype(float) for k in range(5)]
    tr = track_crack(times, Z, m, seed=(0.005, 0.0), axis=(0, 1), horizon=4e-4, c_R=3244.2)
    assert tr.v[1:] == pytest.approx(np.full(4, 1000.0), rel=1e-9)


def test_track_crack_static_and_empty():
    m = build_uniform_square_mesh(1.0, 0.05)
    times = np.linspace(0, 1, 5)
    Z = [np.zeros(m.n_nodes)] * 5
    assert len(track_crack(times, Z, m, (0.5, 0.5), (0, 1), 0.1, 1.0)) == 0
    x, y = m.nodes.T
    Zs = [((np.abs(x - 0.5) < 1e-9) & (np.abs(y - 0.5) < 0.2)).astype(float)] * 5
    tr = track_crack(times, Zs, m, (0.5, 0.5), (0, 1), 0.1, 1.0)
    assert np.all(tr.v == 0.0)
    with pytest.raises(ValueError):
        track_crack(times[:3], Z, m, (0.5, 0.5), (0, 1), 0.1, 1.0)


def test_seed_component_ignores_detached_damage():
    m = build_uniform_square_mesh(1.0, 0.1)
    x, y = m.nodes.T
    mask = (np.abs(x - 0.5) < 1e-9) & (y < 0.35) | (np.abs(x - 0.9) < 1e-9)
    comp = seed_component(m, mask, (0.5, 0.0), 0.05)
    assert comp.sum() == 4 and not comp[np.abs(x - 0.9) < 1e-9].any()


def test_band_width():
    m = build_uniform_square_mesh(1.0, 0.01)
    x, y = m.nodes.T
    eps = 0.03
    Z = (np.abs(x - 0.5) <= eps + 1e-9).astype(float)
    assert damage_band_width(Z, m.nodes, (0, 1)) == pytest.approx(2 * eps, abs=1e-9)
    Z[(y > 0.9) & (x < 0.1)] = 1.0
    assert damage_band_width(Z, m.nodes, (0, 1), exclude=[Box(-1, 0.85, 0.2, 2)]) == pytest.approx(2 * eps, abs=1e-9)
    assert damage_band_width(np.zeros(m.n_nodes), m.nodes, (0, 1)) == 0.0


def test_jaccard_and_containment():
    assert jaccard([1, 1, 0, 0], [1, 0, 1, 0]) == pytest.approx(1 / 3)
    assert jaccard([0, 0], [0, 0]) == 1.0
    assert jaccard([1, 0], [1, 0]) == 1.0
    big = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert containment(np.array([[0.0, 0.5], [1.0, 2.0]]), big, 0.5) == 0.5
    assert containment(np.zeros((0, 2)), big, 0.1) == 1.0
    assert containment(big, np.zeros((0, 2)), 0.1) == 0.0
