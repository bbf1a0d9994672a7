import json

import numpy as np
import pytest

from nfeapd.scenarios import (PRESETS, Scenario, ScenarioError, assemble, localization_study,
                              override, preset, rayleigh_speed, validate)


@pytest.mark.parametrize("name", PRESETS)
def test_presets_validate(name):
    sc = preset(name)
    report = validate(sc)
    assert report["nodes"] > 0 and all(n > 0 for n in report["bc_nodes"].values())
    assert report["horizon_over_h"] >= 2


def test_json_round_trip_bit_identical(tmp_path):
    for name in PRESETS:
        sc = preset(name)
        p = tmp_path / f"{name}.json"
        sc.to_json(p)
        back = Scenario.from_json(p)
        assert back == sc
        assert back.to_json() == sc.to_json()


def test_desk_scale_knobs():
    sc = preset("mode1", m=2, t_fraction=0.5, dt_factor=5)
    assert sc.mesh["m"] == 2
    assert sc.t_final == pytest.approx(20e-6, rel=1e-12)
    assert sc.dt == pytest.approx(4e-9, rel=1e-12)
    assert sc.mesh_size == pytest.approx(1e-3, rel=1e-12)
    with pytest.raises(ScenarioError):
        preset("hole_axial", m=4)
    with pytest.raises(ScenarioError):
        preset("nope")
    with pytest.raises(ScenarioError):
        preset("mode1", t_fraction=0.0)


def test_override():
    sc = override(preset("mode1"), ["material.E=1e9", "horizon=0.004", "bcs.0.value=-2.5",
                                    "name=x"])
    assert sc.material["E"] == 1e9 and sc.horizon == 0.004 and sc.name == "x"
    assert sc.bcs[0]["value"] == -2.5
    for bad in (["nokey=1"], ["material.E"], ["foo.bar=1"]):
        with pytest.raises(ScenarioError):
            override(preset("mode1"), bad)


def test_from_dict_errors(tmp_path):
    d = preset("mode1").to_dict()
    with pytest.raises(ScenarioError):
        Scenario.from_dict(dict(d, extra=1))
    d.pop("dt")
    with pytest.raises(ScenarioError):
        Scenario.from_dict(d)
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ScenarioError):
        Scenario.from_json(p)


def test_validate_errors_and_warnings():
    sc = preset("mode1", m=2)
    with pytest.raises(ScenarioError):
        validate(sc.replace(dt=sc.t_final * 2))
    with pytest.raises(ScenarioError):
        validate(sc.replace(discretization="other"))
    off = sc.to_dict()
    off["bcs"][0]["region"] = [5.0, 5.0, 6.0, 6.0]
    with pytest.raises(ScenarioError):
        validate(Scenario.from_dict(off))
    coarse = sc.replace(mesh={"type": "uniform", "side": 0.1, "n": 40})
    with pytest.warns(UserWarning, match="under-resolved"):
        validate(coarse)
    with pytest.warns(UserWarning, match="stability"):
        validate(sc.replace(dt=1e-6, dt_out=2e-6))
    with pytest.raises(ScenarioError):
        sc.replace(mesh={"type": "uniform", "side": 0.1, "m": 3.33}).mesh_size


def test_rayleigh_speed():
    assert round(rayleigh_speed(preset("mode1")), 1) == 3244.2


def test_assemble_applies_precrack():
    sim = assemble(preset("mode1", m=2))
    assert sim.table.broken.any()
    x = sim.mesh.nodes[:, 0]
    own, nb = sim.table.owners(), sim.table.nbr
    cross = (x[own] - 0.05 - 1e-6) * (x[nb] - 0.05 - 1e-6) < 0
    assert np.all(cross[sim.table.broken])


def test_localization_identical_horizons_contained():
    base = preset("mode1", t_fraction=0.2, dt_factor=5)
    rep = localization_study(base, [0.01, 0.01], layer=0.01, m=2)
    (c,) = rep["containment"].values()
    assert np.all(c == 1.0)
