"""Experiment configurations: presets, JSON round-trip, validation,
assembly into a runnable simulation, and multi-run studies."""

from __future__ import annotations

import copy
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import containment, convergence_rate, jaccard, l2_diff
from .integrator import (BodyForce, Box, BoundaryCondition, Simulation, run,
                         stability_hint, Constraints)
from .material import INFLUENCES, PmbModel, calibrate_rnp, wave_speeds
from .mesh import RULES, build_uniform_square_mesh, load_msh
from .neighborhood import apply_precrack, build_neighbors, build_neighbors_meshfree

PRESETS = ("convergence_square", "mode1", "hole_axial", "vnotch_bend", "hole_precrack")

# reference brittle material (SI), the defaults for the fracture presets
TABLE1 = {"model": "rnp", "E": 37.5e9, "G_c": 500.0, "rho": 1200.0, "nu": 0.25}


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    """Plain-data description of one simulation.

    ``mesh`` is ``{"type": "uniform", "side", "origin", "m" | "n"}`` or
    ``{"type": "file", "path"}``. Boundary conditions and the body force are
    stored as dicts so the whole object serializes to JSON.
    """

    name: str
    mesh: dict
    material: dict
    horizon: float
    dt: float
    t_final: float
    dt_out: float
    bcs: list = field(default_factory=list)
    body_force: Optional[dict] = None
    precrack: list = field(default_factory=list)
    track: Optional[dict] = None
    discretization: str = "nfea"
    quadrature: str = "midpoint3"
    influence: str = "linear"
    units: str = "SI"
    notes: dict = field(default_factory=dict)

    # ---- serialization

    def to_dict(self):
        return copy.deepcopy(asdict(self))

    def to_json(self, path=None, indent=2):
        text = json.dumps(self.to_dict(), indent=indent, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        missing = {"name", "mesh", "material", "horizon", "dt", "t_final", "dt_out"} - set(d)
        if missing:
            raise ScenarioError(f"missing scenario keys: {sorted(missing)}")
        return cls(**copy.deepcopy(d))

    @classmethod
    def from_json(cls, path):
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc

    def replace(self, **kw):
        d = self.to_dict()
        d.update(kw)
        return Scenario.from_dict(d)

    # ---- derived quantities

    @property
    def mesh_size(self):
        m = self.mesh
        if m["type"] != "uniform":
            return m.get("h")
        return m["side"] / _grid_n(m, self.horizon)


def _grid_n(mesh, horizon):
    if "n" in mesh:
        return int(mesh["n"])
    n = mesh["side"] * mesh["m"] / horizon
    if abs(n - round(n)) > 1e-6 * n:
        raise ScenarioError(f"side*m/horizon = {n:g} is not an integer; give 'n' instead")
    return int(round(n))


def override(scenario, assignments):
    """Apply ``key=value`` strings; dotted keys reach into nested dicts
    (``material.E=1e9``, ``mesh.m=8``) and values parse as JSON when
    possible."""
    d = scenario.to_dict()
    for item in assignments:
        if "=" not in item:
            raise ScenarioError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        target = d
        parts = key.strip().split(".")
        for p in parts[:-1]:
            if isinstance(target, list):
                p = int(p)
            elif p not in target or not isinstance(target[p], (dict, list)):
                raise ScenarioError(f"override key {key!r} does not exist")
            target = target[p]
        last = parts[-1]
        if isinstance(target, list):
            target[int(last)] = value
        else:
            if target is d and last not in d:
                raise ScenarioError(f"override key {key!r} does not exist")
            target[last] = value
    return Scenario.from_dict(d)


# --------------------------------------------------------------------------
# presets


def _strip(x0, x1, y0, y1):
    return [x0, y0, x1, y1]


def _bc(region, dofs, kind, value=0.0, name=""):
    return {"region": region, "dofs": dofs, "kind": kind, "value": value, "name": name}


def preset(name, m=None, t_fraction=1.0, dt_factor=1.0):
    """Built-in scenario ``name`` at full scale.

    ``m`` (horizon over mesh size, uniform meshes only), ``t_fraction``
    (fraction of the final time kept) and ``dt_factor`` (multiplier on the
    time step) give cheaper desk-scale variants.
    """
    if name not in PRESETS:
        raise ScenarioError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    sc = _PRESET_BUILDERS[name]()
    if m is not None:
        if sc.mesh["type"] != "uniform":
            raise ScenarioError(f"preset {name!r} uses a file mesh; m cannot be changed")
        sc.mesh.pop("n", None)
        sc.mesh["m"] = m
    if t_fraction != 1.0:
        if not 0 < t_fraction <= 1:
            raise ScenarioError("t_fraction must lie in (0, 1]")
        steps_out = max(int(round(sc.t_final * t_fraction / sc.dt_out)), 1)
        sc.t_final = steps_out * sc.dt_out
    if dt_factor != 1.0:
        sc.dt = sc.dt * dt_factor
    return sc


def _convergence_square():
    eps = 0.05
    return Scenario(
        name="convergence_square",
        mesh={"type": "uniform", "side": 1.0, "origin": [0.0, 0.0], "m": 4},
        # the fracture energy only sets the softening scale; with G_c = 1 the
        # imposed strains stay far below critical
        material={"model": "rnp", "E": 1.0, "G_c": 1.0, "rho": 1.0, "nu": 0.25},
        horizon=eps, dt=1.25e-4, t_final=0.5, dt_out=0.01,
        bcs=[
            _bc(_strip(-1.0, eps, -1.0, 2.0), "both", "fixed", name="left clamp"),
            _bc(_strip(1.0 - eps, 2.0, -1.0, 2.0), "x", "displacement",
                {"type": "sin", "a": 0.01, "f": 1.0}, name="right sine"),
        ],
        notes={"G_c": "only sets the softening scale; any value keeping strains subcritical works"},
    )


def _mode1(layer=None, horizon=0.002):
    eps = horizon
    t = eps if layer is None else layer
    side = 0.1
    # shifted a hair off the node column at x = 0.05 so that every bond is
    # unambiguously on one side
    xc = 0.05 + 1e-6
    return Scenario(
        name="mode1",
        mesh={"type": "uniform", "side": side, "origin": [0.0, 0.0], "m": 4},
        material=dict(TABLE1),
        horizon=eps, dt=8e-10, t_final=40e-6, dt_out=40e-6 / 50,
        bcs=[
            _bc(_strip(-1.0, t, -1.0, 1.0), "x", "velocity", -1.0, name="left pull"),
            _bc(_strip(side - t, 1.0, -1.0, 1.0), "x", "velocity", 1.0, name="right pull"),
        ],
        precrack=[[[xc, 0.04], [xc, 0.06]]],
        track={"seed": [0.05, 0.06], "axis": [0.0, 1.0]},
        notes={"bc_layers": "full-height strips one horizon thick",
               "precrack": "offset 1e-6 m from x = 0.05 to avoid bonds ending on the crack"},
    )


def _hole_axial():
    eps = 1e-3
    W = 0.04
    v = 0.5
    return Scenario(
        name="hole_axial",
        mesh={"type": "file", "path": "hole_axial.msh", "h": 2.5e-4},
        material=dict(TABLE1),
        horizon=eps, dt=1.6e-9, t_final=160e-6, dt_out=160e-6 / 40,
        bcs=[
            _bc(_strip(-1.0, eps, -1.0, 1.0), "x", "velocity", -v, name="left pull"),
            _bc(_strip(W - eps, 1.0, -1.0, 1.0), "x", "velocity", v, name="right pull"),
        ],
        track={"seed": [0.02, 0.025], "axis": [0.0, 1.0]},
        notes={"geometry": "assumed: 40 mm square plate, hole radius 5 mm at the center",
               "velocity": "assumed: 0.5 m/s on each side"},
    )


def _vnotch_bend():
    eps = 1e-3
    L, H = 0.05, 0.015
    f_max = 2.5e5 * 1e6 * 1e3  # N/(us mm) -> N/(s m)
    load_half = 0.005
    return Scenario(
        name="vnotch_bend",
        mesh={"type": "file", "path": "vnotch_bend.msh", "h": 2.5e-4},
        material=dict(TABLE1),
        horizon=eps, dt=1.667e-9, t_final=250e-6, dt_out=250e-6 / 50,
        bcs=[
            _bc(_strip(-1.0, 2 * eps, -1.0, eps), "y", "fixed", name="left support"),
            _bc(_strip(L - 2 * eps, 1.0, -1.0, eps), "y", "fixed", name="right support"),
        ],
        # line load f_max * t with a tent profile, spread over a strip of
        # thickness eps below the top edge
        body_force={"direction": [0.0, -1.0],
                    "magnitude": {"type": "linear", "a": f_max / eps},
                    "region": [L / 2 - load_half, H - eps, L / 2 + load_half, 1.0],
                    "profile": "tent", "center": L / 2, "half_width": load_half},
        track={"seed": [0.025, 0.004], "axis": [0.0, 1.0]},
        notes={"geometry": "assumed: 50 x 15 mm beam, 60 degree notch 4 mm deep at mid-span",
               "load": "surface load divided by the loaded strip thickness (eps)"},
    )


def _hole_precrack():
    eps = 4e-4
    W, H = 0.02, 0.01
    vbar = 0.025
    return Scenario(
        name="hole_precrack",
        mesh={"type": "file", "path": "hole_precrack.msh", "h": 1e-4},
        material=dict(TABLE1),
        horizon=eps, dt=4e-9, t_final=800e-6, dt_out=800e-6 / 40,
        bcs=[
            _bc(_strip(-1.0, 1.0, -1.0, eps), "y", "velocity", -vbar, name="bottom pull"),
            _bc(_strip(-1.0, 1.0, H - eps, 1.0), "y", "velocity", vbar, name="top pull"),
        ],
        precrack=[[[-1e-3, H / 2 + 1e-7], [0.005, H / 2 + 1e-7]]],
        track={"seed": [0.005, H / 2], "axis": [1.0, 0.0]},
        notes={"geometry": "assumed: 20 x 10 mm plate, 5 mm edge crack at mid-height, "
                           "hole radius 1.5 mm centred at (10, 6.5) mm",
               "velocity": "25 mm/s over 800 us opens the plate by only 0.04 mm in total"},
    )


_PRESET_BUILDERS = {
    "convergence_square": _convergence_square,
    "mode1": _mode1,
    "hole_axial": _hole_axial,
    "vnotch_bend": _vnotch_bend,
    "hole_precrack": _hole_precrack,
}


# --------------------------------------------------------------------------
# assembly and validation


def resolve_mesh_path(path):
    p = Path(path)
    if p.exists():
        return p
    data = resources.files("nfeapd") / "data" / str(path)
    if data.is_file():
        return Path(str(data))
    raise ScenarioError(f"mesh file {path!r} not found")


def build_mesh(scenario):
    m = scenario.mesh
    if m["type"] == "uniform":
        n = _grid_n(m, scenario.horizon)
        return build_uniform_square_mesh(m["side"], m["side"] / n, tuple(m.get("origin", (0.0, 0.0))))
    if m["type"] == "file":
        return load_msh(resolve_mesh_path(m["path"]))
    raise ScenarioError(f"unknown mesh type {m['type']!r}")


def build_model(scenario):
    mat = dict(scenario.material)
    kind = mat.pop("model", "rnp")
    J = INFLUENCES[scenario.influence]
    if kind == "rnp":
        nu = mat.pop("nu", 0.25)
        if nu != 0.25:
            raise ScenarioError("the bond-based model needs nu = 0.25")
        return calibrate_rnp(mat["E"], mat["G_c"], scenario.horizon, mat["rho"], J,
                             force_prefactor=mat.get("force_prefactor", 2.0))
    if kind == "pmb":
        return PmbModel(mat["c_pmb"], mat["S_c"], scenario.horizon, mat["rho"], J)
    raise ScenarioError(f"unknown material model {kind!r}")


def build_bcs(scenario):
    out = []
    for k, b in enumerate(scenario.bcs):
        try:
            out.append(BoundaryCondition(Box(*b["region"]), b.get("dofs", "both"),
                                         b.get("kind", "fixed"), b.get("value", 0.0),
                                         b.get("name", f"bc{k}")))
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"boundary condition {k}: {exc}") from exc
    return out


def build_body_force(scenario):
    b = scenario.body_force
    if not b:
        return BodyForce()
    region = Box(*b["region"]) if b.get("region") else None
    return BodyForce(tuple(b.get("direction", (0.0, 0.0))), b.get("magnitude", 0.0), region,
                     b.get("profile", "uniform"), b.get("center", 0.0), b.get("half_width", 1.0))


def validate(scenario, mesh=None):
    """Check invariants and return a report dict; raises
    :class:`ScenarioError` on violations and warns on soft problems."""
    sc = scenario
    if sc.units != "SI":
        raise ScenarioError(f"unsupported unit system {sc.units!r}")
    if not sc.horizon > 0:
        raise ScenarioError("horizon must be positive")
    if not (0 < sc.dt < sc.dt_out <= sc.t_final * (1 + 1e-12)):
        raise ScenarioError(f"need 0 < dt < dt_out <= t_final, got dt={sc.dt:g}, "
                            f"dt_out={sc.dt_out:g}, t_final={sc.t_final:g}")
    if sc.discretization not in ("nfea", "meshfree"):
        raise ScenarioError(f"unknown discretization {sc.discretization!r}")
    if sc.quadrature not in RULES:
        raise ScenarioError(f"unknown quadrature rule {sc.quadrature!r}")
    if sc.influence not in INFLUENCES:
        raise ScenarioError(f"unknown influence function {sc.influence!r}")
    if mesh is None:
        mesh = build_mesh(sc)
    if sc.discretization == "meshfree" and mesh.structured is None:
        raise ScenarioError("meshfree discretization needs a uniform structured mesh")
    model = build_model(sc)
    bcs = build_bcs(sc)
    try:
        cons = Constraints(bcs, mesh.nodes)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    counts = {bc.name: int(len(ids)) for bc, ids, _, _ in cons.entries}
    h = mesh.mesh_size()
    ratio = sc.horizon / h
    report = {"name": sc.name, "nodes": mesh.n_nodes, "elements": mesh.n_elements,
              "h": h, "horizon_over_h": ratio, "bc_nodes": counts, "dt": sc.dt, "warnings": []}
    if ratio < 2:
        msg = f"horizon/h = {ratio:.3g} < 2: the horizon is under-resolved"
        report["warnings"].append(msg)
        warnings.warn(msg, stacklevel=2)
    hint = stability_hint(model, h)
    report["stability_hint"] = hint
    if sc.dt > hint:
        msg = f"time step {sc.dt:g} exceeds the stability hint {hint:g}"
        report["warnings"].append(msg)
        warnings.warn(msg, stacklevel=2)
    return report


def assemble(scenario, mesh=None, check=True):
    """Build mesh, bonds, pre-crack, model and loads into a
    :class:`Simulation`."""
    if check:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            validate(scenario, mesh)
    mesh = build_mesh(scenario) if mesh is None else mesh
    J = INFLUENCES[scenario.influence]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if scenario.discretization == "meshfree":
            table = build_neighbors_meshfree(mesh, scenario.horizon, J)
        else:
            table = build_neighbors(mesh, scenario.horizon, J, RULES[scenario.quadrature])
    if scenario.precrack:
        apply_precrack(table, mesh, scenario.precrack)
    return Simulation(mesh, table, build_model(scenario), build_bcs(scenario), scenario.dt,
                      scenario.t_final, scenario.dt_out, build_body_force(scenario),
                      name=scenario.name)


def rayleigh_speed(scenario):
    mat = scenario.material
    if mat.get("model", "rnp") != "rnp":
        return float("nan")
    return wave_speeds(mat["E"], mat.get("nu", 0.25), mat["rho"])[2]


def bc_boxes(scenario):
    return [Box(*b["region"]) for b in scenario.bcs]


# --------------------------------------------------------------------------
# studies


def convergence_study(base, ladder=(4, 8, 12), reference=16, progress=None):
    """Run ``base`` for every ``m`` in ``ladder`` and ``reference`` and
    return errors against the reference and rates between consecutive
    ladder members at each output time."""
    ms = sorted(set(ladder))
    if reference <= ms[-1]:
        raise ScenarioError("the reference m must exceed every ladder member")
    sols = {}
    for m in ms + [reference]:
        sc = base.replace(mesh=dict(base.mesh, m=m))
        sc.mesh.pop("n", None)
        sim = assemble(sc)
        res = run(sim)
        sols[m] = (sim.mesh, [s.U for s in res.snapshots], [s.time for s in res.snapshots])
        if progress:
            progress(m, res.summary)
        del sim
    ref_mesh, ref_U, times = sols[reference]
    errors = {}
    for m in ms:
        mesh, Us, _ = sols[m]
        errors[m] = np.array([l2_diff(ref_mesh, ref_U[k], mesh, Us[k]) for k in range(len(times))])
    h = {m: base.horizon / m for m in ms}
    rates = {}
    for a, b in zip(ms[:-1], ms[1:]):
        rates[(a, b)] = np.array([convergence_rate(errors[a][k], errors[b][k], h[a], h[b])
                                  for k in range(len(times))])
    return {"t": np.array(times), "errors": errors, "rates": rates}


def damaged_mask(Z, threshold=1.0, exclude=(), nodes=None):
    mask = np.asarray(Z) >= threshold
    for box in exclude:
        mask &= ~box.contains(nodes)
    return mask


def compare_discretizations(base, threshold=1.0, progress=None):
    """Run ``base`` with NFEA and meshfree bonds on the same mesh and report
    the Jaccard overlap of the damaged node sets at every output time."""
    out = {}
    for mode in ("meshfree", "nfea"):
        sc = base.replace(discretization=mode)
        sim = assemble(sc)
        res = run(sim)
        out[mode] = res
        if progress:
            progress(mode, res.summary)
    excl = bc_boxes(base)
    nodes = sim.mesh.nodes
    t = [s.time for s in out["nfea"].snapshots]
    jac = [jaccard(damaged_mask(a.Z, threshold, excl, nodes), damaged_mask(b.Z, threshold, excl, nodes))
           for a, b in zip(out["nfea"].snapshots, out["meshfree"].snapshots)]
    return {"t": np.array(t), "jaccard": np.array(jac), "mesh": sim.mesh, "results": out}


def localization_study(base, horizons, layer=0.003, m=4, threshold=1.0, progress=None):
    """Run the mode-I setup for each horizon (largest first) with fixed-width
    loading layers and ``h ~ horizon/m``; report how much of each smaller
    horizon's damaged set lies within ``horizon_large`` of the largest
    horizon's set."""
    horizons = sorted(horizons, reverse=True)
    side = base.mesh["side"]
    runs = []
    for eps in horizons:
        sc = _relayer(base, eps, layer)
        sc.mesh = {"type": "uniform", "side": side, "origin": base.mesh.get("origin", [0, 0]),
                   "n": int(round(side * m / eps))}
        sim = assemble(sc)
        res = run(sim)
        if progress:
            progress(eps, res.summary)
        excl = bc_boxes(sc)
        pts = [sim.mesh.nodes[damaged_mask(s.Z, threshold, excl, sim.mesh.nodes)]
               for s in res.snapshots]
        runs.append({"horizon": eps, "times": [s.time for s in res.snapshots], "damaged": pts})
    large = runs[0]
    report = {"horizons": horizons, "t": np.array(large["times"]), "containment": {}}
    for r in runs[1:]:
        report["containment"][r["horizon"]] = np.array([
            containment(ps, pl, large["horizon"]) for ps, pl in zip(r["damaged"], large["damaged"])])
    report["runs"] = runs
    return report


def _relayer(base, eps, layer):
    """Copy of ``base`` with a new horizon and loading layers of fixed
    thickness ``layer``."""
    sc = base.replace(horizon=eps)
    side = base.mesh["side"]
    bcs = []
    for b in sc.bcs:
        b = dict(b)
        x0, y0, x1, y1 = b["region"]
        if x1 < side / 2:
            b["region"] = [x0, y0, layer, y1]
        elif x0 > side / 2:
            b["region"] = [side - layer, y0, x1, y1]
        bcs.append(b)
    sc.bcs = bcs
    return sc
