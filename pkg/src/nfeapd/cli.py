"""``nfeapd`` command line: run scenarios, convergence ladders,
discretization comparisons, localization studies and material info."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import plotting
from .analysis import damage_band_width, element_strain, seed_component, track_crack
from .integrator import DivergenceError, run, stability_hint
from .io import write_timeseries_csv, write_vtk
from .material import calibrate_rnp, moment_MJ, wave_speeds
from .scenarios import (PRESETS, TABLE1, Scenario, ScenarioError, assemble, bc_boxes,
                        compare_discretizations, convergence_study, damaged_mask,
                        localization_study, override, preset, rayleigh_speed, validate)

log = logging.getLogger("nfeapd")


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _scenario_args(p, default=None):
    g = p.add_mutually_exclusive_group(required=default is None)
    g.add_argument("--preset", choices=PRESETS, default=default)
    g.add_argument("--scenario", type=Path, help="scenario JSON file")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--m", type=int, help="horizon over mesh size (uniform meshes)")
    p.add_argument("--t-fraction", type=float, default=1.0, help="fraction of the final time to run")
    p.add_argument("--dt-factor", type=float, default=1.0, help="multiplier on the time step")
    p.add_argument("--out", type=Path, default=Path("out"))


def _load(args):
    if args.scenario is not None:
        sc = Scenario.from_json(args.scenario)
        if args.m is not None:
            sc = override(sc, [f"mesh.m={args.m}"])
        if args.t_fraction != 1.0 or args.dt_factor != 1.0:
            sc = sc.replace(t_final=sc.t_final * args.t_fraction, dt=sc.dt * args.dt_factor)
    else:
        sc = preset(args.preset, m=args.m, t_fraction=args.t_fraction, dt_factor=args.dt_factor)
    return override(sc, args.override) if args.override else sc


def build_parser():
    p = argparse.ArgumentParser(prog="nfeapd", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario and write VTK, CSV and figures")
    _scenario_args(r)
    r.add_argument("--scale", type=float, default=100.0, help="displacement magnification for VTK points")
    r.add_argument("--vtk-every", type=int, default=1, help="write every n-th snapshot")
    r.add_argument("--progress", type=int, default=0, help="log every n steps")
    r.add_argument("--dump-scenario", action="store_true", help="write scenario.json and exit")

    q = sub.add_parser("rates", help="convergence rates over a mesh ladder")
    _scenario_args(q, default="convergence_square")
    q.add_argument("--ladder", type=_ints, default=[4, 8, 12])
    q.add_argument("--reference", type=int, default=16)

    c = sub.add_parser("compare-discretizations", help="NFEA against meshfree bonds")
    _scenario_args(c, default="mode1")

    lz = sub.add_parser("localization", help="damage localization as the horizon shrinks")
    _scenario_args(lz, default="mode1")
    lz.add_argument("--horizons", type=_floats, default=[3e-3, 2e-3, 1e-3])
    lz.add_argument("--layer", type=float, default=3e-3, help="loading layer thickness")
    lz.add_argument("--ratio", type=int, default=4, help="horizon over mesh size")

    i = sub.add_parser("info", help="calibration, wave speeds and stability hint")
    i.add_argument("--E", type=float, default=TABLE1["E"])
    i.add_argument("--G-c", type=float, default=TABLE1["G_c"])
    i.add_argument("--rho", type=float, default=TABLE1["rho"])
    i.add_argument("--nu", type=float, default=TABLE1["nu"])
    i.add_argument("--horizon", type=float, default=2e-3)
    i.add_argument("--h", type=float, help="mesh size (default horizon/4)")
    return p


# --------------------------------------------------------------------------
# commands


def cmd_info(args):
    c_l, c_s, c_r = wave_speeds(args.E, args.nu, args.rho)
    model = calibrate_rnp(args.E, args.G_c, args.horizon, args.rho)
    h = args.h or args.horizon / 4
    print(f"M_J = {moment_MJ(model.influence):.12f}")
    print(f"c = {model.c:.6g}")
    print(f"beta = {model.beta:.6g}")
    print(f"r* = {model.r_star:.6g}")
    print(f"S_c(L = horizon) = {model.critical_strain(args.horizon):.6g}")
    print(f"c_L = {c_l:.1f} m/s")
    print(f"c_S = {c_s:.1f} m/s")
    print(f"c_R = {c_r:.1f} m/s")
    print(f"dt hint (h = {h:g}) = {stability_hint(model, h):.4g} s")
    return 0


def cmd_run(args):
    sc = _load(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    sc.to_json(out / "scenario.json")
    if args.dump_scenario:
        return 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = validate(sc)
    for w in caught:
        log.warning("%s", w.message)
    log.info("%s: %d nodes, horizon/h = %.3g", sc.name, report["nodes"], report["horizon_over_h"])
    sim = assemble(sc, check=False)
    log.info("%d bonds", sim.table.n_bonds)

    written = []

    def on_snapshot(s):
        k = len(written)
        if k % args.vtk_every == 0:
            written.append(write_vtk(s, sim.mesh, out / f"snapshot_{k:04d}.vtk", scale=args.scale))
        else:
            written.append(None)

    try:
        res = run(sim, on_snapshot=on_snapshot, progress_every=args.progress)
    except DivergenceError as exc:
        if exc.result is not None:
            _write_run(exc.result, sim, sc, out)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_run(res, sim, sc, out)
    print(json.dumps(res.summary, indent=2))
    return 0


def _write_run(res, sim, sc, out):
    write_timeseries_csv(res.series, out / "series.csv")
    (out / "summary.json").write_text(json.dumps(res.summary, indent=2) + "\n")
    if not res.snapshots:
        return
    last = res.snapshots[-1]
    plotting.plot_damage(sim.mesh, last.Z, out / "damage_final.png", last.U, 0.0,
                         title=f"Z >= 1 at t = {last.time:.4g}")
    plotting.plot_element_field(sim.mesh, element_strain(sim.mesh, last.U).magnitude,
                                out / "strain_final.png", label="|E|")
    if sc.track:
        trace = track_crack([s.time for s in res.snapshots], [s.Z for s in res.snapshots],
                            sim.mesh, sc.track["seed"], sc.track["axis"], sc.horizon,
                            rayleigh_speed(sc))
        write_timeseries_csv(trace, out / "crack.csv")
        if len(trace):
            plotting.plot_crack_speed({sc.name: trace}, out / "crack_speed.png")
            comp = seed_component(sim.mesh, last.Z >= 1, sc.track["seed"], sc.horizon)
            axis = sc.track["axis"]
            res.summary["band_width"] = damage_band_width(last.Z, sim.mesh.nodes, axis, mask=comp,
                                                          exclude=bc_boxes(sc))
            res.summary["max_v_over_cR"] = float(trace.v_over_cR.max())
            (out / "summary.json").write_text(json.dumps(res.summary, indent=2) + "\n")


def cmd_rates(args):
    sc = _load(args)
    args.out.mkdir(parents=True, exist_ok=True)
    study = convergence_study(sc, args.ladder, args.reference,
                              progress=lambda m, s: log.info("m = %d done in %.1f s", m, s["wall_time"]))
    cols = {"t": study["t"]}
    for (a, b), alpha in study["rates"].items():
        cols[f"alpha_{a}_{b}"] = alpha
    write_timeseries_csv(cols, args.out / "rates.csv")
    errs = {"t": study["t"]}
    errs.update({f"err_m{m}": e for m, e in study["errors"].items()})
    write_timeseries_csv(errs, args.out / "errors.csv")
    plotting.plot_rates(study["t"], study["rates"], args.out / "rates.png")
    for (a, b), alpha in study["rates"].items():
        print(f"alpha({a},{b}): median {np.nanmedian(alpha[1:]):.3f}")
    return 0


def cmd_compare(args):
    sc = _load(args)
    args.out.mkdir(parents=True, exist_ok=True)
    rep = compare_discretizations(sc, progress=lambda k, s: log.info("%s done in %.1f s", k, s["wall_time"]))
    write_timeseries_csv({"t": rep["t"], "jaccard": rep["jaccard"]}, args.out / "overlap.csv")
    a = rep["results"]["meshfree"].snapshots[-1].Z
    b = rep["results"]["nfea"].snapshots[-1].Z
    plotting.plot_overlap(rep["mesh"], damaged_mask(a), damaged_mask(b), args.out / "overlap.png",
                          labels=("meshfree", "nfea"))
    print(f"final Jaccard overlap: {rep['jaccard'][-1]:.3f}")
    return 0


def cmd_localization(args):
    sc = _load(args)
    args.out.mkdir(parents=True, exist_ok=True)
    rep = localization_study(sc, args.horizons, layer=args.layer, m=args.ratio,
                             progress=lambda e, s: log.info("horizon %g done in %.1f s", e, s["wall_time"]))
    cols = {"t": rep["t"]}
    cols.update({f"containment_{eps:g}": v for eps, v in rep["containment"].items()})
    write_timeseries_csv(cols, args.out / "containment.csv")
    for eps, v in rep["containment"].items():
        print(f"horizon {eps:g}: final containment {v[-1]:.3f}")
    return 0


COMMANDS = {"run": cmd_run, "rates": cmd_rates, "compare-discretizations": cmd_compare,
            "localization": cmd_localization, "info": cmd_info}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(message)s", stream=sys.stdout)
    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
