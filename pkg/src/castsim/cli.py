"""Command-line front end.

Every subcommand prints a short delimited summary on stdout; when a report
directory is given, figures are rendered next to the delimited artifacts
so a run can be reviewed without re-executing anything.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .control import build_lookup_table, save_lookup_table
from .dynamics import Caster3DGeometry, PlanarFlightState
from .errors import CastsimError
from .mintime import save_sweep_csv, throwing_angle_sweep
from .scenario import Scenario, load_scenario
from .sim import replay_check, run_scenario
from .vision import estimate_homography, load_correspondences_csv


def _report_dir(arg) -> Path:
    path = Path(arg)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_simulate(args) -> int:
    scn = load_scenario(args.scenario)
    trace = args.trace
    report = _report_dir(args.report) if args.report else None
    if report and not trace:
        trace = str(report / f"{scn.label}_trace.csv")
    out = run_scenario(scn, trace_path=trace)
    print(f"label,{scn.label}")
    print(f"result,{out.result}")
    print(f"min_distance,{out.min_distance!r}")
    print(f"t_throw,{out.t_throw!r}")
    print(f"t_brake,{out.t_brake!r}")
    print(f"t_end,{out.t_end!r}")
    if trace:
        print(f"trace,{trace}")
    if report:
        from .plots import plot_trace

        fig = plot_trace(trace, report / f"{scn.label}_trace.png")
        print(f"figure,{fig}")
    return 0


def cmd_sweep_angle(args) -> int:
    with open(args.config) as fh:
        cfg = json.load(fh)
    geom = Caster3DGeometry(b=cfg.get("b", 1.0), r=cfg.get("r", 1.0),
                            m=cfg.get("m", 1.0), g=cfg.get("g", 0.0),
                            u_max=cfg.get("u_max", 10.0))
    ang = cfg["angles"]
    angles = np.linspace(ang["start"], ang["stop"], int(ang["n"]))
    result = throwing_angle_sweep(geom, cfg["omega0"], cfg["target"],
                                  angles, n_seg=int(cfg.get("n_seg", 20)))
    report = _report_dir(args.report) if args.report else Path(".")
    csv_path = report / "sweep.csv"
    save_sweep_csv(result, csv_path)
    for r in result.rows:
        print(f"{r.alpha0!r},{r.t_f!r},{r.miss!r},{r.status}")
    print(f"alpha_opt,{result.alpha_opt!r}")
    print(f"t_f_opt,{result.t_f_opt!r}")
    print(f"csv,{csv_path}")
    if args.report:
        from .plots import plot_sweep

        fig = plot_sweep(result.rows, report / "sweep.png")
        print(f"figure,{fig}")
    return 0


def cmd_build_table(args) -> int:
    with open(args.config) as fh:
        cfg = json.load(fh)
    f = cfg["fs0"]
    fs0 = PlanarFlightState(f["x"], f["y"], f["vx"], f["vy"],
                            anchor=tuple(f.get("anchor", (0.0, 0.0))))
    table = build_lookup_table(fs0, cfg["m"], cfg["g"], cfg["u_max"],
                               cfg["x_range"], cfg["y_range"],
                               spacing=cfg.get("spacing", 0.05))
    out = args.out or "lookup_table.txt"
    save_lookup_table(table, out)
    reach = int(table.reachable.sum())
    print(f"cells,{table.nx * table.ny}")
    print(f"reachable,{reach}")
    print(f"table,{out}")
    return 0


def cmd_calibrate(args) -> int:
    pixel_pts, world_pts = load_correspondences_csv(args.correspondences)
    hom = estimate_homography(pixel_pts, world_pts)
    print(f"points,{len(pixel_pts)}")
    print(f"rms_px,{float(hom.rms_px)!r}")
    print(f"rms_world,{float(hom.rms_world)!r}")
    for row in hom.H:
        print(",".join(repr(float(v)) for v in row))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"H": hom.H.tolist(), "rms_px": hom.rms_px,
                       "rms_world": hom.rms_world}, fh, indent=2)
        print(f"saved,{args.out}")
    if args.report:
        from .plots import plot_calibration

        report = _report_dir(args.report)
        fig = plot_calibration(pixel_pts, world_pts, hom.H,
                               report / "calibration.png")
        print(f"figure,{fig}")
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    scn = load_scenario(args.scenario)
    print(f"serving,{scn.label},port,{args.port},time_scale,{args.time_scale}")
    serve(scn, args.port, time_scale=args.time_scale, host=args.host)
    return 0


def cmd_replay(args) -> int:
    scn = load_scenario(args.scenario)
    try:
        out = replay_check(args.trace, scn)
    except CastsimError as exc:
        print(f"replay,diverged")
        print(f"detail,{exc}")
        return 1
    print(f"replay,identical")
    print(f"result,{out.result}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="castsim",
                                 description="casting manipulation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario")
    p.add_argument("scenario")
    p.add_argument("--trace", help="write the run trace to this CSV")
    p.add_argument("--report", help="directory for figures + artifacts")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep-angle", help="3D minimum-time angle sweep")
    p.add_argument("config")
    p.add_argument("--report", help="directory for figures + artifacts")
    p.set_defaults(fn=cmd_sweep_angle)

    p = sub.add_parser("build-table", help="precompute a force lookup table")
    p.add_argument("config")
    p.add_argument("--out", help="output table path")
    p.set_defaults(fn=cmd_build_table)

    p = sub.add_parser("calibrate", help="fit image-to-world homography")
    p.add_argument("correspondences", help="CSV of u,v,x,y rows")
    p.add_argument("--out", help="write fitted H as JSON")
    p.add_argument("--report", help="directory for figures")
    p.set_defaults(fn=cmd_calibrate)

    p = sub.add_parser("serve", help="live websocket simulation")
    p.add_argument("scenario")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--time-scale", type=float, default=1.0)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("replay", help="verify a trace reproduces exactly")
    p.add_argument("trace")
    p.add_argument("scenario")
    p.set_defaults(fn=cmd_replay)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CastsimError as exc:
        print(f"error,{exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
