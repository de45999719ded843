"""Command-line entry point: ``flapreg <subcommand> [options]``.

Exit status is 0 on success, 1 on a domain error (printed as
``error: <Code>: <message>``) and 2 on a usage error.  Every run writes its
outputs plus one ``manifest.json`` under ``--out`` (default ``./out``);
existing outputs are only replaced with ``--force``.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .actuator import DATA_DIR as ACT_DATA, SlipStickActuator, load_actuator_spec
from .budget import (REFERENCE_ARM_IN_MM, REFERENCE_ARM_OUT_MM, REFERENCE_DISPLACEMENT_MM,
                     REFERENCE_FOS, REFERENCE_G, REFERENCE_MASS_KG, REFERENCE_THRUST_MARGIN,
                     ForceBudget, LeverStage, RegulatorRequirement, budget_report)
from .errors import FlapregError, TargetUnreachable
from .gait import LengthSweepSpec, parse_length_range, run_length_sweep, write_sweep
from .linkage import DATA_DIR as RIG_DATA, SolverConfig, load_linkage, solve_pose, sweep_trajectory
from .mech import (TriangleBounds, TriangleMechanism, direct_curve, feasibility, lever_curve,
                   ma_curve, optimize_triangle)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument types


def _number(text, check, rule):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number {rule}, got {text!r}") from None
    if not math.isfinite(v) or not check(v):
        raise argparse.ArgumentTypeError(f"must be {rule}, got {text}")
    return v


def positive(text):
    return _number(text, lambda v: v > 0, "> 0")


def non_negative(text):
    return _number(text, lambda v: v >= 0, ">= 0")


def at_least_one(text):
    return _number(text, lambda v: v >= 1, ">= 1")


def any_float(text):
    return _number(text, lambda v: True, "finite")


def int_at_least(lo):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer >= {lo}, got {text!r}") from None
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be an integer >= {lo}, got {v}")
        return v
    return parse


def length_list(text):
    try:
        vals = parse_length_range(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{exc} (use start:end:count or a,b,c)") from None
    if not vals or any(not (v > 0) for v in vals):
        raise argparse.ArgumentTypeError("lengths must be positive")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise argparse.ArgumentTypeError(f"lengths must be strictly increasing, got {text}")
    return vals


def interval(text):
    parts = text.split(":")
    try:
        lo, hi = (float(p) for p in parts) if len(parts) == 2 else (float(text),) * 2
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if not (0 <= lo <= hi):
        raise argparse.ArgumentTypeError(f"must satisfy 0 <= lo <= hi, got {text}")
    return lo, hi


def bar_setting(text):
    name, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=LENGTH, got {text!r}")
    return name, positive(val)


# ---------------------------------------------------------------------------
# helpers


def _resolve(path_or_name: str, data_dir: Path) -> Path:
    """A readable path, else a packaged data file with the same stem."""
    p = Path(path_or_name)
    if p.is_file():
        return p.resolve()
    packaged = data_dir / f"{p.stem}.json"
    if packaged.is_file():
        return packaged
    raise UsageError(f"file not found: {path_or_name}")


class Run:
    """Output directory bookkeeping and the run manifest."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.out = Path(args.out)
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []

    def path(self, name: str) -> Path:
        p = self.out / name
        if p.exists() and not self.args.force:
            raise UsageError(f"argument --out: {p} exists; pass --force to overwrite")
        return p

    def claim(self, names):
        for n in names:
            self.path(n)
        self.path("manifest.json")

    def wrote(self, *paths):
        self.outputs += [Path(p).name if Path(p).parent == self.out else str(p) for p in paths]

    def finish(self, status="ok", error=None):
        params = {k: (list(v) if isinstance(v, tuple) else v)
                  for k, v in sorted(vars(self.args).items()) if k != "func"}
        manifest = {
            "subcommand": self.args.command,
            "tool_version": __version__,
            "argv": self.argv,
            "inputs": self.inputs,
            "parameters": params,
            "outputs": self.outputs,
            "status": status,
            "error": error,
            "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        }
        path = self.out / "manifest.json"
        if path.exists() and not self.args.force and not self.outputs:
            return  # never clobber an earlier run's manifest on an early failure
        self.out.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(manifest, indent=2, default=str) + "\n", encoding="utf-8")


def _dump_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, allow_nan=True) + "\n", encoding="utf-8")


def _solver_cfg(args) -> SolverConfig:
    return SolverConfig(tolerance=args.tolerance, max_iterations=args.max_iter,
                        continuation_step=math.radians(args.step_deg),
                        max_step_displacement_mm=args.max_jump_mm)


def _load_def(run, args):
    path = _resolve(args.definition, RIG_DATA)
    run.inputs["def"] = str(path)
    linkage = load_linkage(path)
    for name, length in getattr(args, "set", None) or []:
        if name not in linkage.named_lengths:
            raise UsageError(f"argument --set: no bar named {name!r}; "
                             f"choose from {sorted(linkage.named_lengths)}")
        linkage = linkage.with_length(name, length)
    return linkage


def _budget_requirement(args) -> RegulatorRequirement:
    force = args.force_gf
    if force is None:
        b = ForceBudget(REFERENCE_MASS_KG, REFERENCE_G, REFERENCE_THRUST_MARGIN, REFERENCE_FOS)
        force = budget_report(b, LeverStage(), args.displacement_mm)["regulator_load_gf"]
    return RegulatorRequirement(args.displacement_mm, force)


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(run: Run, args):
    linkage = _load_def(run, args)
    cfg = _solver_cfg(args)
    order = list(linkage.points)
    if args.sweep:
        run.claim(["trajectory.csv"])
        traj = sweep_trajectory(linkage, cfg)
        poses = traj.poses
        name = "trajectory.csv"
    else:
        run.claim(["pose.csv"])
        poses = (solve_pose(linkage, math.radians(args.angle_deg), None, cfg),)
        name = "pose.csv"
    run.out.mkdir(parents=True, exist_ok=True)
    path = run.out / name
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["crank_angle_rad", "residual"] + [f"{p}_{c}" for p in order for c in "xy"])
        for pose in poses:
            row = [repr(pose.crank_angle), repr(pose.residual)]
            for p in order:
                row += [repr(v) for v in pose.coordinates[p]]
            w.writerow(row)
    run.wrote(path)
    print(f"solved {len(poses)} pose(s) -> {path}")


def cmd_sweep(run: Run, args):
    linkage = _load_def(run, args)
    marker = args.marker or linkage.points[-1]
    spec = LengthSweepSpec(linkage, args.bar, args.lengths, marker,
                           args.shoulder_pivot, args.shoulder_ray)
    names = [f"gait_L{L!r}.csv" for L in spec.lengths] + ["metrics.csv"]
    run.claim(names)
    results = run_length_sweep(spec, _solver_cfg(args), threads=args.threads)
    run.wrote(*write_sweep(results, run.out, linkage.points))
    for traj, m in results:
        print(f"{args.bar} = {traj.length_mm!r} mm: area {m.envelope_area_mm2:.3f} mm^2, "
              f"amplitude {m.sweep_amplitude_deg:.3f} deg, extent {m.marker_extent_mm:.3f} mm")


def _budget_text(rep) -> str:
    rows = [("single-wing lift", rep["single_wing_lift_N"], "N"),
            ("lever ratio", rep["lever_ratio"], "-"),
            ("regulator load", rep["regulator_load_N"], "N"),
            ("regulator load", rep["regulator_load_gf"], "gf"),
            ("displacement", rep["requirement"]["displacement_mm"], "mm")]
    return "\n".join(f"{n:<18}{v:>12.4f} {u}" for n, v, u in rows) + "\n"


def cmd_force_budget(run: Run, args):
    run.claim(["budget.json", "budget.txt"])
    b = ForceBudget(args.mass_kg, args.g, args.thrust_margin, args.fos)
    rep = budget_report(b, LeverStage(args.arm_out_mm, args.arm_in_mm), args.displacement_mm)
    run.out.mkdir(parents=True, exist_ok=True)
    _dump_json(run.out / "budget.json", rep)
    text = _budget_text(rep)
    (run.out / "budget.txt").write_text(text, encoding="utf-8")
    run.wrote(run.out / "budget.json", run.out / "budget.txt")
    sys.stdout.write(text)


def _actuator(run, args, key="actuator"):
    path = _resolve(getattr(args, key), ACT_DATA)
    run.inputs[key] = str(path)
    return load_actuator_spec(path)


def cmd_mech(run: Run, args):
    act = _actuator(run, args)
    stroke = args.stroke_mm or act.stroke_mm
    if args.type == "triangle":
        curve = ma_curve(TriangleMechanism(args.d_initial_mm, args.base_mm, args.hyp_mm, stroke),
                         args.samples)
    elif args.type == "lever":
        curve = lever_curve(args.arm_in_mm, args.arm_out_mm, stroke, args.samples)
    else:
        curve = direct_curve(stroke, args.samples)
    run.claim(["curve.csv", "feasibility.json"])
    rep = feasibility(curve, act, _budget_requirement(args))
    run.out.mkdir(parents=True, exist_ok=True)
    with open(run.out / "curve.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d_input_mm", "d_output_mm", "ma_effective", "ma_instantaneous"])
        for row in curve.rows():
            w.writerow([repr(v) for v in row])
    doc = {"mechanism": curve.kind, "params": curve.params, "actuator": act.to_dict(),
           "max_ma_effective": float(np.max(curve.ma_effective)), **rep.to_dict()}
    _dump_json(run.out / "feasibility.json", doc)
    run.wrote(run.out / "curve.csv", run.out / "feasibility.json")
    print(f"{curve.kind}: output stroke {rep.output_stroke_mm:.5f} mm "
          f"({doc['displacement']}), deliverable {rep.deliverable_force_gf:.3f} gf "
          f"vs {rep.required_force_gf:.2f} gf ({doc['force']})")


def cmd_optimize(run: Run, args):
    act = _actuator(run, args)
    req = _budget_requirement(args)
    bounds = TriangleBounds(args.d_initial_range, args.base_range, args.hyp_range)
    run.claim(["design.json"])
    mech = optimize_triangle(req, act, bounds, args.grid, args.refine)
    rep = feasibility(ma_curve(mech, args.samples), act, req)
    run.out.mkdir(parents=True, exist_ok=True)
    _dump_json(run.out / "design.json", {"design": vars(mech), **rep.to_dict()})
    run.wrote(run.out / "design.json")
    print(f"triangle d_initial {mech.d_initial_mm:.6g} base {mech.base_mm:.6g} "
          f"hyp {mech.hyp_mm:.6g} mm")


def _load_profile(run, args):
    if args.load_profile:
        path = Path(args.load_profile)
        if not path.is_file():
            raise UsageError(f"argument --load-profile: file not found: {path}")
        run.inputs["load_profile"] = str(path.resolve())
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != 2 or np.any(np.diff(data[:, 0]) <= 0):
            raise UsageError("argument --load-profile: need increasing position_um,load_gf rows")
        xs, ys = data[:, 0].copy(), data[:, 1].copy()
        return lambda pos: float(np.interp(pos, xs, ys))
    load = args.load_gf
    return lambda _pos: load


def cmd_actuate(run: Run, args):
    spec = _actuator(run, args, "spec")
    stroke_um = spec.stroke_mm * 1000
    for v in args.target_um:
        if not 0 <= v <= stroke_um:
            raise UsageError(f"argument --target-um: {v} outside [0, {stroke_um}]")
    if not 0 <= args.start_um <= stroke_um:
        raise UsageError(f"argument --start-um: {args.start_um} outside [0, {stroke_um}]")
    lo, hi = spec.step_size_um_range
    if args.step_um is not None and not lo <= args.step_um <= hi:
        raise UsageError(f"argument --step-um: {args.step_um} outside [{lo}, {hi}]")
    run.claim([args.trace, "result.json"])
    profile = _load_profile(run, args)
    act = SlipStickActuator(spec, args.start_um, args.step_um)
    rows, legs, failure = [], [], None
    offset = 0
    for k, target in enumerate(args.target_um):
        try:
            res = act.seek(target, profile, args.max_pulses, args.burst_pulses)
            trace = res.trace
        except TargetUnreachable as exc:
            trace, failure = exc.trace, exc
        rows += [(k, offset + i, pos) for i, pos in (trace if not rows else trace[1:])]
        offset += trace[-1][0]
        if failure:
            legs.append({"target_um": target, "reached": False,
                         "stall_position_um": failure.stall_position_um})
            break
        legs.append({"target_um": target, "reached": res.reached, "pulses": res.pulses,
                     "end_position_um": res.end_position_um})
    run.out.mkdir(parents=True, exist_ok=True)
    with open(run.out / args.trace, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["leg", "pulse_index", "position_um"])
        for leg, i, pos in rows:
            w.writerow([leg, i, repr(pos)])
    _dump_json(run.out / "result.json", {"spec": spec.to_dict(), "legs": legs,
                                         "final_position_um": act.position_um,
                                         "total_pulses": offset})
    run.wrote(run.out / args.trace, run.out / "result.json")
    if failure:
        raise failure
    print(f"final position {act.position_um:.4f} um after {offset} pulses")


def cmd_analyze(run: Run, args):
    from .flapdata.summary import TrialInput, load_manifest, summarize, write_summary
    if args.synthetic:
        from .flapdata.synth import generate_matrix
        items = [TrialInput(L, f, k, F, A, Q) for L, f, k, F, A, Q in generate_matrix(seed=args.seed)]
        run.inputs["manifest"] = f"synthetic(seed={args.seed})"
    else:
        if not args.manifest:
            raise UsageError("analyze needs --manifest PATH or --synthetic")
        path = Path(args.manifest)
        if not path.is_file():
            raise UsageError(f"argument --manifest: file not found: {path}")
        run.inputs["manifest"] = str(path.resolve())
        items = load_manifest(path)
    run.claim(["summary.json", "cycles.csv"])
    summaries = summarize(items, args.axis, threads=args.threads)
    run.wrote(*write_summary(summaries, run.out))
    for s in summaries:
        ratio = "-" if s.peak_ratio is None else f"{s.peak_ratio:.3f}"
        timing = "-" if s.peak_timing_mean is None else f"{s.peak_timing_mean:.3f}"
        print(f"{s.frequency_hz:g} Hz  R1 {s.r1_length_mm:g} mm  ratio {ratio}  "
              f"timing {timing}  failed {s.n_failed}/{len(s.trials)}")


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory (default ./out)")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("--threads", type=int_at_least(0), default=1,
                        help="worker threads for sweeps (0 = auto)")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--def", dest="definition", default="aerobat_delta",
                        help="linkage JSON path or packaged name (default aerobat_delta)")
    solver.add_argument("--tolerance", type=positive, default=1e-9)
    solver.add_argument("--max-iter", type=int_at_least(1), default=50)
    solver.add_argument("--step-deg", type=_step_deg, default=1.0,
                        help="continuation step in degrees, (0, 22.5]")
    solver.add_argument("--max-jump-mm", type=positive, default=5.0,
                        help="per-step displacement cap flagging a branch hop")

    req = argparse.ArgumentParser(add_help=False)
    req.add_argument("--displacement-mm", type=positive, default=REFERENCE_DISPLACEMENT_MM)
    req.add_argument("--force-gf", type=positive, default=None,
                     help="required actuation force (default: reference budget, 235.45 gf)")
    req.add_argument("--actuator", default="tula50", help="actuator spec JSON or packaged name")
    req.add_argument("--samples", type=int_at_least(2), default=600)

    ap = argparse.ArgumentParser(prog="flapreg", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"flapreg {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("solve", parents=[common, solver], help="solve a pose or one revolution")
    p.add_argument("--angle-deg", type=any_float, default=0.0)
    p.add_argument("--sweep", action="store_true", help="solve a full crank revolution")
    p.add_argument("--set", type=bar_setting, action="append", metavar="BAR=MM",
                   help="override a named bar length")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep-length", parents=[common, solver],
                       help="gait trajectories over a range of one bar's length")
    p.add_argument("--bar", default="R1")
    p.add_argument("--lengths", type=length_list, required=True,
                   help="start:end:count (inclusive) or a comma list, mm")
    p.add_argument("--marker", default=None, help="envelope point (default: last point)")
    p.add_argument("--shoulder-pivot", default="J5")
    p.add_argument("--shoulder-ray", default="J9")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("force-budget", parents=[common], help="regulator force requirement")
    p.add_argument("--mass-kg", type=positive, default=REFERENCE_MASS_KG)
    p.add_argument("--g", type=positive, default=REFERENCE_G)
    p.add_argument("--thrust-margin", type=at_least_one, default=REFERENCE_THRUST_MARGIN)
    p.add_argument("--fos", type=at_least_one, default=REFERENCE_FOS)
    p.add_argument("--arm-out-mm", type=positive, default=REFERENCE_ARM_OUT_MM)
    p.add_argument("--arm-in-mm", type=positive, default=REFERENCE_ARM_IN_MM)
    p.add_argument("--displacement-mm", type=positive, default=REFERENCE_DISPLACEMENT_MM)
    p.set_defaults(func=cmd_force_budget)

    p = sub.add_parser("mech", parents=[common, req], help="mechanism curve and feasibility")
    p.add_argument("--type", choices=("triangle", "lever", "direct"), default="triangle")
    p.add_argument("--d-initial-mm", type=any_float, default=8.0)
    p.add_argument("--base-mm", type=any_float, default=5.0)
    p.add_argument("--hyp-mm", type=positive, default=20.0)
    p.add_argument("--arm-in-mm", type=positive, default=4.0)
    p.add_argument("--arm-out-mm", type=positive, default=1.0)
    p.add_argument("--stroke-mm", type=positive, default=None,
                   help="input stroke (default: actuator stroke)")
    p.set_defaults(func=cmd_mech)

    p = sub.add_parser("optimize", parents=[common, req], help="search triangle geometry")
    p.add_argument("--d-initial-range", type=interval, default=(0.0, 20.0), metavar="LO:HI")
    p.add_argument("--base-range", type=interval, default=(0.0, 20.0), metavar="LO:HI")
    p.add_argument("--hyp-range", type=interval, default=(1.0, 40.0), metavar="LO:HI")
    p.add_argument("--grid", type=int_at_least(2), default=50)
    p.add_argument("--refine", type=int_at_least(1), default=10)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("actuate", parents=[common], help="closed-loop actuator positioning")
    p.add_argument("--spec", default="tula50", help="actuator spec JSON or packaged name")
    p.add_argument("--target-um", type=_targets, required=True,
                   help="target position, or a comma sequence of targets, um")
    p.add_argument("--start-um", type=non_negative, default=0.0)
    p.add_argument("--step-um", type=positive, default=None)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--load-gf", type=non_negative, default=0.0)
    g.add_argument("--load-profile", default=None, help="CSV position_um,load_gf")
    p.add_argument("--trace", default="trace.csv", help="trace file name inside --out")
    p.add_argument("--burst-pulses", type=int_at_least(1), default=100)
    p.add_argument("--max-pulses", type=int_at_least(0), default=10_000_000)
    p.set_defaults(func=cmd_actuate)

    p = sub.add_parser("analyze", parents=[common], help="reduce flap-test logs")
    p.add_argument("--manifest", default=None, help="condition manifest JSON")
    p.add_argument("--synthetic", action="store_true",
                   help="analyze the built-in synthetic 3x3x3 matrix instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--axis", choices=("fx", "fy", "fz"), default="fz")
    p.set_defaults(func=cmd_analyze)
    return ap


def _step_deg(text):
    return _number(text, lambda v: 0 < v <= 22.5, "in (0, 22.5]")


def _targets(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("need at least one finite target")
    return vals


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    run = Run(args, argv)
    try:
        args.func(run, args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except FlapregError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        run.finish("error", f"{exc.code}: {exc}")
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: InvalidInput: {exc}", file=sys.stderr)
        return 1
    run.finish()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
