"""Command-line experiment driver.

    fuzzypi [--config PATH] [--out DIR] [--plot] surface | mse-sweep | robot | step | costmodel

Exit codes: 0 success, 2 configuration error, 3 numeric divergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import warnings
from pathlib import Path

from . import costmodel as cm
from . import report
from .config import ConfigError, ExperimentConfig, load_config
from .controller import MODES, FuzzyPIController
from .fixedpoint import ROUNDING_MODES
from .oracle import evaluate_surface, mse_sweep
from .plant import (
    FIXED,
    FLOAT,
    SimulationDiverged,
    settling_summary,
    simulate_closed_loop,
    trajectory_difference,
)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _controller_flags(p: argparse.ArgumentParser, multi_n: bool = False) -> None:
    g = p.add_argument_group("controller")
    g.add_argument("--kp", type=float)
    g.add_argument("--ki", type=float)
    g.add_argument("--ts", type=float, help="sample period in seconds")
    if multi_n:
        g.add_argument("--n-bits", type=int, nargs="+")
    else:
        g.add_argument("--n-bits", type=int)
    g.add_argument("--t-bits", type=int)
    g.add_argument("--mode", choices=MODES)
    g.add_argument("--vmin", type=float)
    g.add_argument("--vmax", type=float)
    g.add_argument("--rounding", choices=ROUNDING_MODES)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fuzzypi", description=__doc__.split("\n")[0])
    ap.add_argument("--config", type=Path, help="JSON experiment configuration")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    ap.add_argument("--plot", action="store_true", help="also render PNG figures (needs matplotlib)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("surface", help="fixed-point and reference surfaces over the input grid")
    p.add_argument("--n-bits", type=int)
    p.add_argument("--t-bits", type=int)
    p.add_argument("--grid-size", type=int)
    p.add_argument("--rounding", choices=ROUNDING_MODES)

    p = sub.add_parser("mse-sweep", help="MSE against the reference over N x T")
    p.add_argument("--n-bits", type=int, nargs="+")
    p.add_argument("--t-bits", type=int, nargs="+")
    p.add_argument("--grid-size", type=int)
    p.add_argument("--rounding", choices=ROUNDING_MODES)

    p = sub.add_parser("robot", help="closed-loop manipulator trajectory experiment")
    _controller_flags(p, multi_n=True)
    p.add_argument("--duration", type=float)
    p.add_argument("--log-every", type=int)
    p.add_argument("--no-reference", action="store_true", help="skip the float64 reference run")

    p = sub.add_parser("step", help="single controller channel, readable model, step log CSV")
    _controller_flags(p)
    p.add_argument("--input", type=Path, help="CSV with y,y_sp columns (default: a step)")
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--setpoint", type=float, default=0.01)

    p = sub.add_parser("costmodel", help="synthesis plane estimates and power ratio")
    csub = p.add_subparsers(dest="action", required=True)
    e = csub.add_parser("estimate")
    e.add_argument("--variant", choices=cm.VARIANTS, required=True)
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--t", type=int, required=True)
    e.add_argument("--rules", type=int, default=cm.DEFAULT_RULES)
    csub.add_parser("residuals", help="plane vs table residuals CSV")
    w = csub.add_parser("power", help="dynamic power ratio")
    w.add_argument("--n-ref", type=float, required=True)
    w.add_argument("--f-ref", type=float, required=True)
    w.add_argument("--n-work", type=float, required=True)
    w.add_argument("--f-work", type=float, required=True)
    return ap


def _apply_controller_flags(cfg: ExperimentConfig, args, multi_n: bool = False) -> None:
    over = {}
    for flag, key in (("kp", "kp"), ("ki", "ki"), ("ts", "t_s"), ("t_bits", "t_bits"),
                      ("mode", "mode"), ("vmin", "v_min"), ("vmax", "v_max"),
                      ("rounding", "rounding")):
        v = getattr(args, flag, None)
        if v is not None:
            over[key] = v
    n = getattr(args, "n_bits", None)
    if n is not None:
        if multi_n:
            cfg.robot.n_bits = list(n)
            over["n_bits"] = n[0]
        else:
            over["n_bits"] = n
    if over:
        try:
            cfg.controller = cfg.controller.replace(**over)
        except ValueError as exc:
            raise ConfigError(f"[controller] {exc}") from None


def _out_dir(args) -> Path:
    out = args.out
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc.strerror}") from None
    return out


def _maybe_plot(args, fn, *a) -> None:
    if not args.plot:
        return
    try:
        path = fn(*a)
        _log(f"figure: {path}")
    except RuntimeError as exc:
        _log(f"warning: {exc}")


def run_surface(cfg: ExperimentConfig, args) -> int:
    s = cfg.surface
    n = args.n_bits if args.n_bits is not None else s.n_bits
    t = args.t_bits if args.t_bits is not None else s.t_bits
    size = args.grid_size if args.grid_size is not None else s.grid_size
    rounding = args.rounding or cfg.controller.rounding
    try:
        surf = evaluate_surface(n, t, cfg.bank, cfg.rules, rounding, size)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = _out_dir(args)
    f1 = report.write_csv(out / f"surface_fixed_N{n}_T{t}.csv", "surface_fixed", report.surface_rows(surf))
    f2 = report.write_csv(out / "surface_reference.csv", "surface_reference", report.reference_rows(surf))
    r = surf.report()
    print(f"surface N={n} T={t}: {r.grid_points} points, mse={r.mse:.4g}, "
          f"max_abs_err={r.max_abs_err:.4g}, div_by_zero={surf.div_by_zero}")
    print(f"wrote {f1} and {f2}")
    _maybe_plot(args, report.plot_surface, surf, out / f"surface_N{n}_T{t}.png")
    return EXIT_OK


def run_mse_sweep(cfg: ExperimentConfig, args) -> int:
    s = cfg.sweep
    ns = args.n_bits or s.n_bits
    ts = args.t_bits or s.t_bits
    size = args.grid_size if args.grid_size is not None else s.grid_size
    rounding = args.rounding or cfg.controller.rounding
    t0 = time.perf_counter()
    try:
        reports = mse_sweep(ns, ts, cfg.bank, cfg.rules, rounding, size)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _log(f"sweep took {time.perf_counter() - t0:.2f} s")
    out = _out_dir(args)
    path = report.write_csv(out / "mse_sweep.csv", "mse_sweep",
                            ((r.n_bits, r.t_bits, r.mse, r.max_abs_err) for r in reports))
    for r in reports:
        print(f"N={r.n_bits:2d} T={r.t_bits:2d}  mse={r.mse:.3e}  max_abs_err={r.max_abs_err:.3e}")
    print(f"wrote {path}")
    _maybe_plot(args, report.plot_sweep, reports, out / "mse_sweep.png")
    return EXIT_OK


def run_robot(cfg: ExperimentConfig, args) -> int:
    rb = cfg.robot
    duration = args.duration if args.duration is not None else rb.duration
    log_every = args.log_every if args.log_every is not None else rb.log_every
    out = _out_dir(args)
    results = []
    summary_rows = []
    compare_rows = []
    ref = None
    sched = cfg.schedule
    if not args.no_reference and rb.reference:
        t0 = time.perf_counter()
        ref = simulate_closed_loop(cfg.controller, sched, cfg.plant, duration, controller=FLOAT,
                                   bank=cfg.bank, rules=cfg.rules, log_every=log_every)
        _log(f"reference run took {time.perf_counter() - t0:.1f} s")
        report.write_csv(out / "robot_reference.csv", "robot_run", report.run_rows(ref))
        results.append(ref)
        for s in settling_summary(ref, sched, rb.settle_fraction, rb.settle_window):
            summary_rows.append(("ref", FLOAT, s.segment, s.joint + 1, s.setpoint_deg,
                                 s.final_error_deg, s.tolerance_deg, s.settled))
    for n in rb.n_bits:
        try:
            c = cfg.controller.replace(n_bits=n)
        except ValueError as exc:
            raise ConfigError(f"[controller] {exc}") from None
        t0 = time.perf_counter()
        res = simulate_closed_loop(c, sched, cfg.plant, duration, controller=FIXED,
                                   bank=cfg.bank, rules=cfg.rules, log_every=log_every)
        _log(f"N={n} run took {time.perf_counter() - t0:.1f} s")
        report.write_csv(out / f"robot_N{n}.csv", "robot_run", report.run_rows(res))
        results.append(res)
        summ = settling_summary(res, sched, rb.settle_fraction, rb.settle_window)
        for s in summ:
            summary_rows.append((n, FIXED, s.segment, s.joint + 1, s.setpoint_deg,
                                 s.final_error_deg, s.tolerance_deg, s.settled))
        line = f"N={n}: {sum(s.settled for s in summ)}/{len(summ)} segment-joints settled"
        if ref is not None:
            d = trajectory_difference(res, ref, sched, rb.transient)
            compare_rows.append((n, d, rb.transient))
            line += f", max |fixed - reference| after transients = {d:.3f} deg"
        print(line)
    report.write_csv(out / "robot_summary.csv", "robot_summary", summary_rows)
    if compare_rows:
        report.write_csv(out / "robot_compare.csv", "robot_compare", compare_rows)
    print(f"wrote run logs and summaries to {out}")
    for j in range(3):
        _maybe_plot(args, report.plot_trajectories, results, out / f"robot_theta{j + 1}.png", j)
    return EXIT_OK


def _read_inputs(path: Path):
    try:
        with path.open() as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        rows = list(csv.DictReader(lines))
        return [float(r["y"]) for r in rows], [float(r["y_sp"]) for r in rows]
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: expected numeric y,y_sp columns ({exc!r})") from None


def run_step(cfg: ExperimentConfig, args) -> int:
    if args.input is not None:
        ys, sps = _read_inputs(args.input)
    else:
        if args.samples < 1:
            raise ConfigError("--samples must be positive")
        ys, sps = [0.0] * args.samples, [args.setpoint] * args.samples
    try:
        ctl = FuzzyPIController(cfg.controller, cfg.bank, cfg.rules)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    recs = ctl.run(ys, sps)
    out = _out_dir(args)
    path = report.write_csv(out / "step_log.csv", "step_log",
                            ((r.n, r.y, r.y_sp, r.e, r.e_d, r.x0, r.x1, r.v_d, r.r) for r in recs))
    print(f"{len(recs)} steps, final r={recs[-1].r if recs else 0.0!r}, "
          f"div_by_zero={ctl.state.status.div_by_zero}, "
          f"input_saturations={ctl.state.input_saturations}")
    print(f"wrote {path}")
    return EXIT_OK


def run_costmodel(cfg: ExperimentConfig, args) -> int:
    if args.action == "estimate":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", cm.ExtrapolationWarning)
            est = cm.estimate_all(args.variant, args.n, args.t, args.rules)
        for msg in dict.fromkeys(str(w.message) for w in caught):
            _log(f"warning: {msg}")
        print(json.dumps({"nlut": est["nlut"], "rs_msps": est["rs_msps"], "mflips": est["mflips"]},
                         sort_keys=True))
        return EXIT_OK
    if args.action == "power":
        try:
            s = cm.dynamic_power_saving(args.n_ref, args.f_ref, args.n_work, args.f_work)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        print(json.dumps({"saving": s}))
        return EXIT_OK
    out = _out_dir(args)
    rows = []
    for v in cm.VARIANTS:
        for q in (cm.NLUT, cm.RS):
            for n, t, obs, est, rel in cm.residuals(v, q):
                rows.append((v, q, n, t, obs, est, rel))
    path = report.write_csv(out / "costmodel_residuals.csv", "costmodel_residuals", rows)
    worst = max(rows, key=lambda r: abs(r[-1]))
    print(f"largest relative residual {worst[-1]:+.4f} ({worst[0]}/{worst[1]} at N={worst[2]}, T={worst[3]})")
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "surface": run_surface,
    "mse-sweep": run_mse_sweep,
    "robot": run_robot,
    "step": run_step,
    "costmodel": run_costmodel,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config is not None else ExperimentConfig()
        if args.command in ("robot", "step"):
            _apply_controller_flags(cfg, args, multi_n=args.command == "robot")
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        _log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except SimulationDiverged as exc:
        _log(f"numeric divergence: {exc}")
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
