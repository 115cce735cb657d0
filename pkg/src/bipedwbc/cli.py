"""Command-line scenario runner and report generator.

    bipedwbc run <config> [--seed N] [--out DIR] [--sweep N] [--workers W]
    bipedwbc plot <out_dir> --axis x|y [--ball dM eM] [--out FILE]
    bipedwbc compare <config> [--out FILE]
    bipedwbc analyze-ball --dm D --em E [--h H] [--T T] [--tp T'] [--kappa K]

Exit codes: 0 success, 2 fall detected, 3 infeasible QP, 4 config error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .configio import ConfigError


def _cmd_run(args):
    from .scenario import EXIT_CONFIG, ScenarioConfig, run_scenario

    def one(seed, out_dir):
        cfg = ScenarioConfig.from_file(args.config, seed=seed, out_dir=out_dir)
        if cfg.mode == "uncertainty":
            return _run_uncertainty(cfg)
        if cfg.mode == "compare":
            from .scenario import compare_planners
            out = os.path.join(out_dir, "comparison.txt") if out_dir else None
            _, table = compare_planners(cfg, out_path=out)
            print(table)
            return 0
        res = run_scenario(cfg)
        print(res.summary_text)
        return res.status

    base_out = args.out
    if args.sweep <= 1:
        return one(args.seed, base_out)
    import multiprocessing as mp
    seeds = [(args.seed if args.seed is not None else 0) + i for i in range(args.sweep)]
    outs = [os.path.join(base_out or "out", f"seed{snum}") for snum in seeds]
    workers = min(args.workers, len(seeds))
    with mp.Pool(processes=workers) as pool:
        codes = pool.starmap(_sweep_entry, [(args.config, s, o) for s, o in zip(seeds, outs)])
    bad = [c for c in codes if c != 0]
    print(f"sweep: {len(codes) - len(bad)}/{len(codes)} runs succeeded")
    return max(codes) if bad else 0


def _sweep_entry(config, seed, out_dir):
    from .scenario import ScenarioConfig, run_scenario
    cfg = ScenarioConfig.from_file(config, seed=seed, out_dir=out_dir)
    return run_scenario(cfg).status


def _run_uncertainty(cfg):
    """Analysis mode: ball report, containment, and the phase-plane SVG with
    nominal 8-step trajectories from three initial states."""
    import numpy as np

    from .planner import closed_loop
    from .plots import phase_plane_svg
    from .uncertainty import UncertaintyBounds, analyze

    lip, plan = cfg.lip, cfg.plan
    K, Acl, mags = closed_loop(lip, plan)
    print(f"closed loop: K = [{K[0]:.4f}, {K[1]:.4f}], "
          f"spectral radius = {mags[0]:.4f}")
    reports = []
    for dm, em in ((0.03, 0.045), (0.007, 0.01)):
        rep = analyze(lip, plan, UncertaintyBounds(dm, em))
        reports.append(rep)
        print(f"bounds delta_M={dm} eta_M={em}: radius={rep.radius:.4f} "
              f"max|Kx|={rep.max_policy_output():.4f} "
              f"contained={rep.contained_in_wedge(plan.max_step)}")
    steps = []
    for x0 in (np.array([0.3, 0.0]), np.array([-0.2, 0.6]), np.array([0.0, -0.8])):
        x = x0.copy()
        traj = [x.copy()]
        for _ in range(8):
            x = Acl @ x
            traj.append(x.copy())
        steps.append(dict(traj=np.array(traj)))
    svg = phase_plane_svg(steps, wedge=(K[0], K[1], plan.max_step),
                          balls=[r.radius for r in reports],
                          title="Velocity-reversal closed loop and uncertainty balls")
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        path = os.path.join(cfg.out_dir, "phase_plane.svg")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(svg)
        print(f"wrote {path}")
    return 0


def _cmd_plot(args):
    from .plots import emit_phase_plot
    ball = tuple(args.ball) if args.ball else None
    svg = emit_phase_plot(args.log, axis=args.axis, ball_bounds=ball)
    out = args.out or os.path.join(args.log, f"phase_{args.axis}.svg")
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    print(f"wrote {out}")
    return 0


def _cmd_compare(args):
    from .scenario import ScenarioConfig, compare_planners
    cfg = ScenarioConfig.from_file(args.config)
    _, table = compare_planners(cfg, out_path=args.out)
    print(table)
    return 0


def _cmd_analyze_ball(args):
    from .planner import LipParams, PlannerParams
    from .uncertainty import UncertaintyBounds, analyze
    lip = LipParams(h=args.h, T=args.T)
    plan = PlannerParams(t_prime=(args.tp, args.tp), kappa=(args.kappa, args.kappa))
    rep = analyze(lip, plan, UncertaintyBounds(args.dm, args.em))
    print(f"a = {rep.a:.6f}")
    print(f"b = {rep.b:.6f}")
    print(f"c = {rep.c:.6f}  (D = {rep.D:.6f}, E = {rep.E:.6f}, F = {rep.F:.6f})")
    print(f"radius = {rep.radius:.6f}")
    print(f"max |K x| over ball = {rep.max_policy_output():.6f}")
    print(f"contained in |p| <= {plan.max_step}: {rep.contained_in_wedge(plan.max_step)}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="bipedwbc",
                                description="Passive-ankle biped locomotion "
                                            "scenarios and analysis")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario config")
    r.add_argument("config")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default=None)
    r.add_argument("--sweep", type=int, default=1,
                   help="run N seeds as independent workers")
    r.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    r.set_defaults(func=_cmd_run)

    pl = sub.add_parser("plot", help="phase-plane SVG from a scenario output dir")
    pl.add_argument("log")
    pl.add_argument("--axis", choices=("x", "y"), default="y")
    pl.add_argument("--ball", type=float, nargs=2, metavar=("DM", "EM"))
    pl.add_argument("--out", default=None)
    pl.set_defaults(func=_cmd_plot)

    c = sub.add_parser("compare", help="footstep-planner comparison table")
    c.add_argument("config")
    c.add_argument("--out", default=None)
    c.set_defaults(func=_cmd_compare)

    a = sub.add_parser("analyze-ball", help="uncertainty-ball report")
    a.add_argument("--dm", type=float, required=True, help="state estimation bound")
    a.add_argument("--em", type=float, required=True, help="landing error bound")
    a.add_argument("--h", type=float, default=0.8)
    a.add_argument("--T", type=float, default=0.33)
    a.add_argument("--tp", type=float, default=0.2)
    a.add_argument("--kappa", type=float, default=0.16)
    a.set_defaults(func=_cmd_analyze_ball)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        code = 4
    return code


if __name__ == "__main__":
    sys.exit(main())
