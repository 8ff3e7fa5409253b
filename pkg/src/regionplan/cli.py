"""Command-line interface: solve, approx, simulate, info.

Exit codes: 0 success, 1 solver failure (iteration cap, numerical trouble),
2 input error (unreadable or inconsistent files and flags).
"""

import argparse
import os
import sys
import time

import numpy as np

from . import office
from .exact import IterationCapError, solve_pomdp
from .lp import LpNumericalError
from .model import ModelValidationError, validate
from .modelio import (ParseError, SolutionDocument, parse_model,
                      read_solution, write_solution)
from .pruning import StateValueVector
from .regions import (RegionSystem, RegionSystemError, RegionalValueSets,
                      Ropomdp, radius_k_regions, solve_ropomdp)
from .sim import TrialConfig, campaign_csv, run_campaign


class _InputError(Exception):
    pass


def _default_jobs():
    try:
        return max(1, int(os.environ.get("REGIONPLAN_JOBS", "1")))
    except ValueError:
        return 1


def _add_model_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="POMDP model file")
    src.add_argument("--builtin", choices=sorted(office.builtin_layouts()),
                     help="built-in office maze")
    src.add_argument("--map", dest="map_file",
                     help="ASCII maze map file (office models)")
    p.add_argument("--flavor", choices=("standard", "noisy"),
                   default="standard", help="office model flavor")
    p.add_argument("--gamma", type=float, default=0.99,
                   help="discount for generated office models")


def _load_model(args):
    if args.model:
        try:
            with open(args.model, encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise _InputError(f"cannot read model: {e}")
        model = parse_model(text)
        layout = None
    else:
        if args.builtin:
            layout = office.builtin_layouts()[args.builtin]
        else:
            try:
                with open(args.map_file, encoding="utf-8") as f:
                    layout = office.parse_map(f.read())
            except OSError as e:
                raise _InputError(f"cannot read map: {e}")
        model = office.build_office_pomdp(layout, args.flavor, args.gamma)
        validate(model)
    return model, layout


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _report_lines(title, sizes, seconds):
    lines = [title, "iteration  vectors  seconds"]
    for i, (n, sec) in enumerate(zip(sizes, seconds), start=1):
        lines.append(f"{i:9d}  {n:7d}  {sec:7.2f}")
    lines.append(f"total seconds: {sum(seconds):.2f}")
    return lines


def cmd_solve(args):
    model, _ = _load_model(args)
    t0 = time.perf_counter()
    report = solve_pomdp(model, args.eps, max_iterations=args.max_iterations)
    elapsed = time.perf_counter() - t0
    doc = SolutionDocument(
        discount=model.discount, num_states=model.num_states,
        horizon=report.iterations, residual=report.residual,
        regions=[list(range(model.num_states))],
        vectors=[[(v.action, v.values) for v in report.vectors]])
    _write(args.out, write_solution(doc))
    for ln in _report_lines(
            f"solved exactly in {report.iterations} iterations, "
            f"residual {report.residual:.3e}, "
            f"loss bound {report.loss_bound:.3e}",
            report.set_sizes, report.iteration_seconds):
        print(ln)
    print(f"wall seconds: {elapsed:.2f}")
    print(f"solution written to {args.out}")
    return 0


def _solution_path(base, k):
    root, ext = os.path.splitext(base)
    return f"{root}.k{k}{ext or '.solution'}"


def cmd_approx(args):
    model, _ = _load_model(args)
    ks = list(range(args.radius + 1)) if args.sweep else [args.radius]
    summary = ["k  regions  vectors  seconds"]
    for k in ks:
        system = radius_k_regions(model, k)
        rop = Ropomdp(model, system)
        t0 = time.perf_counter()
        report = solve_ropomdp(rop, args.eps,
                               max_iterations=args.max_iterations,
                               jobs=args.jobs)
        elapsed = time.perf_counter() - t0
        doc = SolutionDocument(
            discount=model.discount, num_states=model.num_states,
            horizon=report.iterations, residual=report.eps,
            regions=[list(r) for r in system],
            vectors=[[(v.action, v.values) for v in s]
                     for s in report.sets.sets],
            shift=report.reward_shift)
        path = _solution_path(args.out, k) if args.sweep else args.out
        _write(path, write_solution(doc))
        nvec = sum(len(s) for s in report.sets.sets)
        summary.append(f"{k}  {len(system):7d}  {nvec:7d}  {elapsed:7.2f}")
        print(f"k={k}: {len(system)} regions, {report.iterations} iterations,"
              f" {nvec} vectors, {elapsed:.2f} s -> {path}")
    if args.sweep:
        print("\n".join(summary))
    return 0


def _goal_config(args, model, layout):
    if args.declare_action is not None:
        declare = args.declare_action
    elif model.action_names and "declare-goal" in model.action_names:
        declare = model.action_names.index("declare-goal")
    else:
        declare = model.num_actions - 1
    if not 0 <= declare < model.num_actions:
        raise _InputError(f"declare action {declare} out of range")
    if args.goal_states:
        goals = frozenset(int(t) for t in args.goal_states.split(","))
    elif layout is not None:
        goals = frozenset({office.goal_state_index(layout)})
    else:
        goals = frozenset(np.flatnonzero(model.reward[:, declare] > 0.0)
                          .tolist())
    if not goals:
        raise _InputError("no goal states given and none have declare reward")
    if any(not 0 <= g < model.num_states for g in goals):
        raise _InputError("goal state out of range")
    return goals, declare


def cmd_simulate(args):
    if args.trials < 1:
        raise _InputError("--trials must be >= 1")
    model, layout = _load_model(args)
    try:
        with open(args.solution, encoding="utf-8") as f:
            doc = read_solution(f.read())
    except OSError as e:
        raise _InputError(f"cannot read solution: {e}")
    if doc.num_states != model.num_states:
        raise _InputError(
            f"solution has {doc.num_states} states, model has "
            f"{model.num_states}")
    system = RegionSystem(doc.regions, model.num_states)
    rop = Ropomdp(model, system)
    sets = RegionalValueSets(system, [
        [StateValueVector(vals, action) for action, vals in vecs]
        for vecs in doc.vectors])
    goals, declare = _goal_config(args, model, layout)
    cfg = TrialConfig(goal_states=goals, declare_action=declare,
                      max_steps=args.max_steps, seed=args.seed)
    stats, rm, rp = run_campaign(model, rop, sets, cfg, args.trials,
                                 jobs=args.jobs)
    _write(args.csv, campaign_csv(stats, rm, rp))
    print(f"trials:              {stats.trials}")
    print(f"mean reward in M:    {stats.mean_m:.6f} "
          f"(stderr {stats.stderr_m:.6f})")
    print(f"mean reward in M':   {stats.mean_m_prime:.6f} "
          f"(stderr {stats.stderr_m_prime:.6f})")
    print(f"difference:          {stats.difference:.6f}")
    print(f"per-trial CSV written to {args.csv}")
    return 0


def cmd_info(args):
    model, _ = _load_model(args)
    print(f"{model.num_states} states, {model.num_actions} actions, "
          f"{model.num_observations} observations, "
          f"discount {model.discount}")
    if args.radius is not None:
        system = radius_k_regions(model, args.radius)
        rop = Ropomdp(model, system)
        sizes = [len(r) for r in system]
        print(f"radius-{args.radius} region system: {len(system)} regions, "
              f"sizes min/max {min(sizes)}/{max(sizes)}")
        print("feasible observations per (action, region):")
        for a in range(model.num_actions):
            counts = [len(rop.feasible_observations(a, r)) for r in system]
            print(f"  action {model.action_name(a)}: "
                  f"min {min(counts)}, max {max(counts)}, "
                  f"total {sum(counts)}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="regionplan",
        description="POMDP planning via incremental pruning and "
                    "region-observable approximation")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="exact value iteration")
    _add_model_args(ps)
    ps.add_argument("--eps", type=float, default=0.001)
    ps.add_argument("--max-iterations", type=int, default=10000)
    ps.add_argument("--out", required=True, help="solution file to write")
    ps.set_defaults(func=cmd_solve)

    pa = sub.add_parser("approx", help="region-observable approximation")
    _add_model_args(pa)
    pa.add_argument("--radius", type=int, default=0, help="region radius k")
    pa.add_argument("--sweep", action="store_true",
                    help="solve every radius 0..k")
    pa.add_argument("--eps", type=float, default=0.001)
    pa.add_argument("--max-iterations", type=int, default=10000)
    pa.add_argument("--jobs", type=int, default=_default_jobs())
    pa.add_argument("--out", required=True, help="solution file to write")
    pa.set_defaults(func=cmd_approx)

    pm = sub.add_parser("simulate", help="paired policy evaluation")
    _add_model_args(pm)
    pm.add_argument("--solution", required=True)
    pm.add_argument("--trials", type=int, required=True)
    pm.add_argument("--seed", type=int, default=0)
    pm.add_argument("--max-steps", type=int, default=100)
    pm.add_argument("--goal-states",
                    help="comma-separated goal state indices")
    pm.add_argument("--declare-action", type=int)
    pm.add_argument("--jobs", type=int, default=_default_jobs())
    pm.add_argument("--csv", required=True, help="per-trial CSV to write")
    pm.set_defaults(func=cmd_simulate)

    pi = sub.add_parser("info", help="model and region-system summary")
    _add_model_args(pi)
    pi.add_argument("--radius", type=int)
    pi.set_defaults(func=cmd_info)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ModelValidationError, RegionSystemError,
            office.LayoutError, _InputError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (IterationCapError, LpNumericalError) as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
