"""Command-line front end.

Subcommands:
    simulate            run a scenario, write trace.csv / summary.json /
                        effort.csv into the output directory
    check-gains         print the gain-condition spectral norm and pass/fail
    check-monotonicity  probe the plant response sign at sampled points
    sweep               scale nominal load injections on a grid scenario and
                        record solvability plus the monotonicity margin
    feasibility         report whether maximum control effort satisfies the
                        output floors

Exit codes: 0 success/converged, 1 stalled or budget exceeded (or a failed
check), 2 validation error, 3 solver failure.
"""
import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ScenarioError, SolverError
from .graph import adjacency_matrix, is_connected
from .plant import max_effort_feasibility, monotonicity_probe
from .power import GridPlant, monotonicity_margin, solve_load_voltages, loadability_sweep
from .protocol import auto_gains, gain_condition
from .scenario_io import load_scenario
from .sim import disrupted_setup, message_stats, run


def entry():
    sys.exit(main())


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ripplesim",
        description="Simulate saturation-driven distributed control on "
                    "networked plants.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write traces")
    p.add_argument("scenario", help="scenario file (or bundled name)")
    p.add_argument("--output-dir", default=".", type=Path)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--decimate", type=int, default=None,
                   help="keep every k-th trace record")
    p.add_argument("--override-gain-check", action="store_true",
                   help="run even if the gain condition fails")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check-gains", help="evaluate the gain condition")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_check_gains)

    p = sub.add_parser("check-monotonicity",
                       help="probe the plant response sign")
    p.add_argument("scenario")
    p.add_argument("--points", type=int, default=3,
                   help="number of sampled control points")
    p.add_argument("--disrupted", action="store_true",
                   help="probe the post-disruption plant")
    p.set_defaults(func=cmd_check_monotonicity)

    p = sub.add_parser("sweep", help="load scaling sweep (grid scenarios)")
    p.add_argument("scenario")
    p.add_argument("--scale-min", type=float, default=1.0)
    p.add_argument("--scale-max", type=float, default=10.0)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--output-dir", default=".", type=Path)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("feasibility",
                       help="maximum-effort feasibility of the scenario")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_feasibility)
    return parser


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.budget is not None:
        scenario.budget = args.budget
    if args.decimate is not None:
        scenario.trace_decimation = args.decimate
    if args.override_gain_check:
        scenario.override_gain_check = True
    outcome, records = run(scenario)

    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    plant, u0 = disrupted_setup(scenario)
    labels = [scenario.node_label(i) for i in range(plant.control_dim)]
    measured_labels = [scenario.node_label(i) for i in plant.measured_nodes]
    _write_trace(outdir / "trace.csv", records, labels, measured_labels)
    _write_effort(outdir / "effort.csv", records, labels, u0, plant.u_upper)
    _write_summary(outdir / "summary.json", scenario, plant, u0, outcome,
                   records, labels)
    print(f"{outcome.status} after {outcome.rounds} rounds "
          f"(feasible={outcome.feasible}, "
          f"max violation={outcome.max_violation:.3e})")
    if outcome.status == "converged":
        return 0
    if outcome.status == "solver_failure":
        return 3
    return 1


def _write_trace(path, records, labels, measured_labels):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = (["round"]
                  + [f"u_{lab}" for lab in labels]
                  + [f"y_{lab}" for lab in measured_labels]
                  + [f"f_{lab}" for lab in labels]
                  + [f"lambda_{lab}" for lab in labels]
                  + ["messages"])
        w.writerow(header)
        for r in records:
            w.writerow([r.round]
                       + [repr(float(x)) for x in r.u]
                       + [repr(float(x)) for x in r.y]
                       + [repr(float(x)) for x in r.deficit]
                       + [repr(float(x)) for x in r.beacons]
                       + [r.messages])


def _write_effort(path, records, labels, u0, u_upper):
    """Normalized control effort (u(t)-u(0))/(ceiling-u(0)) per flexible agent."""
    headroom = np.asarray(u_upper, float) - np.asarray(u0, float)
    cols = [i for i, h in enumerate(headroom) if h > 1e-12]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["round"] + [f"effort_{labels[i]}" for i in cols])
        for r in records:
            w.writerow([r.round] + [repr(float((r.u[i] - u0[i]) / headroom[i]))
                                    for i in cols])


def _write_summary(path, scenario, plant, u0, outcome, records, labels):
    adjacency = adjacency_matrix(scenario.comm_graph)
    gains = scenario.gains or auto_gains(plant, adjacency, u0)
    stats = message_stats(records, scenario.comm_graph, u0) if records else None
    terminal_u = records[-1].u if records else u0
    try:
        terminal_y = plant.solve(terminal_u).tolist()
    except SolverError:
        terminal_y = None
    doc = {
        "schema": "ripplesim-summary/1",
        "outcome": {
            "status": outcome.status,
            "rounds": outcome.rounds,
            "feasible": outcome.feasible,
            "equilibrium": outcome.equilibrium,
            "max_violation": outcome.max_violation,
            "max_beacon": outcome.max_beacon,
            "detail": outcome.detail,
        },
        "gain_condition": gain_condition(gains.eta2, gains.eta3, adjacency),
        "messages_total": stats.total if stats else 0,
        "first_assistance": {labels[k]: v for k, v in
                             (stats.first_assistance.items() if stats else [])},
        "terminal_u": {labels[i]: float(terminal_u[i])
                       for i in range(len(labels))},
        "terminal_y": terminal_y,
        "run": {
            "budget": scenario.budget,
            "eps_eq": scenario.eps_eq,
            "eps_feas": scenario.eps_feas,
            "trace_decimation": scenario.trace_decimation,
            "records": len(records),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_check_gains(args) -> int:
    scenario = load_scenario(args.scenario)
    plant, u0 = disrupted_setup(scenario)
    adjacency = adjacency_matrix(scenario.comm_graph)
    gains = scenario.gains
    if gains is None:
        gains = auto_gains(plant, adjacency, u0)
        print(f"auto gains: eta1={np.array2string(gains.eta1, precision=4)} "
              f"eta2={np.array2string(gains.eta2, precision=4)} "
              f"eta3={np.array2string(gains.eta3, precision=4)}")
    norm = gain_condition(gains.eta2, gains.eta3, adjacency)
    verdict = "pass" if norm < 1.0 else "fail"
    print(f"gain-condition spectral norm: {norm:.10g} -> {verdict}")
    if not is_connected(scenario.comm_graph):
        print("communication graph is disconnected", file=sys.stderr)
        return 2
    return 0 if norm < 1.0 else 1


def cmd_check_monotonicity(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.disrupted:
        plant, u0 = disrupted_setup(scenario)
    else:
        plant, u0 = scenario.plant, np.asarray(scenario.u0, float)
    rng = np.random.default_rng(scenario.seed)
    points = [u0]
    span = plant.u_upper - plant.u_lower
    for _ in range(max(0, args.points - 1)):
        frac = rng.uniform(0.1, 0.9, size=plant.control_dim)
        points.append(plant.u_lower + frac * span)
    all_ok = True
    failures = 0
    for i, point in enumerate(points):
        try:
            probe = monotonicity_probe(plant, point)
        except SolverError as exc:
            print(f"point {i}: probe failed ({exc})")
            failures += 1
            all_ok = False
            continue
        line = f"point {i}: monotone={probe.monotone} " \
               f"min sensitivity={probe.jacobian.min():.3e}"
        if isinstance(plant, GridPlant):
            u = np.asarray(point, float)
            sol = solve_load_voltages(u[list(plant.grid.loads)],
                                      u[list(plant.grid.generators)],
                                      plant.grid)
            line += f" margin={monotonicity_margin(sol, plant.grid):.6f}"
        print(line)
        all_ok = all_ok and probe.monotone
    if failures:
        return 3
    print("monotonicity check:", "pass" if all_ok else "fail")
    return 0 if all_ok else 1


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    plant = scenario.plant
    if not isinstance(plant, GridPlant):
        raise ScenarioError("sweep requires a power-plant scenario")
    if args.steps < 1:
        raise ScenarioError("steps must be >= 1")
    u0 = np.asarray(scenario.u0, float)
    q_nominal = u0[list(plant.grid.loads)]
    v_gen = u0[list(plant.grid.generators)]
    scales = np.linspace(args.scale_min, args.scale_max, args.steps)
    points = loadability_sweep(plant.grid, q_nominal, v_gen, scales)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "sweep.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scale", "solved", "lambda_min"])
        for pt in points:
            w.writerow([repr(float(pt.scale)), int(pt.solved),
                        "" if pt.margin is None else repr(float(pt.margin))])
    solved = sum(1 for pt in points if pt.solved)
    print(f"sweep: {solved}/{len(points)} scales solved -> {path}")
    return 0


def cmd_feasibility(args) -> int:
    scenario = load_scenario(args.scenario)
    if scenario.disruptions:
        base_ok = max_effort_feasibility(scenario.plant, scenario.eps_feas)
        print(f"base plant max-effort feasible: {base_ok}")
    plant, _ = disrupted_setup(scenario)
    ok = max_effort_feasibility(plant, scenario.eps_feas)
    print(f"effective plant max-effort feasible: {ok}")
    return 0 if ok else 1


if __name__ == "__main__":
    entry()
