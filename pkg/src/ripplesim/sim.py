"""Scenario execution: disrupt a plant, run control rounds, record traces.

A run applies the scenario's disruption events to the plant, then loops
plant solve -> protocol round until the state stops moving or the round
budget runs out. Each retained round yields a TraceRecord; the terminal
state is classified into an Outcome. Runs are single-threaded and
deterministic: the same scenario yields bit-identical traces.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, ScenarioError, SolverError
from .graph import Graph, adjacency_matrix, is_connected
from .plant import (EPS_FEAS_DEFAULT, LinearPlant, PlantModel,
                    feasibility_check)
from .power import GridModel, GridPlant
from .protocol import (ProtocolGains, ProtocolState, auto_gains,
                       gain_condition, is_equilibrium, protocol_round,
                       violation)
from .water import WaterModel, WaterPlant


@dataclass(frozen=True)
class DisruptionEvent:
    """A change to the plant at time zero.

    Kinds:
        remove_edge:      params {"edge": (m, n)}; drops a line or pipe/pump.
        source_outage:    params {"node": k}; water only - the node stops
                          injecting and its control is pinned at zero.
        demand_change:    params {"node": k, "set": value} or
                          {"node": k, "scale": s}; rebases the demand-type
                          control at node k, shifting its box with it.
        parameter_change: params per plant type, e.g. {"edge": (m, n),
                          "susceptance": b} or {"offset": [...]} for the
                          affine test plants.
    """

    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class Scenario:
    """Everything a run needs: plant, overlay, gains, start, events, knobs."""

    plant: PlantModel
    comm_graph: Graph
    u0: np.ndarray
    gains: ProtocolGains | None = None
    disruptions: tuple = ()
    budget: int = 100_000
    eps_eq: float = 1e-8
    eps_feas: float = EPS_FEAS_DEFAULT
    stall_window: int = 100
    trace_decimation: int = 1
    override_gain_check: bool = False
    seed: int = 0
    labels: tuple | None = None

    def node_label(self, index: int) -> str:
        if self.labels is not None:
            return str(self.labels[index])
        return str(index + 1)


@dataclass(frozen=True)
class TraceRecord:
    """Snapshot taken at the end of one protocol round."""

    round: int
    u: np.ndarray
    y: np.ndarray
    deficit: np.ndarray
    beacons: np.ndarray
    messages: int
    wall_time: float


@dataclass(frozen=True)
class Outcome:
    """Terminal classification of a run.

    status is one of "converged", "stalled", "solver_failure",
    "budget_exceeded". Converged implies the terminal control passed the
    feasibility check; stalled means the state stopped moving (or froze at
    the ceiling) while a violation persisted.
    """

    status: str
    rounds: int
    feasible: bool
    equilibrium: bool
    max_violation: float
    max_beacon: float
    detail: str = ""


def _edge_index(graph: Graph, m: int, n: int) -> int:
    pair = (min(m, n), max(m, n))
    for i, e in enumerate(graph.edges):
        if e == pair:
            return i
    raise ScenarioError(f"edge {pair} does not exist in the plant graph")


def _drop_edge(graph: Graph, idx: int, aligned: tuple):
    edges = tuple(e for i, e in enumerate(graph.edges) if i != idx)
    kept = tuple(x for i, x in enumerate(aligned) if i != idx)
    return Graph(node_count=graph.node_count, edges=edges), kept


def apply_disruption(plant: PlantModel, event: DisruptionEvent) -> PlantModel:
    """Return the post-event plant; the input plant is left untouched."""
    if isinstance(plant, WaterPlant):
        return _disrupt_water(plant, event)
    if isinstance(plant, GridPlant):
        return _disrupt_grid(plant, event)
    if isinstance(plant, LinearPlant):
        return _disrupt_linear(plant, event)
    raise ScenarioError(f"no disruption support for {type(plant).__name__}")


def _disrupt_water(plant: WaterPlant, event: DisruptionEvent) -> WaterPlant:
    model = plant.model
    u_lower = plant.u_lower.copy()
    u_upper = plant.u_upper.copy()
    if event.kind == "remove_edge":
        m, n = event.params["edge"]
        idx = _edge_index(model.graph, m, n)
        graph, laws = _drop_edge(model.graph, idx, model.edge_laws)
        model = WaterModel(graph=graph, edge_laws=laws,
                           pressure_nodes=model.pressure_nodes)
    elif event.kind == "source_outage":
        node = int(event.params["node"])
        if node in model.pressure_nodes:
            pres = tuple(p for p in model.pressure_nodes if p != node)
            model = WaterModel(graph=model.graph, edge_laws=model.edge_laws,
                               pressure_nodes=pres)
        u_lower[node] = 0.0
        u_upper[node] = 0.0
    elif event.kind == "demand_change":
        node = int(event.params["node"])
        base, flex = _rebased_demand(event, u_lower[node],
                                     u_upper[node] - u_lower[node])
        u_lower[node] = base
        u_upper[node] = base + flex
    else:
        raise ScenarioError(f"unsupported water disruption '{event.kind}'")
    return WaterPlant(model=model, u_lower=u_lower, u_upper=u_upper,
                      y_lower=plant.y_lower, measured_nodes=plant.measured_nodes)


def _disrupt_grid(plant: GridPlant, event: DisruptionEvent) -> GridPlant:
    grid = plant.grid
    u_lower = plant.u_lower.copy()
    u_upper = plant.u_upper.copy()
    if event.kind == "remove_edge":
        m, n = event.params["edge"]
        idx = _edge_index(grid.graph, m, n)
        graph, sus = _drop_edge(grid.graph, idx, grid.susceptances)
        grid = GridModel(graph=graph, susceptances=sus,
                         generators=grid.generators, loads=grid.loads)
    elif event.kind == "demand_change":
        node = int(event.params["node"])
        if node not in grid.loads:
            raise ScenarioError(f"bus {node} is not a load bus")
        base, flex = _rebased_demand(event, u_lower[node],
                                     u_upper[node] - u_lower[node])
        u_lower[node] = base
        u_upper[node] = base + flex
    elif event.kind == "parameter_change":
        m, n = event.params["edge"]
        value = float(event.params["susceptance"])
        idx = _edge_index(grid.graph, m, n)
        sus = list(grid.susceptances)
        sus[idx] = value
        grid = GridModel(graph=grid.graph, susceptances=tuple(sus),
                         generators=grid.generators, loads=grid.loads)
    else:
        raise ScenarioError(f"unsupported grid disruption '{event.kind}'")
    return GridPlant(grid=grid, u_lower=u_lower, u_upper=u_upper,
                     y_lower=plant.y_lower)


def _disrupt_linear(plant: LinearPlant, event: DisruptionEvent) -> LinearPlant:
    if event.kind == "parameter_change" and "offset" in event.params:
        offset = np.asarray(event.params["offset"], dtype=float)
        if offset.shape != plant.offset.shape:
            raise ScenarioError("replacement offset has the wrong length")
        return LinearPlant(sensitivity=plant.sensitivity, offset=offset,
                           u_lower=plant.u_lower, u_upper=plant.u_upper,
                           y_lower=plant.y_lower,
                           measured_nodes=plant.measured_nodes)
    raise ScenarioError(f"unsupported linear-plant disruption '{event.kind}'")


def _rebased_demand(event: DisruptionEvent, old_base: float, flex: float):
    """New (base, flexibility) for a demand_change event."""
    if "set" in event.params:
        base = float(event.params["set"])
    elif "scale" in event.params:
        base = float(event.params["scale"]) * old_base
    else:
        raise ScenarioError("demand_change needs 'set' or 'scale'")
    if "flexibility" in event.params:
        flex = float(event.params["flexibility"])
    return base, flex


def _forced_initial(event: DisruptionEvent):
    """Agents whose control is physically moved by the event itself."""
    if event.kind in ("demand_change", "source_outage"):
        return [int(event.params["node"])]
    return []


def disrupted_setup(scenario: Scenario):
    """Apply all events; returns (plant', u0') with event-moved controls rebased."""
    plant = scenario.plant
    u0 = np.array(scenario.u0, dtype=float)
    for event in scenario.disruptions:
        plant = apply_disruption(plant, event)
        for node in _forced_initial(event):
            u0[node] = plant.u_lower[node]
    return plant, u0


def _validate_run(scenario: Scenario, plant: PlantModel, u0: np.ndarray,
                  adjacency: np.ndarray):
    n = plant.control_dim
    if scenario.comm_graph.node_count != n:
        raise ScenarioError("communication graph size disagrees with plant")
    if not is_connected(scenario.comm_graph):
        raise ScenarioError("communication graph must be connected")
    if u0.shape != (n,):
        raise ScenarioError("initial control has the wrong length")
    if np.any(u0 < plant.u_lower - scenario.eps_feas) or \
            np.any(u0 > plant.u_upper + scenario.eps_feas):
        raise ScenarioError("initial control violates its box limits")
    try:
        plant.solve(u0)
    except (SolverError, ModelError) as exc:
        raise ScenarioError(
            f"disrupted plant is not solvable at the initial control: {exc}"
        ) from exc


def run(scenario: Scenario):
    """Execute the scenario; returns (Outcome, list of TraceRecord)."""
    try:
        plant, u0 = disrupted_setup(scenario)
    except ModelError as exc:
        raise ScenarioError(f"disruption left an invalid plant: {exc}") from exc
    adjacency = adjacency_matrix(scenario.comm_graph)
    _validate_run(scenario, plant, u0, adjacency)
    gains = scenario.gains
    if gains is None:
        gains = auto_gains(plant, adjacency, u0)
    norm = gain_condition(gains.eta2, gains.eta3, adjacency)
    if norm >= 1.0 and not scenario.override_gain_check:
        raise ScenarioError(
            f"gain condition violated (spectral norm {norm:.6f} >= 1); "
            "pass override_gain_check to run anyway")

    state = ProtocolState(u=u0, beacons=np.zeros(len(u0)), round=0)
    records = []
    start = time.perf_counter()
    keep = max(1, int(scenario.trace_decimation))
    prev_deficit = None
    frozen_rounds = 0

    def classify(status, rounds, equilibrium, deficit, beacons, detail=""):
        feas = False
        if status != "solver_failure":
            feas = feasibility_check(plant, state.u, scenario.eps_feas)
        max_v = float(np.max(deficit)) if len(deficit) else 0.0
        max_b = float(np.max(beacons)) if len(beacons) else 0.0
        if status == "equilibrium":
            status = "converged" if feas else "stalled"
        return Outcome(status=status, rounds=rounds, feasible=feas,
                       equilibrium=equilibrium, max_violation=max_v,
                       max_beacon=max_b, detail=detail)

    deficit = np.zeros(len(u0))
    for t in range(1, scenario.budget + 1):
        try:
            y = plant.solve(state.u)
        except SolverError as exc:
            outcome = Outcome(status="solver_failure", rounds=t,
                              feasible=False, equilibrium=False,
                              max_violation=float("nan"),
                              max_beacon=float(np.max(state.beacons)),
                              detail=str(exc))
            return outcome, records
        nxt, msgs = protocol_round(state, y, gains, adjacency,
                                   plant.u_upper, plant.y_lower,
                                   plant.measured_nodes)
        deficit = violation(y, plant.y_lower, plant.measured_nodes, len(u0))
        if t % keep == 0 or t == 1:
            records.append(TraceRecord(
                round=t, u=nxt.u, y=y.copy(), deficit=deficit,
                beacons=nxt.beacons, messages=msgs.count,
                wall_time=time.perf_counter() - start))
        at_ceiling = bool(np.all(nxt.u >= plant.u_upper - scenario.eps_eq))
        deficit_cleared = float(np.max(deficit, initial=0.0)) <= scenario.eps_feas
        # a state that moved less than eps_eq may still be crawling toward a
        # feasible point through a weakly coupled agent; only stop once the
        # deficit has cleared, every control is pinned, or nothing moved at
        # all (an exact fixed point cannot move later)
        exact_fixed = np.array_equal(nxt.u, state.u) and \
            np.array_equal(nxt.beacons, state.beacons)
        reached_eq = exact_fixed or (
            is_equilibrium(state, nxt, scenario.eps_eq)
            and (deficit_cleared or at_ceiling))
        if prev_deficit is not None and at_ceiling and \
                np.array_equal(deficit, prev_deficit):
            frozen_rounds += 1
        else:
            frozen_rounds = 0
        prev_deficit = deficit
        state = nxt
        if reached_eq:
            if not records or records[-1].round != t:
                records.append(TraceRecord(
                    round=t, u=nxt.u, y=y.copy(), deficit=deficit,
                    beacons=nxt.beacons, messages=msgs.count,
                    wall_time=time.perf_counter() - start))
            return classify("equilibrium", t, True, deficit,
                            nxt.beacons), records
        if frozen_rounds >= scenario.stall_window and \
                float(np.max(deficit)) > scenario.eps_feas:
            return classify("stalled", t, False, deficit, nxt.beacons,
                            detail="controls pinned at the ceiling with a "
                                   "persistent violation"), records
    return classify("budget_exceeded", scenario.budget, False, deficit,
                    state.beacons), records


@dataclass(frozen=True)
class MessageStats:
    """Per-round and cumulative message counts plus activation rounds."""

    per_round: tuple
    total: int
    first_beacon: dict
    first_assistance: dict
    first_change: dict


def message_stats(records, comm_graph: Graph, u0=None) -> MessageStats:
    """Message accounting over a trace.

    first_beacon[k] is the first round agent k's beacon went positive;
    first_assistance[k] the first round some neighbor's beacon did (i.e.
    a message reached k); first_change[k] the first round k's control moved
    away from its previous value (needs u0 for the first round). Missing
    keys mean the event never happened.
    """
    if not records:
        raise ValueError("empty trace")
    per_round = tuple(r.messages for r in records)
    first_beacon = {}
    first_change = {}
    prev_u = np.asarray(u0, dtype=float) if u0 is not None else None
    for r in records:
        for k in np.nonzero(r.beacons > 0)[0]:
            first_beacon.setdefault(int(k), r.round)
        if prev_u is not None:
            for k in np.nonzero(r.u != prev_u)[0]:
                first_change.setdefault(int(k), r.round)
        prev_u = r.u
    first_assistance = {}
    for node in range(comm_graph.node_count):
        rounds = [first_beacon[nb] for nb in comm_graph.neighbors(node)
                  if nb in first_beacon]
        if rounds:
            first_assistance[node] = min(rounds)
    return MessageStats(per_round=per_round, total=int(sum(per_round)),
                        first_beacon=first_beacon,
                        first_assistance=first_assistance,
                        first_change=first_change)


def verify_trace(records, comm_graph: Graph, u_upper, u0=None) -> list:
    """Check the protocol invariants on a trace; returns problem strings.

    Checks: controls never decrease and never exceed the ceiling, beacons
    stay nonnegative, a positive beacon always sits on a saturated control,
    and every round's message count equals the summed degree of its
    beaconing agents (zero when nobody beacons).
    """
    problems = []
    u_upper = np.asarray(u_upper, dtype=float)
    prev_u = np.asarray(u0, dtype=float) if u0 is not None else None
    for r in records:
        if prev_u is not None and np.any(r.u < prev_u):
            problems.append(f"round {r.round}: control decreased")
        prev_u = r.u
        if np.any(r.u > u_upper):
            problems.append(f"round {r.round}: control exceeds its ceiling")
        if np.any(r.beacons < 0):
            problems.append(f"round {r.round}: negative beacon")
        for k in np.nonzero(r.beacons > 0)[0]:
            if r.u[k] != u_upper[k]:
                problems.append(
                    f"round {r.round}: beacon at unsaturated agent {k}")
        expect = sum(comm_graph.degree(int(k))
                     for k in np.nonzero(r.beacons > 0)[0])
        if r.messages != expect:
            problems.append(
                f"round {r.round}: {r.messages} messages, expected {expect}")
    return problems
