"""Lossless reactive-power grid model with Newton load-voltage solves.

The model is the standard linear-susceptance approximation: with B the
weighted Laplacian of the line graph (per-unit susceptances), nodal
reactive injections satisfy q = diag(v) B v. Buses split into generators
(voltage magnitude is the control) and loads (reactive injection is the
control, voltage magnitude is the regulated output). Partitioning B
accordingly and fixing (q_L, v_G) leaves a quadratic system in the load
voltages, solved here by damped Newton iteration from a flat start.

The implicit-function Jacobians of the solved map are available in closed
form through the matrix G = diag(i_L) + diag(v_L) B_LL with
i_L = B_LG v_G + B_LL v_L; both sensitivities are entrywise nonnegative
whenever the certificate matrix diag(q_L / v_L^2) + B_LL is positive
definite (G is then an M-matrix, so its inverse is nonnegative).
"""
from dataclasses import dataclass

import numpy as np

from .errors import ModelError, PowerFlowInfeasibleError, SingularJacobianError
from .graph import Graph, weighted_laplacian
from .plant import PlantModel

SOLVER_TOL = 1e-8
MAX_NEWTON_ITER = 50


@dataclass(frozen=True)
class GridModel:
    """Grid data: line graph, per-line susceptances, bus partition.

    generators and loads are disjoint bus-index tuples covering the graph.
    The Laplacian B and its generator/load blocks are derived once at
    construction; the model is immutable afterwards.
    """

    graph: Graph
    susceptances: tuple
    generators: tuple
    loads: tuple

    def __post_init__(self):
        gens = tuple(sorted(int(i) for i in self.generators))
        loads = tuple(sorted(int(i) for i in self.loads))
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "loads", loads)
        if set(gens) & set(loads):
            raise ModelError("a bus cannot be both generator and load")
        if set(gens) | set(loads) != set(range(self.graph.node_count)):
            raise ModelError("bus partition must cover the whole graph")
        if not gens:
            raise ModelError("at least one generator bus is required")
        b = weighted_laplacian(self.graph, self.susceptances)
        b.flags.writeable = False
        object.__setattr__(self, "b_matrix", b)

    @property
    def b_ll(self) -> np.ndarray:
        return self.b_matrix[np.ix_(self.loads, self.loads)]

    @property
    def b_lg(self) -> np.ndarray:
        return self.b_matrix[np.ix_(self.loads, self.generators)]

    @property
    def b_gg(self) -> np.ndarray:
        return self.b_matrix[np.ix_(self.generators, self.generators)]


@dataclass(frozen=True)
class PowerFlowSolution:
    """Solved load voltages plus bookkeeping from the Newton iteration."""

    v_load: np.ndarray
    q_gen: np.ndarray
    i_load: np.ndarray
    iterations: int
    residual: float


def reactive_injections(v, b_matrix) -> np.ndarray:
    """Nodal reactive injections q = diag(v) B v for a full voltage vector."""
    v = np.asarray(v, dtype=float)
    return v * (np.asarray(b_matrix, dtype=float) @ v)


def _gain_matrix(v_load, i_load, b_ll) -> np.ndarray:
    return np.diag(i_load) + np.diag(v_load) @ b_ll


def solve_load_voltages(q_load, v_gen, grid: GridModel, v0=None,
                        tol: float = SOLVER_TOL,
                        max_iter: int = MAX_NEWTON_ITER) -> PowerFlowSolution:
    """Solve diag(v_L)(B_LG v_G + B_LL v_L) = q_L for the load voltages.

    Damped Newton from a flat 1.0 per-unit start (or v0): the step is
    halved up to 10 times whenever the residual inf-norm fails to
    decrease. Raises PowerFlowInfeasibleError when no solution emerges
    within max_iter or the converged root is non-physical (v <= 0), and
    SingularJacobianError when the iteration matrix degenerates.
    """
    q_load = np.asarray(q_load, dtype=float)
    v_gen = np.asarray(v_gen, dtype=float)
    if np.any(v_gen <= 0):
        raise ModelError("generator voltages must be positive")
    nl = len(grid.loads)
    if q_load.shape != (nl,) or v_gen.shape != (len(grid.generators),):
        raise ModelError("injection/voltage vectors disagree with partition")
    b_ll = grid.b_ll
    b_lg = grid.b_lg
    v = np.ones(nl) if v0 is None else np.asarray(v0, dtype=float).copy()

    def residual(vl):
        il = b_lg @ v_gen + b_ll @ vl
        return vl * il - q_load, il

    r, i_load = residual(v)
    rnorm = float(np.max(np.abs(r))) if nl else 0.0
    iters = 0
    while rnorm > tol and iters < max_iter:
        g = _gain_matrix(v, i_load, b_ll)
        try:
            step = np.linalg.solve(g, -r)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError(
                f"singular iteration matrix at iteration {iters}") from exc
        scale = 1.0
        best = None
        for _ in range(11):
            cand = v + scale * step
            rc, ic = residual(cand)
            rcn = float(np.max(np.abs(rc)))
            if best is None or rcn < best[0]:
                best = (rcn, cand, rc, ic)
            if rcn < rnorm:
                break
            scale *= 0.5
        rnorm, v, r, i_load = best
        iters += 1
    if rnorm > tol:
        raise PowerFlowInfeasibleError(
            f"no load-voltage solution after {iters} iterations "
            f"(residual {rnorm:.3e})")
    if np.any(v <= 0):
        raise PowerFlowInfeasibleError("converged to non-physical voltages")
    q_gen = v_gen * (grid.b_gg @ v_gen + grid.b_lg.T @ v)
    return PowerFlowSolution(v_load=v, q_gen=q_gen, i_load=i_load,
                             iterations=iters, residual=rnorm)


def dvl_dql(sol: PowerFlowSolution, grid: GridModel) -> np.ndarray:
    """Sensitivity of load voltages to load injections: G^{-1}."""
    g = _gain_matrix(sol.v_load, sol.i_load, grid.b_ll)
    try:
        return np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobianError("sensitivity matrix G is singular") from exc


def dvl_dvg(sol: PowerFlowSolution, grid: GridModel) -> np.ndarray:
    """Sensitivity of load voltages to generator voltages: -G^{-1} diag(v_L) B_LG."""
    g = _gain_matrix(sol.v_load, sol.i_load, grid.b_ll)
    try:
        return np.linalg.solve(g, -np.diag(sol.v_load) @ grid.b_lg)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobianError("sensitivity matrix G is singular") from exc


def monotonicity_margin(sol: PowerFlowSolution, grid: GridModel) -> float:
    """Smallest eigenvalue of diag(q_L/v_L^2) + B_LL at the solved point.

    A positive value certifies that both voltage sensitivities are
    entrywise nonnegative at this operating point, i.e. raising any load
    injection or generator voltage cannot lower any load voltage.
    """
    g_load = sol.i_load / sol.v_load  # equals q_L / v_L^2 at the solution
    cert = np.diag(g_load) + grid.b_ll
    return float(np.min(np.linalg.eigvalsh(cert)))


@dataclass(frozen=True)
class SweepPoint:
    scale: float
    solved: bool
    margin: float | None


def loadability_sweep(grid: GridModel, q_load_nominal, v_gen, scales) -> list:
    """Scale nominal load injections and track solvability and the margin.

    For each multiplier the load-voltage solve is attempted; failures are
    recorded rather than raised. Returns one SweepPoint per scale.
    """
    q0 = np.asarray(q_load_nominal, dtype=float)
    out = []
    for s in scales:
        try:
            sol = solve_load_voltages(s * q0, v_gen, grid)
        except (PowerFlowInfeasibleError, SingularJacobianError):
            out.append(SweepPoint(scale=float(s), solved=False, margin=None))
            continue
        out.append(SweepPoint(scale=float(s), solved=True,
                              margin=monotonicity_margin(sol, grid)))
    return out


class GridPlant(PlantModel):
    """Node-indexed plant view of a GridModel.

    The control vector holds one entry per bus: voltage set point at
    generator buses, reactive injection at load buses (all per-unit).
    Outputs are the load-bus voltages, which carry the lower limits.
    """

    def __init__(self, grid: GridModel, u_lower, u_upper, y_lower):
        self.grid = grid
        self.u_lower = np.asarray(u_lower, dtype=float)
        self.u_upper = np.asarray(u_upper, dtype=float)
        self.y_lower = np.asarray(y_lower, dtype=float)
        self.measured_nodes = grid.loads
        if len(self.u_upper) != grid.graph.node_count:
            raise ModelError("control limits must cover every bus")
        self._check_limit_shapes()

    def solve(self, u):
        u = np.asarray(u, dtype=float)
        q_load = u[list(self.grid.loads)]
        v_gen = u[list(self.grid.generators)]
        return solve_load_voltages(q_load, v_gen, self.grid).v_load
