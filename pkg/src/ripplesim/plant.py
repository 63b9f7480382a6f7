"""Abstract plant contract, feasibility queries, and the monotonicity probe.

A plant maps a control vector u (one entry per node, mixed units allowed)
to a vector of measured outputs y over a subset of nodes. Controls carry
box limits; measured outputs carry lower limits. A control is feasible when
it sits inside its box and the resulting outputs clear their floors.
"""
import abc
from dataclasses import dataclass

import numpy as np

from .errors import PlantSolveError, SolverError

EPS_FEAS_DEFAULT = 1e-6
MONOTONE_TOL_DEFAULT = 1e-7


class PlantModel(abc.ABC):
    """Deterministic steady-state plant.

    Concrete plants expose:
        u_lower, u_upper: per-node control limits (u_lower <= u_upper)
        measured_nodes:   sorted node indices carrying output sensors
        y_lower:          output floors aligned with measured_nodes
        solve(u):         outputs over measured_nodes for control u

    solve must be a pure function of u (same input, same output) and must
    not keep mutable state across calls, so concurrent read-only use is safe.
    """

    u_lower: np.ndarray
    u_upper: np.ndarray
    y_lower: np.ndarray
    measured_nodes: tuple

    @property
    def control_dim(self) -> int:
        return len(self.u_upper)

    @abc.abstractmethod
    def solve(self, u: np.ndarray) -> np.ndarray:
        """Return outputs over measured_nodes for control vector u."""

    def _check_limit_shapes(self):
        if self.u_lower.shape != self.u_upper.shape:
            raise ValueError("control limit vectors disagree in shape")
        if np.any(self.u_lower > self.u_upper):
            raise ValueError("u_lower exceeds u_upper")
        if len(self.y_lower) != len(self.measured_nodes):
            raise ValueError("y_lower must align with measured_nodes")


class LinearPlant(PlantModel):
    """Affine plant y = S u + offset over the measured nodes.

    Mainly used by synthetic corpora and tests; S >= 0 yields a monotone
    plant, and deliberately negative entries give counterexamples.
    """

    def __init__(self, sensitivity, offset, u_lower, u_upper, y_lower,
                 measured_nodes):
        self.sensitivity = np.asarray(sensitivity, dtype=float)
        self.offset = np.asarray(offset, dtype=float)
        self.u_lower = np.asarray(u_lower, dtype=float)
        self.u_upper = np.asarray(u_upper, dtype=float)
        self.y_lower = np.asarray(y_lower, dtype=float)
        self.measured_nodes = tuple(int(i) for i in measured_nodes)
        m, n = self.sensitivity.shape
        if m != len(self.measured_nodes) or n != len(self.u_upper):
            raise ValueError("sensitivity shape disagrees with limits")
        self._check_limit_shapes()

    def solve(self, u):
        u = np.asarray(u, dtype=float)
        return self.sensitivity @ u + self.offset


def feasibility_check(plant: PlantModel, u, eps_feas: float = EPS_FEAS_DEFAULT) -> bool:
    """True iff u is inside its box and plant outputs clear their floors.

    Both comparisons are slackened by eps_feas. Plant solve failures are
    re-raised as PlantSolveError carrying the offending control vector.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < plant.u_lower - eps_feas) or np.any(u > plant.u_upper + eps_feas):
        return False
    try:
        y = plant.solve(u)
    except SolverError as exc:
        raise PlantSolveError(f"plant solve failed: {exc}", control=u) from exc
    return bool(np.all(y >= plant.y_lower - eps_feas))


def max_effort_feasibility(plant: PlantModel, eps_feas: float = EPS_FEAS_DEFAULT) -> bool:
    """True iff outputs clear their floors at the upper control limit.

    For a monotone plant this decides whether any feasible control exists
    inside the box: the maximum effort dominates every other choice.
    """
    try:
        y = plant.solve(plant.u_upper)
    except SolverError as exc:
        raise PlantSolveError("plant solve failed at maximum effort",
                              control=np.array(plant.u_upper)) from exc
    return bool(np.all(y >= plant.y_lower - eps_feas))


@dataclass(frozen=True)
class ProbeResult:
    """Finite-difference sensitivity estimate and a monotonicity verdict."""

    jacobian: np.ndarray
    monotone: bool
    step: float


def monotonicity_probe(plant: PlantModel, u0, step: float | None = None,
                       tol: float = MONOTONE_TOL_DEFAULT) -> ProbeResult:
    """Central-difference output Jacobian at u0, with a sign verdict.

    The probe perturbs each control by +-step around u0 and declares the
    plant monotone at u0 when every sensitivity entry is >= -tol. The step
    defaults to 1e-5 * max(1, |u0|_inf), balancing truncation against
    cancellation for the iteratively solved plants. Perturbed points may
    leave the control box: the box constrains the controller, not the
    physics, so the plant is still asked to solve there.
    """
    u0 = np.asarray(u0, dtype=float)
    n = plant.control_dim
    if step is None:
        step = 1e-5 * max(1.0, float(np.max(np.abs(u0))) if n else 1.0)
    jac = np.zeros((len(plant.measured_nodes), n))
    for k in range(n):
        up = u0.copy()
        dn = u0.copy()
        up[k] += step
        dn[k] -= step
        try:
            y_up = plant.solve(up)
            y_dn = plant.solve(dn)
        except SolverError as exc:
            raise PlantSolveError(
                f"plant solve failed while probing control {k}",
                control=u0, direction=k) from exc
        jac[:, k] = (y_up - y_dn) / (2.0 * step)
    verdict = bool(np.all(jac >= -tol))
    return ProbeResult(jacobian=jac, monotone=verdict, step=step)
