"""Saturation-driven control rounds with event-triggered beacon messages.

Each node hosts an agent holding one control value. A round works on the
latest plant reading and the beacons received from communication neighbors:

  1. every measured node turns its output shortfall into a nonnegative
     deficit (zero when the output clears its floor, or when unmeasured);
  2. each agent computes a raw target: current control, plus its own
     deficit scaled by eta1, plus the beacon sum from its neighbors scaled
     by eta2;
  3. the part of the target that overshoots the control ceiling becomes the
     agent's new beacon (scaled by eta3, clamped at zero), so only agents
     pinned at their ceiling ever signal for help;
  4. the implemented control is the target clipped to the ceiling.

Controls therefore never decrease and never exceed their ceilings, and a
beacon is only ever positive at an agent whose control is saturated. With
the gain product small enough (see gain_condition) the beacon relay is a
contraction, so runs settle instead of echoing forever.
"""
from dataclasses import dataclass

import numpy as np

from .plant import monotonicity_probe


@dataclass(frozen=True)
class ProtocolGains:
    """Per-agent step sizes; all entries must be strictly positive."""

    eta1: np.ndarray
    eta2: np.ndarray
    eta3: np.ndarray

    def __post_init__(self):
        for name in ("eta1", "eta2", "eta3"):
            v = np.asarray(getattr(self, name), dtype=float)
            if np.any(v <= 0):
                raise ValueError(f"{name} must be strictly positive")
            v.flags.writeable = False
            object.__setattr__(self, name, v)
        if not (len(self.eta1) == len(self.eta2) == len(self.eta3)):
            raise ValueError("gain vectors disagree in length")


@dataclass(frozen=True)
class ProtocolState:
    """Controls and beacons after a given round (round 0 = initial)."""

    u: np.ndarray
    beacons: np.ndarray
    round: int = 0

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        b = np.array(self.beacons, dtype=float)
        if u.shape != b.shape:
            raise ValueError("controls and beacons disagree in shape")
        if np.any(b < 0):
            raise ValueError("beacons must be nonnegative")
        u.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "beacons", b)


@dataclass(frozen=True)
class RoundMessages:
    """(sender, receiver, beacon value) triples emitted in one round."""

    triples: tuple

    @property
    def count(self) -> int:
        return len(self.triples)


def violation(y, y_lower, measured_nodes, node_count: int) -> np.ndarray:
    """Per-node output deficit: max(0, floor - reading), zero if unmeasured."""
    y = np.asarray(y, dtype=float)
    y_lower = np.asarray(y_lower, dtype=float)
    f = np.zeros(node_count)
    for yk, floor, node in zip(y, y_lower, measured_nodes):
        if floor >= yk:
            f[node] = floor - yk
    return f


def target_setpoint(u, deficit, beacon_input, gains: ProtocolGains) -> np.ndarray:
    """Raw control target: u + eta1*deficit + eta2*(neighbor beacon sum).

    Both added terms are nonnegative, so the target never drops below the
    current control. beacon_input is the adjacency-weighted beacon sum,
    i.e. each agent only sees beacons from its direct neighbors.
    """
    u = np.asarray(u, dtype=float)
    return u + gains.eta1 * np.asarray(deficit, float) + gains.eta2 * np.asarray(beacon_input, float)


def beacon_update(target, u_upper, eta3) -> np.ndarray:
    """New beacons: eta3-scaled target overshoot past the ceiling, floored at 0."""
    return np.maximum(0.0, np.asarray(eta3, float) * (np.asarray(target, float) - np.asarray(u_upper, float)))


def project(target, u_upper) -> np.ndarray:
    """Clip the target to the control ceiling (element-wise min)."""
    return np.minimum(np.asarray(target, dtype=float), np.asarray(u_upper, dtype=float))


def spectral_norm(matrix, tol: float = 1e-10, max_iter: int = 500_000) -> float:
    """Largest singular value by power iteration on M^T M.

    Starts from the all-ones vector so results are reproducible; for the
    nonnegative matrices used here that start always overlaps the dominant
    eigenvector, so the iteration cannot get stuck at zero. Stops when the
    eigenpair residual ||Bv - est v|| drops below tol * est, which bounds
    the eigenvalue error directly for the symmetric matrix B = M^T M.
    """
    m = np.asarray(matrix, dtype=float)
    if m.size == 0 or not np.any(m):
        return 0.0
    b = m.T @ m
    v = np.ones(b.shape[0]) / np.sqrt(b.shape[0])
    est = 0.0
    for _ in range(max_iter):
        w = b @ v
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        w = b @ v
        est = float(v @ w)
        if float(np.linalg.norm(w - est * v)) <= tol * max(est, 1e-300):
            break
    return float(np.sqrt(est))


def gain_condition(eta2, eta3, adjacency) -> float:
    """Spectral norm of diag(eta2) diag(eta3) A; values < 1 certify settling."""
    d = np.asarray(eta2, dtype=float) * np.asarray(eta3, dtype=float)
    return spectral_norm(d[:, None] * np.asarray(adjacency, dtype=float))


def protocol_round(state: ProtocolState, y, gains: ProtocolGains, adjacency,
                   u_upper, y_lower, measured_nodes):
    """Advance one synchronous round; returns (new state, messages sent).

    The reading y must correspond to the controls in `state`. Beacons in
    `state` are the ones computed last round (they arrive one round late by
    construction). Messages are emitted by every agent whose new beacon is
    positive, one per communication neighbor.
    """
    adjacency = np.asarray(adjacency, dtype=float)
    n = len(state.u)
    deficit = violation(y, y_lower, measured_nodes, n)
    target = target_setpoint(state.u, deficit, adjacency @ state.beacons, gains)
    new_beacons = beacon_update(target, u_upper, gains.eta3)
    new_u = project(target, u_upper)
    triples = []
    for sender in range(n):
        if new_beacons[sender] > 0.0:
            for receiver in np.nonzero(adjacency[sender])[0]:
                triples.append((sender, int(receiver), float(new_beacons[sender])))
    next_state = ProtocolState(u=new_u, beacons=new_beacons, round=state.round + 1)
    return next_state, RoundMessages(triples=tuple(triples))


def is_equilibrium(prev: ProtocolState, nxt: ProtocolState, eps_eq: float = 1e-8) -> bool:
    """True when neither controls nor beacons moved more than eps_eq (inf-norm)."""
    if prev.u.shape != nxt.u.shape:
        raise ValueError("states disagree in dimension")
    du = float(np.max(np.abs(nxt.u - prev.u))) if len(prev.u) else 0.0
    db = float(np.max(np.abs(nxt.beacons - prev.beacons))) if len(prev.u) else 0.0
    return du <= eps_eq and db <= eps_eq


def auto_gains(plant, adjacency, u0=None, target_norm: float = 0.5) -> ProtocolGains:
    """Default gains for a scenario that does not pin them down.

    eta3 is 1 everywhere; eta2 is uniform and sized so the gain_condition
    norm equals target_norm (a 2x safety margin below 1 by default); eta1
    is 0.5 over each agent's own probed sensitivity, so one round of pure
    local control covers about half of a deficit. Agents without a measured
    output at their own node fall back to their largest column sensitivity,
    and to 1.0 when the plant does not respond to them at all.
    """
    adjacency = np.asarray(adjacency, dtype=float)
    n = plant.control_dim
    eta3 = np.ones(n)
    norm_a = spectral_norm(adjacency)
    eta2 = np.full(n, target_norm / norm_a if norm_a > 0 else 1.0)
    if u0 is None:
        u0 = 0.5 * (plant.u_lower + plant.u_upper)
    jac = monotonicity_probe(plant, u0).jacobian
    row_of = {node: i for i, node in enumerate(plant.measured_nodes)}
    eta1 = np.ones(n)
    for k in range(n):
        if k in row_of:
            sens = jac[row_of[k], k]
        else:
            sens = float(np.max(np.abs(jac[:, k]))) if jac.size else 0.0
        if sens > 1e-12:
            eta1[k] = 0.5 / sens
    return ProtocolGains(eta1=eta1, eta2=eta2, eta3=eta3)
