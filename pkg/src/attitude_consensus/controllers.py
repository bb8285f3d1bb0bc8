"""Consensus torques for rigid bodies on SO(3).

Three laws are provided:

* objective I: attitude consensus with vanishing rates, using only the
  neighbours' attitudes;
* objective II: attitude and rate consensus over an undirected tree, shaping
  the composite error ``sigma_i`` to obey
  ``sigma_i' = -J^{-1} (Kp sum_j grad_ij + Kd sigma_i) / alpha_i``;
* objective III: the same shaping over a directed out-tree whose root is a
  reference trajectory.

Each law has a per-agent entry point taking :class:`NeighborPacket` objects,
plus batched kernels (``*_edges``) that evaluate all agents at once for the
simulator. Both go through :func:`edge_terms`.
"""
from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from .graph import CommGraph
from .tracking_error import error_weights, gradient_rate_from_relative, relative_rotation
from .lie import cross, skew_vee

OBJECTIVES = ("I", "II", "III")


class ControlError(ValueError):
    """Raised when a control law is undefined for the given agent or graph."""


@dataclass(frozen=True)
class ControllerGains:
    """Gains shared by the three laws.

    ``Kd`` may be zero (pure conservative objective-I flow); the others must
    be strictly positive. ``alpha`` is a scalar or one value per agent.
    """

    Kp: float
    Kd: float
    alpha: float | np.ndarray = 1.0
    P: np.ndarray | None = None

    def __post_init__(self):
        if not (np.isfinite(self.Kp) and self.Kp > 0):
            raise ValueError(f"Kp must be > 0, got {self.Kp}")
        if not (np.isfinite(self.Kd) and self.Kd >= 0):
            raise ValueError(f"Kd must be >= 0, got {self.Kd}")
        alpha = np.asarray(self.alpha, dtype=float)
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        object.__setattr__(self, "P", error_weights(self.P))

    def alpha_for(self, n):
        """Per-agent ``alpha`` as an ``(n,)`` array."""
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.ndim == 0:
            return np.full(n, float(alpha))
        if alpha.shape != (n,):
            raise ValueError(f"alpha has {alpha.size} entries for {n} agents")
        return alpha

    def scaled(self, **changes):
        values = dict(Kp=self.Kp, Kd=self.Kd, alpha=self.alpha, P=self.P)
        values.update(changes)
        return ControllerGains(**values)


@dataclass(frozen=True)
class AgentState:
    """Attitude, body rate (rad/s) and last body acceleration (rad/s^2)."""

    R: np.ndarray
    omega: np.ndarray
    accel: np.ndarray | None = None


@dataclass(frozen=True)
class NeighborPacket:
    """What agent i receives from neighbour j.

    Objective I reads ``R`` only; objectives II/III also need ``omega`` and
    ``accel``.
    """

    R: np.ndarray
    omega: np.ndarray | None = None
    accel: np.ndarray | None = None


class EdgeTerms(NamedTuple):
    R_ij: np.ndarray  # R_j^T R_i
    transported: np.ndarray  # R_ij^T w_j
    omega_ij: np.ndarray  # w_i - R_ij^T w_j
    grad: np.ndarray  # vee(skew(P R_ij))
    grad_rate: np.ndarray  # d/dt grad along omega_ij


def edge_terms(R_i, omega_i, R_j, omega_j, P):
    """Pairwise quantities for receiving edges, broadcasting over leading axes."""
    R_ij = relative_rotation(R_i, R_j)
    transported = np.einsum("...ki,...k->...i", R_ij, omega_j)
    omega_ij = omega_i - transported
    grad = skew_vee(P[:, None] * R_ij)
    grad_rate = gradient_rate_from_relative(R_ij, omega_ij, P)
    return EdgeTerms(R_ij, transported, omega_ij, grad, grad_rate)


def gyroscopic(omega, J):
    """``omega x (J omega)``, broadcasting over leading axes."""
    return cross(omega, np.einsum("ij,...j->...i", J, omega))


# ---------------------------------------------------------------------------
# per-edge kernels shared by single-agent and batched evaluation


def objective1_torque(omega, grad_sum, J, gains, alpha):
    """Objective I torque from the summed neighbour gradients."""
    alpha = np.asarray(alpha, dtype=float)[..., None]
    return -gyroscopic(omega, J) - (gains.Kp * grad_sum + gains.Kd * omega) / alpha


def shaped_torque(omega, deg, vel_sum, grad_sum, rate_sum, transport_sum, J, gains, alpha):
    """Objective II/III torque; returns ``(torque, sigma)``.

    ``transport_sum`` is ``sum_j (R_ij^T dw_j + (R_ij^T w_j) x w_i)``, the
    rate of change of the neighbours' transported velocities.
    """
    alpha = np.asarray(alpha, dtype=float)[..., None]
    deg = np.asarray(deg, dtype=float)[..., None]
    sigma = vel_sum + gains.Kp * np.einsum("ij,...j->...i", np.linalg.inv(J), grad_sum)
    shaping = -(gains.Kp * grad_sum + gains.Kd * sigma) / alpha
    feedforward = np.einsum("ij,...j->...i", J, transport_sum) - gains.Kp * rate_sum
    return gyroscopic(omega, J) + (shaping + feedforward) / deg, sigma


def _check_packets(i, packets, graph):
    expected = graph.neighbors(i)
    got = sorted(packets)
    if got != expected:
        raise ControlError(f"agent {i}: packets from {got}, neighbours are {expected}")
    if not expected:
        raise ControlError(f"agent {i} has no neighbours; the control law divides by its degree")
    return expected


def _stack(packets, order, attr):
    values = [getattr(packets[j], attr) for j in order]
    if any(v is None for v in values):
        raise ControlError(f"neighbour packets are missing '{attr}'")
    return np.asarray(values, dtype=float)


def control_obj1(i, state, packets, graph, gains, J):
    """Objective I torque for agent ``i``.

    ``-w_i x J w_i - (Kp sum_j a_ij vee(skew(P R_ij)) + Kd w_i) / alpha_i``.
    Only neighbour attitudes are read. An agent without neighbours is
    allowed and only gets damping and the gyroscopic term.

    Raises:
        ControlError: if the graph is directed or packets do not match the
            neighbour set.
    """
    if graph.directed:
        raise ControlError("objective I needs an undirected graph")
    expected = graph.neighbors(i)
    if sorted(packets) != expected:
        raise ControlError(f"agent {i}: packets from {sorted(packets)}, neighbours are {expected}")
    J = np.asarray(J, dtype=float)
    omega = np.asarray(state.omega, dtype=float)
    grad_sum = np.zeros(3)
    if expected:
        R_j = np.asarray([packets[j].R for j in expected], dtype=float)
        grad_sum = skew_vee(gains.P[:, None] * relative_rotation(state.R, R_j)).sum(axis=0)
    alpha = gains.alpha_for(graph.n)[i]
    return objective1_torque(omega, grad_sum, J, gains, alpha)


def _shaped_single(i, state, packets, graph, gains, J):
    order = _check_packets(i, packets, graph)
    J = np.asarray(J, dtype=float)
    R_j = _stack(packets, order, "R")
    w_j = _stack(packets, order, "omega")
    dw_j = _stack(packets, order, "accel")
    omega = np.asarray(state.omega, dtype=float)
    terms = edge_terms(np.asarray(state.R, dtype=float), omega, R_j, w_j, gains.P)
    transport = np.einsum("eki,ek->ei", terms.R_ij, dw_j) + cross(terms.transported, omega)
    alpha = gains.alpha_for(graph.n)[i]
    u, _ = shaped_torque(
        omega,
        len(order),
        terms.omega_ij.sum(axis=0),
        terms.grad.sum(axis=0),
        terms.grad_rate.sum(axis=0),
        transport.sum(axis=0),
        J,
        gains,
        alpha,
    )
    return u


def control_obj2(i, state, packets, graph, gains, J):
    """Objective II torque for agent ``i`` on an undirected graph.

    Packets must carry each neighbour's attitude, body rate and body
    acceleration.

    Raises:
        ControlError: if the graph is directed or agent ``i`` is isolated.
    """
    if graph.directed:
        raise ControlError("objective II needs an undirected graph")
    return _shaped_single(i, state, packets, graph, gains, J)


def control_obj3(i, state, packets, graph, gains, J):
    """Objective III torque for agent ``i`` on a directed graph with reference.

    The reference node appears among the packets under index ``graph.n``
    whenever agent ``i`` receives from it.

    Raises:
        ControlError: if the graph is undirected, has no reference node, or
            agent ``i`` has in-degree zero.
    """
    if not graph.directed or graph.reference is None:
        raise ControlError("objective III needs a directed graph with a reference node")
    if i >= graph.n:
        raise ControlError("the reference node is not controlled")
    return _shaped_single(i, state, packets, graph, gains, J)


# ---------------------------------------------------------------------------
# batched evaluation over all agents


class EdgeIndex:
    """Receiver/sender arrays and aggregation matrix for a graph."""

    def __init__(self, graph: CommGraph):
        pairs = [(i, j) for i, j in graph.edges() if i < graph.n]
        self.n = graph.n
        self.receivers = np.array([p[0] for p in pairs], dtype=int)
        self.senders = np.array([p[1] for p in pairs], dtype=int)
        self.incidence = np.zeros((graph.n, len(pairs)))
        self.incidence[self.receivers, np.arange(len(pairs))] = 1.0
        self.degree = self.incidence.sum(axis=1)

    def aggregate(self, values):
        """Sum edge values ``(..., E, k)`` per receiving agent -> ``(..., n, k)``."""
        return np.einsum("ne,...ek->...nk", self.incidence, values)


def objective1_edges(R, omega, index, gains, J, alpha):
    """Objective I torques for all agents; ``R``/``omega`` have one row per node."""
    n = index.n
    R_ij = relative_rotation(R[index.receivers], R[index.senders])
    grad = skew_vee(gains.P[:, None] * R_ij)
    return objective1_torque(omega[:n], index.aggregate(grad), J, gains, alpha)


def shaped_edges(R, omega, accel, index, gains, J, alpha):
    """Objective II/III torques and sigma for all agents.

    ``accel`` gives the body acceleration used for every sender node; the
    torque is affine in it (see :func:`transport_coupling`).
    """
    n = index.n
    rec, snd = index.receivers, index.senders
    terms = edge_terms(R[rec], omega[rec], R[snd], omega[snd], gains.P)
    transport = np.einsum("eki,ek->ei", terms.R_ij, accel[snd]) + cross(
        terms.transported, omega[rec]
    )
    return shaped_torque(
        omega[:n],
        index.degree,
        index.aggregate(terms.omega_ij),
        index.aggregate(terms.grad),
        index.aggregate(terms.grad_rate),
        index.aggregate(transport),
        J,
        gains,
        alpha,
    )


def transport_coupling(R, index):
    """Matrix ``C`` with ``dw = b + C dw`` for the agents' own accelerations.

    Block ``(i, j)`` is ``R_ij^T / delta_i`` for agent neighbours ``j``; edges
    from the reference are excluded because its acceleration is known.
    """
    n = index.n
    keep = index.senders < n
    i, j = index.receivers[keep], index.senders[keep]
    blocks = np.swapaxes(relative_rotation(R[i], R[j]), -1, -2) / index.degree[i, None, None]
    C = np.zeros((n, 3, n, 3))
    np.add.at(C, (i, slice(None), j), blocks)
    return C.reshape(3 * n, 3 * n)


# ---------------------------------------------------------------------------
# closed-loop consistency


def sigma_history(log):
    """Composite error ``sigma`` and the target rate for every logged sample.

    Returns ``(sigma, target)`` with shape ``(T, n, 3)`` each, where
    ``target = -J^{-1}(Kp sum_j grad_ij + Kd sigma_i) / alpha_i``.
    """
    index = EdgeIndex(log.graph)
    rec, snd = index.receivers, index.senders
    gains = log.gains
    R, omega = log.R, log.omega
    R_ij = relative_rotation(R[:, rec], R[:, snd])
    transported = np.einsum("teki,tek->tei", R_ij, omega[:, snd])
    grad = skew_vee(gains.P[:, None] * R_ij)
    vel_sum = index.aggregate(omega[:, rec] - transported)
    grad_sum = index.aggregate(grad)
    Jinv = np.linalg.inv(log.J)
    sigma = vel_sum + gains.Kp * np.einsum("ij,tnj->tni", Jinv, grad_sum)
    alpha = gains.alpha_for(index.n)[None, :, None]
    target = -np.einsum("ij,tnj->tni", Jinv, gains.Kp * grad_sum + gains.Kd * sigma) / alpha
    return sigma, target


def reduced_sigma_dynamics_check(log, per_agent=False):
    """Largest gap between the forward-differenced ``sigma`` and its target rate.

    The forward difference carries an O(h) truncation error, so on a
    correct closed loop the result shrinks linearly with the step.

    Args:
        log: trajectory from an objective II or III run.
        per_agent: also return the per-agent maxima.

    Returns:
        The max residual (Euclidean norm per agent and sample), or
        ``(max, per_agent_max)`` when ``per_agent`` is set.
    """
    if log.objective not in ("II", "III"):
        raise ValueError("the sigma check applies to objective II/III logs")
    sigma, target = sigma_history(log)
    dt = np.diff(log.t)[:, None, None]
    fd = np.diff(sigma, axis=0) / dt
    resid = np.linalg.norm(fd - target[:-1], axis=-1)
    if resid.size == 0:
        worst = np.zeros(sigma.shape[1])
    else:
        worst = resid.max(axis=0)
    if per_agent:
        return float(worst.max(initial=0.0)), worst
    return float(worst.max(initial=0.0))
