"""Closed-loop simulation of rigid bodies under the consensus laws.

Attitudes are advanced with a fourth-order Runge-Kutta-Munthe-Kaas step:
stages live in so(3) and are mapped back with the exponential, so every
attitude stays on SO(3) to round-off without renormalisation.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import graph as graphs
from .controllers import (
    OBJECTIVES,
    ControllerGains,
    EdgeIndex,
    gyroscopic,
    objective1_edges,
    shaped_edges,
    transport_coupling,
)
from .lie import check_rotation, exp_so3, right_jacobian_inv
from .tracking_error import psi, sigma as sigma_of, tau_L

COUPLINGS = ("solve", "lagged")


class SimulationError(RuntimeError):
    """Raised when the state becomes non-finite.

    Attributes:
        time: simulation time of the first bad state.
        log: trajectory up to the last good sample (may be None).
    """

    def __init__(self, message, time, log=None):
        super().__init__(message)
        self.time = time
        self.log = log


class InitialSetWarning(UserWarning):
    """Initial condition lies outside the sufficient region of attraction."""


@dataclass(frozen=True)
class InertiaTensor:
    """Symmetric positive-definite inertia (kg m^2) with cached inverse."""

    J: np.ndarray
    J_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        J = np.array(self.J, dtype=float)
        if J.shape == (3,):
            J = np.diag(J)
        if J.shape != (3, 3) or not np.all(np.isfinite(J)):
            raise ValueError("inertia must be a finite 3x3 matrix or 3 diagonal entries")
        if np.max(np.abs(J - J.T)) > 1e-12:
            raise ValueError("inertia must be symmetric")
        if np.min(np.linalg.eigvalsh(J)) <= 0:
            raise ValueError("inertia must be positive definite")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "J_inv", np.linalg.inv(J))


BENCH_INERTIA = InertiaTensor(np.diag([0.23, 0.28, 0.35]))


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Body-rate reference ``A [sin(2 pi t / T), cos(2 pi t / T), sin(2 pi t / T)]``.

    ``amplitude`` is in rad/s; ``R0`` is the attitude at t = 0.
    """

    amplitude: float = np.deg2rad(10.0)
    period: float = 8.0
    R0: np.ndarray = field(default_factory=lambda: np.eye(3))

    def omega(self, t):
        c = 2.0 * np.pi / self.period
        s, k = np.sin(c * t), np.cos(c * t)
        return self.amplitude * np.array([s, k, s])

    def accel(self, t):
        c = 2.0 * np.pi / self.period
        s, k = np.sin(c * t), np.cos(c * t)
        return self.amplitude * c * np.array([k, -s, k])


def reference_state(t, reference=None, step=1e-3):
    """Reference ``(R_r, omega_r, domega_r)`` at time ``t``.

    ``R_r`` is integrated from ``reference.R0`` with the same Lie-group
    stepper used for the agents; the last step is shortened to land on ``t``.
    """
    reference = reference or ReferenceTrajectory()
    if t < 0:
        raise ValueError("reference time must be >= 0")

    def rates(tt, R, omega):
        return np.array([reference.omega(tt)]), np.zeros((0, 3)), None

    R = np.array([reference.R0], dtype=float)
    omega = np.zeros((0, 3))
    n_full = int(np.floor(t / step + 1e-9))
    tt = 0.0
    for k in range(n_full):
        R, omega, _ = rkmk4_step(rates, k * step, R, omega, step)
    tt = n_full * step
    if t - tt > 1e-12:
        R, omega, _ = rkmk4_step(rates, tt, R, omega, t - tt)
    return R[0], reference.omega(t), reference.accel(t)


@dataclass
class ScenarioConfig:
    """Everything needed to run one closed-loop simulation.

    Attitudes ``R0`` are ``(n, 3, 3)``; rates ``omega0`` are ``(n, 3)`` in
    rad/s. ``consensus_threshold`` is in radians.
    """

    objective: str
    graph: graphs.CommGraph
    gains: ControllerGains
    R0: np.ndarray
    omega0: np.ndarray
    inertia: InertiaTensor = BENCH_INERTIA
    step: float = 1e-3
    duration: float = 10.0
    reference: ReferenceTrajectory | None = None
    coupling: str = "solve"
    name: str = "scenario"
    consensus_threshold: float = np.deg2rad(1.0)

    def __post_init__(self):
        self.R0 = np.asarray(self.R0, dtype=float)
        self.omega0 = np.asarray(self.omega0, dtype=float)

    @property
    def n(self):
        return self.graph.n

    def validate(self):
        """Check types, numbers, and the objective's topology requirement.

        Raises:
            ValueError: on bad objective, step, duration, shapes or states.
            graph.GraphError: if the graph does not satisfy the objective's
                hypothesis (tree / directed out-tree rooted at the reference).
        """
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}, got {self.coupling!r}")
        if not (np.isfinite(self.step) and self.step > 0):
            raise ValueError("step must be > 0")
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise ValueError("duration must be > 0")
        n = self.n
        if self.R0.shape != (n, 3, 3) or self.omega0.shape != (n, 3):
            raise ValueError(f"initial state must have shapes ({n}, 3, 3) and ({n}, 3)")
        check_rotation(self.R0)
        if not np.all(np.isfinite(self.omega0)):
            raise ValueError("initial rates must be finite")
        self.gains.alpha_for(n)
        g = self.graph
        if self.objective in ("I", "II"):
            if g.directed or g.reference is not None:
                raise graphs.GraphError(f"objective {self.objective} needs an undirected graph")
            if not graphs.is_connected_tree(g):
                raise graphs.GraphError("communication graph must be a connected tree")
            if self.objective == "II" and n < 2:
                raise graphs.GraphError("objective II needs at least two agents")
        else:
            if not g.directed or g.reference is None:
                raise graphs.GraphError("objective III needs a directed graph with a reference")
            if not graphs.is_directed_out_tree(g, g.reference):
                raise graphs.GraphError(
                    "graph must be a directed out-tree rooted at the reference"
                )
            if self.reference is None:
                raise ValueError("objective III needs a reference trajectory")
        return self


def rigid_body_derivative(state, u, J):
    """Attitude rate (body velocity) and ``dw = J^{-1}(J w x w + u)``."""
    J = np.asarray(J, dtype=float)
    omega = np.asarray(state.omega, dtype=float)
    return omega.copy(), np.linalg.solve(J, u - gyroscopic(omega, J))


def rkmk4_step(rates, t, R, omega, h):
    """One RKMK4 step for ``R_k' = R_k hat(xi_k)``, ``omega' = a``.

    Args:
        rates: ``rates(t, R, omega) -> (xi, a, extra)`` with ``xi`` one body
            velocity per attitude row and ``a`` one acceleration per rate row.
        t, R, omega, h: current time, ``(N, 3, 3)`` attitudes, ``(n, 3)``
            rates and the step.

    Returns:
        ``(R_next, omega_next, first_stage)`` where ``first_stage`` is the
        ``(xi, a, extra)`` tuple evaluated at the start of the step.
    """
    first = rates(t, R, omega)
    xi1, a1, _ = first
    K1, L1 = h * xi1, h * a1

    T2 = 0.5 * K1
    xi2, a2, _ = rates(t + 0.5 * h, R @ exp_so3(T2), omega + 0.5 * L1)
    K2, L2 = h * right_jacobian_inv(T2, xi2), h * a2

    T3 = 0.5 * K2
    xi3, a3, _ = rates(t + 0.5 * h, R @ exp_so3(T3), omega + 0.5 * L2)
    K3, L3 = h * right_jacobian_inv(T3, xi3), h * a3

    xi4, a4, _ = rates(t + h, R @ exp_so3(K3), omega + L3)
    K4, L4 = h * right_jacobian_inv(K3, xi4), h * a4

    theta = (K1 + 2.0 * K2 + 2.0 * K3 + K4) / 6.0
    return R @ exp_so3(theta), omega + (L1 + 2.0 * L2 + 2.0 * L3 + L4) / 6.0, first


class ClosedLoop:
    """Right-hand side of the multi-agent closed loop for one scenario.

    Attitude rows are the ``n`` agents followed by the reference (objective
    III); rate rows are the agents only, the reference rate being analytic.

    In ``"solve"`` coupling the neighbour accelerations that objectives
    II/III feed forward are solved jointly with each agent's own, which is
    exact on a directed out-tree. On an undirected tree the joint system is
    rank deficient by three and generally inconsistent, so every agent but the
    tree centre follows its law exactly and the centre takes the minimum-norm
    least-squares acceleration. ``"lagged"`` uses the accelerations from the
    start of the previous step instead.
    """

    def __init__(self, cfg):
        self.cfg = cfg
        self.objective = cfg.objective
        self.n = cfg.n
        self.J = cfg.inertia.J
        self.J_inv = cfg.inertia.J_inv
        self.gains = cfg.gains
        self.alpha = cfg.gains.alpha_for(cfg.n)
        self.index = EdgeIndex(cfg.graph)
        self.reference = cfg.reference if cfg.objective == "III" else None
        self.lagged = cfg.coupling == "lagged"
        self.lag_accel = None
        self._free_rows = None
        if self.objective == "II":
            centre = graphs.tree_center(cfg.graph)
            rows = [k for k in range(3 * self.n) if k // 3 != centre]
            self._free_rows = np.array(rows)

    def full_rates(self, t, omega):
        """Rates and accelerations for every node, reference appended."""
        acc = np.zeros((self.n, 3))
        if self.reference is None:
            return omega, acc
        omega_all = np.vstack([omega, self.reference.omega(t)])
        acc_all = np.vstack([acc, self.reference.accel(t)])
        return omega_all, acc_all

    def solve_accelerations(self, R, omega_all, acc_all):
        """Joint solve of ``dw = b + C dw``; returns ``(dw, torque)``."""
        n = self.n
        J, J_inv = self.J, self.J_inv
        u0, _ = shaped_edges(R, omega_all, acc_all, self.index, self.gains, J, self.alpha)
        gyro = gyroscopic(omega_all[:n], J)
        b = (u0 - gyro) @ J_inv.T
        M = np.eye(3 * n) - transport_coupling(R, self.index)
        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(b))):
            return np.full((n, 3), np.nan), np.full((n, 3), np.nan)
        if self._free_rows is None:
            dw = np.linalg.solve(M, b.ravel())
        else:
            rows = self._free_rows
            dw = np.linalg.lstsq(M[rows], b.ravel()[rows], rcond=None)[0]
        dw = dw.reshape(n, 3)
        return dw, dw @ J.T + gyro

    def __call__(self, t, R, omega):
        n = self.n
        omega_all, acc_all = self.full_rates(t, omega)
        if self.objective == "I":
            u = objective1_edges(R, omega_all, self.index, self.gains, self.J, self.alpha)
            dw = (u - gyroscopic(omega, self.J)) @ self.J_inv.T
        elif self.lagged and self.lag_accel is not None:
            acc_all[:n] = self.lag_accel
            u, _ = shaped_edges(R, omega_all, acc_all, self.index, self.gains, self.J, self.alpha)
            dw = (u - gyroscopic(omega, self.J)) @ self.J_inv.T
        else:
            dw, u = self.solve_accelerations(R, omega_all, acc_all)
        xi = omega_all
        return xi, dw, u


@dataclass
class TrajectoryLog:
    """Sampled closed-loop trajectory.

    Node arrays include the reference as the last row for objective III.

    Attributes:
        t: ``(T,)`` sample times (s).
        R: ``(T, N, 3, 3)`` attitudes.
        omega: ``(T, N, 3)`` body rates (rad/s).
        accel: ``(T, N, 3)`` body accelerations (rad/s^2).
        torque: ``(T, n, 3)`` applied torques (N m).
    """

    name: str
    objective: str
    graph: graphs.CommGraph
    gains: ControllerGains
    J: np.ndarray
    step: float
    t: np.ndarray
    R: np.ndarray
    omega: np.ndarray
    accel: np.ndarray
    torque: np.ndarray
    consensus_threshold: float = np.deg2rad(1.0)

    @property
    def n(self):
        return self.graph.n

    def truncated(self, count):
        """First ``count`` samples as a new log."""
        return TrajectoryLog(
            self.name, self.objective, self.graph, self.gains, self.J, self.step,
            self.t[:count], self.R[:count], self.omega[:count], self.accel[:count],
            self.torque[:count], self.consensus_threshold,
        )


def step(loop, t, R, omega, h):
    """Advance the closed loop by ``h``; returns ``(R, omega, torque, accel)``.

    The torque and acceleration are those at the start of the step.

    Raises:
        SimulationError: if the new state is not finite.
    """
    if not h > 0:
        raise ValueError("step must be > 0")
    with np.errstate(all="ignore"):
        try:
            R_next, omega_next, (xi, dw, u) = rkmk4_step(loop, t, R, omega, h)
        except np.linalg.LinAlgError as err:
            raise SimulationError(f"linear solve failed near t = {t:.6g} s: {err}", t) from err
    if loop.lagged:
        loop.lag_accel = dw
    if not (np.all(np.isfinite(R_next)) and np.all(np.isfinite(omega_next))):
        raise SimulationError(
            f"state became non-finite at t = {t + h:.6g} s (gain/step mismatch?)", t + h
        )
    return R_next, omega_next, u, dw


def run_scenario(cfg):
    """Simulate ``cfg`` and return the full :class:`TrajectoryLog`.

    Deterministic: the same config always yields bit-identical arrays.

    Raises:
        SimulationError: with ``time`` set to the first failure time and
            ``log`` holding the samples before it.
    """
    cfg.validate()
    loop = ClosedLoop(cfg)
    n = cfg.n
    steps = int(round(cfg.duration / cfg.step))
    N = cfg.graph.size
    T = steps + 1
    t = np.arange(T) * cfg.step
    R_log = np.empty((T, N, 3, 3))
    w_log = np.empty((T, N, 3))
    a_log = np.empty((T, N, 3))
    u_log = np.empty((T, n, 3))

    R = cfg.R0.copy()
    if loop.reference is not None:
        R = np.concatenate([R, cfg.reference.R0[None]], axis=0)
    omega = cfg.omega0.copy()

    def record(k, R, omega, u, dw):
        omega_all, acc_all = loop.full_rates(t[k], omega)
        acc_all = acc_all.copy()
        acc_all[:n] = dw
        R_log[k], w_log[k], a_log[k], u_log[k] = R, omega_all, acc_all, u

    for k in range(steps):
        try:
            R_next, omega_next, u, dw = step(loop, t[k], R, omega, cfg.step)
        except SimulationError as err:
            _, dw, u = loop(t[k], R, omega)
            record(k, R, omega, u, dw)
            err.log = _make_log(cfg, t, R_log, w_log, a_log, u_log).truncated(k + 1)
            raise
        record(k, R, omega, u, dw)
        R, omega = R_next, omega_next
    _, dw, u = loop(t[steps], R, omega)
    record(steps, R, omega, u, dw)
    return _make_log(cfg, t, R_log, w_log, a_log, u_log)


def _make_log(cfg, t, R, omega, accel, torque):
    return TrajectoryLog(
        cfg.name, cfg.objective, cfg.graph, cfg.gains, cfg.inertia.J, cfg.step,
        t, R, omega, accel, torque, cfg.consensus_threshold,
    )


@dataclass
class InitialSetReport:
    """Membership of the initial condition in the objective's sufficient set.

    ``value`` is the left-hand side (worst pair for objectives II/III),
    ``bound`` the right-hand side and ``margin = bound - value``.
    """

    objective: str
    value: float
    bound: float
    pairs: list = field(default_factory=list)

    @property
    def margin(self):
        return self.bound - self.value

    @property
    def member(self):
        return self.value <= self.bound


def check_initial_set(cfg, warn=True):
    """Evaluate the region-of-attraction inequality at the initial state.

    Objective I uses the energy-like bound ``V1(0) <= Kp tau_L / 2``;
    objectives II/III check ``Kp psi_ij + alpha_i |sigma_i|_J^2 / 2 <= tau_L``
    for every agent ``i`` and neighbour ``j``. A violation only warns since the
    bound is sufficient, not necessary.
    """
    cfg.validate()
    gains, J = cfg.gains, cfg.inertia.J
    alpha = gains.alpha_for(cfg.n)
    bound_tau = tau_L(gains.P)
    if cfg.objective == "I":
        value = 0.5 * gains.Kp * sum(
            float(psi(cfg.R0[i], cfg.R0[j], gains.P)) for i, j in cfg.graph.edges()
        )
        value += 0.5 * float(np.einsum("i,ij,jk,ik->", alpha, cfg.omega0, J, cfg.omega0))
        report = InitialSetReport("I", value, 0.5 * gains.Kp * bound_tau)
    else:
        R_all, omega_all = cfg.R0, cfg.omega0
        if cfg.objective == "III":
            R_all = np.concatenate([R_all, cfg.reference.R0[None]], axis=0)
            omega_all = np.vstack([omega_all, cfg.reference.omega(0.0)])
        pairs = []
        for i in range(cfg.n):
            nbrs = cfg.graph.neighbors(i)
            s = sigma_of(R_all[i], omega_all[i], R_all[nbrs], omega_all[nbrs], gains.Kp, J, gains.P)
            kinetic = 0.5 * alpha[i] * float(s @ J @ s)
            for j in nbrs:
                lhs = gains.Kp * float(psi(R_all[i], R_all[j], gains.P)) + kinetic
                pairs.append((i, j, lhs))
        value = max(p[2] for p in pairs)
        report = InitialSetReport(cfg.objective, value, bound_tau, pairs)
    if warn and not report.member:
        warnings.warn(
            f"{cfg.name}: initial state outside the guaranteed set "
            f"(value {report.value:.4g} > bound {report.bound:.4g})",
            InitialSetWarning,
            stacklevel=2,
        )
    return report
