"""Lyapunov monitors and consensus metrics over states and logged trajectories."""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .controllers import sigma_history
from .graph import leaves
from .lie import rotation_angle
from .tracking_error import psi, psi_gradient, relative_rotation, velocity_error


def lyapunov_v1(R, omega, graph, gains, J):
    """``0.5 Kp sum_ij a_ij psi_ij + 0.5 sum_i alpha_i w_i^T J w_i``.

    ``R`` is ``(..., n, 3, 3)`` and ``omega`` ``(..., n, 3)``; leading axes
    (e.g. time) broadcast. Each undirected edge is counted in both directions.
    """
    if graph.directed:
        raise ValueError("V1 is defined on undirected graphs")
    R = np.asarray(R, dtype=float)
    omega = np.asarray(omega, dtype=float)
    pairs = np.array(graph.edges(), dtype=int).reshape(-1, 2)
    potential = psi(R[..., pairs[:, 0], :, :], R[..., pairs[:, 1], :, :], gains.P).sum(axis=-1)
    alpha = gains.alpha_for(graph.n)
    kinetic = np.einsum("n,...ni,ij,...nj->...", alpha, omega, np.asarray(J, float), omega)
    return 0.5 * gains.Kp * potential + 0.5 * kinetic


def lyapunov_v2_pair(leaf, parent, gains, J, alpha=1.0):
    """``Kp psi(R_k, R_l) + 0.5 alpha_k sigma_k^T J sigma_k`` for a single-neighbour agent.

    Args:
        leaf, parent: objects with ``R`` and ``omega`` (e.g. AgentState);
            arrays may carry leading axes.
        alpha: the leaf's ``alpha``.
    """
    J = np.asarray(J, dtype=float)
    w_kl = velocity_error(leaf.R, leaf.omega, parent.R, parent.omega)
    grad = psi_gradient(leaf.R, parent.R, gains.P)
    sig = w_kl + gains.Kp * np.einsum("ij,...j->...i", np.linalg.inv(J), grad)
    return gains.Kp * psi(leaf.R, parent.R, gains.P) + 0.5 * alpha * np.einsum(
        "...i,ij,...j->...", sig, J, sig
    )


def certificate_pairs(graph):
    """``(agent, neighbour)`` pairs monitored with V2.

    Leaves of an undirected tree with their only neighbour, or every agent of
    a directed out-tree with its parent.
    """
    if graph.directed:
        return [(i, graph.neighbors(i)[0]) for i in range(graph.n) if graph.neighbors(i)]
    return [(k, graph.neighbors(k)[0]) for k in leaves(graph)]


def v1_history(log):
    return lyapunov_v1(log.R, log.omega, log.graph, log.gains, log.J)


def v2_history(log):
    """Returns ``(pairs, V)`` with ``V`` of shape ``(T, len(pairs))``."""
    pairs = certificate_pairs(log.graph)
    alpha = log.gains.alpha_for(log.n)
    cols = []
    for k, l in pairs:
        leaf = _View(log.R[:, k], log.omega[:, k])
        parent = _View(log.R[:, l], log.omega[:, l])
        cols.append(lyapunov_v2_pair(leaf, parent, log.gains, log.J, alpha[k]))
    return pairs, np.stack(cols, axis=1) if cols else np.zeros((len(log.t), 0))


class _View(NamedTuple):
    R: np.ndarray
    omega: np.ndarray


@dataclass(frozen=True)
class Violation:
    """A sample where a certificate grew by more than the tolerance."""

    step: int
    t: float
    increase: float
    tolerance: float
    pair: tuple | None = None


def _increases(values, t, rel_tol, pair=None):
    values = np.asarray(values, dtype=float)
    inc = np.diff(values)
    tol = rel_tol * (1.0 + np.abs(values[:-1]))
    bad = np.flatnonzero(~(inc <= tol))
    return [Violation(int(k + 1), float(t[k + 1]), float(inc[k]), float(tol[k]), pair) for k in bad]


def monotonicity_report(log, which="V1", rel_tol=1e-8):
    """Every step where V1 (or a leaf-pair V2) increased by more than
    ``rel_tol * (1 + V)``; NaN increments count as violations.
    """
    if which == "V1":
        if log.objective != "I":
            raise ValueError("V1 monitors objective I logs")
        return _increases(v1_history(log), log.t, rel_tol)
    if which == "V2":
        if log.objective not in ("II", "III"):
            raise ValueError("V2 monitors objective II/III logs")
        pairs, V = v2_history(log)
        out = []
        for c, pair in enumerate(pairs):
            out.extend(_increases(V[:, c], log.t, rel_tol, pair))
        return sorted(out, key=lambda v: (v.step, v.pair))
    raise ValueError(f"which must be 'V1' or 'V2', got {which!r}")


def consensus_metrics(R, omega, P=None):
    """Max pairwise psi, geodesic angle (rad) and transported velocity gap (rad/s).

    Leading axes of ``R (..., n, 3, 3)`` and ``omega (..., n, 3)`` are kept.

    Raises:
        ValueError: if fewer than two bodies are given.
    """
    R = np.asarray(R, dtype=float)
    omega = np.asarray(omega, dtype=float)
    n = R.shape[-3]
    if n < 2:
        raise ValueError("consensus metrics need at least two bodies")
    i, j = np.array([(a, b) for a in range(n) for b in range(n) if a != b]).T
    Ri, Rj = R[..., i, :, :], R[..., j, :, :]
    psis = psi(Ri, Rj, P)
    angles = rotation_angle(relative_rotation(Ri, Rj))
    gaps = np.linalg.norm(velocity_error(Ri, omega[..., i, :], Rj, omega[..., j, :]), axis=-1)
    return psis.max(axis=-1), angles.max(axis=-1), gaps.max(axis=-1)


@dataclass
class DiagnosticsSample:
    """Diagnostics at one time; angles in rad, rates in rad/s.

    ``V1`` is set for objective I, ``sigma_norm`` for II/III and the tracking
    errors for III.
    """

    t: float
    max_pairwise_psi: float
    max_pairwise_angle: float
    max_velocity_disagreement: float
    V1: float | None = None
    sigma_norm: np.ndarray | None = None
    tracking_angle: float | None = None
    tracking_rate: float | None = None


def diagnostics_series(log):
    """Diagnostics for every sample as a dict of arrays.

    Keys: ``t``, ``max_pairwise_psi``, ``max_pairwise_angle``,
    ``max_velocity_disagreement`` and, depending on the objective, ``V1``,
    ``sigma_norm`` ``(T, n)``, ``tracking_angle`` and ``tracking_rate``
    (worst agent against the reference). Objective III pairwise metrics
    include the reference node.
    """
    out = {"t": log.t}
    keys = ("max_pairwise_psi", "max_pairwise_angle", "max_velocity_disagreement")
    if log.R.shape[1] < 2:
        metrics = [np.zeros(len(log.t))] * 3
    else:
        metrics = consensus_metrics(log.R, log.omega, log.gains.P)
    out.update(zip(keys, metrics))
    if log.objective == "I":
        out["V1"] = v1_history(log)
    else:
        sigma, _ = sigma_history(log)
        out["sigma_norm"] = np.linalg.norm(sigma, axis=-1)
    if log.objective == "III":
        n = log.n
        R_r, w_r = log.R[:, n : n + 1], log.omega[:, n : n + 1]
        Ra, wa = log.R[:, :n], log.omega[:, :n]
        out["tracking_angle"] = rotation_angle(relative_rotation(Ra, R_r)).max(axis=-1)
        out["tracking_rate"] = np.linalg.norm(velocity_error(Ra, wa, R_r, w_r), axis=-1).max(axis=-1)
    return out


def sample_at(series, k):
    """Pick sample ``k`` from :func:`diagnostics_series` output."""
    def get(key):
        v = series.get(key)
        return None if v is None else v[k]

    sig = get("sigma_norm")
    return DiagnosticsSample(
        t=float(series["t"][k]),
        max_pairwise_psi=float(series["max_pairwise_psi"][k]),
        max_pairwise_angle=float(series["max_pairwise_angle"][k]),
        max_velocity_disagreement=float(series["max_velocity_disagreement"][k]),
        V1=None if get("V1") is None else float(get("V1")),
        sigma_norm=None if sig is None else np.array(sig),
        tracking_angle=None if get("tracking_angle") is None else float(get("tracking_angle")),
        tracking_rate=None if get("tracking_rate") is None else float(get("tracking_rate")),
    )


def time_to_consensus(t, angle, threshold=np.deg2rad(1.0)):
    """First time the max pairwise angle drops below ``threshold``; None if never."""
    below = np.flatnonzero(np.asarray(angle) < threshold)
    return float(np.asarray(t)[below[0]]) if below.size else None
