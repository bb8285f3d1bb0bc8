"""Configuration and velocity errors between pairs of rigid bodies.

The configuration error uses the trace form ``0.5 tr(P (I - R_j^T R_i))``
with a diagonal, positive weight matrix ``P``. All functions broadcast over
leading axes so they can be evaluated edge-wise in one call.
"""
import numpy as np

from .lie import exp_so3, skew_vee


def error_weights(p=None):
    """Validate diagonal error weights and return them as a ``(3,)`` array.

    Accepts ``None`` (identity), three diagonal entries, or a diagonal 3x3
    matrix.

    Raises:
        ValueError: on non-positive entries or non-zero off-diagonal terms.
    """
    if p is None:
        return np.ones(3)
    p = np.asarray(p, dtype=float)
    if p.shape == (3, 3):
        if np.any(np.abs(p - np.diag(np.diag(p))) > 0):
            raise ValueError("error weight matrix P must be diagonal")
        p = np.diag(p).copy()
    if p.shape != (3,):
        raise ValueError(f"error weights must have 3 entries, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise ValueError(f"error weights must be finite and > 0, got {p}")
    return p


def relative_rotation(R_i, R_j):
    """Right attitude error ``R_ij = R_j^T R_i``."""
    return np.swapaxes(np.asarray(R_j, dtype=float), -1, -2) @ np.asarray(R_i, dtype=float)


def psi(R_i, R_j, P=None):
    """Tracking error ``0.5 tr(P (I - R_ij))``; zero iff ``R_i == R_j``.

    Evaluated as ``0.25 sum_k p_k |R_i e_k - R_j e_k|^2``, equal for rotations,
    which avoids the cancellation in ``1 - (R_ij)_kk`` near consensus and is
    never negative.
    """
    p = error_weights(P)
    D = np.asarray(R_i, dtype=float) - np.asarray(R_j, dtype=float)
    return 0.25 * np.sum(p * np.sum(D * D, axis=-2), axis=-1)


def psi_gradient(R_i, R_j, P=None):
    """Body-frame gradient of :func:`psi` w.r.t. ``R_i``: ``vee(skew(P R_ij))``.

    Along ``R_i exp(t hat(d))`` the derivative of psi equals
    ``psi_gradient . d``.
    """
    p = error_weights(P)
    R_ij = relative_rotation(R_i, R_j)
    return skew_vee(p[:, None] * R_ij)


def velocity_error(R_i, omega_i, R_j, omega_j):
    """Right velocity error in the body frame of i: ``w_i - R_ij^T w_j``."""
    R_ij = relative_rotation(R_i, R_j)
    transported = np.einsum("...ki,...k->...i", R_ij, np.asarray(omega_j, dtype=float))
    return np.asarray(omega_i, dtype=float) - transported


def gradient_rate_from_relative(R_ij, omega_ij, P=None):
    """``0.5 (tr(R_ij^T P) I - R_ij^T P) omega_ij`` for a given relative rotation."""
    p = error_weights(P)
    R_ij = np.asarray(R_ij, dtype=float)
    omega_ij = np.asarray(omega_ij, dtype=float)
    RtP = np.swapaxes(R_ij, -1, -2) * p  # scales columns: R_ij^T @ diag(p)
    tr = np.trace(RtP, axis1=-2, axis2=-1)
    return 0.5 * (tr[..., None] * omega_ij - np.einsum("...ij,...j->...i", RtP, omega_ij))


def gradient_rate(R_i, R_j, P, omega_ij):
    """Time derivative of :func:`psi_gradient` when ``R_ij`` moves with ``omega_ij``."""
    return gradient_rate_from_relative(relative_rotation(R_i, R_j), omega_ij, P)


def sigma(R_i, omega_i, R_nbrs, omega_nbrs, Kp, J, P=None):
    """Composite error of one agent against its neighbours.

    ``sum_j (w_i - R_ij^T w_j) + Kp J^{-1} sum_j psi_gradient(R_i, R_j)``.
    The neighbour arrays are stacked along the first axis; an empty stack
    gives zero.
    """
    R_nbrs = np.asarray(R_nbrs, dtype=float).reshape(-1, 3, 3)
    omega_nbrs = np.asarray(omega_nbrs, dtype=float).reshape(-1, 3)
    if len(R_nbrs) == 0:
        return np.zeros(3)
    vel = velocity_error(R_i, omega_i, R_nbrs, omega_nbrs).sum(axis=0)
    grad = psi_gradient(R_i, R_nbrs, P).sum(axis=0)
    return vel + Kp * np.linalg.solve(np.asarray(J, dtype=float), grad)


def tau_L(P=None):
    """Smallest non-zero critical value of psi: ``min(p1+p2, p2+p3, p1+p3)``."""
    p = error_weights(P)
    return float(min(p[0] + p[1], p[1] + p[2], p[0] + p[2]))


# I, and the pi-rotations about the three body axes
CRITICAL_SET = (np.eye(3),) + tuple(exp_so3(np.pi * e) for e in np.eye(3))
