"""Closed-form torque-free motion of an axisymmetric body, J = diag(a, a, c)."""
import numpy as np

from attitude_consensus.lie import exp_so3


def free_precession(t, R0, w0, a, c):
    """Attitude and body rate at time ``t``.

    The body rate precesses about e3 at ``lam = (a - c) w3 / a`` and the
    attitude is ``exp(t nu h) R0 exp(t lam e3)`` where ``h`` is the inertial
    angular-momentum direction and ``nu = |J w0| / a``.
    """
    J = np.diag([a, a, c])
    lam = (a - c) * w0[2] / a
    Jw = J @ w0
    h = R0 @ Jw / np.linalg.norm(Jw)
    nu = np.linalg.norm(Jw) / a
    e3 = np.array([0.0, 0.0, 1.0])
    R = exp_so3(t * nu * h) @ R0 @ exp_so3(t * lam * e3)
    w = exp_so3(-lam * t * e3) @ w0
    return R, w


def integrate_free(R0, w0, J, h, T):
    """Torque-free motion with the simulator's RKMK4 step."""
    from attitude_consensus.simulator import rkmk4_step

    J_inv = np.linalg.inv(J)

    def rates(t, R, w):
        return w, (np.cross(J @ w[0], w[0]) @ J_inv.T)[None], None

    R, w = R0[None].copy(), w0[None].copy()
    steps = int(round(T / h))
    for k in range(steps):
        R, w, _ = rkmk4_step(rates, k * h, R, w, h)
    return R[0], w[0]
