"""SO(3) / so(3) primitives.

Vectors in R^3 are identified with so(3) through the hat map, so every
algebra quantity (body rates, torques, gradients) is a plain ``(3,)`` array.
Rotations are ``(3, 3)`` arrays. Most functions broadcast over leading axes.
"""
import numpy as np

ORTHONORMALITY_TOL = 1e-9
SKEW_TOL = 1e-9
SMALL_ANGLE = 1e-4


class RotationError(ValueError):
    """Raised when a matrix is not (close enough to) a rotation."""


class SkewError(ValueError):
    """Raised when vee() receives a matrix that is not skew-symmetric."""


def hat(v):
    """Map ``(..., 3)`` vectors to ``(..., 3, 3)`` skew matrices, hat(v) @ w == v x w."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def cross(a, b):
    """Broadcasting cross product, cheaper than np.cross for small stacks."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def skew_vee(M):
    """vee of the skew-symmetric part of ``M``, no skewness check."""
    M = np.asarray(M, dtype=float)
    return 0.5 * np.stack(
        [
            M[..., 2, 1] - M[..., 1, 2],
            M[..., 0, 2] - M[..., 2, 0],
            M[..., 1, 0] - M[..., 0, 1],
        ],
        axis=-1,
    )


def vee(M, tol=SKEW_TOL):
    """Inverse of :func:`hat`.

    Raises:
        SkewError: if ``M`` deviates from skew-symmetry by more than ``tol``
            (max-abs of ``M + M^T``).
    """
    M = np.asarray(M, dtype=float)
    asym = np.max(np.abs(M + np.swapaxes(M, -1, -2)))
    if not asym <= tol:
        raise SkewError(f"matrix is not skew-symmetric (|M + M^T|_max = {asym:.3e})")
    return skew_vee(M)


def _rodrigues_coeffs(theta):
    """Return sin(t)/t and (1 - cos t)/t^2 with series branches near zero."""
    theta = np.asarray(theta, dtype=float)
    small = theta < SMALL_ANGLE
    t2 = theta * theta
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - t2 / 6.0 + t2 * t2 / 120.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - t2 / 24.0 + t2 * t2 / 720.0, (1.0 - np.cos(safe)) / (safe * safe))
    return a, b


def exp_so3(v):
    """Exponential map so(3) -> SO(3) (Rodrigues), broadcasting over ``(..., 3)``."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1)
    a, b = _rodrigues_coeffs(theta)
    K = hat(v)
    return np.eye(3) + a[..., None, None] * K + b[..., None, None] * (K @ K)


def rotation_angle(R):
    """Geodesic angle in [0, pi] of ``(..., 3, 3)`` rotations.

    Uses atan2(sin, cos) so it stays accurate near both 0 and pi.
    """
    R = np.asarray(R, dtype=float)
    s = np.linalg.norm(skew_vee(R), axis=-1)
    c = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    return np.arctan2(s, c)


def _canonical_sign(axis):
    # first component that is not ~0 made positive
    for comp in axis:
        if abs(comp) > 1e-12:
            return axis if comp > 0 else -axis
    return axis


def log_so3(R):
    """Logarithm SO(3) -> so(3) of a single rotation, with norm in [0, pi].

    Near pi the axis is taken from the column of ``R + I`` with the largest
    diagonal entry and sign-normalized (first nonzero component positive).
    """
    R = np.asarray(R, dtype=float)
    theta = float(rotation_angle(R))
    w = skew_vee(R)
    if theta < SMALL_ANGLE:
        # sin(t)/t series; w = sin(t) * axis
        return w * (1.0 + theta * theta / 6.0 + 7.0 * theta**4 / 360.0)
    if np.pi - theta > 1e-6:
        return w * (theta / np.sin(theta))
    B = 0.5 * (R + np.eye(3))  # = cos^2(t/2) I + sin^2(t/2) a a^T ... ~ a a^T at pi
    k = int(np.argmax(np.diag(B)))
    axis = B[:, k] / np.sqrt(B[k, k])
    axis = axis / np.linalg.norm(axis)
    if theta < np.pi:
        # keep the sign consistent with the (tiny) skew part when it carries information
        if np.dot(axis, w) < 0:
            axis = -axis
        if np.linalg.norm(w) < 1e-12:
            axis = _canonical_sign(axis)
    else:
        axis = _canonical_sign(axis)
    return theta * axis


def right_jacobian_inv(theta_vec, xi):
    """Apply dexp^{-1} for right-trivialised increments.

    If ``R(t) = R0 exp(Theta(t))`` has body rate ``xi`` then
    ``dTheta/dt = right_jacobian_inv(Theta, xi)``. Broadcasts over ``(..., 3)``.
    """
    theta_vec = np.asarray(theta_vec, dtype=float)
    xi = np.asarray(xi, dtype=float)
    theta = np.linalg.norm(theta_vec, axis=-1)
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    # 1/t^2 - (1 + cos t) / (2 t sin t); series 1/12 + t^2/720
    coef = np.where(
        small,
        1.0 / 12.0 + theta * theta / 720.0,
        1.0 / (safe * safe) - (1.0 + np.cos(safe)) / (2.0 * safe * np.sin(safe)),
    )
    c1 = cross(theta_vec, xi)
    c2 = cross(theta_vec, c1)
    return xi + 0.5 * c1 + coef[..., None] * c2


def adjoint_action(R, v):
    """Ad_R(v) on SO(3), i.e. ``R @ v``."""
    return np.einsum("...ij,...j->...i", np.asarray(R, dtype=float), np.asarray(v, dtype=float))


def orthonormality_error(R):
    """Frobenius norm of ``R^T R - I`` (broadcasts)."""
    R = np.asarray(R, dtype=float)
    E = np.swapaxes(R, -1, -2) @ R - np.eye(3)
    return np.sqrt(np.sum(E * E, axis=(-2, -1)))


def check_rotation(R, tol=ORTHONORMALITY_TOL):
    """Validate and return ``R`` as a float rotation array.

    Raises:
        RotationError: on wrong shape, non-finite entries, drift above ``tol``
            or non-positive determinant.
    """
    R = np.array(R, dtype=float)
    if R.shape[-2:] != (3, 3):
        raise RotationError(f"expected (..., 3, 3) array, got shape {R.shape}")
    if not np.all(np.isfinite(R)):
        raise RotationError("rotation has non-finite entries")
    err = np.max(orthonormality_error(R))
    if err > tol:
        raise RotationError(f"|R^T R - I|_F = {err:.3e} exceeds {tol:.1e}")
    if np.any(np.linalg.det(R) <= 0):
        raise RotationError("determinant is not positive")
    return R


def project_to_so3(M, max_distance=0.1):
    """Nearest rotation in Frobenius norm (polar factor via SVD).

    Raises:
        RotationError: if ``det(M) <= 0`` or ``M`` is farther than
            ``max_distance`` from its projection.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3) or not np.all(np.isfinite(M)):
        raise RotationError("expected a finite 3x3 matrix")
    if np.linalg.det(M) <= 0:
        raise RotationError("cannot project a reflected or singular matrix onto SO(3)")
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    dist = np.linalg.norm(M - R)
    if dist > max_distance:
        raise RotationError(f"matrix is {dist:.3g} away from SO(3) (limit {max_distance})")
    return R


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def from_euler_zyx(roll, pitch, yaw):
    """Rotation ``Rz(yaw) @ Ry(pitch) @ Rx(roll)`` from radians."""
    return _rz(yaw) @ _ry(pitch) @ _rx(roll)


def to_euler_zyx(R):
    """Return ``(roll, pitch, yaw)`` in radians for the Z-Y-X convention.

    At gimbal lock (|pitch| = pi/2) roll is set to zero and the combined
    angle is assigned to yaw. Broadcasts over leading axes.
    """
    R = np.asarray(R, dtype=float)
    sp = np.clip(-R[..., 2, 0], -1.0, 1.0)
    pitch = np.arcsin(sp)
    locked = np.abs(sp) > 1.0 - 1e-12
    roll = np.where(locked, 0.0, np.arctan2(R[..., 2, 1], R[..., 2, 2]))
    yaw = np.where(
        locked,
        np.arctan2(-R[..., 0, 1], R[..., 1, 1]),
        np.arctan2(R[..., 1, 0], R[..., 0, 0]),
    )
    # atan2 returns -pi for a negative-zero argument; keep angles in (-pi, pi]
    roll = np.where(roll <= -np.pi, np.pi, roll)
    yaw = np.where(yaw <= -np.pi, np.pi, yaw)
    if np.ndim(roll) == 0:
        return float(roll), float(pitch), float(yaw)
    return roll, pitch, yaw
