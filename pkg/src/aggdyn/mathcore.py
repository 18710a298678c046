"""Small dense algebra shared by the rest of the package.

Vectors are plain ``numpy`` arrays of shape ``(3,)``. Quaternions are
scalar-first arrays ``(q0, q1, q2, q3)`` describing active body-to-world
rotations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

QUAT_TOLERANCE = 1e-9
PIVOT_RELATIVE_TOLERANCE = 1e-12
CONDITION_WARNING = 1e12

_I3 = np.eye(3)


class InvalidOrientationError(ValueError):
    """A quaternion used as a rotation is not unit length."""


class SingularMatrixError(ArithmeticError):
    """Elimination hit a pivot too small to divide by."""


class IllConditionedWarning(RuntimeWarning):
    """Estimated condition number of a solved system is very large."""


def vec3(values) -> np.ndarray:
    v = np.asarray(values, dtype=float).reshape(3)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector {v}")
    return v


def cross(a, b) -> np.ndarray:
    a0, a1, a2 = a
    b0, b1, b2 = b
    return np.array([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])


def skew(v) -> np.ndarray:
    """Matrix ``S`` with ``S @ x == cross(v, x)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


# --------------------------------------------------------------------------
# quaternions


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(q @ q))
    if n == 0.0 or not math.isfinite(n):
        raise InvalidOrientationError(f"cannot normalize quaternion {q}")
    return q / n


def quat_mul(p, q) -> np.ndarray:
    """Hamilton product ``p ⊗ q``."""
    p0, p1, p2, p3 = p
    q0, q1, q2, q3 = q
    return np.array(
        [
            p0 * q0 - p1 * q1 - p2 * q2 - p3 * q3,
            p0 * q1 + p1 * q0 + p2 * q3 - p3 * q2,
            p0 * q2 - p1 * q3 + p2 * q0 + p3 * q1,
            p0 * q3 + p1 * q2 - p2 * q1 + p3 * q0,
        ]
    )


def quat_conj(q) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]], dtype=float)


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix of ``q``; the quaternion is normalized on the fly."""
    w, x, y, z = q
    s = 2.0 / (w * w + x * x + y * y + z * z)
    xx, yy, zz = s * x * x, s * y * y, s * z * z
    xy, xz, yz = s * x * y, s * x * z, s * y * z
    wx, wy, wz = s * w * x, s * w * y, s * w * z
    return np.array(
        [
            [1.0 - yy - zz, xy - wz, xz + wy],
            [xy + wz, 1.0 - xx - zz, yz - wx],
            [xz - wy, yz + wx, 1.0 - xx - yy],
        ]
    )


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    h = 0.5 * angle
    return np.concatenate(([math.cos(h)], math.sin(h) * axis))


def quat_exp(rotvec) -> np.ndarray:
    """Quaternion of the rotation vector ``rotvec`` (axis times angle)."""
    rotvec = np.asarray(rotvec, dtype=float)
    t = math.sqrt(float(rotvec @ rotvec))
    if t < 1e-4:
        # sin(t/2)/t to O(t^4)
        k = 0.5 - t * t / 48.0
    else:
        k = math.sin(0.5 * t) / t
    return np.concatenate(([math.cos(0.5 * t)], k * rotvec))


def quat_rate(q, omega_body) -> np.ndarray:
    """Kinematic rate ``½ q ⊗ (0, ω)`` for a body-frame angular rate."""
    return 0.5 * quat_mul(q, np.concatenate(([0.0], omega_body)))


def quat_rotate(q, v) -> np.ndarray:
    """Rotate ``v`` by the unit quaternion ``q``.

    Raises:
        InvalidOrientationError: if ``|q|`` differs from 1 by more than 1e-9.
    """
    q = np.asarray(q, dtype=float)
    if abs(math.sqrt(float(q @ q)) - 1.0) > QUAT_TOLERANCE:
        raise InvalidOrientationError(f"quaternion {q} is not normalized")
    u = q[1:]
    t = 2.0 * cross(u, v)
    return np.asarray(v, dtype=float) + q[0] * t + cross(u, t)


def rotation_angle_between(qa, qb) -> float:
    """Angle of the relative rotation between two orientations."""
    d = abs(float(quat_normalize(qa) @ quat_normalize(qb)))
    return 2.0 * math.acos(min(1.0, d))


def left_jacobian(theta) -> np.ndarray:
    """Left Jacobian of SO(3) at rotation vector ``theta``.

    ``d/dt Exp(theta) = [J(theta) theta_dot]x Exp(theta)``.
    """
    a, b, _, _ = _jacobian_coefficients(theta)
    S = skew(theta)
    return _I3 + a * S + b * (S @ S)


def left_jacobian_rate(theta, theta_dot) -> np.ndarray:
    """``(d/dt J(theta)) @ theta_dot`` along the path ``theta_dot``."""
    theta = np.asarray(theta, dtype=float)
    theta_dot = np.asarray(theta_dot, dtype=float)
    _, b, da_t, db_t = _jacobian_coefficients(theta)
    s = float(theta @ theta_dot)
    c = cross(theta, theta_dot)
    return da_t * s * c + db_t * s * cross(theta, c) + b * cross(theta_dot, c)


def _jacobian_coefficients(theta):
    # a = (1-cos t)/t^2, b = (t-sin t)/t^3 and a'/t, b'/t
    t2 = float(np.dot(theta, theta))
    if t2 < 0.09:
        t4 = t2 * t2
        t6 = t4 * t2
        t8 = t4 * t4
        a = 0.5 - t2 / 24 + t4 / 720 - t6 / 40320 + t8 / 3628800
        b = 1 / 6 - t2 / 120 + t4 / 5040 - t6 / 362880 + t8 / 39916800
        da_t = -1 / 12 + t2 / 180 - t4 / 6720 + t6 / 453600 - t8 / 47900160
        db_t = -1 / 60 + t2 / 1260 - t4 / 60480 + t6 / 4989600 - t8 / 622702080
        return a, b, da_t, db_t
    t = math.sqrt(t2)
    s, c = math.sin(t), math.cos(t)
    a = (1.0 - c) / t2
    b = (t - s) / (t2 * t)
    da_t = (t * s - 2.0 * (1.0 - c)) / (t2 * t2)
    db_t = ((1.0 - c) * t - 3.0 * (t - s)) / (t2 * t2 * t)
    return a, b, da_t, db_t


# --------------------------------------------------------------------------
# wrenches


@dataclass(frozen=True, eq=False)
class Wrench:
    """Force and moment acting at a point, world frame."""

    force: np.ndarray
    moment: np.ndarray

    @classmethod
    def from_array(cls, w) -> Wrench:
        w = np.asarray(w, dtype=float)
        return cls(w[:3].copy(), w[3:6].copy())

    def as_array(self) -> np.ndarray:
        return np.concatenate((self.force, self.moment))

    def __neg__(self) -> Wrench:
        return Wrench(-self.force, -self.moment)


@dataclass(frozen=True, eq=False)
class ConnectionAccel:
    """Linear and angular acceleration of a connection frame, world frame."""

    linear: np.ndarray
    angular: np.ndarray

    @classmethod
    def from_array(cls, w) -> ConnectionAccel:
        w = np.asarray(w, dtype=float)
        return cls(w[:3].copy(), w[3:6].copy())

    def as_array(self) -> np.ndarray:
        return np.concatenate((self.linear, self.angular))


def wrench_shift(w: Wrench, from_point, to_point) -> Wrench:
    """Re-reference ``w`` from ``from_point`` to ``to_point``."""
    lever = np.asarray(from_point, dtype=float) - np.asarray(to_point, dtype=float)
    return Wrench(w.force.copy(), w.moment + cross(lever, w.force))


# --------------------------------------------------------------------------
# linear solve


def solve_dense(A, b) -> np.ndarray:
    """Solve ``A x = b`` by LU factorization with row pivoting.

    Raises:
        SingularMatrixError: when a pivot is below 1e-12 times the largest
            entry of ``A``.

    Warns:
        IllConditionedWarning: if the estimated 1-norm condition number
            exceeds 1e12.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"rhs length {b.shape[0]} does not match {A.shape[0]}")
    n = A.shape[0]
    if n == 0:
        return b.copy()
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    scale = float(np.max(np.abs(A)))
    if scale == 0.0:
        raise SingularMatrixError("matrix is identically zero")
    lu, piv, info = lapack.dgetrf(A)
    pivots = np.abs(np.diag(lu))
    k = int(np.argmin(pivots))
    if info > 0 or pivots[k] < PIVOT_RELATIVE_TOLERANCE * scale:
        raise SingularMatrixError(
            f"pivot {k} has magnitude {pivots[k]:.3e} (matrix scale {scale:.3e})"
        )
    x, info = lapack.dgetrs(lu, piv, b)
    anorm = float(np.max(np.sum(np.abs(A), axis=0)))
    rcond, _ = lapack.dgecon(lu, anorm, norm="1")
    if rcond * CONDITION_WARNING < 1.0:
        warnings.warn(
            f"estimated condition number {1.0 / max(rcond, 1e-300):.3e}",
            IllConditionedWarning,
            stacklevel=2,
        )
    return x
