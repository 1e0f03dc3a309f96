"""Poses, rotations and the Euler-rate map used by the rest of the package.

Attitude is yaw/pitch/roll (theta, alpha, phi) with world z up. The rotation
is Rz(theta) @ Ry(-alpha) @ Rx(phi), so positive pitch points the body x axis
uphill and positive roll drops the right side. All angles live in (-pi, pi].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GimbalLock

GIMBAL_EPS = 1e-6


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    return np.pi - (np.pi - np.asarray(a)) % (2.0 * np.pi)


@dataclass
class Pose6D:
    """Position plus yaw/pitch/roll attitude."""

    position: np.ndarray
    theta: float
    alpha: float
    phi: float

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.theta = float(wrap_angle(self.theta))
        self.alpha = float(wrap_angle(self.alpha))
        self.phi = float(wrap_angle(self.phi))

    @property
    def angles(self) -> np.ndarray:
        return np.array([self.theta, self.alpha, self.phi])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.angles])


@dataclass
class RigidTransform:
    """Proper rigid motion p -> rotation @ p + translation."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)


def build_rotation(theta, alpha, phi) -> np.ndarray:
    """World-from-body rotation for yaw/pitch/roll.

    Accepts scalars or broadcastable arrays and returns (..., 3, 3).
    """
    theta, alpha, phi = np.broadcast_arrays(
        np.asarray(theta, dtype=float),
        np.asarray(alpha, dtype=float),
        np.asarray(phi, dtype=float),
    )
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    cp, sp = np.cos(phi), np.sin(phi)
    rows = [
        [ct * ca, -ct * sa * sp - st * cp, -ct * sa * cp + st * sp],
        [st * ca, -st * sa * sp + ct * cp, -st * sa * cp - ct * sp],
        [sa, ca * sp, ca * cp],
    ]
    out = np.empty(theta.shape + (3, 3))
    for i in range(3):
        for j in range(3):
            out[..., i, j] = rows[i][j]
    return out


def rotation_to_euler(rot: np.ndarray) -> tuple[float, float, float]:
    """Recover (theta, alpha, phi) from a rotation built by build_rotation."""
    sa = float(np.clip(rot[2, 0], -1.0, 1.0))
    alpha = float(np.arcsin(sa))
    if abs(np.cos(alpha)) <= GIMBAL_EPS:
        raise GimbalLock("pitch at +-90 deg, yaw and roll are not separable")
    theta = float(np.arctan2(rot[1, 0], rot[0, 0]))
    phi = float(np.arctan2(rot[2, 1], rot[2, 2]))
    return theta, alpha, phi


def euler_rate_matrix(alpha, phi) -> np.ndarray:
    """Map body angular velocity (wx, wy, wz) to (dtheta, dalpha, dphi).

    Rows are ordered yaw, pitch, roll and satisfy dR/dt = R @ skew(omega)
    for the convention of build_rotation. Raises GimbalLock when
    |cos(alpha)| <= 1e-6.
    """
    alpha, phi = np.broadcast_arrays(
        np.asarray(alpha, dtype=float), np.asarray(phi, dtype=float)
    )
    ca, sa = np.cos(alpha), np.sin(alpha)
    if np.any(np.abs(ca) <= GIMBAL_EPS):
        raise GimbalLock("pitch at +-90 deg, Euler rates undefined")
    cp, sp = np.cos(phi), np.sin(phi)
    ta = sa / ca
    zeros = np.zeros_like(ca)
    ones = np.ones_like(ca)
    rows = [
        [zeros, sp / ca, cp / ca],
        [zeros, -cp, sp],
        [ones, -sp * ta, -cp * ta],
    ]
    out = np.empty(alpha.shape + (3, 3))
    for i in range(3):
        for j in range(3):
            out[..., i, j] = rows[i][j]
    return out


def rotation_derivatives(theta: float, alpha: float, phi: float):
    """Partial derivatives of build_rotation wrt each angle.

    Returns (dR_dtheta, dR_dalpha, dR_dphi) as 3x3 arrays, computed from the
    factored form Rz(theta) @ Ry(-alpha) @ Rx(phi).
    """
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    cp, sp = np.cos(phi), np.sin(phi)
    rz = np.array([[ct, -st, 0.0], [st, ct, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[ca, 0.0, -sa], [0.0, 1.0, 0.0], [sa, 0.0, ca]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    drz = np.array([[-st, -ct, 0.0], [ct, -st, 0.0], [0.0, 0.0, 0.0]])
    dry = np.array([[-sa, 0.0, -ca], [0.0, 0.0, 0.0], [ca, 0.0, -sa]])
    drx = np.array([[0.0, 0.0, 0.0], [0.0, -sp, -cp], [0.0, cp, -sp]])
    return drz @ ry @ rx, rz @ dry @ rx, rz @ ry @ drx


def euler_rate_derivatives(alpha: float, phi: float):
    """Partials of euler_rate_matrix wrt pitch and roll (yaw does not enter)."""
    ca, sa = np.cos(alpha), np.sin(alpha)
    if abs(ca) <= GIMBAL_EPS:
        raise GimbalLock("pitch at +-90 deg, Euler rates undefined")
    cp, sp = np.cos(phi), np.sin(phi)
    ta = sa / ca
    sec2 = 1.0 / (ca * ca)
    de_da = np.array([
        [0.0, sp * sa * sec2, cp * sa * sec2],
        [0.0, 0.0, 0.0],
        [0.0, -sp * sec2, -cp * sec2],
    ])
    de_dp = np.array([
        [0.0, cp / ca, -sp / ca],
        [0.0, sp, cp],
        [0.0, -cp * ta, sp * ta],
    ])
    return de_da, de_dp


def pose_rotation(pose: Pose6D) -> np.ndarray:
    return build_rotation(pose.theta, pose.alpha, pose.phi)


def pose_to_transform(pose: Pose6D) -> RigidTransform:
    return RigidTransform(pose_rotation(pose), pose.position.copy())


def compose_transform(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Composition a after b: (a o b)(p) = a(b(p))."""
    return RigidTransform(a.rotation @ b.rotation,
                          a.rotation @ b.translation + a.translation)


def invert_transform(t: RigidTransform) -> RigidTransform:
    rt = t.rotation.T
    return RigidTransform(rt, -rt @ t.translation)


def apply_transform(t: RigidTransform, points: np.ndarray) -> np.ndarray:
    """Apply a rigid transform to one point or an (N, 3) array."""
    pts = np.asarray(points, dtype=float)
    return pts @ t.rotation.T + t.translation
