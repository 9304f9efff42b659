"""SO(3)/SE(3) kernel: hat/vee, exp/log maps, the A-matrix family, adjoints,
and discrete-time pose integration.

All rotations are stored as 3x3 matrices; twists are angular-first 6-vectors
split into (w, v) with an explicit body/spatial frame tag.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import FrameMismatch, NearPiRotation, NotSkewSymmetric, OutOfDomain

_SMALL_ANGLE = 1e-6
_SKEW_TOL = 1e-9
_ORTHO_TOL = 1e-9
_NEAR_PI_MARGIN = 1e-6
_COT_MARGIN = 1e-6

_I3 = np.eye(3)


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix such that hat(v) @ u == cross(v, u)."""
    x, y, z = v
    return np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])


def vee(m: np.ndarray) -> np.ndarray:
    """Inverse of hat(). Raises NotSkewSymmetric if the symmetric part is large."""
    if np.max(np.abs(m + m.T)) > 2.0 * _SKEW_TOL:
        raise NotSkewSymmetric("matrix is not skew-symmetric within tolerance")
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def _exp_so3_matrix(phi) -> np.ndarray:
    x, y, z = phi.tolist() if isinstance(phi, np.ndarray) else phi
    theta = math.sqrt(x * x + y * y + z * z)
    tt = theta * theta
    if theta < _SMALL_ANGLE:
        a = 1.0 - tt / 6.0
        b = 0.5 - tt / 24.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / tt
    # I + a phi^ + b phi^^2, element-wise
    return np.array([
        [1.0 + b * (-z * z - y * y), -a * z + b * (x * y), a * y + b * (z * x)],
        [a * z + b * (x * y), 1.0 + b * (-z * z - x * x), -a * x + b * (z * y)],
        [-a * y + b * (x * z), a * x + b * (y * z), 1.0 + b * (-y * y - x * x)]])


def _log_so3_matrix(m: np.ndarray) -> np.ndarray:
    (m00, m01, m02), (m10, m11, m12), (m20, m21, m22) = m.tolist()
    v0 = m21 - m12
    v1 = m02 - m20
    v2 = m10 - m01
    # angle from atan2(|skew|, trace): well conditioned over (0, pi),
    # unlike acos of the trace, which loses digits approaching pi
    sy = 0.5 * math.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
    cy = 0.5 * (m00 + m11 + m22 - 1.0)
    gamma = math.atan2(sy, cy)
    if gamma >= math.pi - _NEAR_PI_MARGIN:
        raise NearPiRotation(f"rotation angle {gamma:.9f} rad is within "
                             f"{_NEAR_PI_MARGIN} of pi")
    if gamma < _SMALL_ANGLE:
        s = 0.5 + gamma * gamma / 12.0
    else:
        s = 0.5 * gamma / sy
    out = np.empty(3)
    out[0] = s * v0
    out[1] = s * v1
    out[2] = s * v2
    return out


def _exp_se3_raw(phi: np.ndarray, q: np.ndarray):
    """(R, p) blocks of the SE(3) exponential, sharing one hat/square.

    Hot-loop kernel behind exp_se3/integrate_*; same branch thresholds as
    the public maps.
    """
    x, y, z = phi.tolist() if isinstance(phi, np.ndarray) else phi
    t2 = x * x + y * y + z * z
    if t2 == 0.0:
        # exact zero rotation: R = I, A = I
        return _I3.copy(), np.asarray(q, dtype=float).copy()
    theta = math.sqrt(t2)
    if theta < _SMALL_ANGLE:
        a = 1.0 - t2 / 6.0
        b = 0.5 - t2 / 24.0
        c = 1.0 / 6.0 - t2 / 120.0
    else:
        s, co = math.sin(theta), math.cos(theta)
        a = s / theta
        b = (1.0 - co) / t2
        c = (theta - s) / (t2 * theta)
    # I + a*phi^ + b*phi^2 and I + b*phi^ + c*phi^2, written element-wise
    # (phi^2 = phi phi^T - t2 I)
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    r = np.empty((3, 3))
    r[0, 0] = 1.0 - b * (yy + zz)
    r[0, 1] = b * xy - a * z
    r[0, 2] = b * xz + a * y
    r[1, 0] = b * xy + a * z
    r[1, 1] = 1.0 - b * (xx + zz)
    r[1, 2] = b * yz - a * x
    r[2, 0] = b * xz - a * y
    r[2, 1] = b * yz + a * x
    r[2, 2] = 1.0 - b * (xx + yy)
    qx, qy, qz = q.tolist() if isinstance(q, np.ndarray) else q
    p = np.empty(3)
    p[0] = (1.0 - c * (yy + zz)) * qx + (c * xy - b * z) * qy \
        + (c * xz + b * y) * qz
    p[1] = (c * xy + b * z) * qx + (1.0 - c * (xx + zz)) * qy \
        + (c * yz - b * x) * qz
    p[2] = (c * xz - b * y) * qx + (c * yz + b * x) * qy \
        + (1.0 - c * (xx + yy)) * qz
    return r, p


def _integrate_body_raw(r, p, w, v, dt):
    """One body-twist step; returns (rotation matrix, position list)."""
    wx, wy, wz = w.tolist() if isinstance(w, np.ndarray) else w
    vx, vy, vz = v.tolist() if isinstance(v, np.ndarray) else v
    pl = p.tolist() if isinstance(p, np.ndarray) else p
    if wx == 0.0 and wy == 0.0 and wz == 0.0:
        # zero rotation step: R unchanged, p advances along the body frame
        if r is _I3:
            return r, [vx * dt + pl[0], vy * dt + pl[1], vz * dt + pl[2]]
        (r00, r01, r02), (r10, r11, r12), (r20, r21, r22) = r.tolist()
        dx, dy, dz = vx * dt, vy * dt, vz * dt
        return r, [r00 * dx + r01 * dy + r02 * dz + pl[0],
                   r10 * dx + r11 * dy + r12 * dz + pl[1],
                   r20 * dx + r21 * dy + r22 * dz + pl[2]]
    re, pe = _exp_se3_raw((wx * dt, wy * dt, wz * dt),
                          (vx * dt, vy * dt, vz * dt))
    rp = (r @ pe).tolist()
    return r @ re, [rp[0] + pl[0], rp[1] + pl[1], rp[2] + pl[2]]


def _pose_error_raw(r_from, p_from, r_to, p_to) -> list:
    """Body-frame 6-list (rotation log; position) of g_from^-1 g_to."""
    if r_from is r_to:
        # same rotation object: the relative rotation is exactly identity
        if r_from is _I3:
            return [0.0, 0.0, 0.0,
                    p_to[0] - p_from[0],
                    p_to[1] - p_from[1],
                    p_to[2] - p_from[2]]
        dp = np.asarray(p_to) - np.asarray(p_from)
        return [0.0, 0.0, 0.0] + (r_from.T @ dp).tolist()
    rt = r_from.T
    dp = np.asarray(p_to) - np.asarray(p_from)
    return _log_so3_matrix(rt @ r_to).tolist() + (rt @ dp).tolist()


def a_matrix(phi: np.ndarray) -> np.ndarray:
    """Matrix mapping the translational generator to the SE(3) exponential's
    position block: A(phi) = I + ((1-cos t)/t^2) phi^ + ((t-sin t)/t^3) phi^2."""
    x, y, z = phi.tolist() if isinstance(phi, np.ndarray) else phi
    t2 = x * x + y * y + z * z
    theta = math.sqrt(t2)
    if theta < _SMALL_ANGLE:
        b = 0.5 - t2 / 24.0
        c = 1.0 / 6.0 - t2 / 120.0
    else:
        b = (1.0 - math.cos(theta)) / t2
        c = (theta - math.sin(theta)) / (t2 * theta)
    # I + b phi^ + c phi^2 with phi^2 = phi phi^T - t2 I, element-wise
    d = 1.0 - c * t2
    return np.array([
        [d + c * x * x, -b * z + c * x * y, b * y + c * x * z],
        [b * z + c * x * y, d + c * y * y, -b * x + c * y * z],
        [-b * y + c * x * z, b * x + c * y * z, d + c * z * z]])


def _alpha_coeff(theta: float) -> float:
    """(1 - (t/2)cot(t/2)) / t^2 with its small-angle limit 1/12."""
    if theta < _SMALL_ANGLE:
        return 1.0 / 12.0 + theta * theta / 720.0
    half = 0.5 * theta
    alpha = half * math.cos(half) / math.sin(half)
    return (1.0 - alpha) / (theta * theta)


def _check_cot_domain(theta: float) -> None:
    if theta >= 2.0 * math.pi - _COT_MARGIN:
        raise OutOfDomain(f"|phi| = {theta:.9f} is outside [0, 2*pi) domain "
                          "of the A-matrix inverse")


def _a_inv_elementwise(phi, skew_sign: float) -> np.ndarray:
    """I + skew_sign phi^/2 + alpha phi^2 built without intermediates."""
    x, y, z = phi.tolist() if isinstance(phi, np.ndarray) else phi
    t2 = x * x + y * y + z * z
    theta = math.sqrt(t2)
    _check_cot_domain(theta)
    al = _alpha_coeff(theta)
    h = 0.5 * skew_sign
    d = 1.0 - al * t2
    return np.array([
        [d + al * x * x, -h * z + al * x * y, h * y + al * x * z],
        [h * z + al * x * y, d + al * y * y, -h * x + al * y * z],
        [-h * y + al * x * z, h * x + al * y * z, d + al * z * z]])


def a_inv(phi: np.ndarray) -> np.ndarray:
    """Closed-form inverse of a_matrix: I - phi^/2 + coeff * phi^2."""
    return _a_inv_elementwise(phi, -1.0)


def a_inv_transpose(phi: np.ndarray) -> np.ndarray:
    """Closed-form inverse-transpose of a_matrix: I + phi^/2 + coeff * phi^2."""
    return _a_inv_elementwise(phi, 1.0)


def _a_inv_transpose_apply(phi: np.ndarray, q: np.ndarray) -> np.ndarray:
    """a_inv_transpose(phi) @ q without building the matrix.

    Uses phi^2 q = phi (phi . q) - |phi|^2 q; hot-loop kernel behind the
    compensation law, same domain check as the public map.
    """
    x, y, z = phi.tolist() if isinstance(phi, np.ndarray) else phi
    qx, qy, qz = q.tolist() if isinstance(q, np.ndarray) else q
    t2 = x * x + y * y + z * z
    if t2 == 0.0:
        # A(0)^-T is the identity
        return [qx, qy, qz]
    _check_cot_domain(math.sqrt(t2))
    al = _alpha_coeff(math.sqrt(t2))
    dot = x * qx + y * qy + z * qz
    return [qx + 0.5 * (y * qz - z * qy) + al * (x * dot - t2 * qx),
            qy + 0.5 * (z * qx - x * qz) + al * (y * dot - t2 * qy),
            qz + 0.5 * (x * qy - y * qx) + al * (z * dot - t2 * qz)]


class Frame(Enum):
    BODY = "body"
    SPATIAL = "spatial"


@dataclass(frozen=True)
class Rotation:
    """Element of SO(3) stored as a 3x3 matrix.

    Construction re-orthonormalizes (SVD projection) whenever the input
    deviates from orthonormality by more than the tolerance, and rejects
    improper (det < 0) matrices.
    """
    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if np.max(np.abs(m.T @ m - _I3)) > _ORTHO_TOL:
            u, _, vt = np.linalg.svd(m)
            m = u @ vt
        if np.linalg.det(m) <= 0.0:
            raise ValueError("rotation matrix must have det = +1")
        object.__setattr__(self, "m", m)

    @staticmethod
    def identity() -> "Rotation":
        return _trusted_rotation(_I3.copy())

    def inverse(self) -> "Rotation":
        return _trusted_rotation(self.m.T.copy())

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return _trusted_rotation(self.m @ other.m)


def _trusted_rotation(m: np.ndarray) -> Rotation:
    """Internal constructor for matrices already known orthonormal."""
    r = object.__new__(Rotation)
    object.__setattr__(r, "m", m)
    return r


def exp_so3(phi: np.ndarray) -> Rotation:
    """Rodrigues exponential map; small angles use a 2nd-order series."""
    return _trusted_rotation(_exp_so3_matrix(np.asarray(phi, dtype=float)))


def log_so3(r: Rotation) -> np.ndarray:
    """Rotation vector of r. Raises NearPiRotation within 1e-6 of angle pi."""
    return _log_so3_matrix(r.m)


@dataclass(frozen=True)
class Pose:
    """Element of SE(3): rotation r and position p (meters)."""
    r: Rotation
    p: np.ndarray

    def __post_init__(self):
        if not isinstance(self.p, np.ndarray):
            object.__setattr__(self, "p", np.asarray(self.p, dtype=float))

    @staticmethod
    def identity() -> "Pose":
        return Pose(Rotation.identity(), np.zeros(3))

    def inverse(self) -> "Pose":
        rt = self.r.m.T
        return Pose(_trusted_rotation(rt.copy()), -(rt @ self.p))

    def __matmul__(self, other: "Pose") -> "Pose":
        return Pose(_trusted_rotation(self.r.m @ other.r.m),
                    self.r.m @ other.p + self.p)


@dataclass(frozen=True)
class Twist:
    """6-D velocity, angular part first: w (rad/s), v (m/s), with frame tag."""
    w: np.ndarray
    v: np.ndarray
    frame: Frame = Frame.BODY

    def __post_init__(self):
        if not isinstance(self.w, np.ndarray):
            object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        if not isinstance(self.v, np.ndarray):
            object.__setattr__(self, "v", np.asarray(self.v, dtype=float))

    @staticmethod
    def zero(frame: Frame = Frame.BODY) -> "Twist":
        return Twist(np.zeros(3), np.zeros(3), frame)

    @staticmethod
    def from_array(a: np.ndarray, frame: Frame = Frame.BODY) -> "Twist":
        a = np.asarray(a, dtype=float)
        return Twist(a[:3], a[3:6], frame)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.w, self.v])


def exp_se3(phi: np.ndarray, q: np.ndarray) -> Pose:
    """SE(3) exponential of the twist coordinates (phi, q)."""
    r, p = _exp_se3_raw(np.asarray(phi, dtype=float),
                        np.asarray(q, dtype=float))
    return Pose(_trusted_rotation(r), p)


def adjoint(g: Pose) -> np.ndarray:
    """6x6 adjoint [R 0; p^R R] mapping body twists to spatial twists."""
    ad = np.zeros((6, 6))
    ad[:3, :3] = g.r.m
    ad[3:, :3] = hat(g.p) @ g.r.m
    ad[3:, 3:] = g.r.m
    return ad


def integrate_body(g_prev: Pose, tw: Twist, dt: float) -> Pose:
    """g(k) = g(k-1) * exp_se3(V * dt) for a body twist."""
    if tw.frame is not Frame.BODY:
        raise FrameMismatch("integrate_body requires a body-frame twist")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    r, p = _integrate_body_raw(g_prev.r.m, g_prev.p, tw.w, tw.v, dt)
    return Pose(_trusted_rotation(r), p)


def integrate_spatial(g_prev: Pose, tw: Twist, dt: float) -> Pose:
    """g(k) = exp_se3(V * dt) * g(k-1) for a spatial twist."""
    if tw.frame is not Frame.SPATIAL:
        raise FrameMismatch("integrate_spatial requires a spatial-frame twist")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return exp_se3(tw.w * dt, tw.v * dt) @ g_prev
