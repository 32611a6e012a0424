"""Rotation representations, conversions, and rotational distance functions.

Conventions
-----------
- All angles are in radians.
- Quaternions are scalar-first ``(w, x, y, z)``; a unit quaternion and its
  negation describe the same rotation.
- Exponential coordinates are axis times angle, ``s = theta * e``. The
  "constrained" flavor lives in the closed ball of radius pi; the
  unconstrained flavor is any finite 3-vector.
- Every distance returned here lies in ``[0, pi]``.

All operations are pure functions of their inputs; there is no shared
mutable state, so everything here is safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

# Tolerances for type invariants.
ORTHOGONALITY_TOL = 1e-9
DET_TOL = 1e-9
UNIT_AXIS_TOL = 1e-12
UNIT_QUAT_TOL = 1e-12
QUAT_CONVERSION_NORM_TOL = 1e-6
BALL_RADIUS_TOL = 1e-12

# Below this rotation angle the Rodrigues coefficients switch to their
# second-order series to avoid 0/0.
SMALL_ANGLE = 1e-6


def _clamp_unit(x: float) -> float:
    """Clamp to [-1, 1] so acos never sees a value pushed out by roundoff."""
    return -1.0 if x < -1.0 else (1.0 if x > 1.0 else x)


def _as_vector(v, size: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (size,):
        raise InvalidArgumentError(f"{name} must be a {size}-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class RotationMatrix:
    """Member of the group of proper 3x3 rotation matrices."""

    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=np.float64)
        if r.shape != (3, 3) or not np.all(np.isfinite(r)):
            raise InvalidArgumentError("rotation matrix must be a finite 3x3 matrix")
        defect = np.max(np.abs(r.T @ r - np.eye(3)))
        if defect > ORTHOGONALITY_TOL:
            raise InvalidArgumentError(f"matrix is not orthogonal (defect {defect:.3e})")
        det = float(np.linalg.det(r))
        if abs(det - 1.0) > DET_TOL:
            raise InvalidArgumentError(f"matrix determinant {det!r} is not 1")
        object.__setattr__(self, "r", r)


@dataclass(frozen=True, eq=False)
class AxisAngle:
    """Rotation of ``theta`` radians about a unit axis.

    A negative input angle is normalized by negating the axis, so the
    stored angle is always nonnegative.
    """

    theta: float
    axis: np.ndarray

    def __post_init__(self):
        axis = _as_vector(self.axis, 3, "axis")
        theta = float(self.theta)
        if not math.isfinite(theta):
            raise InvalidArgumentError("angle must be finite")
        if theta < 0.0:
            theta, axis = -theta, -axis
        if abs(np.linalg.norm(axis) - 1.0) > UNIT_AXIS_TOL:
            raise InvalidArgumentError("axis must have unit norm")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "axis", axis)


@dataclass(frozen=True, eq=False)
class ExpCoords:
    """Exponential coordinates ``s = theta * e``.

    With ``constrained=True`` the vector must lie in the closed ball of
    radius pi (the minimal set covering all rotations); otherwise any
    finite 3-vector is admissible.
    """

    s: np.ndarray
    constrained: bool = False

    def __post_init__(self):
        s = _as_vector(self.s, 3, "exponential coordinates")
        if self.constrained and np.linalg.norm(s) > math.pi + BALL_RADIUS_TOL:
            raise InvalidArgumentError("constrained exponential coordinates must have norm <= pi")
        object.__setattr__(self, "s", s)

    @property
    def theta(self) -> float:
        return float(np.linalg.norm(self.s))


@dataclass(frozen=True, eq=False)
class UnitQuaternion:
    """Unit 4-vector on the 3-sphere; q and -q are the same rotation."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        vec = np.array([self.w, self.x, self.y, self.z], dtype=np.float64)
        if not np.all(np.isfinite(vec)):
            raise InvalidArgumentError("quaternion components must be finite")
        if abs(np.linalg.norm(vec) - 1.0) > UNIT_QUAT_TOL:
            raise InvalidArgumentError("quaternion must have unit norm")

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=np.float64)

    def __neg__(self) -> "UnitQuaternion":
        return UnitQuaternion(-self.w, -self.x, -self.y, -self.z)


@dataclass(frozen=True, eq=False)
class RawQuaternion:
    """Unconstrained quaternion: any nonzero finite 4-vector."""

    v: np.ndarray

    def __post_init__(self):
        v = _as_vector(self.v, 4, "raw quaternion")
        if np.linalg.norm(v) == 0.0:
            raise InvalidArgumentError("zero vector has no associated rotation")
        object.__setattr__(self, "v", v)


# ---------------------------------------------------------------------------
# Conversions
# ---------------------------------------------------------------------------

def _skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def exp_to_matrix(s: ExpCoords) -> RotationMatrix:
    """Rodrigues map from exponential coordinates to a rotation matrix."""
    v = s.s
    theta = float(np.linalg.norm(v))
    if theta < SMALL_ANGLE:
        # Second-order series of sin(t)/t and (1 - cos(t))/t^2.
        a = 1.0 - theta * theta / 6.0
        b = 0.5 - theta * theta / 24.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / (theta * theta)
    k = _skew(v)
    return RotationMatrix(np.eye(3) + a * k + b * (k @ k))


def axis_angle_to_quat(a: AxisAngle) -> UnitQuaternion:
    """Quaternion ``(cos(theta/2), e sin(theta/2))`` of an axis-angle pair."""
    half = 0.5 * a.theta
    s = math.sin(half)
    return UnitQuaternion(math.cos(half), s * a.axis[0], s * a.axis[1], s * a.axis[2])


def quat_to_axis_angle(q: UnitQuaternion) -> AxisAngle:
    """Canonical axis-angle (theta in [0, pi]) of a unit quaternion."""
    w, xyz = q.w, np.array([q.x, q.y, q.z])
    if w < 0.0:
        w, xyz = -w, -xyz
    sin_half = float(np.linalg.norm(xyz))
    theta = 2.0 * math.atan2(sin_half, w)
    if sin_half < 1e-300:
        return AxisAngle(0.0, np.array([1.0, 0.0, 0.0]))
    return AxisAngle(theta, xyz / sin_half)


def quat_to_exp(q: UnitQuaternion) -> ExpCoords:
    """Exponential coordinates in the pi-ball of a unit quaternion."""
    aa = quat_to_axis_angle(q)
    return ExpCoords(aa.theta * aa.axis, constrained=True)


def quat_to_matrix(q: UnitQuaternion) -> RotationMatrix:
    """Rotation matrix of a unit quaternion; invariant under q -> -q."""
    vec = q.vec
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > QUAT_CONVERSION_NORM_TOL:
        raise InvalidArgumentError("quaternion norm deviates from 1 beyond 1e-6")
    w, x, y, z = vec / norm
    return RotationMatrix(
        np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
            ]
        )
    )


def normalize(v: RawQuaternion) -> UnitQuaternion:
    """Unit-normalize an unconstrained quaternion."""
    u = v.v / np.linalg.norm(v.v)
    return UnitQuaternion(u[0], u[1], u[2], u[3])


# ---------------------------------------------------------------------------
# Rotational distances
# ---------------------------------------------------------------------------

def dist_matrices(r1: RotationMatrix, r2: RotationMatrix) -> float:
    """Angle of the direct rotation between two rotation matrices."""
    tr = float(np.trace(r1.r @ r2.r.T))
    return math.acos(_clamp_unit(0.5 * (tr - 1.0)))


def _exp_to_quat_vector(v: np.ndarray) -> np.ndarray:
    """Raw quaternion 4-vector of exponential coordinates (any angle)."""
    t = float(np.linalg.norm(v))
    k = math.sin(0.5 * t) / t if t > 0.0 else 0.0
    return np.array([math.cos(0.5 * t), k * v[0], k * v[1], k * v[2]])


def _quat_chord_distance(a: np.ndarray, b: np.ndarray) -> float:
    if float(a @ b) < 0.0:
        b = -b
    return 4.0 * math.atan2(float(np.linalg.norm(b - a)), float(np.linalg.norm(b + a)))


def dist_exp(s1: ExpCoords, s2: ExpCoords) -> float:
    """Rotational distance between two exponential-coordinate vectors,
    2*acos(|cos(t1/2)cos(t2/2) + e1.e2 sin(t1/2)sin(t2/2)|).

    Valid for any angle theta in [0, inf), i.e. for unconstrained
    coordinates as well as members of the pi-ball. The inner expression is
    the dot product of the corresponding quaternions, so the distance is
    evaluated in the same chord form as ``dist_quat``; identical inputs
    give exactly zero.
    """
    return _quat_chord_distance(_exp_to_quat_vector(s1.s), _exp_to_quat_vector(s2.s))


def dist_quat(q1: UnitQuaternion, q2: UnitQuaternion) -> float:
    """Rotational distance between unit quaternions, 2*acos(|q1 . q2|).

    Evaluated in the equivalent chord form
    ``4*atan2(||q2' - q1||, ||q2' + q1||)`` (with q2' sign-flipped onto the
    hemisphere of q1), which keeps full relative accuracy for nearly
    identical and nearly antipodal inputs where acos loses digits.
    """
    return _quat_chord_distance(q1.vec, q2.vec)


def dist_quat_from_angle(phi: float) -> float:
    """Rotational distance as a function of the 4D angle between quaternions."""
    if not (0.0 <= phi <= math.pi):
        raise InvalidArgumentError("phi must lie in [0, pi]")
    if phi <= 0.5 * math.pi:
        return 2.0 * phi
    return 2.0 * math.pi - 2.0 * phi


def compose_angle(a1: AxisAngle, a2: AxisAngle) -> float:
    """Angle of the composite rotation of two axis-angle rotations.

    Returned on [0, 2*pi]; fold at pi to get the rotational distance from
    identity of the composite.
    """
    c = (
        math.cos(0.5 * a1.theta) * math.cos(0.5 * a2.theta)
        - float(a1.axis @ a2.axis) * math.sin(0.5 * a1.theta) * math.sin(0.5 * a2.theta)
    )
    return 2.0 * math.acos(_clamp_unit(c))


def pose_cost(z, z_hat, s: ExpCoords, s_hat: ExpCoords) -> float:
    """Single-sample pose regression cost: squared position error plus
    rotational distance between true (constrained) and estimated
    (unconstrained) exponential coordinates."""
    zv = _as_vector(z, 3, "position")
    zh = _as_vector(z_hat, 3, "estimated position")
    if not s.constrained:
        raise InvalidArgumentError("true exponential coordinates must be constrained")
    d = zv - zh
    return float(d @ d) + dist_exp(s, s_hat)
