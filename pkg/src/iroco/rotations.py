"""Rotation representations and forward kinematics for a shoulder-elbow-wrist chain.

Conventions used throughout the package:

- Right-handed coordinates, Y up, Z forward, X lateral.
- Quaternions are scalar-first ``(w, x, y, z)`` with the Hamilton product;
  ``q`` and ``-q`` denote the same rotation.
- The six-number rotation encoding (:class:`SixDRR`) keeps the first two
  columns ``a1``, ``a2`` of a rotation matrix, flattened ``[a1, a2]``.  It is
  continuous in the matrix entries and decodes through Gram-Schmidt:
  ``b1 = a1/|a1|``, ``b2 = normalize(a2 - (b1.a2) b1)``, ``b3 = b1 x b2``.
- Body heading is a yaw about +Y stored as ``(sin yaw, cos yaw)``.
- Angles are radians everywhere; degrees appear only at reporting boundaries.

All functions are pure and operate on float64 values; they are safe to call
from any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

__all__ = [
    "DegenerateInput",
    "Quaternion",
    "SixDRR",
    "Heading",
    "BodyModel",
    "ArmPoints",
    "quat_to_6drr",
    "sixdrr_to_rotmat",
    "rotmat_to_6drr",
    "rotmat_to_quat",
    "heading_encode",
    "heading_decode",
    "heading_to_matrix",
    "rotate_heading",
    "yaw_matrix",
    "forward_kinematics",
    "fk_local",
    "angular_distance",
    "random_quaternion",
]

_NORM_EPS = 1e-12


class DegenerateInput(ValueError):
    """Raised when a rotation encoding cannot be decoded (zero/parallel axes)."""


def _vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError(f"expected 3-vector, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion, scalar first."""

    w: float
    x: float
    y: float
    z: float

    @classmethod
    def identity(cls) -> "Quaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Quaternion":
        axis = _vec3(axis)
        n = float(np.linalg.norm(axis))
        if n < _NORM_EPS:
            raise DegenerateInput("rotation axis has zero norm")
        half = 0.5 * angle
        s = math.sin(half) / n
        return cls(math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s)

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if n < _NORM_EPS:
            raise DegenerateInput("cannot normalize zero quaternion")
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        # Hamilton product; R(a * b) = R(a) @ R(b).
        a, b = self, other
        return Quaternion(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )

    def to_matrix(self) -> np.ndarray:
        """3x3 rotation matrix of the (normalized) quaternion."""
        q = self.normalized()
        w, x, y, z = q.w, q.x, q.y, q.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ],
            dtype=np.float64,
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class SixDRR:
    """Continuous six-number rotation encoding: first two matrix columns.

    ``a1`` and ``a2`` need not be orthonormal (e.g. after additive noise or
    after averaging ensemble members); :func:`sixdrr_to_rotmat` restores a
    proper rotation as long as ``a1`` is nonzero and not parallel to ``a2``.
    Flat layout is ``[a1x, a1y, a1z, a2x, a2y, a2z]``.
    """

    a1: np.ndarray
    a2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a1", _vec3(self.a1))
        object.__setattr__(self, "a2", _vec3(self.a2))

    @classmethod
    def identity(cls) -> "SixDRR":
        return cls(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))

    @classmethod
    def from_flat(cls, flat) -> "SixDRR":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (6,):
            raise ValueError(f"expected 6 values, got shape {flat.shape}")
        return cls(flat[:3], flat[3:])

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.a1, self.a2])


@dataclass(frozen=True)
class Heading:
    """Yaw about the up axis encoded as (sin, cos)."""

    s: float
    c: float

    @classmethod
    def identity(cls) -> "Heading":
        return cls(0.0, 1.0)

    def norm(self) -> float:
        return math.hypot(self.s, self.c)

    def normalized(self) -> "Heading":
        n = self.norm()
        if n < _NORM_EPS:
            raise DegenerateInput("heading (0, 0) has no angle")
        return Heading(self.s / n, self.c / n)

    def flatten(self) -> np.ndarray:
        return np.array([self.s, self.c], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class BodyModel:
    """Fixed limb lengths and frame conventions for the arm chain.

    ``rest_dir_upper``/``rest_dir_lower`` are the unit directions of the upper
    and lower arm in the rest pose (arm hanging, forearm forward), so identity
    joint rotations reproduce the calibration start pose.
    """

    upper_len: float
    lower_len: float
    shoulder_offset: np.ndarray
    rest_dir_upper: np.ndarray
    rest_dir_lower: np.ndarray

    def __post_init__(self):
        if self.upper_len <= 0 or self.lower_len <= 0:
            raise ValueError("limb lengths must be positive")
        object.__setattr__(self, "shoulder_offset", _vec3(self.shoulder_offset))
        for name in ("rest_dir_upper", "rest_dir_lower"):
            d = _vec3(getattr(self, name))
            n = float(np.linalg.norm(d))
            if abs(n - 1.0) > 1e-9:
                raise ValueError(f"{name} must be unit norm, got |d|={n}")
            object.__setattr__(self, name, d)

    @classmethod
    def default(cls) -> "BodyModel":
        # Anthropometric placeholders; configurable per user.
        return cls(
            upper_len=0.30,
            lower_len=0.28,
            shoulder_offset=np.array([0.0, 0.45, 0.0]),
            rest_dir_upper=np.array([0.0, -1.0, 0.0]),
            rest_dir_lower=np.array([0.0, 0.0, 1.0]),
        )

    @property
    def reach(self) -> float:
        return self.upper_len + self.lower_len


class ArmPoints(NamedTuple):
    elbow: np.ndarray
    wrist: np.ndarray


def quat_to_6drr(q: Quaternion) -> SixDRR:
    """First two rotation-matrix columns of a unit quaternion."""
    m = q.to_matrix()
    return SixDRR(m[:, 0].copy(), m[:, 1].copy())


def sixdrr_to_rotmat(r: SixDRR) -> np.ndarray:
    """Gram-Schmidt decode of the six-number encoding to a proper rotation.

    Raises :class:`DegenerateInput` when ``a1`` is (near) zero or (near)
    parallel to ``a2``.
    """
    n1 = float(np.linalg.norm(r.a1))
    if n1 < _NORM_EPS:
        raise DegenerateInput("first column has zero norm")
    b1 = r.a1 / n1
    n2 = float(np.linalg.norm(r.a2))
    if n2 < _NORM_EPS:
        raise DegenerateInput("second column has zero norm")
    if abs(float(np.dot(b1, r.a2)) / n2) > 1.0 - _NORM_EPS:
        raise DegenerateInput("columns are parallel")
    b2 = r.a2 - np.dot(b1, r.a2) * b1
    b2 = b2 / np.linalg.norm(b2)
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=1)


def rotmat_to_6drr(m: np.ndarray) -> SixDRR:
    m = np.asarray(m, dtype=np.float64)
    return SixDRR(m[:, 0].copy(), m[:, 1].copy())


def rotmat_to_quat(m: np.ndarray) -> Quaternion:
    """Rotation matrix to unit quaternion (largest-component branch)."""
    m = np.asarray(m, dtype=np.float64)
    t = np.trace(m)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2.0
        q = (0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s)
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = ((m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s)
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = ((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s)
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = ((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s)
    return Quaternion(*q).normalized()


def heading_encode(yaw: float) -> Heading:
    return Heading(math.sin(yaw), math.cos(yaw))


def heading_decode(h: Heading) -> float:
    """Yaw angle in (-pi, pi]; raises on the all-zero encoding."""
    if h.norm() < _NORM_EPS:
        raise DegenerateInput("heading (0, 0) has no angle")
    return math.atan2(h.s, h.c)


def yaw_matrix(yaw: float) -> np.ndarray:
    s, c = math.sin(yaw), math.cos(yaw)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]], dtype=np.float64)


def heading_to_matrix(h: Heading) -> np.ndarray:
    """Yaw rotation about +Y for a (sin, cos) heading (normalized first)."""
    hn = h.normalized()
    return np.array(
        [[hn.c, 0.0, hn.s], [0.0, 1.0, 0.0], [-hn.s, 0.0, hn.c]], dtype=np.float64
    )


def rotate_heading(h: Heading, angle: float) -> Heading:
    # Angle-addition on the components; exact and normalization-preserving.
    sa, ca = math.sin(angle), math.cos(angle)
    return Heading(h.s * ca + h.c * sa, h.c * ca - h.s * sa)


def fk_local(q_u: SixDRR, q_l: SixDRR, body: BodyModel) -> ArmPoints:
    """Elbow and wrist positions in the body-local frame.

    ``q_u`` and ``q_l`` are independent rotations expressed in the body-local
    frame (not chained parent-child); identity inputs give the rest pose.
    """
    r_u = sixdrr_to_rotmat(q_u)
    r_l = sixdrr_to_rotmat(q_l)
    elbow = body.shoulder_offset + body.upper_len * (r_u @ body.rest_dir_upper)
    wrist = elbow + body.lower_len * (r_l @ body.rest_dir_lower)
    return ArmPoints(elbow, wrist)


def forward_kinematics(q_u: SixDRR, q_l: SixDRR, q_h: Heading, body: BodyModel) -> ArmPoints:
    """World-frame elbow and wrist: body-local chain yaw-rotated by the heading.

    Yaw is applied last, i.e. the whole body-local pose turns with the user.
    """
    local = fk_local(q_u, q_l, body)
    ry = heading_to_matrix(q_h)
    return ArmPoints(ry @ local.elbow, ry @ local.wrist)


RotationLike = Union[Quaternion, SixDRR, np.ndarray]


def _as_quat(r: RotationLike) -> Quaternion:
    if isinstance(r, Quaternion):
        return r.normalized()
    if isinstance(r, SixDRR):
        return rotmat_to_quat(sixdrr_to_rotmat(r))
    m = np.asarray(r, dtype=np.float64)
    if m.shape == (3, 3):
        return rotmat_to_quat(m)
    raise ValueError(f"not a rotation: shape {m.shape}")


def angular_distance(r1: RotationLike, r2: RotationLike) -> float:
    """Geodesic angle between two rotations, in [0, pi].

    Accepts quaternions, six-number encodings, or 3x3 matrices; the quaternion
    double cover (q vs -q) maps to distance zero.
    """
    d = _as_quat(r1).conjugate() * _as_quat(r2)
    vec = math.sqrt(d.x**2 + d.y**2 + d.z**2)
    return 2.0 * math.atan2(vec, abs(d.w))


def random_quaternion(rng: np.random.Generator) -> Quaternion:
    """Uniformly distributed unit quaternion (4D Gaussian, normalized)."""
    v = rng.standard_normal(4)
    v /= np.linalg.norm(v)
    return Quaternion(*v)
