"""Rigid-body pose algebra.

Conventions
-----------
* A :class:`Pose` maps points from its local frame into the parent (world)
  frame: ``x_world = R @ x_local + t``.
* Euler angles are intrinsic Z-Y-X (yaw, then pitch, then roll), so
  ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``. All angles are radians.
* A 6-vector form of a :class:`DeltaPose` is ordered
  ``(tx, ty, tz, roll, pitch, yaw)``.
* ``pose_diff(p_i, p_d)`` is the rigid transform ``invert(p_d) o p_i``, i.e.
  ``p_i`` expressed in ``p_d``'s frame, and ``apply_delta(p, d) = p o T(d)``.
  The two are mutual inverses: ``pose_diff(apply_delta(p, d), p) == d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SINGULARITY_TOL = 1e-6


def _wrap(angle):
    """Wrap to (-pi, pi]."""
    a = math.remainder(angle, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a


def rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_matrix(roll, pitch, yaw):
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def matrix_to_euler(R):
    """Return ``(roll, pitch, yaw, singular)`` for a rotation matrix.

    At the gimbal lock (|pitch| within ``SINGULARITY_TOL`` of pi/2) roll is
    fixed to zero and the remaining freedom is folded into yaw.
    """
    R = np.asarray(R, dtype=float)
    pitch = math.atan2(-R[2, 0], math.hypot(R[0, 0], R[1, 0]))
    if abs(abs(pitch) - math.pi / 2) < SINGULARITY_TOL:
        sign = 1.0 if pitch > 0 else -1.0
        yaw = math.atan2(sign * R[1, 2], R[1, 1])
        return 0.0, _wrap(pitch), _wrap(yaw), True
    roll = math.atan2(R[2, 1], R[2, 2])
    yaw = math.atan2(R[1, 0], R[0, 0])
    return _wrap(roll), _wrap(pitch), _wrap(yaw), False


@dataclass(frozen=True)
class Pose:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_euler(cls, translation=(0.0, 0.0, 0.0), roll=0.0, pitch=0.0, yaw=0.0):
        return cls(euler_to_matrix(roll, pitch, yaw), translation)

    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def transform(self, points):
        """Map an (N, 3) array of local points into the parent frame."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def to_string(self):
        roll, pitch, yaw, singular = matrix_to_euler(self.rotation)
        vals = [*self.translation, roll, pitch, yaw]
        return " ".join(repr(float(v)) for v in vals) + f" {int(singular)}"

    @classmethod
    def from_string(cls, text):
        parts = text.split()
        if len(parts) not in (6, 7):
            raise ValueError(f"expected 6 or 7 fields in pose string, got {len(parts)}")
        tx, ty, tz, roll, pitch, yaw = (float(v) for v in parts[:6])
        return cls.from_euler((tx, ty, tz), roll, pitch, yaw)


@dataclass(frozen=True)
class DeltaPose:
    d_rotation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    d_translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    singular: bool = False

    def __post_init__(self):
        r = np.array(self.d_rotation, dtype=float).reshape(3)
        t = np.array(self.d_translation, dtype=float).reshape(3)
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "d_rotation", r)
        object.__setattr__(self, "d_translation", t)

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float).reshape(6)
        return cls(d_rotation=v[3:], d_translation=v[:3])

    def as_vector(self):
        """``(tx, ty, tz, roll, pitch, yaw)``."""
        return np.concatenate([self.d_translation, self.d_rotation])

    def to_pose(self):
        return Pose(euler_to_matrix(*self.d_rotation), self.d_translation)

    def to_string(self):
        return " ".join(repr(float(v)) for v in self.as_vector()) + f" {int(self.singular)}"


def compose(a: Pose, b: Pose) -> Pose:
    """``a o b``: apply ``b`` first, then ``a``."""
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(p: Pose) -> Pose:
    Rt = p.rotation.T
    return Pose(Rt, -Rt @ p.translation)


def delta_from_pose(p: Pose) -> DeltaPose:
    roll, pitch, yaw, singular = matrix_to_euler(p.rotation)
    return DeltaPose((roll, pitch, yaw), p.translation, singular)


def pose_diff(p_i: Pose, p_d: Pose) -> DeltaPose:
    """Relative transform taking ``p_d``'s frame to ``p_i``'s frame."""
    return delta_from_pose(compose(invert(p_d), p_i))


def apply_delta(p: Pose, d: DeltaPose) -> Pose:
    return compose(p, d.to_pose())


@dataclass(frozen=True)
class PerturbBounds:
    max_rotation: float = math.radians(5.0)
    max_translation: float = 0.5
    samples_per_frame: int = 50

    def __post_init__(self):
        if self.max_rotation < 0 or self.max_translation < 0:
            raise ValueError("perturbation bounds must be non-negative")
        if self.samples_per_frame < 1:
            raise ValueError("samples_per_frame must be >= 1")


def sample_perturbation(rng: np.random.Generator, bounds: PerturbBounds) -> DeltaPose:
    """Draw each component uniformly from its symmetric bound."""
    rot = rng.uniform(-1.0, 1.0, size=3) * bounds.max_rotation
    trans = rng.uniform(-1.0, 1.0, size=3) * bounds.max_translation
    return DeltaPose(rot, trans)


def rotation_error(a: Pose, b: Pose) -> float:
    return float(np.linalg.norm(a.rotation - b.rotation))


def translation_error(a: Pose, b: Pose) -> float:
    return float(np.linalg.norm(a.translation - b.translation))
