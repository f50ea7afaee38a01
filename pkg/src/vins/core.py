"""Shared domain types, quaternion algebra, and coordinate conventions.

Conventions used everywhere in this package:

* World frame is z-up; gravity is (0, 0, -9.81) m/s^2.
* Quaternions are Hamilton, scalar-first (w, x, y, z), and represent the
  body-to-world rotation: ``rotate(q, v_body) == v_world``.
* All arithmetic is 64-bit floating point.

All types in this module are immutable values and safe to share between
threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

GRAVITY = 9.81  # m/s^2, magnitude of the default world gravity

# Ingest sanity bounds for raw IMU readings.
MAX_ACC_NORM = 200.0  # m/s^2
MAX_GYRO_NORM = 50.0  # rad/s


@dataclass(frozen=True)
class Vec3:
    """3-vector; units depend on context (m, m/s, m/s^2, rad/s)."""

    x: float
    y: float
    z: float

    def __add__(self, other: Vec3) -> Vec3:
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: Vec3) -> Vec3:
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, s: float) -> Vec3:
        return Vec3(self.x * s, self.y * s, self.z * s)

    __rmul__ = __mul__

    def __neg__(self) -> Vec3:
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, other: Vec3) -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: Vec3) -> Vec3:
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @staticmethod
    def from_array(a) -> Vec3:
        return Vec3(float(a[0]), float(a[1]), float(a[2]))

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)


ZERO3 = Vec3(0.0, 0.0, 0.0)
DEFAULT_GRAVITY = Vec3(0.0, 0.0, -GRAVITY)


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion (w, x, y, z), Hamilton product, body-to-world."""

    w: float
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> Quaternion:
        n = self.norm()
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def conjugate(self) -> Quaternion:
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=np.float64)

    @staticmethod
    def identity() -> Quaternion:
        return Quaternion(1.0, 0.0, 0.0, 0.0)


def quat_mul(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product a * b."""
    return Quaternion(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )


def quat_from_rate(omega: Vec3, dt: float) -> Quaternion:
    """Exponential map of a constant body rate over dt seconds.

    angle = ||omega|| * dt about axis omega / ||omega||; returns the identity
    when the angle is below 1e-12 rad.
    """
    angle = omega.norm() * dt
    if angle < 1e-12:
        return Quaternion.identity()
    half = 0.5 * angle
    s = math.sin(half) / (angle / dt)  # sin(half) / ||omega||
    return Quaternion(
        math.cos(half), omega.x * s, omega.y * s, omega.z * s
    )


def quat_to_matrix(q: Quaternion) -> np.ndarray:
    """3x3 rotation matrix R with R @ v_body == rotate(q, v_body)."""
    w, x, y, z = q.w, q.x, q.y, q.z
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ],
        dtype=np.float64,
    )


def rotate(q: Quaternion, v: Vec3) -> Vec3:
    """Rotate a body-frame vector into the world frame."""
    # q * (0, v) * q^-1, expanded via the double-cross identity.
    qv = Vec3(q.x, q.y, q.z)
    t = 2.0 * qv.cross(v)
    return v + q.w * t + qv.cross(t)


@dataclass(frozen=True)
class ImuSample:
    """One timestamped 6-channel inertial reading (body frame).

    acc is the specific force in m/s^2, gyro the angular rate in rad/s.
    """

    t: float
    acc: Vec3
    gyro: Vec3

    def validate(self) -> None:
        if not (math.isfinite(self.t) and self.acc.is_finite() and self.gyro.is_finite()):
            raise ValueError("non-finite IMU sample")
        if self.acc.norm() >= MAX_ACC_NORM:
            raise ValueError(f"accelerometer norm {self.acc.norm():.1f} exceeds {MAX_ACC_NORM}")
        if self.gyro.norm() >= MAX_GYRO_NORM:
            raise ValueError(f"gyroscope norm {self.gyro.norm():.1f} exceeds {MAX_GYRO_NORM}")


@dataclass(frozen=True)
class PoseSample:
    """Timestamped ground-truth position and body-to-world orientation."""

    t: float
    p: Vec3
    q: Quaternion


class MotionMode(enum.Enum):
    STATIC = 0
    WALKING = 1
    STAIRS = 2
    ELEVATOR = 3
    ESCALATOR = 4

    @staticmethod
    def from_name(name: str) -> MotionMode:
        return MotionMode[name.strip().upper()]


@dataclass(frozen=True)
class MotionLabel:
    """A manually annotated locomotion-mode span. Reporting only, never training."""

    mode: MotionMode
    t_start: float
    t_end: float

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError(f"label span [{self.t_start}, {self.t_end}] is empty")

    def duration_within(self, t0: float, t1: float) -> float:
        """Overlap duration between this span and [t0, t1]."""
        return max(0.0, min(self.t_end, t1) - max(self.t_start, t0))
