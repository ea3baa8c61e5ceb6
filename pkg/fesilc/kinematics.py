"""Straight-line task trajectories and planar two-link arm kinematics."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from .diagnostics import KinematicsError
from .models import STEP_TOLERANCE, ArmParams, FloatArray, ReferenceProfile

logger = logging.getLogger(__name__)

Point = tuple[float, float]

# |sin(theta_f)| below this means a straight or folded arm
SINGULARITY_TOLERANCE = 1e-6
# slack on the law-of-cosines argument before a point counts as unreachable
REACH_TOLERANCE = 1e-12


def _readonly(values: ArrayLike) -> FloatArray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TaskTrajectory:
    """Sampled point-to-point reference along a straight line."""

    Ts: float
    t: FloatArray
    r_d: FloatArray
    x: FloatArray
    y: FloatArray

    def __post_init__(self) -> None:
        for name in ("t", "r_d", "x", "y"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        if not self.t.size == self.r_d.size == self.x.size == self.y.size:
            raise KinematicsError("Trajectory columns differ in length")

    def __len__(self) -> int:
        return int(self.t.size)

    @property
    def magnitude(self) -> float:
        return float(self.r_d[-1])

    @property
    def origin(self) -> Point:
        return float(self.x[0]), float(self.y[0])

    @property
    def heading(self) -> float:
        """Direction of travel in radians; 0 for a zero-length line."""
        dx = float(self.x[-1] - self.x[0])
        dy = float(self.y[-1] - self.y[0])
        if dx == 0.0 and dy == 0.0:
            return 0.0
        return math.atan2(dy, dx)


@dataclass(frozen=True, eq=False)
class VelocityProfile:
    """Resultant end-effector speed per sample."""

    t: FloatArray
    r_dot: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", _readonly(self.t))
        object.__setattr__(self, "r_dot", _readonly(self.r_dot))
        if self.t.size != self.r_dot.size:
            raise KinematicsError("Velocity profile columns differ in length")
        if not np.all(np.isfinite(self.r_dot)):
            raise KinematicsError("Velocity profile contains non-finite samples")

    def __len__(self) -> int:
        return int(self.r_dot.size)

    @property
    def peak(self) -> float:
        return float(np.max(self.r_dot)) if self.r_dot.size else 0.0


@dataclass(frozen=True)
class ArmKinematics:
    """Planar shoulder/elbow arm with the hand constrained to a task line."""

    l_u: float
    l_f: float
    shoulder_base: Point = (-0.2, 0.0)
    line_origin: Point = (0.0, 0.0)
    line_angle: float = math.pi / 4

    def __post_init__(self) -> None:
        if not (self.l_u > 0 and self.l_f > 0):
            raise KinematicsError("Link lengths must be positive")

    @classmethod
    def from_params(
        cls,
        arm: ArmParams,
        line_origin: Point = (0.0, 0.0),
        line_angle: float = math.pi / 4,
    ) -> "ArmKinematics":
        """Place the shoulder d1 behind the line origin along -x."""
        return cls(
            l_u=arm.upper_arm_length,
            l_f=arm.forearm_length,
            shoulder_base=(line_origin[0] - arm.d1, line_origin[1]),
            line_origin=line_origin,
            line_angle=line_angle,
        )

    @property
    def reach_limits(self) -> tuple[float, float]:
        return abs(self.l_u - self.l_f), self.l_u + self.l_f

    @property
    def direction(self) -> Point:
        return math.cos(self.line_angle), math.sin(self.line_angle)

    def line_point(self, r: float) -> Point:
        """Point at displacement ``r`` along the task line."""
        ux, uy = self.direction
        return self.line_origin[0] + r * ux, self.line_origin[1] + r * uy

    def jacobian(self, theta_u: float, theta_f: float) -> FloatArray:
        s1, c1 = math.sin(theta_u), math.cos(theta_u)
        s12, c12 = math.sin(theta_u + theta_f), math.cos(theta_u + theta_f)
        return np.array(
            [
                [-self.l_u * s1 - self.l_f * s12, -self.l_f * s12],
                [self.l_u * c1 + self.l_f * c12, self.l_f * c12],
            ]
        )


def line_magnitude(p1: Point, p2: Point) -> float:
    """Euclidean distance between two task-plane points."""
    return math.hypot(p2[0] - p1[0], p2[1] - p1[1])


def reach_radius(d: float, length: float) -> float:
    """Hand distance from a lateral offset ``d`` and forward reach ``length``."""
    return math.hypot(d, length)


def task_line_angle(d: float, length: float) -> float:
    """Inclination of the task line, atan(d / length)."""
    return math.atan2(d, length)


def line_trajectory(
    p1: Point,
    p2: Point,
    duration: float,
    Ts: float,
    profile: ReferenceProfile | str = ReferenceProfile.RAMP,
) -> TaskTrajectory:
    """
    Sample a point-to-point reach along the straight line p1 -> p2.

    Args:
        p1: Start point (m)
        p2: End point (m)
        duration: Reach time (s)
        Ts: Sample period (s); ``duration`` must be a whole number of samples
        profile: Ramp (constant velocity) or smoothstep time law

    Returns:
        TaskTrajectory with duration/Ts + 1 samples.
    """
    if not (duration > 0 and Ts > 0):
        raise KinematicsError("duration and Ts must be positive")
    steps = duration / Ts
    if abs(steps - round(steps)) > STEP_TOLERANCE:
        raise KinematicsError(f"duration {duration} is not a multiple of Ts {Ts}")
    profile = ReferenceProfile(profile)
    n = int(round(steps))

    t = np.linspace(0.0, duration, n + 1)
    s = np.linspace(0.0, 1.0, n + 1)
    if profile is ReferenceProfile.SMOOTHSTEP:
        s = s * s * (3.0 - 2.0 * s)
    magnitude = line_magnitude(p1, p2)
    r_d = magnitude * s
    if magnitude > 0:
        ux = (p2[0] - p1[0]) / magnitude
        uy = (p2[1] - p1[1]) / magnitude
    else:
        ux = uy = 0.0
    return TaskTrajectory(Ts, t, r_d, p1[0] + r_d * ux, p1[1] + r_d * uy)


def inverse_kinematics(kin: ArmKinematics, x: float, y: float) -> tuple[float, float]:
    """Shoulder and elbow angles placing the hand at (x, y).

    Returns the solution with theta_f in [0, pi].

    Raises:
        KinematicsError: If the point lies outside the reachable annulus.
    """
    dx = x - kin.shoulder_base[0]
    dy = y - kin.shoulder_base[1]
    cos_f = (dx * dx + dy * dy - kin.l_u**2 - kin.l_f**2) / (2.0 * kin.l_u * kin.l_f)
    if abs(cos_f) > 1.0 + REACH_TOLERANCE:
        low, high = kin.reach_limits
        raise KinematicsError(
            f"Point ({x:.4f}, {y:.4f}) is {math.hypot(dx, dy):.4f} m from the "
            f"shoulder, outside reach [{low:.4f}, {high:.4f}]"
        )
    theta_f = math.acos(min(1.0, max(-1.0, cos_f)))
    theta_u = math.atan2(dy, dx) - math.atan2(
        kin.l_f * math.sin(theta_f), kin.l_u + kin.l_f * math.cos(theta_f)
    )
    return theta_u, theta_f


def forward_kinematics(
    kin: ArmKinematics, theta_u: float, theta_f: float
) -> tuple[float, float]:
    """Hand position for the given joint angles."""
    x = (
        kin.shoulder_base[0]
        + kin.l_u * math.cos(theta_u)
        + kin.l_f * math.cos(theta_u + theta_f)
    )
    y = (
        kin.shoulder_base[1]
        + kin.l_u * math.sin(theta_u)
        + kin.l_f * math.sin(theta_u + theta_f)
    )
    return x, y


def shoulder_angle_on_line(kin: ArmKinematics, theta_f: float) -> float:
    """Shoulder angle that keeps the hand on the task line for a given elbow angle.

    Of the two line intersections the one further along the line is used.
    """
    rho_sq = kin.l_u**2 + kin.l_f**2 + 2.0 * kin.l_u * kin.l_f * math.cos(theta_f)
    wx = kin.line_origin[0] - kin.shoulder_base[0]
    wy = kin.line_origin[1] - kin.shoulder_base[1]
    ux, uy = kin.direction
    b = ux * wx + uy * wy
    c = wx * wx + wy * wy - rho_sq
    disc = b * b - c
    if disc < 0:
        raise KinematicsError(f"Elbow angle {theta_f:.4f} cannot reach the task line")
    r = -b + math.sqrt(disc)
    theta_u, _ = inverse_kinematics(kin, *kin.line_point(r))
    return theta_u


def differentiate(signal: ArrayLike, Ts: float) -> FloatArray:
    """Backward difference (s[k] - s[k-1]) / Ts with a zero first sample."""
    values = np.atleast_1d(np.asarray(signal, dtype=float)).ravel()
    out = np.zeros(values.size)
    out[1:] = np.diff(values) / Ts
    return out


def resultant_velocity(
    kin: ArmKinematics, theta_f: ArrayLike, Ts: float
) -> VelocityProfile:
    """
    Resultant hand speed for an elbow-angle series on the task line.

    The shoulder rate is the one induced by keeping the hand on the line.

    Args:
        kin: Arm and task line geometry
        theta_f: Elbow angles (rad), at least two samples
        Ts: Sample period (s)

    Returns:
        VelocityProfile with one speed per input sample.

    Raises:
        KinematicsError: At the first sample where the Jacobian is near singular.
    """
    elbow = np.atleast_1d(np.asarray(theta_f, dtype=float)).ravel()
    if elbow.size < 2:
        raise KinematicsError("Velocity needs at least two samples")
    shoulder = np.array([shoulder_angle_on_line(kin, th) for th in elbow])
    elbow_rate = differentiate(elbow, Ts)
    shoulder_rate = differentiate(shoulder, Ts)

    speed = np.empty(elbow.size)
    for k in range(elbow.size):
        if abs(math.sin(elbow[k])) < SINGULARITY_TOLERANCE:
            raise KinematicsError("Jacobian is singular", sample=k)
        xdot, ydot = kin.jacobian(shoulder[k], elbow[k]) @ (
            shoulder_rate[k],
            elbow_rate[k],
        )
        speed[k] = math.hypot(xdot, ydot)
    t = np.arange(elbow.size) * Ts
    return VelocityProfile(t, speed)
