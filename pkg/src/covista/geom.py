"""Stateless 3D geometry for table-centered perspective alignment.

Conventions used throughout the package:

- Right-handed coordinates, +Y is world-up, lengths in meters.
- All angles are radians at every API boundary in this module.
- Yaw rotations are right-handed about the world +Y axis through a pivot
  point; ``rotate_y`` by ``theta`` maps +Z toward +X for ``theta > 0``.
- Azimuth of a point about a pivot is ``atan2(dx, dz)``: 0 along +Z,
  increasing with right-handed rotation about +Y, so that rotating a point
  by ``phi`` increases its azimuth by ``phi``.
- Wrapped angles live in (-pi, pi]; ties at pi resolve to +pi.
- Quaternions are unit, ordered [w, x, y, z].
- A head's look direction is the +Z axis of its local frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

TWO_PI = 2.0 * math.pi

# Horizontal distance below which a point counts as on the pivot axis and
# its azimuth is undefined.
ON_AXIS_EPSILON = 1e-6

# Tolerated deviation from unit norm for quaternions and ray directions.
UNIT_NORM_TOLERANCE = 1e-6


class GeomError(ValueError):
    """Base class for geometry contract violations."""


class InvalidAngle(GeomError):
    """Angle input was not a finite number."""


class OnAxis(GeomError):
    """Point is on the pivot axis; its azimuth is undefined."""


class EmptyInput(GeomError):
    """An operation requiring at least one element received none."""


class TooFewPairs(GeomError):
    """Calibration needs at least two point pairs."""


class DegenerateConfiguration(GeomError):
    """Calibration points carry no horizontal spread; yaw is unobservable."""


class InvalidDirection(GeomError):
    """Ray direction is not unit length."""


class InvalidBox(GeomError):
    """Box extents are inverted (min > max on some component)."""


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise GeomError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class Vec3:
    """Point or direction in 3D space. Components must be finite."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        _require_finite("Vec3 component", self.x, self.y, self.z)

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scaled(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def distance_to(self, other: "Vec3") -> float:
        return (self - other).norm()

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n == 0.0:
            raise GeomError("cannot normalize a zero vector")
        return self.scaled(1.0 / n)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.z]

    @classmethod
    def from_seq(cls, seq: Sequence[float]) -> "Vec3":
        if len(seq) != 3:
            raise GeomError(f"expected 3 components, got {len(seq)}")
        return cls(float(seq[0]), float(seq[1]), float(seq[2]))


ZERO = Vec3(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class UnitQuat:
    """Unit quaternion, [w, x, y, z] order, norm within 1e-6 of 1."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        _require_finite("quaternion component", self.w, self.x, self.y, self.z)
        n = math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
        if abs(n - 1.0) > UNIT_NORM_TOLERANCE:
            raise GeomError(f"quaternion norm {n} deviates from 1 by more than {UNIT_NORM_TOLERANCE}")

    @classmethod
    def identity(cls) -> "UnitQuat":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def yaw(cls, theta: float) -> "UnitQuat":
        """Rotation by ``theta`` about world +Y (the same map as ``rotate_y``)."""
        _require_finite("yaw angle", theta)
        half = 0.5 * theta
        return cls(math.cos(half), 0.0, math.sin(half), 0.0)

    @classmethod
    def from_axis_angle(cls, axis: Vec3, theta: float) -> "UnitQuat":
        _require_finite("angle", theta)
        a = axis.normalized()
        half = 0.5 * theta
        s = math.sin(half)
        return cls(math.cos(half), a.x * s, a.y * s, a.z * s)

    def multiply(self, other: "UnitQuat") -> "UnitQuat":
        """Hamilton product self * other (apply ``other`` first, then self)."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return UnitQuat(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def conjugate(self) -> "UnitQuat":
        return UnitQuat(self.w, -self.x, -self.y, -self.z)

    def rotate(self, v: Vec3) -> Vec3:
        """Rotate ``v`` by this quaternion (v' = q v q*)."""
        # Expanded sandwich product; avoids building intermediate quaternions.
        w, x, y, z = self.w, self.x, self.y, self.z
        tx = 2.0 * (y * v.z - z * v.y)
        ty = 2.0 * (z * v.x - x * v.z)
        tz = 2.0 * (x * v.y - y * v.x)
        return Vec3(
            v.x + w * tx + (y * tz - z * ty),
            v.y + w * ty + (z * tx - x * tz),
            v.z + w * tz + (x * ty - y * tx),
        )

    def as_list(self) -> list[float]:
        return [self.w, self.x, self.y, self.z]

    @classmethod
    def from_seq(cls, seq: Sequence[float]) -> "UnitQuat":
        if len(seq) != 4:
            raise GeomError(f"expected 4 components, got {len(seq)}")
        return cls(float(seq[0]), float(seq[1]), float(seq[2]), float(seq[3]))


@dataclass(frozen=True)
class Pose:
    """Position plus orientation of a tracked rigid body (head or hand)."""

    position: Vec3
    orientation: UnitQuat

    @classmethod
    def identity(cls, position: Vec3 = ZERO) -> "Pose":
        return cls(position, UnitQuat.identity())

    def forward(self) -> Vec3:
        """World direction of the local +Z axis (the look direction)."""
        return self.orientation.rotate(Vec3(0.0, 0.0, 1.0))


@dataclass(frozen=True)
class Pivot:
    """Point the vertical rotation axis passes through. The axis is world +Y."""

    point: Vec3


@dataclass(frozen=True)
class CalibrationTransform:
    """Yaw about +Y followed by a translation, mapping local to shared frame."""

    yaw: float
    translation: Vec3

    def inverse(self) -> "CalibrationTransform":
        inv_t = rotate_y(ZERO - self.translation, Pivot(ZERO), -self.yaw)
        return CalibrationTransform(wrap_angle(-self.yaw), inv_t)


def wrap_angle(theta: float) -> float:
    """Wrap ``theta`` into (-pi, pi]; exactly -pi maps to +pi.

    The positive tie keeps 180-degree alignment sweeps deterministic
    (counterclockwise viewed from above).
    """
    if not math.isfinite(theta):
        raise InvalidAngle(f"angle must be finite, got {theta!r}")
    r = math.remainder(theta, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


def rotate_y(p: Vec3, pivot: Pivot, theta: float) -> Vec3:
    """Rotate ``p`` by ``theta`` about the vertical axis through the pivot."""
    _require_finite("rotation angle", theta)
    if theta == 0.0:
        return p  # exact identity, not just within rounding
    c = math.cos(theta)
    s = math.sin(theta)
    dx = p.x - pivot.point.x
    dz = p.z - pivot.point.z
    return Vec3(
        pivot.point.x + dx * c + dz * s,
        p.y,
        pivot.point.z - dx * s + dz * c,
    )


def rotate_pose_y(pose: Pose, pivot: Pivot, theta: float) -> Pose:
    """Rotate a pose about the pivot axis: position swings around the axis
    and the world-facing direction turns by the same ``theta``."""
    return Pose(
        rotate_y(pose.position, pivot, theta),
        UnitQuat.yaw(theta).multiply(pose.orientation),
    )


def azimuth(p: Vec3, pivot: Pivot) -> float:
    """Bearing of ``p`` about the pivot axis, in (-pi, pi].

    Raises OnAxis when the point sits within ON_AXIS_EPSILON of the axis.
    """
    dx = p.x - pivot.point.x
    dz = p.z - pivot.point.z
    if math.hypot(dx, dz) <= ON_AXIS_EPSILON:
        raise OnAxis(f"point {p} is on the pivot axis; azimuth undefined")
    a = math.atan2(dx, dz)
    if a <= -math.pi:
        a += TWO_PI
    return a


def centroid(points: Iterable[Vec3]) -> Vec3:
    pts = list(points)
    if not pts:
        raise EmptyInput("centroid of an empty point list")
    n = float(len(pts))
    return Vec3(
        sum(p.x for p in pts) / n,
        sum(p.y for p in pts) / n,
        sum(p.z for p in pts) / n,
    )


def alignment_target(alpha_follower: float, alpha_leader: float, rho_leader: float) -> float:
    """Replica rotation that gives the follower the leader's view of the objects.

    After setting the follower's offset to the returned value, both users see
    the shared content from the same bearing:
    wrap((alpha_F - rho_F) - (alpha_L - rho_L)) == 0.
    """
    return rho_leader + wrap_angle(alpha_follower - alpha_leader)


def animation_delta(rho_current: float, rho_target: float) -> float:
    """Shortest signed sweep from the current offset to the target.

    Always within [-pi, pi]; an exact half-turn resolves to +pi.
    """
    return wrap_angle(rho_target - rho_current)


def remote_pose(pose: Pose, rho_viewer: float, rho_owner: float, pivot: Pivot) -> Pose:
    """Where a viewer renders another user's tracked pose.

    The owner's pose is carried into the viewer's rotated replica by the
    difference of their replica rotations. Viewing yourself is the identity.
    """
    return rotate_pose_y(pose, pivot, rho_viewer - rho_owner)


def world_to_canonical(p: Vec3, rho: float, pivot: Pivot) -> Vec3:
    """Map a world point into the shared un-rotated object frame of a user
    whose replica is rotated by ``rho``."""
    return rotate_y(p, pivot, -rho)


def canonical_to_world(p: Vec3, rho: float, pivot: Pivot) -> Vec3:
    """Inverse of :func:`world_to_canonical`."""
    return rotate_y(p, pivot, rho)


def solve_yaw_calibration(pairs: Sequence[tuple[Vec3, Vec3]]) -> CalibrationTransform:
    """Least-squares yaw-plus-translation aligning local points to shared points.

    Minimizes sum |R_y(yaw) * local_i + t - shared_i|^2 in closed form over
    the centered horizontal coordinates. Gravity-aligned tracking makes the
    4-DOF model (yaw and 3D translation) sufficient; pitch and roll are not
    solved for.
    """
    if len(pairs) < 2:
        raise TooFewPairs(f"need at least 2 point pairs, got {len(pairs)}")
    locals_ = [p[0] for p in pairs]
    shareds = [p[1] for p in pairs]
    lc = centroid(locals_)
    sc = centroid(shareds)
    spread = max(math.hypot(p.x - lc.x, p.z - lc.z) for p in locals_)
    if spread <= ON_AXIS_EPSILON:
        raise DegenerateConfiguration("local points have no horizontal spread; yaw is unobservable")
    num = 0.0
    den = 0.0
    for l, s in zip(locals_, shareds):
        lx, lz = l.x - lc.x, l.z - lc.z
        sx, sz = s.x - sc.x, s.z - sc.z
        num += lz * sx - lx * sz
        den += lx * sx + lz * sz
    yaw = math.atan2(num, den)
    t = sc - rotate_y(lc, Pivot(ZERO), yaw)
    return CalibrationTransform(wrap_angle(yaw), t)


def apply_calibration(xf: CalibrationTransform, pose: Pose) -> Pose:
    """Carry a locally tracked pose into the shared coordinate space."""
    rotated = rotate_pose_y(pose, Pivot(ZERO), xf.yaw)
    return Pose(rotated.position + xf.translation, rotated.orientation)


def _check_unit_direction(d: Vec3) -> None:
    if abs(d.norm() - 1.0) > UNIT_NORM_TOLERANCE:
        raise InvalidDirection(f"direction {d} is not unit length")


def ray_sphere(origin: Vec3, direction: Vec3, center: Vec3, radius: float) -> float | None:
    """Distance along the ray to the sphere, or None if it is missed.

    An origin inside the sphere reports a hit at distance 0.
    """
    _check_unit_direction(direction)
    if not radius > 0.0:
        raise GeomError(f"radius must be positive, got {radius}")
    oc = origin - center
    b = oc.dot(direction)
    c = oc.dot(oc) - radius * radius
    disc = b * b - c
    if disc < 0.0:
        return None
    root = math.sqrt(disc)
    t_exit = -b + root
    if t_exit < 0.0:
        return None
    t_enter = -b - root
    return max(t_enter, 0.0)


def ray_aabb(origin: Vec3, direction: Vec3, box_min: Vec3, box_max: Vec3) -> float | None:
    """Slab-method entry distance of a ray into an axis-aligned box, or None.

    An origin inside the box reports a hit at distance 0.
    """
    _check_unit_direction(direction)
    if box_min.x > box_max.x or box_min.y > box_max.y or box_min.z > box_max.z:
        raise InvalidBox(f"inverted box extents: {box_min} .. {box_max}")
    interval = ray_aabb_interval(origin, direction, box_min, box_max)
    if interval is None:
        return None
    t_enter, t_exit = interval
    if t_exit < 0.0:
        return None
    return max(t_enter, 0.0)


def ray_aabb_interval(
    origin: Vec3, direction: Vec3, box_min: Vec3, box_max: Vec3
) -> tuple[float, float] | None:
    """Unclamped [t_enter, t_exit] of a ray against an axis-aligned box."""
    t_enter = -math.inf
    t_exit = math.inf
    for o, d, lo, hi in (
        (origin.x, direction.x, box_min.x, box_max.x),
        (origin.y, direction.y, box_min.y, box_max.y),
        (origin.z, direction.z, box_min.z, box_max.z),
    ):
        if d == 0.0:
            if o < lo or o > hi:
                return None
            continue
        t0 = (lo - o) / d
        t1 = (hi - o) / d
        if t0 > t1:
            t0, t1 = t1, t0
        t_enter = max(t_enter, t0)
        t_exit = min(t_exit, t1)
        if t_enter > t_exit:
            return None
    return t_enter, t_exit


def ray_sphere_interval(
    origin: Vec3, direction: Vec3, center: Vec3, radius: float
) -> tuple[float, float] | None:
    """Unclamped [t_enter, t_exit] of a ray against a sphere."""
    oc = origin - center
    b = oc.dot(direction)
    c = oc.dot(oc) - radius * radius
    disc = b * b - c
    if disc < 0.0:
        return None
    root = math.sqrt(disc)
    return -b - root, -b + root
