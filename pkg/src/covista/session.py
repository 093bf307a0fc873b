"""Authoritative state machine for one collaborative session.

Holds the users, their per-user replica rotations (rho), follower-triggered
alignment animations, and placed pins, and composes per-viewer render frames
with counter-rotated remote hands.

Rotation offsets are kept unwrapped internally so animation endpoints are
exact sums; values are wrapped only where they leave over the wire.
Single-writer discipline: all mutations happen on one logical loop.
render_frame and snapshot are read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

from .geom import (
    OnAxis,
    Pivot,
    Pose,
    UnitQuat,
    Vec3,
    alignment_target,
    animation_delta,
    azimuth,
    canonical_to_world,
    ray_sphere,
    remote_pose,
    rotate_y,
    world_to_canonical,
    wrap_angle,
)
from .scene import Pin, Scene, load_scene, pivot_of, serialize_scene

# First two entries match the avatar colors used throughout the figures.
DEFAULT_PALETTE = (
    "orange",
    "blue",
    "green",
    "red",
    "purple",
    "yellow",
    "cyan",
    "magenta",
)


class SessionError(Exception):
    """Base for session-level failures."""


class SessionFull(SessionError):
    pass


class UnknownUser(SessionError):
    pass


class NoTarget(SessionError):
    """Alignment ray hit no other user's head."""


class SelfTarget(SessionError):
    """Alignment ray hit only the requester's own head."""


class FollowerOnAxis(SessionError):
    """Requester stands on the pivot axis; their bearing is undefined."""


class LeaderOnAxis(SessionError):
    pass


class ClockWentBackwards(SessionError):
    pass


def color_name(index: int, palette: Sequence[str] = DEFAULT_PALETTE) -> str:
    """Display name for a palette index; wraps with a numeric suffix."""
    base = palette[index % len(palette)]
    cycle = index // len(palette)
    return base if cycle == 0 else f"{base}{cycle + 1}"


@dataclass(frozen=True)
class SessionConfig:
    angular_speed: float = math.radians(90.0)  # rad/s
    head_pick_radius: float = 0.15  # meters
    decoupling_enabled: bool = True
    pose_fanout_hz: float = 20.0
    max_users: int = 8
    palette: tuple[str, ...] = DEFAULT_PALETTE

    def __post_init__(self) -> None:
        if not self.angular_speed > 0.0:
            raise ValueError(f"angular_speed must be positive, got {self.angular_speed}")
        if not self.head_pick_radius > 0.0:
            raise ValueError(f"head_pick_radius must be positive, got {self.head_pick_radius}")
        if self.max_users < 1:
            raise ValueError(f"max_users must be at least 1, got {self.max_users}")
        if not self.palette:
            raise ValueError("palette must not be empty")


@dataclass(frozen=True)
class AlignmentAnimation:
    """One in-flight constant-speed rotation of a follower's replica."""

    rho_start: float
    delta: float  # wrapped; sign is the sweep direction
    started_at: float  # session-time seconds
    duration: float  # |delta| / angular_speed
    leader_id: str

    def rho_at(self, now: float) -> float:
        u = (now - self.started_at) / self.duration
        u = min(max(u, 0.0), 1.0)
        return self.rho_start + self.delta * u

    @property
    def done_at(self) -> float:
        return self.started_at + self.duration


@dataclass
class UserViewState:
    user_id: str
    display_name: str
    color: int  # palette index; lowest free index, reused after leave
    head: Pose
    left_hand: Pose
    right_hand: Pose
    rho: float = 0.0
    animation: AlignmentAnimation | None = None
    last_pose_seq: int = -1
    calibrated: bool = False


# ---------------------------------------------------------------------------
# Events returned by mutating operations. Timestamps are session-time.


@dataclass(frozen=True)
class UserJoined:
    user_id: str
    name: str
    color: int
    at: float


@dataclass(frozen=True)
class UserLeft:
    user_id: str
    at: float


@dataclass(frozen=True)
class AlignStarted:
    follower_id: str
    leader_id: str
    rho_start: float
    delta: float
    duration: float
    t0: float


@dataclass(frozen=True)
class AlignCompleted:
    follower_id: str
    rho: float  # wrapped, wire-ready
    at: float


@dataclass(frozen=True)
class PinAdded:
    pin: Pin
    at: float


SessionEvent = Union[UserJoined, UserLeft, AlignStarted, AlignCompleted, PinAdded]


# ---------------------------------------------------------------------------
# Per-viewer frame composition.


@dataclass(frozen=True)
class ObjectPose:
    object_id: str
    position: Vec3
    yaw: float  # canonical yaw plus the viewer's replica rotation


@dataclass(frozen=True)
class PinMarker:
    pin_id: str
    color: int
    world: Vec3


@dataclass(frozen=True)
class RemoteAvatar:
    user_id: str
    color: int
    cap: Pose  # always the true head pose; bodies are never decoupled
    left_hand: Pose
    right_hand: Pose


@dataclass(frozen=True)
class RenderFrame:
    viewer_id: str
    objects: tuple[ObjectPose, ...]
    pins: tuple[PinMarker, ...]
    remotes: tuple[RemoteAvatar, ...]
    own_left: Pose  # raw tracked hands, never transformed
    own_right: Pose


def compose_frame(
    scene: Scene,
    pivot: Pivot,
    decoupling_enabled: bool,
    users: dict[str, UserViewState],
    pins: Sequence[Pin],
    viewer_id: str,
) -> RenderFrame:
    """Pure frame composition, shared by the server and client-side replicas.

    Objects and pins turn with the viewer's replica rotation. Each remote
    hand is carried across by the difference of the two replica rotations,
    so it points at the same canonical spot in the viewer's copy; with
    decoupling disabled the remote hands stay at their true poses.
    """
    viewer = users[viewer_id]
    rho_v = viewer.rho
    objects = tuple(
        ObjectPose(obj.id, rotate_y(obj.position, pivot, rho_v), obj.yaw + rho_v)
        for obj in scene.objects
    )
    markers = tuple(
        PinMarker(p.id, p.color, canonical_to_world(p.canonical_position, rho_v, pivot))
        for p in pins
    )
    remotes = []
    for uid, st in users.items():
        if uid == viewer_id:
            continue
        if decoupling_enabled:
            lh = remote_pose(st.left_hand, rho_v, st.rho, pivot)
            rh = remote_pose(st.right_hand, rho_v, st.rho, pivot)
        else:
            lh, rh = st.left_hand, st.right_hand
        remotes.append(RemoteAvatar(uid, st.color, st.head, lh, rh))
    return RenderFrame(
        viewer_id=viewer_id,
        objects=objects,
        pins=markers,
        remotes=tuple(remotes),
        own_left=viewer.left_hand,
        own_right=viewer.right_hand,
    )


# ---------------------------------------------------------------------------


class Session:
    """One shared session: scene, users, pins, and the alignment clock."""

    def __init__(self, scene: Scene, config: SessionConfig | None = None):
        self.scene = scene
        self.config = config if config is not None else SessionConfig()
        self.pivot = pivot_of(scene)
        self.users: dict[str, UserViewState] = {}
        self.pins: list[Pin] = []
        self.clock = 0.0
        self.stale_pose_drops: dict[str, int] = {}
        self._next_user_seq = 1
        self._next_pin_seq = 1

    # -- membership ---------------------------------------------------------

    def join(self, name: str) -> tuple[str, int]:
        """Add a user; returns (user_id, palette color index)."""
        if len(self.users) >= self.config.max_users:
            raise SessionFull(f"session is at its limit of {self.config.max_users} users")
        user_id = f"u{self._next_user_seq}"
        self._next_user_seq += 1
        used = {u.color for u in self.users.values()}
        color = 0
        while color in used:
            color += 1
        self.users[user_id] = UserViewState(
            user_id=user_id,
            display_name=name,
            color=color,
            head=Pose.identity(),
            left_hand=Pose.identity(),
            right_hand=Pose.identity(),
        )
        return user_id, color

    def leave(self, user_id: str) -> UserLeft:
        self._require_user(user_id)
        del self.users[user_id]
        # pins outlive their owner
        return UserLeft(user_id, self.clock)

    def _require_user(self, user_id: str) -> UserViewState:
        try:
            return self.users[user_id]
        except KeyError:
            raise UnknownUser(f"no user {user_id!r} in session") from None

    # -- tracking -----------------------------------------------------------

    def update_pose(self, user_id: str, head: Pose, left: Pose, right: Pose, seq: int) -> bool:
        """Store the newest tracked poses; stale or duplicate seq is dropped."""
        st = self._require_user(user_id)
        if seq <= st.last_pose_seq:
            self.stale_pose_drops[user_id] = self.stale_pose_drops.get(user_id, 0) + 1
            return False
        st.head = head
        st.left_hand = left
        st.right_hand = right
        st.last_pose_seq = seq
        return True

    # -- perspective alignment ----------------------------------------------

    def request_alignment(
        self, follower_id: str, ray_origin: Vec3, ray_dir: Vec3
    ) -> AlignStarted | AlignCompleted:
        """Point at another user to adopt their bearing on the shared content.

        The leader is the nearest head the ray hits. Only the follower's
        replica moves; the leader's view is untouched. A new request
        replaces any animation already in flight.
        """
        follower = self._require_user(follower_id)
        direction = ray_dir.normalized()
        hits = []
        for uid, st in self.users.items():
            t = ray_sphere(ray_origin, direction, st.head.position, self.config.head_pick_radius)
            if t is not None:
                hits.append((t, uid))
        others = sorted((t, uid) for t, uid in hits if uid != follower_id)
        if not others:
            if hits:
                raise SelfTarget("alignment ray only hits your own head")
            raise NoTarget("alignment ray does not hit any user's head")
        leader = self.users[others[0][1]]
        try:
            alpha_f = azimuth(follower.head.position, self.pivot)
        except OnAxis:
            raise FollowerOnAxis(f"{follower_id} is on the pivot axis") from None
        try:
            alpha_l = azimuth(leader.head.position, self.pivot)
        except OnAxis:
            raise LeaderOnAxis(f"{leader.user_id} is on the pivot axis") from None
        target = alignment_target(alpha_f, alpha_l, leader.rho)
        delta = animation_delta(follower.rho, target)
        duration = abs(delta) / self.config.angular_speed
        if delta == 0.0 or duration == 0.0:
            follower.animation = None
            return AlignCompleted(follower_id, wrap_angle(follower.rho), self.clock)
        follower.animation = AlignmentAnimation(
            rho_start=follower.rho,
            delta=delta,
            started_at=self.clock,
            duration=duration,
            leader_id=leader.user_id,
        )
        return AlignStarted(
            follower_id=follower_id,
            leader_id=leader.user_id,
            rho_start=follower.rho,
            delta=delta,
            duration=duration,
            t0=self.clock,
        )

    def tick(self, now: float) -> list[SessionEvent]:
        """Advance session time; interpolate animations and emit completions.

        Completion events come out in chronological order of their exact
        finish times, which may precede ``now`` by up to one tick.
        """
        if now < self.clock:
            raise ClockWentBackwards(f"tick to {now} but clock is at {self.clock}")
        self.clock = now
        finished = []
        for st in self.users.values():
            anim = st.animation
            if anim is None:
                continue
            if now >= anim.done_at:
                finished.append((anim.done_at, st.user_id))
            else:
                st.rho = anim.rho_at(now)
        finished.sort()
        events: list[SessionEvent] = []
        for done_at, uid in finished:
            st = self.users[uid]
            anim = st.animation
            assert anim is not None
            st.rho = anim.rho_start + anim.delta  # exact endpoint, no drift
            st.animation = None
            events.append(AlignCompleted(uid, wrap_angle(st.rho), done_at))
        return events

    # -- pins ---------------------------------------------------------------

    def place_pin(self, user_id: str, world_point: Vec3) -> Pin:
        """Drop a pin where the user sees it; stored in the canonical frame.

        Uses the instantaneous rho, so a pin placed mid-animation lands on
        the spot the user was actually looking at.
        """
        st = self._require_user(user_id)
        canonical = world_to_canonical(world_point, st.rho, self.pivot)
        pin = Pin(f"p{self._next_pin_seq}", user_id, canonical, st.color)
        self._next_pin_seq += 1
        self.pins.append(pin)
        return pin

    # -- output -------------------------------------------------------------

    def render_frame(self, viewer_id: str) -> RenderFrame:
        self._require_user(viewer_id)
        return compose_frame(
            self.scene,
            self.pivot,
            self.config.decoupling_enabled,
            self.users,
            self.pins,
            viewer_id,
        )

    def snapshot(self) -> dict:
        """Full serializable state; restore() reproduces behavior exactly."""
        return {
            "clock": self.clock,
            "config": {
                "angular_speed": self.config.angular_speed,
                "decoupling_enabled": self.config.decoupling_enabled,
                "head_pick_radius": self.config.head_pick_radius,
                "max_users": self.config.max_users,
                "palette": list(self.config.palette),
                "pose_fanout_hz": self.config.pose_fanout_hz,
            },
            "next_pin_seq": self._next_pin_seq,
            "next_user_seq": self._next_user_seq,
            "pins": [
                {
                    "canonical_position": p.canonical_position.as_list(),
                    "color": p.color,
                    "id": p.id,
                    "owner_user": p.owner_user,
                }
                for p in self.pins
            ],
            "scene": serialize_scene(self.scene),
            "users": [_user_doc(st) for st in self.users.values()],
        }

    @classmethod
    def restore(cls, snapshot: dict) -> "Session":
        cfg = snapshot["config"]
        session = cls(
            load_scene(snapshot["scene"]),
            SessionConfig(
                angular_speed=cfg["angular_speed"],
                head_pick_radius=cfg["head_pick_radius"],
                decoupling_enabled=cfg["decoupling_enabled"],
                pose_fanout_hz=cfg["pose_fanout_hz"],
                max_users=cfg["max_users"],
                palette=tuple(cfg["palette"]),
            ),
        )
        session.clock = snapshot["clock"]
        session._next_user_seq = snapshot["next_user_seq"]
        session._next_pin_seq = snapshot["next_pin_seq"]
        for doc in snapshot["users"]:
            st = _user_from_doc(doc)
            session.users[st.user_id] = st
        for doc in snapshot["pins"]:
            session.pins.append(
                Pin(
                    id=doc["id"],
                    owner_user=doc["owner_user"],
                    canonical_position=Vec3.from_seq(doc["canonical_position"]),
                    color=doc["color"],
                )
            )
        return session


def _pose_doc(pose: Pose) -> dict:
    return {"p": pose.position.as_list(), "q": pose.orientation.as_list()}


def _pose_from_doc(doc: dict) -> Pose:
    return Pose(Vec3.from_seq(doc["p"]), UnitQuat.from_seq(doc["q"]))


def _user_doc(st: UserViewState) -> dict:
    anim = st.animation
    return {
        "animation": None
        if anim is None
        else {
            "delta": anim.delta,
            "duration": anim.duration,
            "leader_id": anim.leader_id,
            "rho_start": anim.rho_start,
            "started_at": anim.started_at,
        },
        "calibrated": st.calibrated,
        "color": st.color,
        "display_name": st.display_name,
        "head": _pose_doc(st.head),
        "last_pose_seq": st.last_pose_seq,
        "left_hand": _pose_doc(st.left_hand),
        "rho": st.rho,
        "right_hand": _pose_doc(st.right_hand),
        "user_id": st.user_id,
    }


def _user_from_doc(doc: dict) -> UserViewState:
    anim_doc = doc["animation"]
    animation = (
        None
        if anim_doc is None
        else AlignmentAnimation(
            rho_start=anim_doc["rho_start"],
            delta=anim_doc["delta"],
            started_at=anim_doc["started_at"],
            duration=anim_doc["duration"],
            leader_id=anim_doc["leader_id"],
        )
    )
    return UserViewState(
        user_id=doc["user_id"],
        display_name=doc["display_name"],
        color=doc["color"],
        head=_pose_from_doc(doc["head"]),
        left_hand=_pose_from_doc(doc["left_hand"]),
        right_hand=_pose_from_doc(doc["right_hand"]),
        rho=doc["rho"],
        animation=animation,
        last_pose_seq=doc["last_pose_seq"],
        calibrated=doc["calibrated"],
    )
