"""Client-side mirror of the shared session.

A replica is seeded from the welcome snapshot and then kept current by
applying server frames in arrival order. Between authoritative pose
updates it animates replica rotations locally from the align_started
parameters, so rendering never waits on the network; the rho echoed in
each pose_update corrects any drift, and align_completed lands the exact
endpoint.

Bots, tests, and the reference web client all share this logic so that
client state provably matches what the server would render.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import protocol as pr
from .geom import CalibrationTransform, Pose, Vec3
from .scene import Pin
from .session import (
    AlignmentAnimation,
    RenderFrame,
    Session,
    UserViewState,
    compose_frame,
)


class ReplicaError(Exception):
    pass


class NotWelcomed(ReplicaError):
    """A state-bearing frame arrived before welcome."""


@dataclass(frozen=True)
class ServerError:
    code: str
    detail: str


class ClientReplica:
    """Applies decoded server frames to a local copy of the session."""

    def __init__(self):
        self.user_id: str | None = None
        self.color: int | None = None
        self.session: Session | None = None
        self.calibration: CalibrationTransform | None = None
        self.errors: list[ServerError] = []

    @property
    def ready(self) -> bool:
        return self.session is not None

    def apply_frame(self, frame: str | bytes, now: float) -> pr.Message:
        msg = pr.decode(frame)
        self.apply(msg, now)
        return msg

    def apply(self, msg: pr.Message, now: float) -> None:
        """Fold one server message into the replica.

        ``now`` is the client clock, assumed to share the server's epoch;
        it only matters for interpolation, never for stored state.
        """
        if msg.type == "welcome":
            self.user_id = msg.payload["user_id"]
            self.color = msg.payload["color"]
            self.session = Session.restore(msg.payload["snapshot"])
            return
        if msg.type == "error":
            self.errors.append(ServerError(msg.payload["code"], msg.payload["detail"]))
            return
        if msg.type == "calibrate_result":
            self.calibration = CalibrationTransform(
                msg.payload["yaw"], Vec3.from_seq(msg.payload["translation"])
            )
            return
        if self.session is None:
            raise NotWelcomed(f"{msg.type} before welcome")
        p = msg.payload
        if msg.type == "user_joined":
            self.session.users[p["id"]] = UserViewState(
                user_id=p["id"],
                display_name=p["name"],
                color=p["color"],
                head=Pose.identity(),
                left_hand=Pose.identity(),
                right_hand=Pose.identity(),
            )
        elif msg.type == "user_left":
            self.session.users.pop(p["id"], None)
        elif msg.type == "pose_update":
            st = self.session.users.get(p["id"])
            if st is None:
                return  # membership change raced ahead of a droppable frame
            st.head = pr.doc_to_pose(p["head"])
            st.left_hand = pr.doc_to_pose(p["lh"])
            st.right_hand = pr.doc_to_pose(p["rh"])
            st.last_pose_seq = p["seq"]
            if st.animation is None:
                # authoritative echo; while animating, local interpolation
                # tracks the same curve and the completion frame lands exact
                st.rho = p["rho"]
        elif msg.type == "align_started":
            st = self.session.users.get(p["follower"])
            if st is None:
                return
            st.animation = AlignmentAnimation(
                rho_start=p["rho_start"],
                delta=p["delta"],
                started_at=p["t0"],
                duration=p["duration"],
                leader_id=p["leader"],
            )
            st.rho = st.animation.rho_at(now)
        elif msg.type == "align_completed":
            st = self.session.users.get(p["follower"])
            if st is None:
                return
            st.rho = p["rho"]
            st.animation = None
        elif msg.type == "pin_added":
            doc = p["pin"]
            self.session.pins.append(
                Pin(
                    id=doc["id"],
                    owner_user=doc["owner_user"],
                    canonical_position=Vec3.from_seq(doc["canonical_position"]),
                    color=doc["color"],
                )
            )
        else:
            raise ReplicaError(f"unexpected server message {msg.type}")

    def advance(self, now: float) -> None:
        """Interpolate in-flight replica rotations to the given client time."""
        if self.session is None:
            return
        for st in self.session.users.values():
            anim = st.animation
            if anim is None:
                continue
            if now >= anim.done_at:
                st.rho = anim.rho_start + anim.delta
                st.animation = None
            else:
                st.rho = anim.rho_at(now)

    def rho_of(self, user_id: str) -> float:
        if self.session is None:
            raise NotWelcomed("no snapshot yet")
        return self.session.users[user_id].rho

    def render(self, viewer_id: str | None = None) -> RenderFrame:
        """Compose the frame this client should draw, via the shared path."""
        if self.session is None:
            raise NotWelcomed("no snapshot yet")
        viewer = viewer_id if viewer_id is not None else self.user_id
        if viewer is None or viewer not in self.session.users:
            raise ReplicaError(f"no viewer {viewer!r} in replica")
        return compose_frame(
            self.session.scene,
            self.session.pivot,
            self.session.config.decoupling_enabled,
            self.session.users,
            self.session.pins,
            viewer,
        )
