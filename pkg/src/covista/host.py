"""Transport-agnostic service around one Session.

The real network server and the in-process simulator both drive this class:
they own connections and clocks, and forward frames here. All session
mutations funnel through one logical caller (single-writer); outbound
frames go through per-connection send callbacks.

Wire rule: hello must be the first frame on every connection. Replies and
broadcasts follow the catalog; rho is wrapped whenever it leaves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from . import protocol as pr
from .geom import (
    ZERO,
    CalibrationTransform,
    GeomError,
    InvalidDirection,
    Pivot,
    Vec3,
    rotate_y,
    solve_yaw_calibration,
    wrap_angle,
)
from .scene import Scene
from .session import (
    AlignCompleted,
    AlignStarted,
    Session,
    SessionConfig,
    SessionError,
    SessionFull,
    FollowerOnAxis,
    LeaderOnAxis,
    NoTarget,
    SelfTarget,
)

# send(frame_text, droppable) delivers one frame; close() asks the transport
# to drop the connection once pending sends are out.
SendFn = Callable[[str, bool], None]
CloseFn = Callable[[], None]

EventSink = Callable[[str, float, dict], None]


@dataclass
class _Conn:
    send: SendFn
    close: CloseFn
    user_id: str | None = None


_ERROR_CODES = {
    pr.MalformedFrame: "malformed_frame",
    pr.UnknownType: "unknown_type",
    pr.VersionMismatch: "version_mismatch",
    pr.SchemaViolation: "schema_violation",
    NoTarget: "no_target",
    SelfTarget: "self_target",
    FollowerOnAxis: "follower_on_axis",
    LeaderOnAxis: "leader_on_axis",
    SessionFull: "session_full",
    InvalidDirection: "invalid_direction",
}


def _error_code(err: Exception) -> str:
    for cls, code in _ERROR_CODES.items():
        if isinstance(err, cls):
            return code
    # geom raises named subtypes for calibration failures; snake-case them
    if isinstance(err, GeomError):
        return _snake(type(err).__name__)
    return "internal_error"


def _snake(name: str) -> str:
    out = []
    for i, ch in enumerate(name):
        if ch.isupper() and i:
            out.append("_")
        out.append(ch.lower())
    return "".join(out)


class SessionHost:
    """Feeds decoded frames into a Session and fans state back out."""

    def __init__(
        self,
        scene: Scene,
        config: SessionConfig | None = None,
        *,
        event_sink: EventSink | None = None,
    ):
        self.session = Session(scene, config)
        self._conns: dict[object, _Conn] = {}
        self._event_sink = event_sink

    # -- connection lifecycle ------------------------------------------------

    def connect(self, conn_id, send: SendFn, close: CloseFn) -> None:
        self._conns[conn_id] = _Conn(send, close)

    def disconnect(self, conn_id) -> None:
        """Transport-level close; a joined user leaves the session."""
        conn = self._conns.pop(conn_id, None)
        if conn is None or conn.user_id is None:
            return
        if conn.user_id in self.session.users:
            event = self.session.leave(conn.user_id)
            self._emit("user_left", event.at, {"id": event.user_id})
            self._broadcast(pr.Message("user_left", {"id": event.user_id}))

    def shutdown(self) -> dict:
        """Notify everyone, drop all connections, hand back a final snapshot."""
        snapshot = self.session.snapshot()
        for user_id in list(self.session.users):
            self._broadcast(pr.Message("user_left", {"id": user_id}))
        for conn in list(self._conns.values()):
            conn.close()
        self._conns.clear()
        return snapshot

    def user_of(self, conn_id) -> str | None:
        conn = self._conns.get(conn_id)
        return conn.user_id if conn else None

    # -- inbound -------------------------------------------------------------

    def frame_received(self, conn_id, frame: str | bytes) -> None:
        conn = self._conns.get(conn_id)
        if conn is None:
            return
        try:
            msg = pr.decode(frame)
        except pr.DecodeError as err:
            self._send_error(conn, err)
            if conn.user_id is None:
                self._drop(conn_id, conn)
            return
        if conn.user_id is None:
            if msg.type != "hello":
                conn.send(
                    pr.encode(
                        pr.Message(
                            "error",
                            {"code": "hello_required", "detail": "first frame must be hello"},
                        )
                    ),
                    False,
                )
                self._drop(conn_id, conn)
                return
            self._handle_hello(conn_id, conn, msg)
            return
        if msg.type == "hello":
            self._send_error_code(conn, "already_joined", "hello was already accepted")
            return
        if msg.type not in pr.CLIENT_TO_SERVER:
            self._send_error_code(conn, "unexpected_type", f"{msg.type} flows server to client")
            return
        handler = {
            "calibrate_request": self._handle_calibrate,
            "pose": self._handle_pose,
            "align_request": self._handle_align,
            "pin_place": self._handle_pin,
            "leave": self._handle_leave,
        }[msg.type]
        try:
            handler(conn_id, conn, msg)
        except (SessionError, GeomError) as err:
            self._send_error(conn, err)

    # -- handlers ------------------------------------------------------------

    def _handle_hello(self, conn_id, conn: _Conn, msg: pr.Message) -> None:
        try:
            user_id, color = self.session.join(msg.payload["name"])
        except SessionFull as err:
            self._send_error(conn, err)
            self._drop(conn_id, conn)
            return
        conn.user_id = user_id
        conn.send(
            pr.encode(
                pr.Message(
                    "welcome",
                    {"user_id": user_id, "color": color, "snapshot": self.session.snapshot()},
                )
            ),
            False,
        )
        self._emit(
            "user_joined",
            self.session.clock,
            {"id": user_id, "name": msg.payload["name"], "color": color},
        )
        self._broadcast(
            pr.Message("user_joined", {"id": user_id, "name": msg.payload["name"], "color": color}),
            exclude=conn_id,
        )

    def _handle_calibrate(self, conn_id, conn: _Conn, msg: pr.Message) -> None:
        pairs = [
            (Vec3.from_seq(p["local"]), Vec3.from_seq(p["shared"]))
            for p in msg.payload["pairs"]
        ]
        xf = solve_yaw_calibration(pairs)
        rms = _calibration_rms(xf, pairs)
        self.session.users[conn.user_id].calibrated = True
        conn.send(
            pr.encode(
                pr.Message(
                    "calibrate_result",
                    {"yaw": xf.yaw, "translation": xf.translation.as_list(), "rms": rms},
                )
            ),
            False,
        )

    def _handle_pose(self, conn_id, conn: _Conn, msg: pr.Message) -> None:
        self.session.update_pose(
            conn.user_id,
            pr.doc_to_pose(msg.payload["head"]),
            pr.doc_to_pose(msg.payload["lh"]),
            pr.doc_to_pose(msg.payload["rh"]),
            msg.payload["seq"],
        )

    def _handle_align(self, conn_id, conn: _Conn, msg: pr.Message) -> None:
        event = self.session.request_alignment(
            conn.user_id,
            Vec3.from_seq(msg.payload["ray_origin"]),
            Vec3.from_seq(msg.payload["ray_dir"]),
        )
        if isinstance(event, AlignStarted):
            self._emit(
                "align_requested",
                event.t0,
                {"follower": event.follower_id, "leader": event.leader_id},
            )
            self._emit(
                "align_started",
                event.t0,
                {
                    "follower": event.follower_id,
                    "leader": event.leader_id,
                    "rho_start": event.rho_start,
                    "delta": event.delta,
                    "duration": event.duration,
                    "t0": event.t0,
                },
            )
            self._broadcast(
                pr.Message(
                    "align_started",
                    {
                        "follower": event.follower_id,
                        "leader": event.leader_id,
                        "rho_start": event.rho_start,
                        "delta": event.delta,
                        "duration": event.duration,
                        "t0": event.t0,
                    },
                )
            )
        else:
            # already aligned: no animation, completion goes straight out
            self._emit(
                "align_requested",
                event.at,
                {"follower": event.follower_id, "leader": None},
            )
            self._emit_completed(event)
            self._broadcast(
                pr.Message(
                    "align_completed", {"follower": event.follower_id, "rho": event.rho}
                )
            )

    def _handle_pin(self, conn_id, conn: _Conn, msg: pr.Message) -> None:
        pin = self.session.place_pin(conn.user_id, Vec3.from_seq(msg.payload["world"]))
        self._emit(
            "pin_placed",
            self.session.clock,
            {
                "user": conn.user_id,
                "pin_id": pin.id,
                "canonical": pin.canonical_position.as_list(),
                "color": pin.color,
            },
        )
        self._broadcast(
            pr.Message(
                "pin_added",
                {
                    "pin": {
                        "canonical_position": pin.canonical_position.as_list(),
                        "color": pin.color,
                        "id": pin.id,
                        "owner_user": pin.owner_user,
                    }
                },
            )
        )

    def _handle_leave(self, conn_id, conn: _Conn, msg: pr.Message) -> None:
        self.disconnect(conn_id)
        conn.close()

    # -- clocking ------------------------------------------------------------

    def tick(self, now: float) -> None:
        """Advance the session; broadcast any animation completions."""
        for event in self.session.tick(now):
            assert isinstance(event, AlignCompleted)
            self._emit_completed(event)
            self._broadcast(
                pr.Message("align_completed", {"follower": event.follower_id, "rho": event.rho})
            )

    def fanout(self) -> None:
        """Authoritative pose broadcast for every user, rho wrapped."""
        for user_id, st in self.session.users.items():
            frame = pr.encode(
                pr.Message(
                    "pose_update",
                    {
                        "id": user_id,
                        "head": pr.pose_to_doc(st.head),
                        "lh": pr.pose_to_doc(st.left_hand),
                        "rh": pr.pose_to_doc(st.right_hand),
                        "rho": wrap_angle(st.rho),
                        "seq": st.last_pose_seq,
                    },
                )
            )
            for conn in self._conns.values():
                if conn.user_id is not None:
                    conn.send(frame, True)

    # -- plumbing ------------------------------------------------------------

    def _emit_completed(self, event: AlignCompleted) -> None:
        self._emit(
            "align_completed",
            event.at,
            {"follower": event.follower_id, "rho": event.rho},
        )

    def _emit(self, kind: str, t: float, payload: dict) -> None:
        if self._event_sink is not None:
            self._event_sink(kind, t, payload)

    def _broadcast(self, msg: pr.Message, exclude=None) -> None:
        frame = pr.encode(msg)
        for conn_id, conn in list(self._conns.items()):
            if conn_id == exclude or conn.user_id is None:
                continue
            conn.send(frame, False)

    def _send_error(self, conn: _Conn, err: Exception) -> None:
        self._send_error_code(conn, _error_code(err), str(err))

    def _send_error_code(self, conn: _Conn, code: str, detail: str) -> None:
        conn.send(pr.encode(pr.Message("error", {"code": code, "detail": detail})), False)

    def _drop(self, conn_id, conn: _Conn) -> None:
        self._conns.pop(conn_id, None)
        conn.close()


def _calibration_rms(xf: CalibrationTransform, pairs) -> float:
    origin = Pivot(ZERO)
    total = 0.0
    for local, shared in pairs:
        mapped = rotate_y(local, origin, xf.yaw) + xf.translation
        total += mapped.distance_to(shared) ** 2
    return math.sqrt(total / len(pairs))
