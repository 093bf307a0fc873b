"""Regenerates the golden wire frames in fixtures/protocol/.

One canonical frame per message type. Values are chosen to exercise the
number formatting edge cases (integral floats, negative zero, exponent
boundaries) so an independent codec has to get all of them right.
Run: python scripts/make_protocol_fixtures.py
"""

import math
from pathlib import Path

from covista import protocol, session
from covista.geom import Pose, UnitQuat, Vec3
from covista.scene import load_scene

ROOT = Path(__file__).parent.parent
OUT = ROOT / "fixtures" / "protocol"

POSE_A = {"p": [0.25, 1.6, -1.5], "q": [1.0, 0.0, 0.0, 0.0]}
POSE_B = {
    "p": [1.4772116419638272, 1.6, -0.26047226650039534],
    "q": UnitQuat.yaw(math.radians(100.0)).as_list(),
}
POSE_C = {"p": [-0.1, 1.02, 0.3], "q": UnitQuat.yaw(-0.75).as_list()}


def welcome_snapshot() -> dict:
    scene = load_scene((ROOT / "fixtures" / "scenes" / "terrain_demo.json").read_text())
    s = session.Session(scene)
    uid, _ = s.join("ada")
    head = Pose(Vec3(0.0, 1.6, 1.5), UnitQuat.identity())
    hand = Pose(Vec3(0.2, 1.1, 0.4), UnitQuat.yaw(0.5))
    s.update_pose(uid, head, hand, hand, seq=3)
    s.place_pin(uid, Vec3(0.3, 1.0, -0.2))
    s.tick(2.5)
    return s.snapshot()


FRAMES = {
    "hello": {"name": "ada"},
    "calibrate_request": {
        "pairs": [
            {"local": [0.0, 0.0, 1.0], "shared": [2.0, 0.0, 2.0]},
            {"local": [1.0, 0.0, 0.0], "shared": [1.0, 0.0, 1.0]},
            {"local": [0.25, 0.1, -0.5], "shared": [1.25, 0.1, 2.75]},
        ]
    },
    "pose": {"head": POSE_A, "lh": POSE_B, "rh": POSE_C, "seq": 42},
    "align_request": {
        "ray_origin": [1.4772116419638272, 1.6, -0.26047226650039534],
        "ray_dir": [-0.6778523445188741, 0.0, 0.7351976450520344],
    },
    "pin_place": {"world": [0.30000000000000004, 1.0, -0.2]},
    "leave": {},
    "welcome": {"user_id": "u2", "color": 1, "snapshot": welcome_snapshot()},
    "calibrate_result": {
        "yaw": math.radians(90.0),
        "translation": [1.0, 0.0, 2.0],
        "rms": 0.0031622776601683794,
    },
    "user_joined": {"id": "u2", "name": "grace", "color": 1},
    "user_left": {"id": "u2"},
    "pose_update": {
        "id": "u1",
        "head": POSE_A,
        "lh": POSE_B,
        "rh": POSE_C,
        "rho": math.radians(50.0),
        "seq": 42,
    },
    "align_started": {
        "follower": "u2",
        "leader": "u1",
        "rho_start": 0.0,
        "delta": math.radians(100.0),
        "duration": 100.0 / 90.0,
        "t0": 2.5,
    },
    "align_completed": {"follower": "u2", "rho": math.radians(100.0)},
    "pin_added": {
        "pin": {
            "canonical_position": [0.3, 1.0, -0.2],
            "color": 0,
            "id": "p1",
            "owner_user": "u1",
        }
    },
    "error": {"code": "no_target", "detail": "alignment ray does not hit any user's head"},
}


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for msg_type, payload in FRAMES.items():
        frame = protocol.encode(protocol.Message(msg_type, payload))
        protocol.decode(frame)  # every golden frame must be decodable
        (OUT / f"{msg_type}.json").write_text(frame + "\n")
    print(f"wrote {len(FRAMES)} frames to {OUT}")


if __name__ == "__main__":
    main()
