"""
A first alignment, step by step
===============================

Two people stand at a table. The leader is at azimuth 0 degrees, the
follower at 100 degrees. The follower points at the leader and asks to
see the scene from the leader's side. Nothing moves for the leader; the
follower's replica of the objects rotates 100 degrees about the table
axis, and from then on each one sees the other's hands counter-rotated
so pointing still lands on the right spot.
"""

import math

from covista.geom import Pose, UnitQuat, Vec3, rotate_y
from covista.scene import load_scene
from covista.session import Session

DEG = math.pi / 180.0


def ring(az_deg, r=1.5):
    a = az_deg * DEG
    return Vec3(r * math.sin(a), 1.6, r * math.cos(a))


# a small table scene: one crate to look at, pivot at the table center
scene = load_scene(
    {
        "name": "demo table",
        "table_center": [0.0, 0.9, 0.0],
        "objects": [
            {
                "id": "crate",
                "shape": "box",
                "position": [0.2, 1.0, -0.1],
                "yaw_deg": 30.0,
                "dimensions": [0.2, 0.2, 0.2],
                "label": "crate",
            }
        ],
    }
)
session = Session(scene)

leader, _ = session.join("leader")
follower, _ = session.join("follower")

# seat both users and give the leader a pointing hand
lp, fp = ring(0.0), ring(100.0)
point = Pose(Vec3(lp.x + 0.2, 1.2, lp.z - 0.3), UnitQuat.identity())
session.update_pose(leader, Pose(lp, UnitQuat.identity()), point, point, 1)
session.update_pose(
    follower,
    Pose(fp, UnitQuat.yaw(100.0 * DEG + math.pi)),  # facing the table
    Pose(Vec3(fp.x - 0.2, 1.2, fp.z), UnitQuat.identity()),
    Pose(Vec3(fp.x + 0.2, 1.2, fp.z), UnitQuat.identity()),
    1,
)

# the follower aims at the leader's head and triggers the alignment
started = session.request_alignment(follower, fp, (lp - fp).normalized())
print(f"alignment starts at rho = {math.degrees(started.rho_start):.1f} deg")
print(f"sweep: {math.degrees(started.delta):+.1f} deg over {started.duration:.3f} s")

# watch the constant-speed sweep at a few instants
for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
    now = started.t0 + frac * started.duration
    session.tick(now)
    rho = session.users[follower].rho
    print(f"  t = {now:.3f} s   follower replica at {math.degrees(rho):6.1f} deg")

# where does the follower now see the leader's pointing hand? exactly the
# true hand swept 100 degrees about the pivot, so it touches the same
# feature on the rotated replica
frame = session.render_frame(follower)
remote = next(r for r in frame.remotes if r.user_id == leader)
shown = remote.right_hand.position
expected = rotate_y(point.position, session.pivot, 100.0 * DEG)
print(f"leader's hand rendered at  ({shown.x:+.3f}, {shown.y:+.3f}, {shown.z:+.3f})")
print(f"true hand rotated +100 deg ({expected.x:+.3f}, {expected.y:+.3f}, {expected.z:+.3f})")

# the cap, unlike the hands, stays where the leader really is
print(f"leader's cap stays at      ({remote.cap.position.x:+.3f}, "
      f"{remote.cap.position.y:+.3f}, {remote.cap.position.z:+.3f})")
