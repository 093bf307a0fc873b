import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covista import session as ss
from covista.geom import (
    Pose,
    UnitQuat,
    Vec3,
    azimuth,
    canonical_to_world,
    wrap_angle,
    world_to_canonical,
)
from covista.scene import load_scene

DEG = math.pi / 180.0

SCENE_DOC = {
    "name": "bench",
    "table_center": [0.0, 0.9, 0.0],
    "objects": [
        {
            "id": "crate",
            "shape": "box",
            "position": [0.2, 1.0, -0.1],
            "yaw_deg": 30.0,
            "dimensions": [0.4, 0.2, 0.4],
            "label": "crate",
        },
        {
            "id": "ball",
            "shape": "sphere",
            "position": [-0.3, 1.0, 0.2],
            "yaw_deg": 0.0,
            "radius": 0.1,
            "label": "ball",
        },
    ],
}


def make_session(**config_overrides) -> ss.Session:
    scene = load_scene(json.loads(json.dumps(SCENE_DOC)))
    return ss.Session(scene, ss.SessionConfig(**config_overrides))


def standing_at(azimuth_deg: float, radius: float = 1.5, height: float = 1.6) -> Pose:
    """Head pose on a circle around the pivot, looking along -position."""
    a = azimuth_deg * DEG
    return Pose(Vec3(radius * math.sin(a), height, radius * math.cos(a)), UnitQuat.identity())


def seat(session: ss.Session, name: str, azimuth_deg: float, radius: float = 1.5) -> str:
    uid, _ = session.join(name)
    head = standing_at(azimuth_deg, radius)
    session.update_pose(uid, head, head, head, seq=0)
    return uid


def aim_at(session: ss.Session, from_id: str, to_id: str) -> tuple[Vec3, Vec3]:
    origin = session.users[from_id].head.position
    target = session.users[to_id].head.position
    return origin, (target - origin).normalized()


class TestJoin:
    def test_first_join_gets_color_zero(self):
        s = make_session()
        uid, color = s.join("ada")
        assert uid == "u1"
        assert color == 0

    def test_second_join_distinct_color(self):
        s = make_session()
        _, c1 = s.join("ada")
        uid2, c2 = s.join("grace")
        assert uid2 == "u2"
        assert c2 == 1
        assert c1 != c2

    def test_rejoin_reuses_lowest_free_color(self):
        s = make_session()
        s.join("a")
        u2, _ = s.join("b")
        s.join("c")
        s.leave(u2)
        uid, color = s.join("d")
        assert color == 1  # freed by b
        assert uid == "u4"  # ids are never reused

    def test_session_full(self):
        s = make_session(max_users=2)
        s.join("a")
        s.join("b")
        with pytest.raises(ss.SessionFull):
            s.join("c")

    def test_join_starts_neutral(self):
        s = make_session()
        uid, _ = s.join("a")
        st = s.users[uid]
        assert st.rho == 0.0
        assert st.animation is None
        assert st.head == Pose.identity()

    def test_color_names_wrap_with_suffix(self):
        assert ss.color_name(0) == "orange"
        assert ss.color_name(1) == "blue"
        assert ss.color_name(8) == "orange2"
        assert ss.color_name(17) == "blue3"

    def test_leave_unknown_user(self):
        s = make_session()
        with pytest.raises(ss.UnknownUser):
            s.leave("u9")

    def test_pins_outlive_owner(self):
        s = make_session()
        uid = seat(s, "a", 0.0)
        s.place_pin(uid, Vec3(0.5, 1.0, 0.5))
        s.leave(uid)
        assert len(s.pins) == 1
        assert s.pins[0].owner_user == uid


class TestUpdatePose:
    def test_newer_seq_accepted(self):
        s = make_session()
        uid, _ = s.join("a")
        p4 = Pose.identity(Vec3(0, 1, 1))
        p5 = Pose.identity(Vec3(0, 1, 2))
        assert s.update_pose(uid, p4, p4, p4, seq=4) is True
        assert s.update_pose(uid, p5, p5, p5, seq=5) is True
        assert s.users[uid].head.position == Vec3(0, 1, 2)

    def test_stale_seq_dropped(self):
        s = make_session()
        uid, _ = s.join("a")
        p5 = Pose.identity(Vec3(0, 1, 2))
        p4 = Pose.identity(Vec3(0, 1, 1))
        s.update_pose(uid, p5, p5, p5, seq=5)
        assert s.update_pose(uid, p4, p4, p4, seq=4) is False
        assert s.users[uid].head.position == Vec3(0, 1, 2)
        assert s.users[uid].last_pose_seq == 5

    def test_duplicate_seq_dropped(self):
        s = make_session()
        uid, _ = s.join("a")
        p = Pose.identity(Vec3(0, 1, 2))
        s.update_pose(uid, p, p, p, seq=5)
        assert s.update_pose(uid, p, p, p, seq=5) is False
        assert s.stale_pose_drops[uid] == 1

    def test_unknown_user(self):
        s = make_session()
        p = Pose.identity()
        with pytest.raises(ss.UnknownUser):
            s.update_pose("u9", p, p, p, seq=0)


class TestRequestAlignment:
    def test_hundred_degree_offset(self):
        # follower 100 degrees around the table from the leader, both at rho 0
        s = make_session()
        leader = seat(s, "lead", 0.0)
        follower = seat(s, "follow", 100.0)
        origin, ray = aim_at(s, follower, leader)
        ev = s.request_alignment(follower, origin, ray)
        assert isinstance(ev, ss.AlignStarted)
        assert ev.leader_id == leader
        assert ev.rho_start == 0.0
        assert ev.delta == pytest.approx(100.0 * DEG, abs=1e-12)
        assert ev.duration == pytest.approx(100.0 / 90.0, abs=1e-12)

    def test_already_aligned_completes_immediately(self):
        # same bearing, different distance from the table
        s = make_session()
        leader = seat(s, "lead", 0.0, radius=1.2)
        follower = seat(s, "follow", 0.0, radius=2.0)
        origin, ray = aim_at(s, follower, leader)
        ev = s.request_alignment(follower, origin, ray)
        assert isinstance(ev, ss.AlignCompleted)
        assert ev.rho == 0.0
        assert s.users[follower].animation is None

    def test_empty_space_is_no_target(self):
        s = make_session()
        seat(s, "lead", 0.0)
        follower = seat(s, "follow", 100.0)
        origin = s.users[follower].head.position + Vec3(0.3, -0.3, 0.0)
        with pytest.raises(ss.NoTarget):
            s.request_alignment(follower, origin, Vec3(0.0, -1.0, 0.0))

    def test_own_head_only_is_self_target(self):
        s = make_session()
        seat(s, "lead", 0.0)
        follower = seat(s, "follow", 100.0)
        head = s.users[follower].head.position
        # aim back at own head from a point nearby
        origin = head + Vec3(0.0, 0.0, 1.0)
        with pytest.raises(ss.SelfTarget):
            s.request_alignment(follower, origin, Vec3(0.0, 0.0, -1.0))

    def test_nearest_head_wins(self):
        s = make_session(head_pick_radius=0.15)
        follower = seat(s, "follow", 90.0)
        near = seat(s, "near", 0.0, radius=1.0)
        far = seat(s, "far", 0.0, radius=2.5)
        # both heads sit on the +Z axis as seen from the follower's aim point
        origin = Vec3(0.0, 1.6, 3.5)
        ev = s.request_alignment(follower, origin, Vec3(0.0, 0.0, -1.0))
        assert isinstance(ev, ss.AlignStarted)
        assert ev.leader_id == far  # nearer along the ray from z=3.5
        assert near != far

    def test_new_request_replaces_animation(self):
        s = make_session()
        leader = seat(s, "lead", 0.0)
        follower = seat(s, "follow", 100.0)
        origin, ray = aim_at(s, follower, leader)
        first = s.request_alignment(follower, origin, ray)
        s.tick(first.duration / 2.0)
        mid_rho = s.users[follower].rho
        second = s.request_alignment(follower, origin, ray)
        assert isinstance(second, ss.AlignStarted)
        assert second.rho_start == mid_rho
        assert second.t0 == first.duration / 2.0
        assert s.users[follower].animation.rho_start == mid_rho

    def test_mid_animation_leader_rho_is_used(self):
        # leader is itself mid-flight toward a third user
        s = make_session()
        anchor = seat(s, "anchor", 0.0)
        leader = seat(s, "lead", 50.0)
        follower = seat(s, "follow", 180.0)
        o1, r1 = aim_at(s, leader, anchor)
        s.request_alignment(leader, o1, r1)
        s.tick(0.2)  # leader partway through its sweep
        leader_rho_now = s.users[leader].rho
        assert leader_rho_now != 0.0
        o2, r2 = aim_at(s, follower, leader)
        ev = s.request_alignment(follower, o2, r2)
        alpha_f = azimuth(s.users[follower].head.position, s.pivot)
        alpha_l = azimuth(s.users[leader].head.position, s.pivot)
        expected = leader_rho_now + wrap_angle(alpha_f - alpha_l)
        assert ev.rho_start + ev.delta == pytest.approx(expected, abs=1e-12)

    def test_follower_on_axis(self):
        s = make_session()
        seat(s, "lead", 0.0)
        follower, _ = s.join("axis")
        head = Pose.identity(Vec3(0.0, 1.6, 0.0))  # directly above the pivot
        s.update_pose(follower, head, head, head, seq=0)
        origin, ray = aim_at(s, follower, "u1")
        with pytest.raises(ss.FollowerOnAxis):
            s.request_alignment(follower, origin, ray)

    def test_leader_on_axis(self):
        s = make_session()
        leader, _ = s.join("axis")
        head = Pose.identity(Vec3(0.0, 1.6, 0.0))
        s.update_pose(leader, head, head, head, seq=0)
        follower = seat(s, "follow", 100.0)
        origin, ray = aim_at(s, follower, leader)
        with pytest.raises(ss.LeaderOnAxis):
            s.request_alignment(follower, origin, ray)

    def test_leader_untouched(self):
        s = make_session()
        leader = seat(s, "lead", 0.0)
        follower = seat(s, "follow", 100.0)
        before_rho = s.users[leader].rho
        before_head = s.users[leader].head
        origin, ray = aim_at(s, follower, leader)
        ev = s.request_alignment(follower, origin, ray)
        s.tick(ev.duration + 0.5)
        assert s.users[leader].rho == before_rho
        assert s.users[leader].head == before_head
        assert s.users[leader].animation is None

    def test_unknown_follower(self):
        s = make_session()
        with pytest.raises(ss.UnknownUser):
            s.request_alignment("u9", Vec3(0, 0, 0), Vec3(0, 0, 1))


class TestTick:
    def test_halfway_interpolation(self):
        s = make_session()
        leader = seat(s, "lead", 0.0)
        follower = seat(s, "follow", 100.0)
        origin, ray = aim_at(s, follower, leader)
        ev = s.request_alignment(follower, origin, ray)
        s.tick(ev.duration / 2.0)
        assert s.users[follower].rho == pytest.approx(ev.rho_start + ev.delta / 2.0, abs=1e-12)
        assert s.users[follower].animation is not None

    def test_tick_without_animation_is_quiet(self):
        s = make_session()
        seat(s, "a", 0.0)
        assert s.tick(0.5) == []
        assert s.clock == 0.5

    def test_completion_is_exact(self):
        s = make_session()
        leader = seat(s, "lead", 0.0)
        follower = seat(s, "follow", 100.0)
        origin, ray = aim_at(s, follower, leader)
        ev = s.request_alignment(follower, origin, ray)
        events = s.tick(ev.duration + 0.2)  # tick lands past the finish
        assert len(events) == 1
        done = events[0]
        assert isinstance(done, ss.AlignCompleted)
        assert done.follower_id == follower
        assert done.at == ev.t0 + ev.duration
        assert s.users[follower].rho == ev.rho_start + ev.delta  # bit-exact endpoint
        assert done.rho == wrap_angle(ev.rho_start + ev.delta)
        assert s.users[follower].animation is None

    def test_staggered_completions_in_order(self):
        s = make_session()
        leader = seat(s, "lead", 0.0)
        f1 = seat(s, "late", 170.0)  # long sweep, requested first
        f2 = seat(s, "soon", 30.0)  # short sweep, requested second
        o1, r1 = aim_at(s, f1, leader)
        s.request_alignment(f1, o1, r1)
        s.tick(0.05)
        o2, r2 = aim_at(s, f2, leader)
        s.request_alignment(f2, o2, r2)
        events = s.tick(10.0)
        assert [e.follower_id for e in events] == [f2, f1]
        assert events[0].at < events[1].at

    def test_clock_went_backwards(self):
        s = make_session()
        s.tick(1.0)
        with pytest.raises(ss.ClockWentBackwards):
            s.tick(0.5)
        s.tick(1.0)  # equal time is allowed

    @given(st.floats(min_value=0.0, max_value=2.0))
    @settings(max_examples=60, deadline=None)
    def test_rho_stays_between_endpoints(self, t):
        s = make_session()
        leader = seat(s, "lead", 0.0)
        follower = seat(s, "follow", 140.0)
        origin, ray = aim_at(s, follower, leader)
        ev = s.request_alignment(follower, origin, ray)
        s.tick(t)
        rho = s.users[follower].rho
        lo, hi = sorted((ev.rho_start, ev.rho_start + ev.delta))
        assert lo <= rho <= hi


class TestPlacePin:
    def test_zero_rho_keeps_point(self):
        s = make_session()
        uid = seat(s, "a", 0.0)
        p = Vec3(0.37, 1.02, -0.21)
        pin = s.place_pin(uid, p)
        assert pin.canonical_position == p  # rho 0 means world equals canonical
        assert pin.id == "p1"
        assert pin.owner_user == uid
        assert pin.color == s.users[uid].color

    def test_ninety_degree_rho(self):
        s = make_session()
        uid = seat(s, "a", 0.0)
        s.users[uid].rho = 90.0 * DEG
        pin = s.place_pin(uid, Vec3(1.0, 1.0, 0.0))
        assert pin.canonical_position.distance_to(Vec3(0.0, 1.0, 1.0)) < 1e-12

    def test_same_visual_spot_same_canonical(self):
        s = make_session()
        ua = seat(s, "a", 0.0)
        ub = seat(s, "b", 100.0)
        s.users[ub].rho = 100.0 * DEG
        q = Vec3(0.3, 1.0, 0.15)
        pin_a = s.place_pin(ua, canonical_to_world(q, s.users[ua].rho, s.pivot))
        pin_b = s.place_pin(ub, canonical_to_world(q, s.users[ub].rho, s.pivot))
        assert pin_a.canonical_position.distance_to(pin_b.canonical_position) < 1e-9
        assert pin_a.canonical_position.distance_to(q) < 1e-9
        assert [pin_a.id, pin_b.id] == ["p1", "p2"]

    def test_mid_animation_uses_instantaneous_rho(self):
        s = make_session()
        leader = seat(s, "lead", 0.0)
        follower = seat(s, "follow", 100.0)
        origin, ray = aim_at(s, follower, leader)
        ev = s.request_alignment(follower, origin, ray)
        s.tick(ev.duration / 2.0)
        rho_now = s.users[follower].rho
        q = Vec3(0.2, 1.0, 0.4)
        pin = s.place_pin(follower, canonical_to_world(q, rho_now, s.pivot))
        assert pin.canonical_position.distance_to(q) < 1e-9

    def test_unknown_user(self):
        s = make_session()
        with pytest.raises(ss.UnknownUser):
            s.place_pin("u9", Vec3(0, 0, 0))


class TestRenderFrame:
    def test_zero_rho_frame_is_raw_state(self):
        s = make_session()
        ua = seat(s, "a", 0.0)
        ub = seat(s, "b", 100.0)
        s.place_pin(ub, Vec3(0.4, 1.0, 0.1))
        frame = s.render_frame(ua)
        for op, obj in zip(frame.objects, s.scene.objects):
            assert op.position == obj.position
            assert op.yaw == obj.yaw
        assert frame.pins[0].world == s.pins[0].canonical_position
        remote = frame.remotes[0]
        assert remote.user_id == ub
        assert remote.cap == s.users[ub].head
        assert remote.left_hand == s.users[ub].left_hand
        assert remote.right_hand == s.users[ub].right_hand
        assert frame.own_left == s.users[ua].left_hand

    def test_leader_hand_lands_on_target_in_follower_view(self):
        # leader's hand rests on canonical point q; after alignment the
        # follower sees that hand over q's position in their rotated replica
        s = make_session()
        leader = seat(s, "lead", 0.0)
        follower = seat(s, "follow", 100.0)
        q = Vec3(0.3, 1.0, -0.2)
        hand = Pose.identity(q)  # leader rho 0: world equals canonical
        head = s.users[leader].head
        s.update_pose(leader, head, hand, hand, seq=1)
        s.users[follower].rho = 100.0 * DEG
        frame = s.render_frame(follower)
        remote = next(r for r in frame.remotes if r.user_id == leader)
        q_in_follower_replica = canonical_to_world(q, s.users[follower].rho, s.pivot)
        assert remote.right_hand.position.distance_to(q_in_follower_replica) < 1e-12

    def test_caps_stay_true_while_hands_decouple(self):
        s = make_session()
        ua = seat(s, "a", 0.0)
        ub = seat(s, "b", 100.0)
        s.users[ub].rho = 100.0 * DEG
        frame = s.render_frame(ua)
        remote = frame.remotes[0]
        assert remote.cap == s.users[ub].head
        assert remote.left_hand != s.users[ub].left_hand  # counter-rotated

    def test_decoupling_off_renders_true_hands(self):
        s = make_session(decoupling_enabled=False)
        ua = seat(s, "a", 0.0)
        ub = seat(s, "b", 100.0)
        s.users[ub].rho = 100.0 * DEG
        frame = s.render_frame(ua)
        remote = frame.remotes[0]
        assert remote.left_hand == s.users[ub].left_hand
        assert remote.right_hand == s.users[ub].right_hand

    def test_own_hands_untransformed(self):
        s = make_session()
        ua = seat(s, "a", 30.0)
        s.users[ua].rho = 2.0
        frame = s.render_frame(ua)
        assert frame.own_left is s.users[ua].left_hand
        assert frame.own_right is s.users[ua].right_hand

    def test_animation_sweeps_hands_monotonically(self):
        s = make_session()
        leader = seat(s, "lead", 0.0)
        follower = seat(s, "follow", 100.0)
        origin, ray = aim_at(s, follower, leader)
        ev = s.request_alignment(follower, origin, ray)
        azimuths = []
        steps = 20
        for i in range(1, steps + 1):
            s.tick(ev.duration * i / steps)
            frame = s.render_frame(follower)
            remote = next(r for r in frame.remotes if r.user_id == leader)
            azimuths.append(azimuth(remote.right_hand.position, s.pivot))
        sweeps = [wrap_angle(b - a) for a, b in zip(azimuths, azimuths[1:])]
        assert all(d > 0.0 for d in sweeps)  # delta is +100 degrees here

    def test_unknown_viewer(self):
        s = make_session()
        with pytest.raises(ss.UnknownUser):
            s.render_frame("u9")


class TestAgreementInvariants:
    def test_post_alignment_canonical_agreement(self):
        s = make_session()
        leader = seat(s, "lead", 20.0)
        follower = seat(s, "follow", 120.0)
        hand = Pose.identity(Vec3(0.42, 1.05, 0.33))
        head = s.users[leader].head
        s.update_pose(leader, head, hand, hand, seq=1)
        origin, ray = aim_at(s, follower, leader)
        ev = s.request_alignment(follower, origin, ray)
        s.tick(ev.duration)
        frame_f = s.render_frame(follower)
        remote = next(r for r in frame_f.remotes if r.user_id == leader)
        canon_from_follower = world_to_canonical(
            remote.right_hand.position, s.users[follower].rho, s.pivot
        )
        canon_from_leader = world_to_canonical(
            s.users[leader].right_hand.position, s.users[leader].rho, s.pivot
        )
        assert canon_from_follower.distance_to(canon_from_leader) < 1e-9

    def test_baseline_reference_error_chord(self):
        # decoupling off: the recovered reference points disagree by the
        # chord subtended by the rho difference at the point's axis distance
        s = make_session(decoupling_enabled=False)
        ua = seat(s, "a", 0.0)
        ub = seat(s, "b", 100.0)
        s.users[ub].rho = 100.0 * DEG
        hand_world = Vec3(1.0, 1.0, 0.0)
        head = s.users[ub].head
        s.update_pose(ub, head, Pose.identity(hand_world), Pose.identity(hand_world), seq=1)
        frame_a = s.render_frame(ua)
        remote = frame_a.remotes[0]
        canon_a = world_to_canonical(remote.right_hand.position, s.users[ua].rho, s.pivot)
        canon_b = world_to_canonical(hand_world, s.users[ub].rho, s.pivot)
        r = math.hypot(hand_world.x - s.pivot.point.x, hand_world.z - s.pivot.point.z)
        expected = 2.0 * r * math.sin(abs(wrap_angle(0.0 - s.users[ub].rho)) / 2.0)
        assert abs(canon_a.distance_to(canon_b) - expected) < 1e-9


class TestSnapshot:
    def test_empty_session(self):
        s = make_session()
        doc = s.snapshot()
        assert doc["users"] == []
        assert doc["pins"] == []
        assert doc["clock"] == 0.0
        assert doc["next_user_seq"] == 1

    def busy_session(self) -> ss.Session:
        s = make_session()
        leader = seat(s, "lead", 10.0)
        follower = seat(s, "follow", 130.0)
        third = seat(s, "extra", 250.0)
        s.leave(third)
        hand = Pose(Vec3(0.1, 1.1, 0.2), UnitQuat.yaw(0.3))
        s.update_pose(leader, standing_at(10.0), hand, hand, seq=3)
        s.place_pin(leader, Vec3(0.25, 1.0, 0.05))
        origin, ray = aim_at(s, follower, leader)
        s.request_alignment(follower, origin, ray)
        s.tick(0.4)  # leave the animation in flight
        s.place_pin(follower, Vec3(-0.2, 1.0, 0.3))
        return s

    def test_fixpoint_is_byte_identical(self):
        s = self.busy_session()
        first = s.snapshot()
        second = ss.Session.restore(first).snapshot()
        assert json.dumps(first, sort_keys=True) == json.dumps(second, sort_keys=True)

    def test_restore_reproduces_frames_exactly(self):
        s = self.busy_session()
        restored = ss.Session.restore(s.snapshot())
        for uid in s.users:
            assert restored.render_frame(uid) == s.render_frame(uid)

    def test_restore_continues_animation_exactly(self):
        s = self.busy_session()
        restored = ss.Session.restore(s.snapshot())
        for sess in (s, restored):
            sess.tick(10.0)
        for uid in s.users:
            assert restored.users[uid].rho == s.users[uid].rho

    def test_restore_continues_id_sequences(self):
        s = self.busy_session()
        restored = ss.Session.restore(s.snapshot())
        uid, _ = restored.join("late")
        assert uid == "u4"  # u3 joined and left before the snapshot
        pin = restored.place_pin(uid, Vec3(0, 1, 0))
        assert pin.id == "p3"

    def test_identical_histories_identical_snapshots(self):
        a = self.busy_session()
        b = self.busy_session()
        assert json.dumps(a.snapshot(), sort_keys=True) == json.dumps(b.snapshot(), sort_keys=True)

    def test_late_joiner_sees_what_originals_see(self):
        s = self.busy_session()
        events = s.tick(5.0)
        assert any(isinstance(e, ss.AlignCompleted) for e in events)
        mirror = ss.Session.restore(s.snapshot())
        for uid in s.users:
            assert mirror.render_frame(uid) == s.render_frame(uid)
