"""Deterministic multi-user simulation on a virtual clock.

run_scenario drives a full server-plus-bots session entirely in process:
scripted bots exchange real wire frames with the session host over a
simulated network (fixed one-way latency, uniform jitter, droppable-frame
loss), and every behavioral event lands in a metrics log. The wall clock
is never consulted, and all randomness comes from one seeded generator,
so a scenario with the same seed replays to the byte.

analyze turns such a log into per-user summary metrics.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from . import protocol as pr
from .botscript import (
    AlignAction,
    BotBrain,
    BotContext,
    Command,
    PinAction,
    PointAction,
    ScenarioError,
    parse_script,
)
from .geom import Pivot, Pose, Vec3, canonical_to_world, rotate_y, world_to_canonical
from .host import SessionHost
from .replica import ClientReplica
from .scene import Scene, load_scene, occluded
from .session import SessionConfig

TICK_HZ = 60.0
POSE_HZ = 20.0

# Mutual gaze: both faces within this cone of the line between the heads,
# sustained at least the minimum episode length.
GAZE_CONE_HALF_ANGLE = math.radians(20.0)
MIN_GAZE_EPISODE_S = 0.3

# Inclusive cone boundary: an offset of exactly the half-angle counts as
# gaze. The nanoradian grace keeps that true under quaternion rounding.
_CONE_EDGE_SLACK = 1e-9

_EVENT_KINDS = frozenset(
    {
        "header",
        "user_joined",
        "user_left",
        "align_requested",
        "align_started",
        "align_completed",
        "pin_placed",
        "gaze_on",
        "gaze_off",
        "reference_sample",
        "los_check",
    }
)


class HarnessError(Exception):
    pass


class CoincidentHeads(HarnessError):
    """Gaze between two heads at the same point is undefined."""


class MalformedLog(HarnessError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


@dataclass(frozen=True)
class SimNetConfig:
    """Symmetric one-hop network model between each client and the server."""

    one_way_latency: float = 0.0
    jitter: float = 0.0  # uniform in [-jitter, +jitter], never reorders a link
    drop_prob: float = 0.0  # applies to droppable frames only
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.one_way_latency) and self.one_way_latency >= 0.0):
            raise ValueError(f"one_way_latency must be >= 0, got {self.one_way_latency}")
        if not (math.isfinite(self.jitter) and 0.0 <= self.jitter <= self.one_way_latency):
            raise ValueError(
                f"jitter must be within [0, one_way_latency], got {self.jitter}"
            )
        if not (math.isfinite(self.drop_prob) and 0.0 <= self.drop_prob <= 1.0):
            raise ValueError(f"drop_prob must be within [0, 1], got {self.drop_prob}")


# ---------------------------------------------------------------------------
# Metric functions, usable standalone.


def mutual_gaze(
    head_a: Pose, head_b: Pose, cone_half_angle: float = GAZE_CONE_HALF_ANGLE
) -> bool:
    """True when each head's forward direction lies within the cone around
    the line to the other head. The cone boundary is inclusive."""
    d = head_b.position - head_a.position
    if d.norm() <= 1e-6:
        raise CoincidentHeads("heads coincide; gaze direction is undefined")
    to_b = d.normalized()
    to_a = Vec3(-to_b.x, -to_b.y, -to_b.z)
    for head, toward in ((head_a, to_b), (head_b, to_a)):
        cos = head.forward().dot(toward)
        angle = math.acos(min(1.0, max(-1.0, cos)))
        if angle > cone_half_angle + _CONE_EDGE_SLACK:
            return False
    return True


def reference_view(
    rho_owner: float,
    hand_world: Vec3,
    rho_viewer: float,
    decoupling_enabled: bool,
    pivot: Pivot,
) -> tuple[Vec3, float]:
    """Canonical point a viewer recovers from an owner's hand, and how far
    it is from the owner's intent.

    With counter-rotation enabled the recovered point equals the intent
    exactly; with it disabled the error is the chord between the two
    replica rotations at the point's axis distance.
    """
    intended = world_to_canonical(hand_world, rho_owner, pivot)
    if decoupling_enabled:
        shown = rotate_y(hand_world, pivot, rho_viewer - rho_owner)
    else:
        shown = hand_world
    recovered = world_to_canonical(shown, rho_viewer, pivot)
    return recovered, recovered.distance_to(intended)


def reference_error(
    rho_owner: float,
    hand_world: Vec3,
    viewer_rhos: dict[str, float],
    decoupling_enabled: bool,
    pivot: Pivot,
) -> dict[str, float]:
    """Per-viewer referencing error in meters for one pointed-at spot."""
    return {
        vid: reference_view(rho_owner, hand_world, rho, decoupling_enabled, pivot)[1]
        for vid, rho in viewer_rhos.items()
    }


# ---------------------------------------------------------------------------
# Virtual clock and network.


class _Scheduler:
    def __init__(self):
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = 0
        self.now = 0.0

    def at(self, t: float, fn: Callable[[], None]) -> None:
        heapq.heappush(self._heap, (t, self._seq, fn))
        self._seq += 1

    def run_until(self, end: float) -> None:
        while self._heap and self._heap[0][0] <= end:
            t, _, fn = heapq.heappop(self._heap)
            self.now = t
            fn()
        self.now = end


class _Link:
    """One direction of one client-server connection."""

    def __init__(self, sched: _Scheduler, cfg: SimNetConfig, rng: random.Random, deliver):
        self._sched = sched
        self._cfg = cfg
        self._rng = rng
        self._deliver = deliver
        self._last = 0.0
        self.open = True

    def send(self, frame: str, droppable: bool) -> None:
        if not self.open:
            return
        if droppable and self._cfg.drop_prob > 0.0:
            if self._rng.random() < self._cfg.drop_prob:
                return
        delay = self._cfg.one_way_latency
        if self._cfg.jitter > 0.0:
            delay += self._rng.uniform(-self._cfg.jitter, self._cfg.jitter)
        # a link never reorders: later sends never overtake earlier ones
        at = max(self._sched.now + delay, self._last)
        self._last = at
        self._sched.at(at, lambda: self._deliver(frame))


# ---------------------------------------------------------------------------
# Scenario loading.


@dataclass(frozen=True)
class BotSpec:
    name: str
    start: Vec3
    commands: list[Command]


@dataclass(frozen=True)
class LosCheck:
    eye_user: str  # bot name
    target_object: str
    expect_occluded: bool


@dataclass(frozen=True)
class Scenario:
    scene: Scene
    net: SimNetConfig
    duration_s: float
    bots: list[BotSpec]
    los_checks: list[LosCheck]
    decoupling_enabled: bool = True


def load_scenario(source: dict | str | Path) -> Scenario:
    """Parse a scenario document or file; scene paths resolve beside the file."""
    base = Path.cwd()
    if isinstance(source, (str, Path)):
        path = Path(source)
        base = path.parent
        try:
            doc = json.loads(path.read_text())
        except OSError as err:
            raise ScenarioError(f"cannot read scenario {path}: {err}") from None
        except json.JSONDecodeError as err:
            raise ScenarioError(f"{path} is not valid JSON: {err}") from None
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    allowed = {"scene", "net", "duration_s", "bots", "los_checks", "decoupling_enabled"}
    extra = set(doc) - allowed
    if extra:
        raise ScenarioError(f"unexpected scenario keys {sorted(extra)}")

    scene_ref = doc.get("scene")
    if isinstance(scene_ref, str):
        try:
            scene = load_scene((base / scene_ref).read_text())
        except OSError as err:
            raise ScenarioError(f"cannot read scene {scene_ref}: {err}") from None
    elif isinstance(scene_ref, dict):
        scene = load_scene(scene_ref)
    else:
        raise ScenarioError("scene must be a path or an inline scene object")

    net_doc = doc.get("net", {})
    if not isinstance(net_doc, dict):
        raise ScenarioError("net must be an object")
    try:
        net = SimNetConfig(**net_doc)
    except TypeError as err:
        raise ScenarioError(f"net: {err}") from None
    except ValueError as err:
        raise ScenarioError(f"net: {err}") from None

    duration = doc.get("duration_s")
    if (
        not isinstance(duration, (int, float))
        or isinstance(duration, bool)
        or not math.isfinite(duration)
        or duration <= 0
    ):
        raise ScenarioError("duration_s must be a positive number of seconds")

    bots_doc = doc.get("bots")
    if not isinstance(bots_doc, list) or not bots_doc:
        raise ScenarioError("bots must be a non-empty list")
    bots: list[BotSpec] = []
    seen = set()
    for i, b in enumerate(bots_doc):
        where = f"bots[{i}]"
        if not isinstance(b, dict) or set(b) - {"name", "start", "script"}:
            raise ScenarioError(f"{where}: expected keys name, start, script")
        name = b.get("name")
        if not isinstance(name, str) or not name:
            raise ScenarioError(f"{where}: name must be a non-empty string")
        if name in seen:
            raise ScenarioError(f"{where}: duplicate bot name {name!r}")
        seen.add(name)
        start_doc = b.get("start")
        if (
            not isinstance(start_doc, list)
            or len(start_doc) != 3
            or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
                for v in start_doc
            )
        ):
            raise ScenarioError(f"{where}: start must be a finite [x, y, z] position")
        commands = parse_script(b.get("script", []), f"{where}.script")
        bots.append(BotSpec(name, Vec3.from_seq(start_doc), commands))

    los: list[LosCheck] = []
    los_doc = doc.get("los_checks", [])
    if not isinstance(los_doc, list):
        raise ScenarioError("los_checks must be a list")
    for i, c in enumerate(los_doc):
        where = f"los_checks[{i}]"
        if not isinstance(c, dict) or set(c) != {"eye_user", "target_object", "expect_occluded"}:
            raise ScenarioError(
                f"{where}: expected keys eye_user, target_object, expect_occluded"
            )
        if c["eye_user"] not in seen:
            raise ScenarioError(f"{where}: unknown bot {c['eye_user']!r}")
        if not any(o.id == c["target_object"] for o in scene.objects):
            raise ScenarioError(f"{where}: unknown object {c['target_object']!r}")
        if not isinstance(c["expect_occluded"], bool):
            raise ScenarioError(f"{where}: expect_occluded must be a boolean")
        los.append(LosCheck(c["eye_user"], c["target_object"], c["expect_occluded"]))

    decoupling = doc.get("decoupling_enabled", True)
    if not isinstance(decoupling, bool):
        raise ScenarioError("decoupling_enabled must be a boolean")

    return Scenario(scene, net, float(duration), bots, los, decoupling)


# ---------------------------------------------------------------------------
# The simulation itself.


class _SimBot:
    def __init__(self, spec: BotSpec, index: int):
        self.spec = spec
        self.conn_id = index
        self.replica = ClientReplica()
        self.brain: BotBrain | None = None
        self.to_server: _Link | None = None
        self.pose_seq = 0

    @property
    def user_id(self) -> str | None:
        return self.replica.user_id


@dataclass
class SimResult:
    """Everything a scenario run produces, in memory."""

    events: list[dict]
    log_lines: list[str]
    snapshot: dict
    seed: int
    bots: dict[str, _SimBot]
    host: SessionHost

    @property
    def log_text(self) -> str:
        return "".join(line + "\n" for line in self.log_lines)


class _SimRun:
    def __init__(self, scenario: Scenario, seed: int):
        self.scenario = scenario
        self.seed = seed
        self.sched = _Scheduler()
        self.rng = random.Random(seed)
        self.events: list[dict] = []
        self.host = SessionHost(
            scenario.scene,
            SessionConfig(decoupling_enabled=scenario.decoupling_enabled),
            event_sink=self._sink,
        )
        self.bots = [_SimBot(spec, i) for i, spec in enumerate(scenario.bots)]
        self._gaze_onset: dict[tuple[str, str], float] = {}

    # -- event log -----------------------------------------------------------

    def _sink(self, kind: str, t: float, payload: dict) -> None:
        self.events.append({"kind": kind, "t": t, **payload})

    def _log(self, kind: str, t: float, **payload) -> None:
        self.events.append({"kind": kind, "t": t, **payload})

    # -- run -----------------------------------------------------------------

    def run(self) -> SimResult:
        sc = self.scenario
        ticks = int(round(sc.duration_s * TICK_HZ))
        fanout_every = int(round(TICK_HZ / POSE_HZ))
        for k in range(ticks + 1):
            t = k / TICK_HZ
            self.sched.at(t, lambda t=t, k=k: self._tick(t, k, fanout_every))
        for bot in self.bots:
            self.sched.at(0.0, lambda b=bot: self._connect(b))
        self._log(
            "header",
            0.0,
            scene=sc.scene.name,
            seed=self.seed,
            duration_s=sc.duration_s,
            net={
                "one_way_latency": sc.net.one_way_latency,
                "jitter": sc.net.jitter,
                "drop_prob": sc.net.drop_prob,
            },
            cone_half_angle=GAZE_CONE_HALF_ANGLE,
            min_gaze_episode_s=MIN_GAZE_EPISODE_S,
            decoupling_enabled=sc.decoupling_enabled,
        )
        self.sched.run_until(sc.duration_s)
        self._flush_gaze(sc.duration_s)
        self._run_los_checks(sc.duration_s)
        self.events.sort(key=lambda e: e["t"])
        lines = [pr.dumps_canonical(e) for e in self.events]
        return SimResult(
            events=self.events,
            log_lines=lines,
            snapshot=self.host.session.snapshot(),
            seed=self.seed,
            bots={b.spec.name: b for b in self.bots},
            host=self.host,
        )

    # -- wiring --------------------------------------------------------------

    def _connect(self, bot: _SimBot) -> None:
        down = _Link(self.sched, self.scenario.net, self.rng, lambda f, b=bot: self._to_bot(b, f))
        bot.to_server = _Link(
            self.sched,
            self.scenario.net,
            self.rng,
            lambda f, b=bot: self.host.frame_received(b.conn_id, f),
        )

        def close():
            down.open = False
            bot.to_server.open = False

        self.host.connect(bot.conn_id, down.send, close)
        bot.to_server.send(pr.encode(pr.Message("hello", {"name": bot.spec.name})), False)

    def _to_bot(self, bot: _SimBot, frame: str) -> None:
        now = self.sched.now
        bot.replica.advance(now)
        msg = bot.replica.apply_frame(frame, now)
        if msg.type == "welcome" and bot.brain is None:
            bot.brain = BotBrain(bot.spec.commands, bot.spec.start, now)
            self._send_pose(bot, now)
            for bt in bot.brain.boundary_times():
                self.sched.at(bt, lambda b=bot, t=bt: self._run_commands(b, t))

    def _send_pose(self, bot: _SimBot, t: float) -> None:
        head, lh, rh = bot.brain.sample(t)
        frame = pr.encode(
            pr.Message(
                "pose",
                {
                    "head": pr.pose_to_doc(head),
                    "lh": pr.pose_to_doc(lh),
                    "rh": pr.pose_to_doc(rh),
                    "seq": bot.pose_seq,
                },
            )
        )
        bot.pose_seq += 1
        bot.to_server.send(frame, True)
        nxt = t + 1.0 / POSE_HZ
        if nxt <= self.scenario.duration_s:
            self.sched.at(nxt, lambda b=bot, tt=nxt: self._send_pose(b, tt))

    # -- behavior ------------------------------------------------------------

    def _run_commands(self, bot: _SimBot, t: float) -> None:
        ctx = BotContext(self._user_position, lambda c, b=bot: self._canonical_to_world(b, c))
        for action in bot.brain.execute_until(t, ctx):
            if isinstance(action, AlignAction):
                bot.to_server.send(
                    pr.encode(
                        pr.Message(
                            "align_request",
                            {
                                "ray_origin": action.ray_origin.as_list(),
                                "ray_dir": action.ray_dir.as_list(),
                            },
                        )
                    ),
                    False,
                )
            elif isinstance(action, PinAction):
                bot.to_server.send(
                    pr.encode(pr.Message("pin_place", {"world": action.world.as_list()})),
                    False,
                )
            elif isinstance(action, PointAction):
                self._sample_references(bot, action, t)
        self._evaluate_gaze(t)

    def _user_position(self, name: str, where: str) -> Vec3:
        for bot in self.bots:
            if bot.spec.name == name:
                if bot.brain is None:
                    raise ScenarioError(f"{where}: user {name!r} has not joined yet")
                return bot.brain.head_position(self.sched.now)
        raise ScenarioError(f"{where}: no user named {name!r}")

    def _canonical_to_world(self, bot: _SimBot, c: Vec3) -> Vec3:
        rho = bot.replica.rho_of(bot.user_id)
        return canonical_to_world(c, rho, self.host.session.pivot)

    def _sample_references(self, bot: _SimBot, action: PointAction, t: float) -> None:
        """Ground-truth referencing error of this pointed spot, per viewer."""
        session = self.host.session
        owner_id = bot.user_id
        if owner_id not in session.users:
            return
        rho_owner = session.users[owner_id].rho
        for vid, st in session.users.items():
            if vid == owner_id:
                continue
            recovered, err = reference_view(
                rho_owner,
                action.world,
                st.rho,
                session.config.decoupling_enabled,
                session.pivot,
            )
            self._log(
                "reference_sample",
                t,
                owner=owner_id,
                viewer=vid,
                canonical=recovered.as_list(),
                error=err,
            )

    # -- clock ---------------------------------------------------------------

    def _tick(self, t: float, k: int, fanout_every: int) -> None:
        self.host.tick(t)
        if k % fanout_every == 0:
            self.host.fanout()
        self._evaluate_gaze(t)

    # -- gaze ----------------------------------------------------------------

    def _evaluate_gaze(self, t: float) -> None:
        live = [b for b in self.bots if b.brain is not None and b.user_id is not None]
        for i in range(len(live)):
            for j in range(i + 1, len(live)):
                a, b = live[i], live[j]
                key = tuple(sorted((a.user_id, b.user_id)))
                gazing = mutual_gaze(a.brain.sample(t)[0], b.brain.sample(t)[0])
                onset = self._gaze_onset.get(key)
                if gazing and onset is None:
                    self._gaze_onset[key] = t
                elif not gazing and onset is not None:
                    del self._gaze_onset[key]
                    self._close_episode(key, onset, t)

    def _close_episode(self, key: tuple[str, str], onset: float, end: float) -> None:
        if end - onset >= MIN_GAZE_EPISODE_S - 1e-12:
            self._log("gaze_on", onset, a=key[0], b=key[1])
            self._log("gaze_off", end, a=key[0], b=key[1])

    def _flush_gaze(self, end: float) -> None:
        for key, onset in sorted(self._gaze_onset.items()):
            self._close_episode(key, onset, end)
        self._gaze_onset.clear()

    # -- line of sight -------------------------------------------------------

    def _run_los_checks(self, t: float) -> None:
        session = self.host.session
        by_name = {st.display_name: st for st in session.users.values()}
        for check in self.scenario.los_checks:
            st = by_name.get(check.eye_user)
            if st is None:
                raise ScenarioError(f"los check: user {check.eye_user!r} not in session at end")
            eye = world_to_canonical(st.head.position, st.rho, session.pivot)
            obj = session.scene.object_by_id(check.target_object)
            result = occluded(eye, obj.position, session.scene, ignore_ids=(obj.id,))
            self._log(
                "los_check",
                t,
                eye_user=st.user_id,
                target_object=check.target_object,
                expect_occluded=check.expect_occluded,
                occluded=result.occluded,
                blocker=result.blocker_id,
                eye_canonical=eye.as_list(),
            )


def run_scenario(source: dict | str | Path, seed: int | None = None) -> SimResult:
    """Run one scenario to completion; same scenario and seed, same bytes out."""
    scenario = load_scenario(source)
    actual_seed = scenario.net.seed if seed is None else seed
    return _SimRun(scenario, actual_seed).run()


# ---------------------------------------------------------------------------
# Log analysis.


def _require(cond: bool, line_no: int, reason: str) -> None:
    if not cond:
        raise MalformedLog(line_no, reason)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def analyze(log: str | Path | Iterable[str]) -> dict:
    """Summarize a metrics log: per-user behavior counts, gaze time,
    referencing error, and line-of-sight outcomes.

    Accepts a path or an iterable of JSON lines. Raises MalformedLog with
    the 1-based line number for anything that is not a well-formed log.
    """
    if isinstance(log, (str, Path)):
        lines = Path(log).read_text().splitlines()
    else:
        lines = [l.rstrip("\n") for l in log]

    header: dict | None = None
    names: dict[str, str] = {}
    alignments: dict[str, int] = {}
    pins: dict[str, int] = {}
    gaze_seconds: dict[str, float] = {}
    ref_errors: dict[str, list[float]] = {}
    open_gaze: dict[tuple[str, str], tuple[float, int]] = {}
    episodes = 0
    los: list[dict] = []
    last_t = -math.inf

    for idx, raw in enumerate(lines):
        n = idx + 1
        if not raw.strip():
            _require(False, n, "blank line")
        try:
            event = json.loads(raw)
        except json.JSONDecodeError as err:
            raise MalformedLog(n, f"not valid JSON: {err}") from None
        _require(isinstance(event, dict), n, "event must be an object")
        kind = event.get("kind")
        _require(isinstance(kind, str), n, "missing kind")
        _require(kind in _EVENT_KINDS, n, f"unknown event kind {kind!r}")
        t = event.get("t")
        _require(_is_number(t), n, "missing or non-finite t")
        _require(t >= last_t, n, f"t went backwards ({t} after {last_t})")
        last_t = t

        if kind == "header":
            _require(header is None, n, "duplicate header")
            _require(n == 1, n, "header must be the first line")
            header = event
            continue
        _require(header is not None, n, "header must be the first line")

        if kind == "user_joined":
            _require(isinstance(event.get("id"), str), n, "user_joined needs id")
            _require(isinstance(event.get("name"), str), n, "user_joined needs name")
            uid = event["id"]
            names[uid] = event["name"]
            alignments.setdefault(uid, 0)
            pins.setdefault(uid, 0)
            gaze_seconds.setdefault(uid, 0.0)
        elif kind == "align_completed":
            uid = event.get("follower")
            _require(uid in names, n, f"align_completed for unknown user {uid!r}")
            alignments[uid] += 1
        elif kind == "pin_placed":
            uid = event.get("user")
            _require(uid in names, n, f"pin_placed for unknown user {uid!r}")
            pins[uid] += 1
        elif kind == "gaze_on":
            a, b = event.get("a"), event.get("b")
            _require(a in names and b in names, n, "gaze_on needs known users a and b")
            key = (a, b)
            _require(key not in open_gaze, n, f"gaze_on for already-open pair {key}")
            open_gaze[key] = (t, n)
        elif kind == "gaze_off":
            a, b = event.get("a"), event.get("b")
            key = (a, b)
            _require(key in open_gaze, n, f"gaze_off without gaze_on for pair {key}")
            onset, _ = open_gaze.pop(key)
            span = t - onset
            episodes += 1
            gaze_seconds[a] += span
            gaze_seconds[b] += span
        elif kind == "reference_sample":
            viewer = event.get("viewer")
            _require(viewer in names, n, f"reference_sample for unknown viewer {viewer!r}")
            _require(_is_number(event.get("error")), n, "reference_sample needs error")
            ref_errors.setdefault(viewer, []).append(float(event["error"]))
        elif kind == "los_check":
            for key in ("expect_occluded", "occluded"):
                _require(isinstance(event.get(key), bool), n, f"los_check needs {key}")
            los.append(
                {
                    "eye_user": event.get("eye_user"),
                    "target_object": event.get("target_object"),
                    "expect_occluded": event["expect_occluded"],
                    "occluded": event["occluded"],
                    "pass": event["occluded"] == event["expect_occluded"],
                }
            )
        # user_left, align_requested, align_started: valid, nothing to tally

    _require(header is not None, 1, "empty log")
    if open_gaze:
        onset, line_no = min(open_gaze.values(), key=lambda v: v[1])
        raise MalformedLog(line_no, "gaze_on never closed")

    users = {}
    for uid in names:
        errs = ref_errors.get(uid, [])
        users[uid] = {
            "name": names[uid],
            "alignments": alignments[uid],
            "pins": pins[uid],
            "gaze_seconds": gaze_seconds[uid],
            "reference_error_mean": (sum(errs) / len(errs)) if errs else None,
            "reference_error_max": max(errs) if errs else None,
        }
    return {
        "seed": header.get("seed"),
        "duration_s": header.get("duration_s"),
        "constants": {
            "cone_half_angle": header.get("cone_half_angle"),
            "min_gaze_episode_s": header.get("min_gaze_episode_s"),
            "decoupling_enabled": header.get("decoupling_enabled"),
        },
        "users": users,
        "gaze_episodes": episodes,
        "los": los,
        "los_pass": all(c["pass"] for c in los) if los else None,
    }
