"""Scripted bot behavior: a small command timeline per simulated user.

Scripts are JSON lists of commands. Each command runs when the previous
one finishes; move_to and wait take time, everything else is instant.

    {"cmd": "move_to",  "p": [x, y, z], "duration": s}
    {"cmd": "look_at",  "p": [x, y, z]}            or {"cmd": "look_at", "user": "name"}
    {"cmd": "point_at", "world": [x, y, z], "hand": "rh"}
    {"cmd": "point_at", "canonical": [x, y, z], "hand": "lh"}
    {"cmd": "align_with", "user": "name"}
    {"cmd": "place_pin", "world": [x, y, z]}
    {"cmd": "wait",     "s": seconds}

Distances are meters. User references are display names and must resolve
to users present when the command runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .geom import Pose, UnitQuat, Vec3


class ScenarioError(Exception):
    """A scenario or script that cannot be run; the message cites the spot."""


@dataclass(frozen=True)
class Command:
    kind: str
    where: str  # e.g. "bots[1].script[3]", cited by every error
    p: Vec3 | None = None
    duration: float = 0.0
    user: str | None = None
    world: Vec3 | None = None
    canonical: Vec3 | None = None
    hand: str | None = None


@dataclass(frozen=True)
class AlignAction:
    ray_origin: Vec3
    ray_dir: Vec3
    where: str


@dataclass(frozen=True)
class PinAction:
    world: Vec3
    where: str


@dataclass(frozen=True)
class PointAction:
    hand: str
    world: Vec3
    where: str


Action = AlignAction | PinAction | PointAction


def _vec(doc, where: str, key: str) -> Vec3:
    if (
        not isinstance(doc, list)
        or len(doc) != 3
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in doc)
        or not all(math.isfinite(v) for v in doc)
    ):
        raise ScenarioError(f"{where}: {key} must be a finite [x, y, z] triple")
    return Vec3(float(doc[0]), float(doc[1]), float(doc[2]))


def _seconds(doc, where: str, key: str) -> float:
    v = doc.get(key)
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v) or v < 0:
        raise ScenarioError(f"{where}: {key} must be a non-negative number of seconds")
    return float(v)


def _check_keys(doc: dict, where: str, allowed: set[str]) -> None:
    extra = set(doc) - allowed - {"cmd"}
    if extra:
        raise ScenarioError(f"{where}: unexpected keys {sorted(extra)}")


def parse_script(raw, where: str) -> list[Command]:
    """Validate a script list into Commands; errors name the command index."""
    if not isinstance(raw, list):
        raise ScenarioError(f"{where}: script must be a list of commands")
    out: list[Command] = []
    for i, doc in enumerate(raw):
        spot = f"{where}[{i}]"
        if not isinstance(doc, dict) or "cmd" not in doc:
            raise ScenarioError(f"{spot}: each command is an object with a cmd key")
        kind = doc["cmd"]
        if kind == "move_to":
            _check_keys(doc, spot, {"p", "duration"})
            out.append(
                Command(
                    kind,
                    spot,
                    p=_vec(doc.get("p"), spot, "p"),
                    duration=_seconds(doc, spot, "duration"),
                )
            )
        elif kind == "look_at":
            _check_keys(doc, spot, {"p", "user"})
            if ("p" in doc) == ("user" in doc):
                raise ScenarioError(f"{spot}: look_at takes exactly one of p or user")
            if "p" in doc:
                out.append(Command(kind, spot, p=_vec(doc["p"], spot, "p")))
            else:
                out.append(Command(kind, spot, user=_name(doc["user"], spot)))
        elif kind == "point_at":
            _check_keys(doc, spot, {"world", "canonical", "hand"})
            if ("world" in doc) == ("canonical" in doc):
                raise ScenarioError(f"{spot}: point_at takes exactly one of world or canonical")
            hand = doc.get("hand")
            if hand not in ("lh", "rh"):
                raise ScenarioError(f"{spot}: hand must be \"lh\" or \"rh\"")
            if "world" in doc:
                out.append(Command(kind, spot, hand=hand, world=_vec(doc["world"], spot, "world")))
            else:
                out.append(
                    Command(
                        kind, spot, hand=hand, canonical=_vec(doc["canonical"], spot, "canonical")
                    )
                )
        elif kind == "align_with":
            _check_keys(doc, spot, {"user"})
            out.append(Command(kind, spot, user=_name(doc.get("user"), spot)))
        elif kind == "place_pin":
            _check_keys(doc, spot, {"world"})
            out.append(Command(kind, spot, world=_vec(doc.get("world"), spot, "world")))
        elif kind == "wait":
            _check_keys(doc, spot, {"s"})
            out.append(Command(kind, spot, duration=_seconds(doc, spot, "s")))
        else:
            raise ScenarioError(f"{spot}: unknown command {kind!r}")
    return out


def _name(v, where: str) -> str:
    if not isinstance(v, str) or not v:
        raise ScenarioError(f"{where}: user must be a non-empty name")
    return v


# Default hand placement relative to the head; point_at overrides a hand
# and parks it at the target until the next point_at.
_LH_OFFSET = Vec3(-0.2, -0.4, 0.1)
_RH_OFFSET = Vec3(0.2, -0.4, 0.1)


class BotContext:
    """What a running script may ask of the surrounding world."""

    def __init__(
        self,
        user_position: Callable[[str, str], Vec3],
        canonical_to_world: Callable[[Vec3], Vec3],
    ):
        self.user_position = user_position
        self.canonical_to_world = canonical_to_world


@dataclass
class _Move:
    src: Vec3
    dst: Vec3
    t0: float
    t1: float

    def at(self, t: float) -> Vec3:
        if t >= self.t1 or self.t1 == self.t0:
            return self.dst
        if t <= self.t0:
            return self.src
        u = (t - self.t0) / (self.t1 - self.t0)
        return Vec3(
            self.src.x + (self.dst.x - self.src.x) * u,
            self.src.y + (self.dst.y - self.src.y) * u,
            self.src.z + (self.dst.z - self.src.z) * u,
        )


class BotBrain:
    """Plays one script on a fixed timeline starting at ``epoch``.

    The ground-truth pose at any time comes from sample(); the harness
    drives command execution by calling execute_until at the precomputed
    boundary times.
    """

    def __init__(self, commands: list[Command], start: Vec3, epoch: float):
        self.commands = commands
        self.epoch = epoch
        self._pos = start
        self._quat = UnitQuat.identity()
        self._move: _Move | None = None
        self._overrides: dict[str, Vec3] = {}
        self._cursor = 0
        self.starts: list[float] = []
        t = epoch
        for cmd in commands:
            self.starts.append(t)
            t += cmd.duration
        self.end_time = t

    def boundary_times(self) -> list[float]:
        return sorted(set(self.starts))

    def execute_until(self, t: float, ctx: BotContext) -> list[Action]:
        """Run every command whose start time has arrived; returns the
        protocol-visible actions in script order."""
        actions: list[Action] = []
        while self._cursor < len(self.commands) and self.starts[self._cursor] <= t:
            cmd = self.commands[self._cursor]
            at = self.starts[self._cursor]
            self._cursor += 1
            self._execute(cmd, at, ctx, actions)
        return actions

    def _execute(self, cmd: Command, at: float, ctx: BotContext, actions: list[Action]) -> None:
        here = self.head_position(at)
        if self._move is not None and at >= self._move.t1:
            self._pos = self._move.dst
            self._move = None
        if cmd.kind == "move_to":
            self._move = _Move(here, cmd.p, at, at + cmd.duration)
        elif cmd.kind == "wait":
            pass
        elif cmd.kind == "look_at":
            target = cmd.p if cmd.p is not None else ctx.user_position(cmd.user, cmd.where)
            d = target - here
            self._quat = UnitQuat.yaw(math.atan2(d.x, d.z))
        elif cmd.kind == "point_at":
            world = (
                cmd.world if cmd.world is not None else ctx.canonical_to_world(cmd.canonical)
            )
            self._overrides[cmd.hand] = world
            actions.append(PointAction(cmd.hand, world, cmd.where))
        elif cmd.kind == "align_with":
            target = ctx.user_position(cmd.user, cmd.where)
            d = target - here
            if d.norm() == 0.0:
                raise ScenarioError(f"{cmd.where}: cannot aim at a coincident head")
            actions.append(AlignAction(here, d.normalized(), cmd.where))
        elif cmd.kind == "place_pin":
            actions.append(PinAction(cmd.world, cmd.where))
        else:  # pragma: no cover - parse_script admits no other kind
            raise ScenarioError(f"{cmd.where}: unknown command {cmd.kind!r}")

    def head_position(self, t: float) -> Vec3:
        if self._move is not None:
            return self._move.at(t)
        return self._pos

    def sample(self, t: float) -> tuple[Pose, Pose, Pose]:
        """Ground-truth head and hand poses at time t."""
        head = self.head_position(t)
        lh = self._overrides.get("lh", head + _LH_OFFSET)
        rh = self._overrides.get("rh", head + _RH_OFFSET)
        q = UnitQuat.identity()
        return (
            Pose(head, self._quat),
            Pose(lh, q),
            Pose(rh, q),
        )
