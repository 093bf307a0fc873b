"""Single command-line entry point: server, bot, sim, and analyze.

Exit codes: 0 success, 1 usage error (stderr names the offending flag),
2 runtime error. Angles cross the terminal in degrees for humans; every
machine-readable stream (event log, summary JSON) stays in radians.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import math
import os
import signal
import sys
from pathlib import Path

from . import protocol as pr
from .botscript import BotBrain, BotContext, ScenarioError, parse_script
from .botscript import AlignAction, PinAction
from .geom import GeomError, Vec3, canonical_to_world
from .harness import MalformedLog, analyze, run_scenario
from .replica import ClientReplica, ReplicaError
from .scene import SceneError
from .server import ServerConfig, ServerError, SessionServer

log = logging.getLogger("covista")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract here is exit 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


def _u16(text: str) -> int:
    value = int(text)
    if not 0 <= value <= 65535:
        raise argparse.ArgumentTypeError(f"{value} is not a 16-bit port number")
    return value


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"{value} is not positive")
    return value


def build_parser() -> _Parser:
    parser = _Parser(prog="covista", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("server", help="host one shared session over websockets")
    p.add_argument("--port", type=_u16, required=True)
    p.add_argument("--scene", required=True, metavar="PATH")
    p.add_argument("--tick-hz", type=_positive, default=60.0)
    p.add_argument("--fanout-hz", type=_positive, default=20.0)
    p.add_argument("--angular-speed-deg", type=_positive, default=90.0)
    p.add_argument("--no-decoupling", action="store_true")
    p.add_argument("--snapshot-on-exit", metavar="PATH")

    p = sub.add_parser("bot", help="run one scripted client over real transport")
    p.add_argument("--connect", required=True, metavar="HOST:PORT")
    p.add_argument("--script", required=True, metavar="PATH")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("sim", help="run a deterministic in-process scenario")
    p.add_argument("--scenario", required=True, metavar="PATH")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="log.jsonl", metavar="PATH")

    p = sub.add_parser("analyze", help="summarize a metrics log")
    p.add_argument("--in", dest="infile", required=True, metavar="PATH")

    return parser


# -- server ------------------------------------------------------------------


def _cmd_server(parser: _Parser, args) -> int:
    if args.tick_hz < args.fanout_hz:
        parser.error(
            f"--tick-hz must be at least --fanout-hz, got {args.tick_hz} < {args.fanout_hz}"
        )
    config = ServerConfig(
        scene_path=args.scene,
        port=args.port,
        tick_hz=args.tick_hz,
        pose_fanout_hz=args.fanout_hz,
        angular_speed=math.radians(args.angular_speed_deg),
        decoupling_enabled=not args.no_decoupling,
        snapshot_path=args.snapshot_on_exit,
    )
    asyncio.run(_serve(config, args.angular_speed_deg))
    return 0


async def _serve(config: ServerConfig, speed_deg: float) -> None:
    server = SessionServer(config)
    loop = asyncio.get_running_loop()
    for sig in (signal.SIGINT, signal.SIGTERM):
        loop.add_signal_handler(sig, server.shutdown)
    serving = asyncio.ensure_future(server.serve())
    started = asyncio.ensure_future(server.started.wait())
    # serve() can fail before the socket is up; waiting on started alone
    # would hang on a bind error
    done, _ = await asyncio.wait({serving, started}, return_when=asyncio.FIRST_COMPLETED)
    if serving in done:
        started.cancel()
        await serving
        return
    log.info(
        "listening on %s:%d, scene %s, alignment speed %.1f deg/s, decoupling %s",
        config.host,
        server.port,
        config.scene_path,
        speed_deg,
        "on" if config.decoupling_enabled else "off",
    )
    await serving
    log.info("shut down cleanly")


# -- bot ---------------------------------------------------------------------


def _parse_endpoint(text: str, parser: _Parser) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        parser.error(f"--connect expects HOST:PORT, got {text!r}")
    try:
        return host, _u16(port)
    except (ValueError, argparse.ArgumentTypeError):
        parser.error(f"--connect has a bad port in {text!r}")


def _load_bot_file(path: str):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, list):
        doc = {"script": doc}
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: expected an object or a command list")
    name = doc.get("name", "bot")
    start_doc = doc.get("start", [0.0, 1.6, 1.5])
    try:
        start = Vec3.from_seq(start_doc)
    except (GeomError, TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: bad start position: {exc}") from exc
    commands = parse_script(doc.get("script", []), f"{path}:script")
    return name, start, commands


def _cmd_bot(parser: _Parser, args) -> int:
    host, port = _parse_endpoint(args.connect, parser)
    name, start, commands = _load_bot_file(args.script)
    replica = asyncio.run(bot_session(f"ws://{host}:{port}", name, start, commands))
    for err in replica.errors:
        log.error("server rejected a request: %s (%s)", err.code, err.detail)
    log.info("script finished; ran as %s", replica.user_id)
    return 0


def _live_user_position(replica: ClientReplica, name: str, where: str) -> Vec3:
    for uid, st in replica.session.users.items():
        if st.display_name == name and uid != replica.user_id:
            return st.head.position
    raise ScenarioError(f"{where}: no user named {name!r} in the session")


async def bot_session(
    uri: str,
    name: str,
    start: Vec3,
    commands,
    *,
    pose_hz: float = 20.0,
    tail_s: float = 0.75,
) -> ClientReplica:
    from websockets.asyncio.client import connect as ws_connect

    replica = ClientReplica()
    async with ws_connect(uri) as ws:
        loop = asyncio.get_running_loop()
        t0 = loop.time()

        def now() -> float:
            return loop.time() - t0

        async def reader() -> None:
            async for raw in ws:
                replica.apply_frame(raw, now=now())

        reading = asyncio.ensure_future(reader())
        await ws.send(pr.encode(pr.Message("hello", {"name": name})))
        while not replica.ready:
            if reading.done():
                reading.result()
                raise ReplicaError("connection closed before welcome")
            await asyncio.sleep(0.01)

        brain = BotBrain(commands, start, epoch=now())
        ctx = BotContext(
            lambda nm, where: _live_user_position(replica, nm, where),
            lambda c: canonical_to_world(
                c, replica.rho_of(replica.user_id), replica.session.pivot
            ),
        )
        seq = 0
        end = brain.end_time + tail_s
        while now() < end:
            t = now()
            replica.advance(t)
            head, lh, rh = brain.sample(t)
            seq += 1
            await ws.send(
                pr.encode(
                    pr.Message(
                        "pose",
                        {
                            "head": pr.pose_to_doc(head),
                            "lh": pr.pose_to_doc(lh),
                            "rh": pr.pose_to_doc(rh),
                            "seq": seq,
                        },
                    )
                )
            )
            for action in brain.execute_until(t, ctx):
                if isinstance(action, AlignAction):
                    await ws.send(
                        pr.encode(
                            pr.Message(
                                "align_request",
                                {
                                    "ray_origin": action.ray_origin.as_list(),
                                    "ray_dir": action.ray_dir.as_list(),
                                },
                            )
                        )
                    )
                elif isinstance(action, PinAction):
                    await ws.send(
                        pr.encode(
                            pr.Message("pin_place", {"world": action.world.as_list()})
                        )
                    )
            await asyncio.sleep(1.0 / pose_hz)
        await ws.send(pr.encode(pr.Message("leave", {})))
        reading.cancel()
        try:
            await reading
        except (asyncio.CancelledError, Exception):
            pass
    return replica


# -- sim and analyze ---------------------------------------------------------


def _cmd_sim(parser: _Parser, args) -> int:
    result = run_scenario(args.scenario, seed=args.seed)
    out = Path(args.out)
    out.write_text("".join(line + "\n" for line in result.log_lines), encoding="utf-8")
    kinds = [e["kind"] for e in result.events]
    log.info(
        "wrote %d events to %s (seed %d): %d alignments, %d pins, %d gaze episodes",
        len(result.events),
        out,
        result.seed,
        kinds.count("align_completed"),
        kinds.count("pin_placed"),
        kinds.count("gaze_on"),
    )
    return 0


def _cmd_analyze(parser: _Parser, args) -> int:
    summary = analyze(args.infile)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


# -- entry -------------------------------------------------------------------


def _configure_logging() -> None:
    raw = os.environ.get("LOG_LEVEL", "info").lower()
    if raw not in _LOG_LEVELS:
        raise _UsageError(
            f"LOG_LEVEL must be one of error, info, debug, got {raw!r}"
        )
    logging.basicConfig(
        stream=sys.stderr, level=_LOG_LEVELS[raw], format="%(levelname)s %(message)s"
    )


_RUNTIME_ERRORS = (
    ScenarioError,
    MalformedLog,
    SceneError,
    ServerError,
    ReplicaError,
    GeomError,
    pr.ProtocolError,
    OSError,
    ConnectionError,
    json.JSONDecodeError,
)

_COMMANDS = {
    "server": _cmd_server,
    "bot": _cmd_bot,
    "sim": _cmd_sim,
    "analyze": _cmd_analyze,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        _configure_logging()
        args = parser.parse_args(argv)
    except _UsageError as exc:
        if str(exc).startswith("LOG_LEVEL"):
            print(f"covista: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](parser, args)
    except _UsageError:
        return 1
    except _RUNTIME_ERRORS as exc:
        print(f"covista {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
